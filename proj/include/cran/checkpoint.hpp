#ifndef CRAN_CHECKPOINT_HPP_
#define CRAN_CHECKPOINT_HPP_

#include <map>
#include <string>

#include "json.hpp"
#include "cran/gradcheck.hpp"
#include "cran/tensor.hpp"

namespace cran::ad {

// Checkpoint document: one JSON object mapping parameter name ->
// {"shape": [...], "data": [...]}. Keys starting with "__" are reserved for
// metadata ("__config__" carries the effective run configuration) and are
// never parameter names.
struct Checkpoint {
  std::map<std::string, Tensor> params;
  nlohmann::json config;  // null when absent
};

nlohmann::json checkpoint_to_json(const std::vector<NamedTensor>& params,
                                  const nlohmann::json& config = nullptr);
Checkpoint checkpoint_from_json(const nlohmann::json& doc);

void save_checkpoint(const std::string& path,
                     const std::vector<NamedTensor>& params,
                     const nlohmann::json& config = nullptr);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace cran::ad

#endif  // CRAN_CHECKPOINT_HPP_
