#ifndef CRAN_RUN_CONFIG_HPP_
#define CRAN_RUN_CONFIG_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "json.hpp"
#include "cran/alignment.hpp"
#include "cran/encoder_config.hpp"
#include "cran/training.hpp"

namespace cran::cli {

struct RunPaths {
  std::string dataset;
  std::string checkpoint = "checkpoint.json";
  // Empty: derived from `checkpoint` as <stem>.best.json.
  std::string best_checkpoint;
  std::string log = "train_log.jsonl";
  std::string report = "report.json";
};

// Everything one run depends on. JSON layout:
//   {"preset": "...", "encoder": {...}, "loss": {...}, "optimizer": {...},
//    "train": {...}, "paths": {...}}
// Sections and keys are those written by to_json; any other key is rejected.
struct RunConfig {
  std::string preset = "desk";
  enc::EncoderConfig encoder;
  align::LossConfig loss;
  train::OptimizerConfig optimizer;
  train::TrainConfig train;
  RunPaths paths;

  // desk: small dims that train in seconds; paper: the published sizes.
  static RunConfig from_preset(std::string_view name);

  nlohmann::json to_json() const;
  // Overlays the keys present in `doc` onto this config. A "preset" key
  // resets to that preset first. Throws std::invalid_argument naming the
  // offending key.
  void merge(const nlohmann::json& doc);
  void merge_file(const std::string& path);
  void validate() const;

  std::string best_checkpoint_path() const;
};

RunConfig load_run_config(const std::string& path, std::string_view preset = "desk");

// Reads CRAN_SEED; nullopt when unset. Throws on a malformed value.
std::optional<std::uint64_t> seed_from_env();

}  // namespace cran::cli

#endif  // CRAN_RUN_CONFIG_HPP_
