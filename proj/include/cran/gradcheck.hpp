#ifndef CRAN_GRADCHECK_HPP_
#define CRAN_GRADCHECK_HPP_

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "cran/tensor.hpp"

namespace cran::ad {

using NamedTensor = std::pair<std::string, Tensor>;

struct GradCheckOptions {
  double epsilon = 1e-5;
  double tolerance = 1e-4;
  // Denominator guard for the relative error |a - n| / max(|a|, |n|, floor),
  // so entries whose true gradient is ~0 are judged by absolute error.
  // Rounding alone puts ~1e-16 |f| / epsilon (about 1e-10 for O(1) losses)
  // into every difference quotient; below 1e-5 that noise would dominate.
  double floor = 1e-5;
  // Entries checked per tensor, sampled without replacement; 0 checks all.
  std::size_t max_entries_per_tensor = 0;
  // An entry failing at `epsilon` is measured again at this smaller step,
  // keeping the closer estimate. A ReLU or max-pool switch lying within
  // `epsilon` of the point spoils the wider difference only. 0 disables.
  double kink_epsilon = 1e-7;
  std::uint64_t seed = 0;
};

struct ParamCheck {
  std::string name;
  std::size_t checked = 0;
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t refined = 0;  // entries judged at kink_epsilon
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  bool passed = true;
};

struct GradCheckReport {
  std::vector<ParamCheck> params;
  double max_rel_error = 0.0;
  bool passed = true;
};

double relative_error(double analytic, double numeric, double floor);

// Compares reverse-mode gradients of `loss_fn` against central differences
// (f(x + eps) - f(x - eps)) / (2 eps) for every (sampled) scalar in `params`.
// The loss is evaluated with recording disabled during the perturbation sweep.
// `loss_fn` must build its result from the tensors in `params` and be
// deterministic. Throws std::invalid_argument for eps <= 0 and
// std::runtime_error naming the parameter and flat index if f is non-finite.
GradCheckReport finite_difference_check(const std::function<Tensor()>& loss_fn,
                                        const std::vector<NamedTensor>& params,
                                        const GradCheckOptions& options = {});

}  // namespace cran::ad

#endif  // CRAN_GRADCHECK_HPP_
