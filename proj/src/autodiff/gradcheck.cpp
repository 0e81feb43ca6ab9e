#include "cran/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "cran/tape.hpp"

namespace cran::ad {

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

GradCheckReport finite_difference_check(const std::function<Tensor()>& loss_fn,
                                        const std::vector<NamedTensor>& params,
                                        const GradCheckOptions& options) {
  if (!(options.epsilon > 0.0)) {
    throw std::invalid_argument("finite_difference_check: epsilon must be > 0");
  }
  if (!(options.kink_epsilon >= 0.0)) {
    throw std::invalid_argument("finite_difference_check: kink_epsilon must be >= 0");
  }
  if (!(options.floor > 0.0)) {
    throw std::invalid_argument("finite_difference_check: floor must be > 0");
  }

  std::vector<bool> saved_flags;
  for (const auto& [name, t] : params) {
    saved_flags.push_back(t.requires_grad());
    Tensor handle = t;
    handle.set_requires_grad(true);
    handle.drop_grad();
  }

  std::vector<std::vector<double>> analytic(params.size());
  {
    Tape tape;
    TapeScope scope(tape);
    Tensor loss = loss_fn();
    if (!std::isfinite(loss.item())) {
      throw std::runtime_error("finite_difference_check: non-finite loss at "
                               "the unperturbed parameters");
    }
    tape.backprop(loss);
  }
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor handle = params[p].second;
    if (handle.has_grad()) {
      analytic[p].assign(handle.grad().begin(), handle.grad().end());
    } else {
      analytic[p].assign(handle.size(), 0.0);
    }
    handle.drop_grad();
  }

  std::mt19937_64 rng(options.seed);
  GradCheckReport report;
  NoGradScope no_grad;
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor handle = params[p].second;
    ParamCheck check;
    check.name = params[p].first;

    std::vector<std::size_t> entries(handle.size());
    std::iota(entries.begin(), entries.end(), 0);
    if (options.max_entries_per_tensor > 0 &&
        entries.size() > options.max_entries_per_tensor) {
      std::shuffle(entries.begin(), entries.end(), rng);
      entries.resize(options.max_entries_per_tensor);
      std::sort(entries.begin(), entries.end());
    }

    auto values = handle.mutable_data();
    auto central = [&](std::size_t idx, double step) {
      const double original = values[idx];
      values[idx] = original + step;
      const double plus = loss_fn().item();
      values[idx] = original - step;
      const double minus = loss_fn().item();
      values[idx] = original;
      if (!std::isfinite(plus) || !std::isfinite(minus)) {
        throw std::runtime_error("finite_difference_check: non-finite loss "
                                 "perturbing " + check.name + "[" +
                                 std::to_string(idx) + "]");
      }
      return (plus - minus) / (2.0 * step);
    };
    for (auto idx : entries) {
      const double a = analytic[p][idx];
      double numeric = central(idx, options.epsilon);
      double rel = relative_error(a, numeric, options.floor);
      if (rel >= options.tolerance && options.kink_epsilon > 0.0) {
        const double closer = central(idx, options.kink_epsilon);
        const double rel_closer = relative_error(a, closer, options.floor);
        if (rel_closer < rel) {
          numeric = closer;
          rel = rel_closer;
          ++check.refined;
        }
      }
      check.max_abs_error = std::max(check.max_abs_error, std::abs(a - numeric));
      if (rel > check.max_rel_error || check.checked == 0) {
        check.max_rel_error = rel;
        check.worst_index = idx;
        check.worst_analytic = a;
        check.worst_numeric = numeric;
      }
      ++check.checked;
    }
    check.passed = check.max_rel_error < options.tolerance;
    report.max_rel_error = std::max(report.max_rel_error, check.max_rel_error);
    report.passed = report.passed && check.passed;
    report.params.push_back(std::move(check));
  }

  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor handle = params[p].second;
    handle.set_requires_grad(saved_flags[p]);
  }
  return report;
}

}  // namespace cran::ad
