#ifndef CRAN_TRAINING_HPP_
#define CRAN_TRAINING_HPP_

#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "cran/alignment.hpp"
#include "cran/dataset.hpp"
#include "cran/encoder_params.hpp"
#include "cran/encoders.hpp"
#include "cran/gradcheck.hpp"

namespace cran::train {

enum class OptimizerKind { kSgd, kAdam };

std::string to_string(OptimizerKind kind);
OptimizerKind parse_optimizer(const std::string& name);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kSgd;
  double lr = 1e-3;
  double momentum = 0.9;
  // sgd adds weight_decay * theta to the gradient; adam decays decoupled
  double weight_decay = 0.0;
  // adam only
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void validate() const;
};

// sgd:  v <- momentum * v + (g + wd * theta);  theta <- theta - lr * v
// adam: theta <- theta - lr * (m_hat / (sqrt(v_hat) + eps) + wd * theta)
class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig cfg) : cfg_(cfg) { cfg_.validate(); }

  void step(const std::vector<ad::NamedTensor>& params);
  const OptimizerConfig& config() const { return cfg_; }
  void set_lr(double lr) { cfg_.lr = lr; }
  std::size_t steps_taken() const { return t_; }

 private:
  OptimizerConfig cfg_;
  std::size_t t_ = 0;
  std::map<std::string, std::vector<double>> first_;
  std::map<std::string, std::vector<double>> second_;
};

struct StepRecord {
  std::size_t step = 0;
  double total = 0.0;
  double global = 0.0;
  double local = 0.0;
  double relation = 0.0;
  double lr = 0.0;

  // {step, total, global, local, relation, lr}
  nlohmann::json to_json() const;
};

struct StepResult {
  bool ok = true;
  StepRecord record;
  std::string diagnostic;
};

// Borrowed view of one training batch; member b pairs images[b] with texts[b].
struct BatchView {
  std::vector<const enc::ImageInstance*> images;
  std::vector<const enc::TextInstance*> texts;
  std::vector<std::size_t> groups;
};

// Samples triplets, encodes the batch on a fresh tape, backpropagates
// total_loss and applies one optimizer update. A non-finite loss or gradient
// leaves parameters and optimizer state untouched and returns ok = false.
StepResult train_step(const BatchView& batch, const enc::EncoderParams& params,
                      const enc::EncoderConfig& enc_cfg,
                      const align::LossConfig& loss_cfg, Optimizer& optimizer,
                      std::mt19937_64& rng, std::size_t step_index);

// finite_difference_check of total_loss over `params` on one batch with fixed
// triplets. Each encoder branch is re-run only when one of its own parameters
// has changed since its last evaluation, so a perturbation costs one branch.
ad::GradCheckReport check_loss_gradients(const BatchView& batch,
                                         std::span<const align::Triplet> triplets,
                                         const enc::EncoderParams& params,
                                         const enc::EncoderConfig& enc_cfg,
                                         const align::LossConfig& loss_cfg,
                                         const ad::GradCheckOptions& options = {});

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 10;
  std::uint64_t seed = 7;
  OptimizerConfig optimizer;
  // Validation metric is mean R@1 over both directions, scored with the
  // training mode; only evaluated when the dataset has a val split.
  std::size_t eval_workers = 1;
};

struct TrainOutcome {
  enc::EncoderParams final_params;
  enc::EncoderParams best_params;
  double best_val_r1 = -1.0;
  std::size_t best_epoch = 0;
  std::vector<StepRecord> log;
  bool aborted = false;
  std::string diagnostic;
};

// Derived seeds for independent streams of one run.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

enum class SeedStream : std::uint64_t { kInit = 1, kTriplets = 2, kBatches = 3 };

// Full training run from a seeded initialization.
TrainOutcome train(const data::Dataset& dataset, const enc::EncoderConfig& enc_cfg,
                   const align::LossConfig& loss_cfg, const TrainConfig& cfg,
                   const std::function<void(const StepRecord&)>& on_step = {});

}  // namespace cran::train

#endif  // CRAN_TRAINING_HPP_
