#include "cran/training.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "cran/retrieval.hpp"
#include "cran/tape.hpp"

namespace cran::train {

using ad::Tensor;

std::string to_string(OptimizerKind kind) {
  return kind == OptimizerKind::kAdam ? "adam" : "sgd";
}

OptimizerKind parse_optimizer(const std::string& name) {
  if (name == "sgd") return OptimizerKind::kSgd;
  if (name == "adam") return OptimizerKind::kAdam;
  throw std::invalid_argument("unknown optimizer '" + name + "' (expected sgd|adam)");
}

void OptimizerConfig::validate() const {
  if (!(lr >= 0.0)) throw std::invalid_argument("optimizer: lr must be >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw std::invalid_argument("optimizer: momentum must be in [0, 1)");
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) {
    throw std::invalid_argument("optimizer: betas must be in [0, 1)");
  }
  if (!(eps > 0.0)) throw std::invalid_argument("optimizer: eps must be > 0");
  if (!(weight_decay >= 0.0)) {
    throw std::invalid_argument("optimizer: weight_decay must be >= 0");
  }
}

void Optimizer::step(const std::vector<ad::NamedTensor>& params) {
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (const auto& [name, t] : params) {
    if (!t.has_grad()) continue;
    Tensor handle = t;
    auto grad = handle.grad();
    auto values = handle.mutable_data();
    auto& m = first_[name];
    if (m.empty()) m.assign(grad.size(), 0.0);
    if (cfg_.kind == OptimizerKind::kSgd) {
      for (std::size_t i = 0; i < values.size(); ++i) {
        m[i] = cfg_.momentum * m[i] + grad[i] + cfg_.weight_decay * values[i];
        values[i] -= cfg_.lr * m[i];
      }
      continue;
    }
    auto& v = second_[name];
    if (v.empty()) v.assign(grad.size(), 0.0);
    for (std::size_t i = 0; i < values.size(); ++i) {
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * grad[i];
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * grad[i] * grad[i];
      values[i] -= cfg_.lr * ((m[i] / c1) / (std::sqrt(v[i] / c2) + cfg_.eps) +
                              cfg_.weight_decay * values[i]);
    }
  }
}

nlohmann::json StepRecord::to_json() const {
  return {{"step", step},         {"total", total},       {"global", global},
          {"local", local},       {"relation", relation}, {"lr", lr}};
}

StepResult train_step(const BatchView& batch, const enc::EncoderParams& params,
                      const enc::EncoderConfig& enc_cfg,
                      const align::LossConfig& loss_cfg, Optimizer& optimizer,
                      std::mt19937_64& rng, std::size_t step_index) {
  const std::size_t n = batch.images.size();
  if (n < 2) throw std::invalid_argument("train_step: batch size must be >= 2");
  if (batch.texts.size() != n || batch.groups.size() != n) {
    throw std::invalid_argument("train_step: batch views disagree in size");
  }
  loss_cfg.validate();

  const auto triplets = align::sample_triplets(batch.groups, rng);
  const Channels channels{true, loss_cfg.effective_local() > 0.0,
                          loss_cfg.effective_relation() > 0.0};

  const auto named = params.named();
  params.set_requires_grad(true);
  params.zero_grad();

  StepResult result;
  result.record.step = step_index;
  result.record.lr = optimizer.config().lr;
  {
    ad::Tape tape;
    ad::TapeScope scope(tape);
    std::vector<enc::EmbeddingBundle> images, texts;
    images.reserve(n);
    texts.reserve(n);
    for (std::size_t b = 0; b < n; ++b) {
      images.push_back(enc::encode_image(*batch.images[b], params, enc_cfg, channels));
      texts.push_back(enc::encode_text(*batch.texts[b], params, enc_cfg, channels));
    }
    auto loss = align::total_loss(triplets, images, texts, loss_cfg);
    result.record.total = loss.total.item();
    result.record.global = loss.global;
    result.record.local = loss.local;
    result.record.relation = loss.relation;
    if (!std::isfinite(result.record.total)) {
      result.ok = false;
      result.diagnostic = "non-finite loss at step " + std::to_string(step_index);
      params.zero_grad();
      return result;
    }
    tape.backprop(loss.total);
  }
  for (const auto& [name, t] : named) {
    if (!t.has_grad()) continue;
    for (double g : t.grad()) {
      if (!std::isfinite(g)) {
        result.ok = false;
        result.diagnostic = "non-finite gradient for " + name + " at step " +
                            std::to_string(step_index);
        params.zero_grad();
        return result;
      }
    }
  }
  optimizer.step(named);
  params.zero_grad();
  return result;
}

namespace {

// Outputs of one (media, branch) encoder over a batch, memoized on a copy of
// the parameters they read.
struct BranchCache {
  bool image = false;
  Channels channels;
  std::vector<Tensor> deps;
  std::vector<std::vector<double>> snapshot;
  std::vector<enc::EmbeddingBundle> outputs;

  bool stale() const {
    if (outputs.empty()) return true;
    for (std::size_t d = 0; d < deps.size(); ++d) {
      auto now = deps[d].data();
      if (!std::equal(now.begin(), now.end(), snapshot[d].begin())) return true;
    }
    return false;
  }
  void remember() {
    snapshot.clear();
    for (const auto& t : deps) snapshot.emplace_back(t.data().begin(), t.data().end());
  }
};

void merge(enc::EmbeddingBundle& into, const enc::EmbeddingBundle& part) {
  if (part.global.defined()) into.global = part.global;
  if (part.locals.defined()) into.locals = part.locals;
  if (part.relations.defined()) into.relations = part.relations;
  into.relations_disabled = into.relations_disabled || part.relations_disabled;
}

}  // namespace

ad::GradCheckReport check_loss_gradients(const BatchView& batch,
                                         std::span<const align::Triplet> triplets,
                                         const enc::EncoderParams& params,
                                         const enc::EncoderConfig& enc_cfg,
                                         const align::LossConfig& loss_cfg,
                                         const ad::GradCheckOptions& options) {
  const std::size_t n = batch.images.size();
  if (batch.texts.size() != n) {
    throw std::invalid_argument("check_loss_gradients: batch views disagree in size");
  }
  loss_cfg.validate();
  const auto named = params.named();
  const char* branches[] = {"global", "local", "relation"};
  const bool wanted[] = {true, loss_cfg.effective_local() > 0.0,
                         loss_cfg.effective_relation() > 0.0};

  for (const auto& [name, t] : named) {
    bool known = false;
    for (const char* media : {"image.", "text."}) {
      for (const char* part : {"global.", "local.", "relation.", "shared."}) {
        known = known || name.starts_with(std::string(media) + part);
      }
    }
    if (!known) {
      throw std::logic_error("check_loss_gradients: parameter " + name +
                             " belongs to no encoder branch");
    }
  }

  std::vector<BranchCache> caches;
  for (bool image : {true, false}) {
    const std::string media = image ? "image." : "text.";
    for (int b = 0; b < 3; ++b) {
      if (!wanted[b]) continue;
      BranchCache cache;
      cache.image = image;
      cache.channels = {b == 0, b == 1, b == 2};
      const std::string own = media + branches[b] + ".";
      const std::string shared = media + "shared.";
      for (const auto& [name, t] : named) {
        if (name.starts_with(own) || name.starts_with(shared)) cache.deps.push_back(t);
      }
      caches.push_back(std::move(cache));
    }
  }

  auto loss_fn = [&] {
    const bool taping = ad::active_tape() != nullptr;
    std::vector<enc::EmbeddingBundle> images(n), texts(n);
    for (auto& cache : caches) {
      if (taping || cache.stale()) {
        cache.outputs.clear();
        for (std::size_t b = 0; b < n; ++b) {
          cache.outputs.push_back(
              cache.image ? enc::encode_image(*batch.images[b], params, enc_cfg,
                                              cache.channels)
                          : enc::encode_text(*batch.texts[b], params, enc_cfg,
                                             cache.channels));
        }
        if (taping) {
          auto fresh = std::move(cache.outputs);
          cache.outputs.clear();
          for (std::size_t b = 0; b < n; ++b) merge((cache.image ? images : texts)[b], fresh[b]);
          continue;
        }
        cache.remember();
      }
      for (std::size_t b = 0; b < n; ++b) {
        merge((cache.image ? images : texts)[b], cache.outputs[b]);
      }
    }
    return align::total_loss(triplets, images, texts, loss_cfg).total;
  };
  return ad::finite_difference_check(loss_fn, named, options);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer over (seed, stream).
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

TrainOutcome train(const data::Dataset& dataset, const enc::EncoderConfig& enc_cfg,
                   const align::LossConfig& loss_cfg, const TrainConfig& cfg,
                   const std::function<void(const StepRecord&)>& on_step) {
  enc_cfg.validate();
  loss_cfg.validate();
  if (dataset.meta().feature_dim != enc_cfg.feature_dim) {
    throw std::invalid_argument("train: dataset feature_dim " +
                                std::to_string(dataset.meta().feature_dim) +
                                " does not match model feature_dim " +
                                std::to_string(enc_cfg.feature_dim));
  }

  TrainOutcome out;
  out.final_params = enc::EncoderParams::init(
      enc_cfg, derive_seed(cfg.seed, static_cast<std::uint64_t>(SeedStream::kInit)));
  out.best_params = out.final_params.clone();
  if (cfg.epochs == 0) return out;

  const enc::Alphabet alphabet(enc_cfg.alphabet);
  std::vector<enc::TextInstance> texts;
  texts.reserve(dataset.size());
  for (const auto& rec : dataset.records()) {
    texts.push_back(enc::make_text_instance(rec.caption, alphabet, enc_cfg.seq_len));
  }

  data::BatchIterator batches(
      dataset, data::Split::kTrain, cfg.batch_size,
      derive_seed(cfg.seed, static_cast<std::uint64_t>(SeedStream::kBatches)));
  std::mt19937_64 rng(
      derive_seed(cfg.seed, static_cast<std::uint64_t>(SeedStream::kTriplets)));
  Optimizer optimizer(cfg.optimizer);
  const bool has_val = !dataset.indices(data::Split::kVal).empty();

  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (const auto& members : batches.epoch(epoch)) {
      BatchView view;
      for (auto idx : members) {
        view.images.push_back(&dataset.records()[idx].image);
        view.texts.push_back(&texts[idx]);
        view.groups.push_back(dataset.group(idx));
      }
      auto result = train_step(view, out.final_params, enc_cfg, loss_cfg,
                               optimizer, rng, step);
      if (!result.ok) {
        out.aborted = true;
        out.diagnostic = result.diagnostic;
        out.final_params.set_requires_grad(false);
        return out;
      }
      out.log.push_back(result.record);
      if (on_step) on_step(result.record);
      ++step;
    }
    if (has_val) {
      retrieval::EvalOptions opts;
      opts.k = loss_cfg.k;
      opts.mode = loss_cfg.mode;
      opts.workers = cfg.eval_workers;
      opts.recall_ks = {1};
      auto ev = retrieval::evaluate(dataset, data::Split::kVal, out.final_params,
                                    enc_cfg, opts);
      const double r1 =
          0.5 * (ev.image_to_text.recall_at[1] + ev.text_to_image.recall_at[1]);
      if (r1 > out.best_val_r1) {
        out.best_val_r1 = r1;
        out.best_epoch = epoch + 1;
        out.best_params = out.final_params.clone();
      }
    }
  }
  out.final_params.set_requires_grad(false);
  if (!has_val) out.best_params = out.final_params.clone();
  return out;
}

}  // namespace cran::train
