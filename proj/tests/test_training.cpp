#include <cmath>
#include <limits>
#include <random>

#include "doctest.h"
#include "cran/synthetic.hpp"
#include "cran/training.hpp"

using namespace cran;
using ad::Tensor;

namespace {

struct Toy {
  enc::EncoderConfig cfg = enc::EncoderConfig::desk();
  data::Dataset ds;
  std::vector<enc::TextInstance> texts;
  train::BatchView view;

  Toy(std::size_t pairs, std::uint64_t seed) {
    data::SyntheticSpec spec;
    spec.num_pairs = pairs;
    spec.num_test = 0;
    spec.seed = seed;
    ds = data::generate_synthetic(spec);
    const enc::Alphabet alphabet(cfg.alphabet);
    for (const auto& r : ds.records()) {
      texts.push_back(enc::make_text_instance(r.caption, alphabet, cfg.seq_len));
    }
    for (std::size_t i = 0; i < ds.size(); ++i) {
      view.images.push_back(&ds.records()[i].image);
      view.texts.push_back(&texts[i]);
      view.groups.push_back(ds.group(i));
    }
  }
};

std::vector<std::vector<double>> snapshot(const enc::EncoderParams& p) {
  std::vector<std::vector<double>> out;
  for (const auto& [name, t] : p.named()) out.emplace_back(t.data().begin(), t.data().end());
  return out;
}

}  // namespace

TEST_CASE("learning rate 0 leaves every parameter unchanged") {
  Toy toy(4, 3);
  const auto params = enc::EncoderParams::init(toy.cfg, 1);
  const auto before = snapshot(params);
  for (auto kind : {train::OptimizerKind::kSgd, train::OptimizerKind::kAdam}) {
    train::OptimizerConfig oc;
    oc.kind = kind;
    oc.lr = 0.0;
    train::Optimizer opt(oc);
    std::mt19937_64 rng(2);
    for (std::size_t s = 0; s < 3; ++s) {
      auto res = train::train_step(toy.view, params, toy.cfg, align::LossConfig{}, opt, rng, s);
      CHECK(res.ok);
    }
    CHECK(snapshot(params) == before);
  }
}

TEST_CASE("every parameter receives a nonzero gradient in full mode") {
  Toy toy(6, 8);
  const auto params = enc::EncoderParams::init(toy.cfg, 2);
  std::mt19937_64 rng(3);
  // margin large enough that every hinge is active
  align::LossConfig lc;
  lc.margin = 100.0;
  // plain sgd with momentum 0: a parameter moves iff its gradient is nonzero
  train::OptimizerConfig probe;
  probe.lr = 1.0;
  probe.momentum = 0.0;
  train::Optimizer step_opt(probe);
  const auto before = snapshot(params);
  REQUIRE(train::train_step(toy.view, params, toy.cfg, lc, step_opt, rng, 0).ok);
  const auto after = snapshot(params);
  const auto named = params.named();
  for (std::size_t i = 0; i < named.size(); ++i) {
    bool moved = false;
    for (std::size_t j = 0; j < before[i].size(); ++j) moved = moved || before[i][j] != after[i][j];
    CHECK_MESSAGE(moved, named[i].first);
  }
}

TEST_CASE("repeated toy batch: loss non-increasing on at least 90% of 50 steps") {
  // two pairs force the triplets, so the loss sequence is deterministic in the params
  Toy toy(2, 5);
  const auto params = enc::EncoderParams::init(toy.cfg, 4);
  train::OptimizerConfig oc;  // sgd, momentum 0.9
  oc.lr = 1e-3;
  train::Optimizer opt(oc);
  std::mt19937_64 rng(1);
  std::vector<double> losses;
  for (std::size_t s = 0; s < 51; ++s) {
    auto res = train::train_step(toy.view, params, toy.cfg, align::LossConfig{}, opt, rng, s);
    REQUIRE(res.ok);
    losses.push_back(res.record.total);
  }
  std::size_t non_increasing = 0;
  for (std::size_t s = 1; s < losses.size(); ++s) {
    if (losses[s] <= losses[s - 1]) ++non_increasing;
  }
  CHECK(non_increasing >= 45);
  CHECK(losses.back() < losses.front());
}

TEST_CASE("optimizer updates match the update rules by hand") {
  Tensor theta = Tensor::column({1.0, -2.0});
  theta.set_requires_grad(true);
  const std::vector<ad::NamedTensor> named = {{"theta", theta}};
  auto set_grad = [&](double a, double b) {
    auto g = theta.mutable_grad();
    g[0] = a;
    g[1] = b;
  };

  train::OptimizerConfig sgd;
  sgd.lr = 0.1;
  sgd.momentum = 0.5;
  train::Optimizer s(sgd);
  set_grad(2.0, 4.0);
  s.step(named);
  // v = g; theta -= 0.1 v
  CHECK(theta.data()[0] == doctest::Approx(0.8));
  CHECK(theta.data()[1] == doctest::Approx(-2.4));
  set_grad(2.0, 4.0);
  s.step(named);
  // v = 0.5 v + g = 1.5 g
  CHECK(theta.data()[0] == doctest::Approx(0.5));
  CHECK(theta.data()[1] == doctest::Approx(-3.0));

  Tensor w = Tensor::column({0.5});
  w.set_requires_grad(true);
  train::OptimizerConfig adam;
  adam.kind = train::OptimizerKind::kAdam;
  adam.lr = 0.01;
  train::Optimizer a(adam);
  w.mutable_grad()[0] = 3.0;
  a.step({{"w", w}});
  // first bias-corrected step is lr * g / (|g| + eps)
  CHECK(w.data()[0] == doctest::Approx(0.5 - 0.01 * 3.0 / (3.0 + 1e-8)).epsilon(1e-12));
  w.mutable_grad()[0] = -1.0;
  a.step({{"w", w}});
  const double m = (0.9 * 0.1 * 3.0 + 0.1 * -1.0) / (1 - 0.81);
  const double v = (0.999 * 0.001 * 9.0 + 0.001 * 1.0) / (1 - 0.999 * 0.999);
  CHECK(w.data()[0] ==
        doctest::Approx(0.5 - 0.01 * 3.0 / (3.0 + 1e-8) - 0.01 * m / (std::sqrt(v) + 1e-8)).epsilon(1e-12));
  CHECK(a.steps_taken() == 2);

  train::OptimizerConfig bad;
  bad.lr = -1.0;
  CHECK_THROWS(train::Optimizer{bad});
}

TEST_CASE("non-finite loss aborts the step and leaves state unchanged") {
  Toy toy(4, 6);
  auto params = enc::EncoderParams::init(toy.cfg, 5);
  params.image_global.weight.mutable_data()[0] = std::numeric_limits<double>::quiet_NaN();
  const auto before = snapshot(params);
  train::OptimizerConfig oc;
  train::Optimizer opt(oc);
  std::mt19937_64 rng(1);
  auto res = train::train_step(toy.view, params, toy.cfg, align::LossConfig{}, opt, rng, 7);
  CHECK_FALSE(res.ok);
  CHECK(res.diagnostic.find("step 7") != std::string::npos);
  CHECK(opt.steps_taken() == 0);
  const auto after = snapshot(params);
  for (std::size_t i = 0; i < before.size(); ++i) {
    for (std::size_t j = 0; j < before[i].size(); ++j) {
      if (std::isnan(before[i][j])) {
        CHECK(std::isnan(after[i][j]));
      } else {
        CHECK(before[i][j] == after[i][j]);
      }
    }
  }
}

TEST_CASE("train_step rejects batches smaller than 2") {
  Toy toy(2, 1);
  const auto params = enc::EncoderParams::init(toy.cfg, 5);
  train::BatchView one = toy.view;
  one.images.resize(1);
  one.texts.resize(1);
  one.groups.resize(1);
  train::Optimizer opt(train::OptimizerConfig{});
  std::mt19937_64 rng(1);
  CHECK_THROWS(train::train_step(one, params, toy.cfg, align::LossConfig{}, opt, rng, 0));
}

TEST_CASE("fixed seed gives a bitwise-identical trajectory") {
  data::SyntheticSpec spec;
  spec.num_pairs = 30;
  spec.num_val = 5;
  spec.num_test = 5;
  const auto ds = data::generate_synthetic(spec);
  train::TrainConfig tc;
  tc.epochs = 2;
  tc.batch_size = 5;
  tc.seed = 11;
  tc.optimizer.kind = train::OptimizerKind::kAdam;
  tc.optimizer.lr = 1e-2;
  const auto cfg = enc::EncoderConfig::desk();
  const auto a = train::train(ds, cfg, align::LossConfig{}, tc);
  const auto b = train::train(ds, cfg, align::LossConfig{}, tc);
  CHECK_FALSE(a.aborted);
  CHECK(a.log.size() == 8);
  REQUIRE(a.log.size() == b.log.size());
  for (std::size_t i = 0; i < a.log.size(); ++i) CHECK(a.log[i].to_json() == b.log[i].to_json());
  CHECK(snapshot(a.final_params) == snapshot(b.final_params));
  CHECK(snapshot(a.best_params) == snapshot(b.best_params));
  CHECK(a.best_val_r1 == b.best_val_r1);
  CHECK(a.best_val_r1 >= 0.0);

  tc.seed = 12;
  const auto c = train::train(ds, cfg, align::LossConfig{}, tc);
  CHECK(snapshot(c.final_params) != snapshot(a.final_params));

  tc.epochs = 0;
  const auto init = train::train(ds, cfg, align::LossConfig{}, tc);
  CHECK(init.log.empty());
  CHECK(snapshot(init.final_params) ==
        snapshot(enc::EncoderParams::init(cfg, train::derive_seed(12, 1))));
}

TEST_CASE("step records carry the logged fields") {
  train::StepRecord r{3, 1.5, 1.0, 0.25, 0.25, 1e-3};
  const auto j = r.to_json();
  for (const char* key : {"step", "total", "global", "local", "relation", "lr"}) CHECK(j.contains(key));
  CHECK(j["step"] == 3);
}

TEST_CASE("sampled loss gradient check passes on a seeded batch") {
  Toy toy(2, 9);
  const auto params = enc::EncoderParams::init(toy.cfg, 9);
  std::mt19937_64 rng(9);
  const auto triplets = align::sample_triplets(toy.view.groups, rng);
  ad::GradCheckOptions opt;
  opt.max_entries_per_tensor = 6;
  opt.seed = 9;
  const auto report = train::check_loss_gradients(toy.view, triplets, params, toy.cfg,
                                                  align::LossConfig{}, opt);
  CHECK(report.passed);
  CHECK(report.params.size() == params.named().size());
  CHECK(report.max_rel_error < 1e-4);
}
