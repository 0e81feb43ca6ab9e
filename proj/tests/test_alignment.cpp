#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <random>

#include "doctest.h"
#include "cran/alignment.hpp"
#include "cran/encoders.hpp"
#include "cran/synthetic.hpp"
#include "cran/tape.hpp"
#include "support/oracles.hpp"

using namespace cran;
using ad::Tensor;

namespace {

Tensor columns(const std::vector<std::vector<double>>& cols) {
  const std::size_t d = cols.front().size();
  std::vector<double> flat(d * cols.size());
  for (std::size_t c = 0; c < cols.size(); ++c) {
    for (std::size_t r = 0; r < d; ++r) flat[r * cols.size() + c] = cols[c][r];
  }
  return Tensor::matrix(d, cols.size(), flat);
}

enc::EmbeddingBundle bundle(std::vector<double> global,
                            std::vector<std::vector<double>> locals = {},
                            std::vector<std::vector<double>> relations = {}) {
  enc::EmbeddingBundle b;
  b.global = Tensor::column(std::move(global));
  if (!locals.empty()) b.locals = columns(locals);
  if (!relations.empty()) b.relations = columns(relations);
  b.relations_disabled = relations.empty();
  return b;
}

std::vector<std::vector<double>> random_set(std::mt19937_64& rng, std::size_t n, std::size_t d) {
  std::normal_distribution<double> g;
  std::vector<std::vector<double>> out(n, std::vector<double>(d));
  for (auto& v : out) {
    for (auto& x : v) x = g(rng);
  }
  return out;
}

double value(const Tensor& t) { return t.data()[0]; }

}  // namespace

TEST_CASE("global loss: d(pos) 0.9, d(negs) 0.2, margin 1 gives 0.6") {
  std::vector<enc::EmbeddingBundle> images = {bundle({1.0, 0.0}), bundle({2.0 / 9.0, 0.0})};
  std::vector<enc::EmbeddingBundle> texts = {bundle({0.9, 0.0}), bundle({0.2, 3.0})};
  std::vector<align::Triplet> t = {{0, 1, 1}};
  CHECK(value(align::global_loss(t, images, texts, 1.0)) == doctest::Approx(0.6).epsilon(1e-12));
}

TEST_CASE("global loss is zero when the margin holds and 2a for identical pos/neg") {
  std::vector<enc::EmbeddingBundle> images = {bundle({3.0, 0.0}), bundle({0.0, 1.0})};
  std::vector<enc::EmbeddingBundle> texts = {bundle({1.0, 0.0}), bundle({0.0, 1.0})};
  std::vector<align::Triplet> t = {{0, 1, 1}, {1, 0, 0}};
  // pair 0: 3 - 0 = 3 >= 1; pair 1: 1 - 0 = 1 >= 1
  CHECK(value(align::global_loss(t, images, texts, 1.0)) == 0.0);

  std::vector<enc::EmbeddingBundle> same_i = {bundle({0.3, 0.4}), bundle({0.3, 0.4})};
  std::vector<enc::EmbeddingBundle> same_t = {bundle({1.0, 2.0}), bundle({1.0, 2.0})};
  std::vector<align::Triplet> one = {{0, 1, 1}};
  CHECK(value(align::global_loss(one, same_i, same_t, 0.7)) == doctest::Approx(1.4));

  CHECK_THROWS(align::global_loss({}, images, texts, 1.0));
}

TEST_CASE("top_k / knn_select examples") {
  const std::vector<double> dots = {0.5, 0.9, 0.1, 0.7};
  CHECK(align::top_k(dots, 3) == std::vector<std::size_t>{1, 3, 0});
  CHECK(align::top_k(dots, 10) == std::vector<std::size_t>{1, 3, 0, 2});

  std::vector<std::vector<double>> cands = {{0.5}, {0.9}, {0.1}, {0.7}};
  const std::vector<double> query = {1.0};
  CHECK(align::knn_select(query, cands, 3) == std::vector<std::size_t>{1, 3, 0});
  CHECK(align::knn_select(query, cands, 9).size() == 4);
  CHECK_THROWS(align::knn_select(query, {}, 3));
}

TEST_CASE("knn_select equals full-sort top-K on 1000 seeded cases") {
  std::mt19937_64 rng(1000);
  std::uniform_int_distribution<std::size_t> size(1, 25), kdist(1, 8), dim(1, 6);
  std::uniform_int_distribution<int> coarse(-2, 2);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = size(rng), k = kdist(rng), d = dim(rng);
    // small integer coordinates make ties common
    std::vector<std::vector<double>> cands(n, std::vector<double>(d));
    std::vector<double> query(d);
    for (auto& x : query) x = coarse(rng);
    for (auto& c : cands) {
      for (auto& x : c) x = coarse(rng);
    }
    std::vector<double> dots;
    for (const auto& c : cands) dots.push_back(oracle::dot(query, c));
    REQUIRE(align::knn_select(query, cands, k) == oracle::top_k_by_counting(dots, k));
  }
}

TEST_CASE("knn mean similarity is invariant to candidate order") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    auto set = random_set(rng, 7, 4);
    auto query = random_set(rng, 1, 4)[0];
    auto shuffled = set;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    const double a = value(align::knn_mean_similarity(Tensor::column(query), columns(set), 3));
    const double b = value(align::knn_mean_similarity(Tensor::column(query), columns(shuffled), 3));
    CHECK(a == doctest::Approx(b).epsilon(1e-14));
  }
}

TEST_CASE("local loss examples") {
  // orthogonal locals on both sides: both means are 0
  auto text = bundle({0.0}, {{1.0, 0.0, 0.0}});
  auto pos = bundle({0.0}, {{0.0, 1.0, 0.0}, {0.0, 0.0, 1.0}});
  auto neg = bundle({0.0}, {{0.0, 2.0, 0.0}, {0.0, 0.0, -1.0}});
  CHECK(value(align::local_loss(text, pos, neg, 1.0, 3)) == 1.0);

  // mean positive dot 1.5, mean negative dot 0.2
  auto t2 = bundle({0.0}, {{1.0, 0.0}});
  auto p2 = bundle({0.0}, {{1.0, 0.0}, {2.0, 0.0}});
  auto n2 = bundle({0.0}, {{0.1, 0.0}, {0.3, 1.0}});
  CHECK(value(align::local_loss(t2, p2, n2, 1.0, 3)) == 0.0);

  auto p2_permuted = bundle({0.0}, {{2.0, 0.0}, {1.0, 0.0}});
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    auto tr = bundle({0.0}, random_set(rng, 1, 4));
    auto locals = random_set(rng, 5, 4);
    auto reversed = locals;
    std::reverse(reversed.begin(), reversed.end());
    auto negs = bundle({0.0}, random_set(rng, 5, 4));
    CHECK(value(align::local_loss(tr, bundle({0.0}, locals), negs, 1.0, 3)) ==
          doctest::Approx(value(align::local_loss(tr, bundle({0.0}, reversed), negs, 1.0, 3)))
              .epsilon(1e-14));
  }
  CHECK(value(align::local_loss(t2, p2_permuted, n2, 1.0, 3)) == 0.0);

  CHECK_THROWS(align::local_loss(t2, bundle({0.0}), n2, 1.0, 3));
}

TEST_CASE("relation loss: identical sets give the margin, missing relations skip") {
  std::mt19937_64 rng(4);
  auto rel = random_set(rng, 20, 6);
  auto text = bundle({0.0}, {}, random_set(rng, 1, 6));
  auto pos = bundle({0.0}, {}, rel);
  auto neg = bundle({0.0}, {}, rel);
  auto loss = align::relation_loss(text, pos, neg, 0.8, 3);
  REQUIRE(loss.has_value());
  CHECK(value(*loss) == doctest::Approx(0.8).epsilon(1e-14));

  auto none = bundle({0.0}, {{1.0}});
  CHECK_FALSE(align::relation_loss(text, none, neg, 1.0, 3).has_value());
  CHECK_FALSE(align::relation_loss(text, pos, none, 1.0, 3).has_value());
}

TEST_CASE("hinges are nonnegative, zero when the margin holds, monotone in the margin") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> margin(0.0, 3.0);
  for (int trial = 0; trial < 200; ++trial) {
    auto text = bundle({0.0}, random_set(rng, 1, 4), random_set(rng, 1, 4));
    auto pos = bundle({0.0}, random_set(rng, 5, 4), random_set(rng, 20, 4));
    auto neg = bundle({0.0}, random_set(rng, 5, 4), random_set(rng, 20, 4));
    const double a = margin(rng), b = a + margin(rng);
    const double la = value(align::local_loss(text, pos, neg, a, 3));
    const double lb = value(align::local_loss(text, pos, neg, b, 3));
    const double ra = value(*align::relation_loss(text, pos, neg, a, 3));
    const double rb = value(*align::relation_loss(text, pos, neg, b, 3));
    CHECK(la >= 0.0);
    CHECK(ra >= 0.0);
    CHECK(lb >= la);
    CHECK(rb >= ra);

    // gap between the two knn means, computed independently
    auto knn_mean = [](const std::vector<double>& q, const Tensor& set) {
      std::vector<double> dots;
      for (std::size_t c = 0; c < set.cols(); ++c) {
        double s = 0.0;
        for (std::size_t r = 0; r < set.rows(); ++r) s += q[r] * set.at(r, c);
        dots.push_back(s);
      }
      double total = 0.0;
      for (auto i : oracle::top_k_by_counting(dots, 3)) total += dots[i];
      return total / 3.0;
    };
    const double gap = knn_mean(text.local(0), pos.locals) - knn_mean(text.local(0), neg.locals);
    CHECK(la == doctest::Approx(std::max(0.0, a - gap)).epsilon(1e-12));
    if (gap >= a) CHECK(la == 0.0);
  }
}

TEST_CASE("triplets: batch of 2 pairs each other, seeded, uniform over other groups") {
  std::mt19937_64 rng(11);
  const std::vector<std::size_t> two = {0, 1};
  auto t = align::sample_triplets(two, rng);
  REQUIRE(t.size() == 2);
  CHECK(t[0].neg_text == 1);
  CHECK(t[0].neg_image == 1);
  CHECK(t[1].neg_text == 0);
  CHECK(t[1].neg_image == 0);

  const std::vector<std::size_t> one = {0};
  CHECK_THROWS(align::sample_triplets(one, rng));
  const std::vector<std::size_t> same_group = {3, 3, 3};
  CHECK_THROWS(align::sample_triplets(same_group, rng));

  std::mt19937_64 a(5), b(5);
  const std::vector<std::size_t> groups = {0, 1, 2, 3, 4, 5, 6, 7};
  for (int i = 0; i < 10; ++i) {
    auto ta = align::sample_triplets(groups, a);
    auto tb = align::sample_triplets(groups, b);
    for (std::size_t j = 0; j < ta.size(); ++j) {
      CHECK(ta[j].neg_text == tb[j].neg_text);
      CHECK(ta[j].neg_image == tb[j].neg_image);
    }
  }

  // anchor 0 of a batch of 8: each of the 7 others with probability 1/7
  std::array<double, 8> counts{};
  std::mt19937_64 r(99);
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    auto tt = align::sample_triplets(groups, r);
    counts[tt[0].neg_text] += 1.0;
    for (std::size_t j = 0; j < tt.size(); ++j) {
      CHECK(tt[j].anchor == j);
      CHECK(tt[j].neg_text != j);
      CHECK(tt[j].neg_image != j);
    }
  }
  CHECK(counts[0] == 0.0);
  double chi2 = 0.0;
  const double expected = draws / 7.0;
  for (std::size_t k = 1; k < 8; ++k) chi2 += (counts[k] - expected) * (counts[k] - expected) / expected;
  // 6 degrees of freedom, p = 0.001 critical value
  CHECK(chi2 < 22.46);

  // members sharing a group are never each other's negatives
  const std::vector<std::size_t> linked = {0, 0, 1, 2};
  for (int i = 0; i < 200; ++i) {
    auto tt = align::sample_triplets(linked, r);
    CHECK(linked[tt[0].neg_text] != 0);
    CHECK(linked[tt[1].neg_image] != 0);
  }
}

namespace {

struct ToyBatch {
  enc::EncoderConfig cfg = enc::EncoderConfig::desk();
  enc::EncoderParams params;
  std::vector<enc::ImageInstance> images;
  std::vector<enc::TextInstance> texts;
  std::vector<align::Triplet> triplets;

  explicit ToyBatch(std::uint64_t seed) : params(enc::EncoderParams::init(cfg, seed)) {
    data::SyntheticSpec spec;
    spec.num_pairs = 4;
    spec.num_test = 0;
    spec.seed = seed;
    auto ds = data::generate_synthetic(spec);
    const enc::Alphabet alphabet(cfg.alphabet);
    for (const auto& r : ds.records()) {
      images.push_back(r.image);
      texts.push_back(enc::make_text_instance(r.caption, alphabet, cfg.seq_len));
    }
    std::mt19937_64 rng(seed);
    const std::vector<std::size_t> groups = {0, 1, 2, 3};
    triplets = align::sample_triplets(groups, rng);
  }

  align::LossBreakdown loss(const align::LossConfig& lc) const {
    const auto ch = channels_for(lc.mode);
    std::vector<enc::EmbeddingBundle> ib, tb;
    for (const auto& i : images) ib.push_back(enc::encode_image(i, params, cfg, ch));
    for (const auto& t : texts) tb.push_back(enc::encode_text(t, params, cfg, ch));
    return align::total_loss(triplets, ib, tb, lc);
  }
};

}  // namespace

TEST_CASE("total loss: baseline equals weights (1,0,0) and equals the global term") {
  ToyBatch toy(21);
  align::LossConfig base;
  base.mode = Mode::kBaseline;
  align::LossConfig weights;
  weights.w_local = 0.0;
  weights.w_relation = 0.0;
  const auto a = toy.loss(base);
  const auto b = toy.loss(weights);
  CHECK(value(a.total) == doctest::Approx(value(b.total)).epsilon(1e-14));
  CHECK(value(a.total) == doctest::Approx(a.global).epsilon(1e-14));

  align::LossConfig full;
  const auto f = toy.loss(full);
  CHECK(f.global >= 0.0);
  CHECK(f.local >= 0.0);
  CHECK(f.relation >= 0.0);
  CHECK(value(f.total) == doctest::Approx(f.global + f.local + f.relation).epsilon(1e-12));

  align::LossConfig zero;
  zero.w_global = zero.w_local = zero.w_relation = 0.0;
  CHECK_THROWS(zero.validate());
}

TEST_CASE("baseline loss leaves local and relation parameters without gradient") {
  ToyBatch toy(22);
  toy.params.set_requires_grad(true);
  toy.params.zero_grad();
  align::LossConfig base;
  base.mode = Mode::kBaseline;
  ad::Tape tape;
  Tensor total;
  {
    ad::TapeScope scope(tape);
    total = toy.loss(base).total;
  }
  tape.backprop(total);
  std::size_t global_nonzero = 0;
  for (const auto& [name, t] : toy.params.named()) {
    const bool any = t.has_grad() && std::any_of(t.grad().begin(), t.grad().end(),
                                                 [](double v) { return v != 0.0; });
    const bool branch_only = name.find("local") != std::string::npos ||
                             name.find("relation") != std::string::npos;
    if (branch_only) {
      CHECK_MESSAGE(!any, name);
    } else if (any) {
      ++global_nonzero;
    }
  }
  CHECK(global_nonzero > 0);

  // and perturbing a local parameter leaves the value unchanged
  const double before = value(toy.loss(base).total);
  for (auto& v : toy.params.text_local.weight.mutable_data()) v += 0.5;
  for (auto& v : toy.params.image_relation.weight.mutable_data()) v -= 0.5;
  CHECK(value(toy.loss(base).total) == before);
}

TEST_CASE("relation term is skipped for single-region images") {
  ToyBatch toy(23);
  for (auto& img : toy.images) img.regions.resize(1);
  const auto f = toy.loss(align::LossConfig{});
  CHECK(f.relation_skipped == toy.triplets.size());
  CHECK(f.relation == 0.0);
  CHECK(value(f.total) == doctest::Approx(f.global + f.local).epsilon(1e-12));
}
