#include "cran/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <set>
#include <stdexcept>
#include <tuple>

namespace cran::data {

std::vector<std::string> SyntheticSpec::default_objects() {
  return {"cat",  "dog",  "car",   "tree",  "boat", "bird", "lamp",
          "cup",  "ball", "hat",   "fish",  "bus",  "bike", "sofa",
          "kite", "cake", "book",  "clock", "horse", "chair"};
}

std::vector<std::string> SyntheticSpec::default_relations() {
  return {"above", "below", "beside", "behind", "inside"};
}

void SyntheticSpec::validate() const {
  if (num_pairs == 0) throw std::invalid_argument("synthetic: num_pairs must be >= 1");
  if (num_val + num_test > num_pairs) {
    throw std::invalid_argument("synthetic: val + test exceeds num_pairs");
  }
  if (feature_dim == 0) throw std::invalid_argument("synthetic: feature_dim must be >= 1");
  if (num_regions < 2) throw std::invalid_argument("synthetic: num_regions must be >= 2");
  if (!(noise_sigma >= 0.0)) {
    throw std::invalid_argument("synthetic: noise_sigma must be >= 0");
  }
  if (!(relation_scale >= 0.0)) {
    throw std::invalid_argument("synthetic: relation_scale must be >= 0");
  }
  if (relations.empty()) throw std::invalid_argument("synthetic: no relation words");
  if (objects.size() < 2) throw std::invalid_argument("synthetic: need at least 2 objects");
  if (num_background + 2 < num_regions) {
    throw std::invalid_argument("synthetic: num_background must be >= num_regions - 2");
  }
  std::set<std::string> words(objects.begin(), objects.end());
  words.insert(relations.begin(), relations.end());
  if (words.size() != objects.size() + relations.size()) {
    throw std::invalid_argument("synthetic: vocabulary words must be distinct");
  }
  const std::size_t tuples =
      objects.size() * (objects.size() - 1) / 2 * relations.size();
  if (num_pairs > tuples) {
    throw std::invalid_argument("synthetic: num_pairs " + std::to_string(num_pairs) +
                                " exceeds the " + std::to_string(tuples) +
                                " distinct concept tuples");
  }
}

namespace {

std::vector<double> gaussian_vector(std::mt19937_64& rng, std::size_t dim,
                                    double sigma) {
  std::normal_distribution<double> dist(0.0, 1.0);
  std::vector<double> v(dim);
  for (auto& x : v) x = sigma * dist(rng);
  return v;
}

void add_noise(std::vector<double>& v, std::mt19937_64& rng, double sigma) {
  if (sigma == 0.0) return;
  std::normal_distribution<double> dist(0.0, 1.0);
  for (auto& x : v) x += sigma * dist(rng);
}

// Gram-Schmidt over gaussian draws while the set still fits in the space,
// then rescaled so every prototype has norm sqrt(dim).
std::vector<std::vector<double>> entity_prototypes(std::mt19937_64& rng,
                                                   std::size_t count,
                                                   std::size_t dim) {
  std::vector<std::vector<double>> out;
  for (std::size_t i = 0; i < count; ++i) {
    auto v = gaussian_vector(rng, dim, 1.0);
    if (i < dim) {
      for (const auto& u : out) {
        double proj = 0.0;
        for (std::size_t d = 0; d < dim; ++d) proj += v[d] * u[d];
        for (std::size_t d = 0; d < dim; ++d) v[d] -= proj * u[d];
      }
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    for (auto& x : v) x /= norm;
    out.push_back(std::move(v));
  }
  const double target = std::sqrt(static_cast<double>(dim));
  for (auto& v : out) {
    for (auto& x : v) x *= target;
  }
  return out;
}

Prototypes draw_prototypes(const SyntheticSpec& spec, std::mt19937_64& rng) {
  Prototypes p;
  auto entities = entity_prototypes(rng, spec.objects.size() + spec.num_background,
                                    spec.feature_dim);
  p.objects.assign(entities.begin(),
                   entities.begin() + static_cast<std::ptrdiff_t>(spec.objects.size()));
  p.background.assign(entities.begin() + static_cast<std::ptrdiff_t>(spec.objects.size()),
                      entities.end());
  for (std::size_t r = 0; r < spec.relations.size(); ++r) {
    p.subject_role.push_back(gaussian_vector(rng, spec.feature_dim, spec.relation_scale));
    p.object_role.push_back(gaussian_vector(rng, spec.feature_dim, spec.relation_scale));
  }
  return p;
}

}  // namespace

Prototypes planted_prototypes(const SyntheticSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  return draw_prototypes(spec, rng);
}

std::string caption_for(const SyntheticSpec& spec, std::size_t subject,
                        std::size_t relation, std::size_t object) {
  return "a " + spec.objects.at(subject) + " " + spec.relations.at(relation) +
         " a " + spec.objects.at(object);
}

Dataset generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  const Prototypes protos = draw_prototypes(spec, rng);

  struct Tuple {
    std::size_t subject, relation, object;
  };
  std::vector<Tuple> tuples;
  const std::size_t n_obj = spec.objects.size();
  for (std::size_t s = 0; s < n_obj; ++s) {
    for (std::size_t r = 0; r < spec.relations.size(); ++r) {
      for (std::size_t o = 0; o < n_obj; ++o) {
        if (s != o) tuples.push_back({s, r, o});
      }
    }
  }
  std::shuffle(tuples.begin(), tuples.end(), rng);
  // No two pairs share both the unordered object pair and the relation, so
  // swapping subject and object never reproduces another pair's concepts.
  std::set<std::tuple<std::size_t, std::size_t, std::size_t>> used;
  std::vector<Tuple> chosen;
  for (const auto& t : tuples) {
    if (chosen.size() == spec.num_pairs) break;
    if (used.insert({std::min(t.subject, t.object), std::max(t.subject, t.object),
                     t.relation}).second) {
      chosen.push_back(t);
    }
  }
  tuples = std::move(chosen);

  const std::size_t num_train = spec.num_pairs - spec.num_val - spec.num_test;
  std::vector<Record> records;
  records.reserve(spec.num_pairs);
  for (std::size_t i = 0; i < spec.num_pairs; ++i) {
    const Tuple& t = tuples[i];
    std::vector<std::size_t> distractors(spec.num_background);
    for (std::size_t b = 0; b < distractors.size(); ++b) distractors[b] = b;
    std::shuffle(distractors.begin(), distractors.end(), rng);
    distractors.resize(spec.num_regions - 2);

    std::vector<std::vector<double>> regions;
    auto subject = protos.objects[t.subject];
    auto object = protos.objects[t.object];
    for (std::size_t d = 0; d < spec.feature_dim; ++d) {
      subject[d] += protos.subject_role[t.relation][d];
      object[d] += protos.object_role[t.relation][d];
    }
    regions.push_back(std::move(subject));
    regions.push_back(std::move(object));
    for (auto b : distractors) regions.push_back(protos.background[b]);
    std::shuffle(regions.begin(), regions.end(), rng);
    for (auto& region : regions) add_noise(region, rng, spec.noise_sigma);

    std::vector<double> global(spec.feature_dim, 0.0);
    for (const auto& region : regions) {
      for (std::size_t d = 0; d < spec.feature_dim; ++d) global[d] += region[d];
    }
    for (auto& g : global) g /= static_cast<double>(regions.size());
    add_noise(global, rng, spec.noise_sigma);

    char id[32];
    std::snprintf(id, sizeof id, "p%05zu", i);
    Record rec;
    rec.id = id;
    rec.split = i < num_train                    ? Split::kTrain
                : i < num_train + spec.num_val ? Split::kVal
                                               : Split::kTest;
    rec.image.global_feat = std::move(global);
    rec.image.regions = std::move(regions);
    rec.caption = caption_for(spec, t.subject, t.relation, t.object);
    rec.gt_links = {rec.id};
    records.push_back(std::move(rec));
  }

  DatasetMeta meta{spec.feature_dim, spec.num_regions, spec.seed};
  return Dataset(std::move(records), meta);
}

}  // namespace cran::data
