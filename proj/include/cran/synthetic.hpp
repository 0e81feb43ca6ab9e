#ifndef CRAN_SYNTHETIC_HPP_
#define CRAN_SYNTHETIC_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "cran/dataset.hpp"

namespace cran::data {

// Planted-correlation generator. Every pair is built from a unique
// (subject, relation, object) tuple:
//   - the subject and object regions are their object prototypes plus a
//     relation-role offset (one offset for the subject role, another for the
//     object role), the remaining regions are distinct background
//     prototypes that no caption names; region order is shuffled;
//   - every region gets N(0, noise_sigma^2) noise per coordinate;
//   - the global feature is the region mean plus independent noise;
//   - the caption is "a <subject> <relation> a <object>".
struct SyntheticSpec {
  std::size_t num_pairs = 200;
  std::size_t num_val = 0;
  std::size_t num_test = 40;
  std::size_t feature_dim = 32;
  std::size_t num_regions = 5;
  double noise_sigma = 0.1;
  // Norm of relation-role offsets relative to object prototypes.
  double relation_scale = 0.5;
  // Size of the unnamed background pool that fills the other regions.
  std::size_t num_background = 8;
  std::uint64_t seed = 7;
  std::vector<std::string> objects = default_objects();
  std::vector<std::string> relations = default_relations();

  static std::vector<std::string> default_objects();
  static std::vector<std::string> default_relations();

  // Throws std::invalid_argument naming the offending field.
  void validate() const;
};

struct Prototypes {
  std::vector<std::vector<double>> objects;
  std::vector<std::vector<double>> subject_role;  // per relation
  std::vector<std::vector<double>> object_role;   // per relation
  std::vector<std::vector<double>> background;
};

// Prototypes used by generate_synthetic for this spec's seed.
Prototypes planted_prototypes(const SyntheticSpec& spec);

std::string caption_for(const SyntheticSpec& spec, std::size_t subject,
                        std::size_t relation, std::size_t object);

// First num_pairs - num_val - num_test records are train, then val, then test.
Dataset generate_synthetic(const SyntheticSpec& spec);

}  // namespace cran::data

#endif  // CRAN_SYNTHETIC_HPP_
