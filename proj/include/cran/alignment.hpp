#ifndef CRAN_ALIGNMENT_HPP_
#define CRAN_ALIGNMENT_HPP_

#include <cstddef>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "cran/encoders.hpp"
#include "cran/mode.hpp"
#include "cran/tensor.hpp"

namespace cran::align {

// Positions refer to members of one batch; member b is the matched pair
// (image b, text b).
struct Triplet {
  std::size_t anchor = 0;
  std::size_t neg_text = 0;
  std::size_t neg_image = 0;
};

struct LossConfig {
  double margin = 1.0;
  std::size_t k = 3;
  double w_global = 1.0;
  double w_local = 1.0;
  double w_relation = 1.0;
  Mode mode = Mode::kFull;

  // Weights after the mode has zeroed the channels it excludes.
  double effective_local() const;
  double effective_relation() const;
  void validate() const;
};

// One triplet per member; each negative is drawn uniformly from the members
// of other ground-truth groups. `groups[b]` is member b's group.
std::vector<Triplet> sample_triplets(std::span<const std::size_t> groups,
                                     std::mt19937_64& rng);

// Indices of the min(k, n) largest scores, descending; ties go to the lower
// index.
std::vector<std::size_t> top_k(std::span<const double> scores, std::size_t k);

// Nearest candidates to `query` by dot product.
std::vector<std::size_t> knn_select(std::span<const double> query,
                                    const std::vector<std::vector<double>>& candidates,
                                    std::size_t k);

// (1/N) sum_n [max(0, a - d(g_i+, g_t+) + d(g_i+, g_t-)) +
//              max(0, a - d(g_i+, g_t+) + d(g_i-, g_t+))]
ad::Tensor global_loss(std::span<const Triplet> triplets,
                       std::span<const enc::EmbeddingBundle> images,
                       std::span<const enc::EmbeddingBundle> texts, double margin);

// Mean dot product of `query` ([d x 1]) with its k nearest columns of
// `candidates` ([d x n]); the selection itself is not differentiated.
ad::Tensor knn_mean_similarity(const ad::Tensor& query, const ad::Tensor& candidates,
                               std::size_t k);

// max(0, a - knn_mean(q, positives) + knn_mean(q, negatives))
ad::Tensor knn_hinge(const ad::Tensor& query, const ad::Tensor& positives,
                     const ad::Tensor& negatives, double margin, std::size_t k);

ad::Tensor local_loss(const enc::EmbeddingBundle& text,
                      const enc::EmbeddingBundle& pos_image,
                      const enc::EmbeddingBundle& neg_image, double margin,
                      std::size_t k);

// nullopt when either image has no relation candidates.
std::optional<ad::Tensor> relation_loss(const enc::EmbeddingBundle& text,
                                        const enc::EmbeddingBundle& pos_image,
                                        const enc::EmbeddingBundle& neg_image,
                                        double margin, std::size_t k);

struct LossBreakdown {
  ad::Tensor total;
  double global = 0.0;
  double local = 0.0;     // mean over triplets
  double relation = 0.0;  // mean over triplets with relations
  std::size_t relation_skipped = 0;
};

// w_g L_global + w_l mean(L_local) + w_r mean(L_relation), with channel
// weights taken from cfg's mode.
LossBreakdown total_loss(std::span<const Triplet> triplets,
                         std::span<const enc::EmbeddingBundle> images,
                         std::span<const enc::EmbeddingBundle> texts,
                         const LossConfig& cfg);

}  // namespace cran::align

#endif  // CRAN_ALIGNMENT_HPP_
