#include "cran/alignment.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>

#include "cran/ops.hpp"

namespace cran::align {

using ad::Tensor;

double LossConfig::effective_local() const {
  return (mode == Mode::kLocal || mode == Mode::kFull) ? w_local : 0.0;
}

double LossConfig::effective_relation() const {
  return (mode == Mode::kRelation || mode == Mode::kFull) ? w_relation : 0.0;
}

void LossConfig::validate() const {
  if (!(margin >= 0.0)) throw std::invalid_argument("loss: margin must be >= 0");
  if (k == 0) throw std::invalid_argument("loss: K must be >= 1");
  if (!(w_global >= 0.0 && w_local >= 0.0 && w_relation >= 0.0)) {
    throw std::invalid_argument("loss: weights must be >= 0");
  }
  if (w_global == 0.0 && effective_local() == 0.0 && effective_relation() == 0.0) {
    throw std::invalid_argument("loss: all effective loss weights are zero");
  }
}

std::vector<Triplet> sample_triplets(std::span<const std::size_t> groups,
                                     std::mt19937_64& rng) {
  if (groups.size() < 2) {
    throw std::invalid_argument("sample_triplets: batch of " +
                                std::to_string(groups.size()) +
                                " has no negative");
  }
  std::vector<Triplet> triplets;
  triplets.reserve(groups.size());
  std::vector<std::size_t> candidates;
  for (std::size_t a = 0; a < groups.size(); ++a) {
    candidates.clear();
    for (std::size_t b = 0; b < groups.size(); ++b) {
      if (groups[b] != groups[a]) candidates.push_back(b);
    }
    if (candidates.empty()) {
      throw std::invalid_argument("sample_triplets: member " + std::to_string(a) +
                                  " has no mismatched partner in the batch");
    }
    std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
    const std::size_t neg_text = candidates[pick(rng)];
    const std::size_t neg_image = candidates[pick(rng)];
    triplets.push_back({a, neg_text, neg_image});
  }
  return triplets;
}

std::vector<std::size_t> top_k(std::span<const double> scores, std::size_t k) {
  if (scores.empty()) throw std::invalid_argument("knn_select: no candidates");
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  const std::size_t keep = std::min(k, scores.size());
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(keep),
                    idx.end(), [&](std::size_t a, std::size_t b) {
                      if (scores[a] != scores[b]) return scores[a] > scores[b];
                      return a < b;
                    });
  idx.resize(keep);
  return idx;
}

std::vector<std::size_t> knn_select(std::span<const double> query,
                                    const std::vector<std::vector<double>>& candidates,
                                    std::size_t k) {
  if (candidates.empty()) throw std::invalid_argument("knn_select: no candidates");
  std::vector<double> scores;
  scores.reserve(candidates.size());
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    if (candidates[c].size() != query.size()) {
      throw std::invalid_argument("knn_select: candidate " + std::to_string(c) +
                                  " has dimension " +
                                  std::to_string(candidates[c].size()) +
                                  ", query has " + std::to_string(query.size()));
    }
    double s = 0.0;
    for (std::size_t d = 0; d < query.size(); ++d) s += query[d] * candidates[c][d];
    scores.push_back(s);
  }
  return top_k(scores, k);
}

namespace {

Tensor hinge(double margin, const Tensor& positive, const Tensor& negative) {
  return ad::relu(ad::add(ad::sub(negative, positive), Tensor::scalar(margin)));
}

void require_bundles(std::span<const enc::EmbeddingBundle> images,
                     std::span<const enc::EmbeddingBundle> texts,
                     const Triplet& t) {
  const std::size_t hi = std::max({t.anchor, t.neg_text, t.neg_image});
  if (hi >= images.size() || hi >= texts.size()) {
    throw std::invalid_argument("loss: triplet refers to member " +
                                std::to_string(hi) + " outside the batch");
  }
}

}  // namespace

Tensor global_loss(std::span<const Triplet> triplets,
                   std::span<const enc::EmbeddingBundle> images,
                   std::span<const enc::EmbeddingBundle> texts, double margin) {
  if (triplets.empty()) throw std::invalid_argument("global_loss: no triplets");
  std::vector<Tensor> terms;
  terms.reserve(2 * triplets.size());
  for (const auto& t : triplets) {
    require_bundles(images, texts, t);
    const Tensor& gi = images[t.anchor].global;
    const Tensor& gt = texts[t.anchor].global;
    const Tensor pos = ad::dot(gi, gt);
    terms.push_back(hinge(margin, pos, ad::dot(gi, texts[t.neg_text].global)));
    terms.push_back(hinge(margin, pos, ad::dot(images[t.neg_image].global, gt)));
  }
  return ad::scale(ad::sum(ad::concat(terms, 1)),
                   1.0 / static_cast<double>(triplets.size()));
}

Tensor knn_mean_similarity(const Tensor& query, const Tensor& candidates,
                           std::size_t k) {
  if (!candidates.defined()) {
    throw std::invalid_argument("knn: no candidate vectors");
  }
  if (query.rows() != candidates.rows() || query.cols() != 1) {
    throw std::invalid_argument("knn: query " + ad::shape_str(query.shape()) +
                                " incompatible with candidates " +
                                ad::shape_str(candidates.shape()));
  }
  const Tensor scores = ad::matmul(ad::transpose(query), candidates);
  const auto chosen = top_k(scores.data(), k);
  return ad::mean_cols(ad::gather_cols(scores, chosen));
}

Tensor knn_hinge(const Tensor& query, const Tensor& positives,
                 const Tensor& negatives, double margin, std::size_t k) {
  return hinge(margin, knn_mean_similarity(query, positives, k),
               knn_mean_similarity(query, negatives, k));
}

Tensor local_loss(const enc::EmbeddingBundle& text,
                  const enc::EmbeddingBundle& pos_image,
                  const enc::EmbeddingBundle& neg_image, double margin,
                  std::size_t k) {
  if (!text.locals.defined() || pos_image.num_locals() == 0 ||
      neg_image.num_locals() == 0) {
    throw std::invalid_argument("local_loss: missing local representations");
  }
  return knn_hinge(text.locals, pos_image.locals, neg_image.locals, margin, k);
}

std::optional<Tensor> relation_loss(const enc::EmbeddingBundle& text,
                                    const enc::EmbeddingBundle& pos_image,
                                    const enc::EmbeddingBundle& neg_image,
                                    double margin, std::size_t k) {
  if (pos_image.num_relations() == 0 || neg_image.num_relations() == 0) {
    return std::nullopt;
  }
  if (!text.relations.defined()) {
    throw std::invalid_argument("relation_loss: missing text relation representation");
  }
  return knn_hinge(text.relations, pos_image.relations, neg_image.relations,
                   margin, k);
}

LossBreakdown total_loss(std::span<const Triplet> triplets,
                         std::span<const enc::EmbeddingBundle> images,
                         std::span<const enc::EmbeddingBundle> texts,
                         const LossConfig& cfg) {
  cfg.validate();
  if (triplets.empty()) throw std::invalid_argument("total_loss: no triplets");
  LossBreakdown out;
  std::vector<Tensor> parts;

  if (cfg.w_global > 0.0) {
    Tensor g = global_loss(triplets, images, texts, cfg.margin);
    out.global = g.item();
    parts.push_back(ad::scale(g, cfg.w_global));
  }
  if (const double w = cfg.effective_local(); w > 0.0) {
    std::vector<Tensor> terms;
    for (const auto& t : triplets) {
      require_bundles(images, texts, t);
      terms.push_back(local_loss(texts[t.anchor], images[t.anchor],
                                 images[t.neg_image], cfg.margin, cfg.k));
    }
    Tensor mean = ad::mean_cols(ad::concat(terms, 1));
    out.local = mean.item();
    parts.push_back(ad::scale(mean, w));
  }
  if (const double w = cfg.effective_relation(); w > 0.0) {
    std::vector<Tensor> terms;
    for (const auto& t : triplets) {
      require_bundles(images, texts, t);
      auto term = relation_loss(texts[t.anchor], images[t.anchor],
                                images[t.neg_image], cfg.margin, cfg.k);
      if (term) {
        terms.push_back(*term);
      } else {
        ++out.relation_skipped;
      }
    }
    if (!terms.empty()) {
      Tensor mean = ad::mean_cols(ad::concat(terms, 1));
      out.relation = mean.item();
      parts.push_back(ad::scale(mean, w));
    }
  }

  if (parts.empty()) {
    out.total = Tensor::scalar(0.0);
  } else {
    out.total = parts.front();
    for (std::size_t i = 1; i < parts.size(); ++i) out.total = ad::add(out.total, parts[i]);
  }
  return out;
}

}  // namespace cran::align
