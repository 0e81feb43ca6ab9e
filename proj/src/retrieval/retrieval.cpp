#include "cran/retrieval.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "cran/alignment.hpp"
#include "cran/tape.hpp"

namespace cran::retrieval {

using ad::Tensor;

std::string to_string(Direction direction) {
  return direction == Direction::kImageToText ? "image_to_text" : "text_to_image";
}

nlohmann::json RetrievalReport::to_json() const {
  nlohmann::json j = {{"direction", to_string(direction)},
                      {"num_queries", num_queries()},
                      {"mode", cran::to_string(mode)}};
  for (const auto& [k, score] : recall_at) j["R@" + std::to_string(k)] = score;
  return j;
}

namespace {

// Column vector of a [d x 1] tensor against every column of a [d x n] one.
std::vector<double> column_dots(const Tensor& matrix, const Tensor& vec) {
  if (matrix.rows() != vec.rows()) {
    throw std::invalid_argument("similarity: dimension mismatch " +
                                std::to_string(matrix.rows()) + " vs " +
                                std::to_string(vec.rows()));
  }
  const std::size_t rows = matrix.rows(), cols = matrix.cols();
  auto m = matrix.data();
  auto v = vec.data();
  std::vector<double> out(cols, 0.0);
  for (std::size_t c = 0; c < cols; ++c) {
    double s = 0.0;
    for (std::size_t r = 0; r < rows; ++r) s += m[r * cols + c] * v[r];
    out[c] = s;
  }
  return out;
}

double knn_mean(const Tensor& candidates, const Tensor& query, std::size_t k) {
  const auto scores = column_dots(candidates, query);
  const auto chosen = align::top_k(scores, k);
  double s = 0.0;
  for (auto idx : chosen) s += scores[idx];
  return s / static_cast<double>(chosen.size());
}

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(std::string("similarity: missing ") + what);
}

}  // namespace

double cross_media_similarity(const enc::EmbeddingBundle& image,
                              const enc::EmbeddingBundle& text, std::size_t k,
                              Mode mode) {
  if (k == 0) throw std::invalid_argument("similarity: K must be >= 1");
  const Channels ch = channels_for(mode);
  require(image.global.defined() && text.global.defined(), "global vectors");
  if (image.global.shape() != text.global.shape()) {
    throw std::invalid_argument("similarity: dimension mismatch " +
                                ad::shape_str(image.global.shape()) + " vs " +
                                ad::shape_str(text.global.shape()));
  }
  double sim = column_dots(image.global, text.global)[0];
  if (ch.local) {
    require(image.num_locals() > 0 && text.locals.defined(), "local vectors");
    sim += knn_mean(image.locals, text.locals, k);
  }
  if (ch.relation && image.num_relations() > 0) {
    require(text.relations.defined(), "text relation vector");
    sim += knn_mean(image.relations, text.relations, k);
  }
  return sim;
}

std::vector<std::size_t> rank(const enc::EmbeddingBundle& query,
                              std::span<const enc::EmbeddingBundle> gallery,
                              Direction direction, std::size_t k, Mode mode) {
  if (gallery.empty()) throw std::invalid_argument("rank: empty gallery");
  std::vector<double> scores(gallery.size());
  for (std::size_t g = 0; g < gallery.size(); ++g) {
    scores[g] = direction == Direction::kImageToText
                    ? cross_media_similarity(query, gallery[g], k, mode)
                    : cross_media_similarity(gallery[g], query, k, mode);
  }
  std::vector<std::size_t> order(gallery.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });
  return order;
}

double recall_at_k(std::span<const std::size_t> ranks, std::size_t k) {
  if (k < 1) throw std::invalid_argument("recall_at_k: K must be >= 1");
  if (ranks.empty()) throw std::invalid_argument("recall_at_k: no queries");
  std::size_t hits = 0;
  for (auto r : ranks) {
    if (r < 1) throw std::invalid_argument("recall_at_k: ranks are 1-based");
    if (r <= k) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(ranks.size());
}

std::size_t best_rank(std::span<const std::size_t> order,
                      std::span<const std::size_t> ground_truth) {
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    if (std::find(ground_truth.begin(), ground_truth.end(), order[pos]) !=
        ground_truth.end()) {
      return pos + 1;
    }
  }
  throw std::invalid_argument("best_rank: no ground truth in the gallery");
}

namespace {

template <typename Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn fn) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> threads;
  for (std::size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&, w] {
      ad::NoGradScope no_grad;
      for (std::size_t i = w; i < n; i += workers) fn(i);
    });
  }
  for (auto& t : threads) t.join();
}

}  // namespace

Evaluation evaluate(const data::Dataset& dataset, data::Split split,
                    const enc::EncoderParams& params, const enc::EncoderConfig& cfg,
                    const EvalOptions& options) {
  const auto members = dataset.indices(split);
  if (members.empty()) {
    throw std::invalid_argument("evaluate: split " + data::to_string(split) +
                                " is empty");
  }
  if (dataset.meta().feature_dim != cfg.feature_dim) {
    throw std::invalid_argument("evaluate: dataset feature_dim " +
                                std::to_string(dataset.meta().feature_dim) +
                                " does not match model feature_dim " +
                                std::to_string(cfg.feature_dim));
  }
  ad::NoGradScope no_grad;
  const std::size_t n = members.size();
  const Channels ch = channels_for(options.mode);
  const enc::Alphabet alphabet(cfg.alphabet);

  std::vector<enc::EmbeddingBundle> images(n), texts(n);
  parallel_for(n, options.workers, [&](std::size_t i) {
    const auto& rec = dataset.records()[members[i]];
    images[i] = enc::encode_image(rec.image, params, cfg, ch);
    texts[i] = enc::encode_text(
        enc::make_text_instance(rec.caption, alphabet, cfg.seq_len), params, cfg, ch);
  });

  // Split-local positions of ground truths.
  std::vector<std::size_t> local_of(dataset.size(), 0);
  for (std::size_t i = 0; i < n; ++i) local_of[members[i]] = i;

  Evaluation ev;
  ev.similarity.assign(n, std::vector<double>(n));
  parallel_for(n, options.workers, [&](std::size_t p) {
    for (std::size_t q = 0; q < n; ++q) {
      ev.similarity[p][q] =
          cross_media_similarity(images[p], texts[q], options.k, options.mode);
    }
  });
  for (auto idx : members) ev.ids.push_back(dataset.records()[idx].id);

  auto ordered = [](const std::vector<double>& scores) {
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (scores[a] != scores[b]) return scores[a] > scores[b];
      return a < b;
    });
    return order;
  };

  ev.image_to_text.direction = Direction::kImageToText;
  ev.text_to_image.direction = Direction::kTextToImage;
  ev.image_to_text.mode = ev.text_to_image.mode = options.mode;
  for (std::size_t p = 0; p < n; ++p) {
    std::vector<std::size_t> truth;
    for (auto q : dataset.texts_for_image(members[p])) truth.push_back(local_of[q]);
    ev.image_to_text.ranks.push_back(best_rank(ordered(ev.similarity[p]), truth));
  }
  for (std::size_t q = 0; q < n; ++q) {
    std::vector<double> column(n);
    for (std::size_t p = 0; p < n; ++p) column[p] = ev.similarity[p][q];
    std::vector<std::size_t> truth;
    for (auto p : dataset.images_for_text(members[q])) truth.push_back(local_of[p]);
    ev.text_to_image.ranks.push_back(best_rank(ordered(column), truth));
  }
  for (auto k : options.recall_ks) {
    ev.image_to_text.recall_at[k] = recall_at_k(ev.image_to_text.ranks, k);
    ev.text_to_image.recall_at[k] = recall_at_k(ev.text_to_image.ranks, k);
  }
  return ev;
}

void write_similarity_csv(const std::string& path, const Evaluation& evaluation) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.precision(17);
  out << "image\\text";
  for (const auto& id : evaluation.ids) out << ',' << id;
  out << '\n';
  for (std::size_t p = 0; p < evaluation.similarity.size(); ++p) {
    out << evaluation.ids[p];
    for (double s : evaluation.similarity[p]) out << ',' << s;
    out << '\n';
  }
}

}  // namespace cran::retrieval
