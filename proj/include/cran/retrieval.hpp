#ifndef CRAN_RETRIEVAL_HPP_
#define CRAN_RETRIEVAL_HPP_

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "cran/dataset.hpp"
#include "cran/encoders.hpp"
#include "cran/mode.hpp"

namespace cran::retrieval {

// Image annotation is image -> text; image retrieval is text -> image.
enum class Direction { kImageToText, kTextToImage };

std::string to_string(Direction direction);

struct RetrievalReport {
  Direction direction = Direction::kImageToText;
  Mode mode = Mode::kFull;
  // 1-based rank of the best-ranked ground truth, per query.
  std::vector<std::size_t> ranks;
  std::map<std::size_t, double> recall_at;

  std::size_t num_queries() const { return ranks.size(); }
  // {direction, R@1, R@5, R@10, num_queries, mode}
  nlohmann::json to_json() const;
};

// d(g_i, g_t) + (1/K') sum_{KNN} d(l_i_k, l_t) + (1/K') sum_{KNN} d(r_i_k, r_t),
// neighbours chosen against the text vector. The mode drops the local and/or
// relation terms; the relation term is also omitted when the image has none.
double cross_media_similarity(const enc::EmbeddingBundle& image,
                              const enc::EmbeddingBundle& text, std::size_t k,
                              Mode mode = Mode::kFull);

// Gallery positions by descending similarity to the query; ties go to the
// lower position. The query is an image for kImageToText, a text otherwise.
std::vector<std::size_t> rank(const enc::EmbeddingBundle& query,
                              std::span<const enc::EmbeddingBundle> gallery,
                              Direction direction, std::size_t k,
                              Mode mode = Mode::kFull);

// Fraction of ranks <= k.
double recall_at_k(std::span<const std::size_t> ranks, std::size_t k);

// 1-based position of the first gallery entry present in `ground_truth`.
std::size_t best_rank(std::span<const std::size_t> order,
                      std::span<const std::size_t> ground_truth);

struct EvalOptions {
  std::size_t k = 3;
  Mode mode = Mode::kFull;
  std::size_t workers = 1;
  std::vector<std::size_t> recall_ks = {1, 5, 10};
};

struct Evaluation {
  RetrievalReport image_to_text;
  RetrievalReport text_to_image;
  std::vector<std::string> ids;  // record ids of the evaluated split
  // similarity[p][q] = sim(image of ids[p], caption of ids[q])
  std::vector<std::vector<double>> similarity;
};

// Encodes the split once with frozen parameters and ranks every query
// against the full opposite-media gallery of the split.
Evaluation evaluate(const data::Dataset& dataset, data::Split split,
                    const enc::EncoderParams& params, const enc::EncoderConfig& cfg,
                    const EvalOptions& options = {});

void write_similarity_csv(const std::string& path, const Evaluation& evaluation);

}  // namespace cran::retrieval

#endif  // CRAN_RETRIEVAL_HPP_
