#ifndef CRAN_ENCODERS_HPP_
#define CRAN_ENCODERS_HPP_

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cran/encoder_config.hpp"
#include "cran/encoder_params.hpp"
#include "cran/mode.hpp"
#include "cran/tensor.hpp"

namespace cran::enc {

struct TextInstance {
  std::string raw;
  ad::Tensor onehot;  // [alphabet x seq_len]
};

struct ImageInstance {
  std::vector<double> global_feat;
  std::vector<std::vector<double>> regions;
};

// Common-space representations of one instance. Columns of `locals` and
// `relations` are individual vectors: one each for text, n and n(n-1) for an
// image with n regions.
struct EmbeddingBundle {
  ad::Tensor global;     // [common x 1]
  ad::Tensor locals;     // [common x n_local]; undefined if not computed
  ad::Tensor relations;  // [common x n_rel]; undefined if none
  // Set when an image has fewer than two regions.
  bool relations_disabled = false;
  std::vector<double> attn_local;
  std::vector<double> attn_relation;

  std::size_t num_locals() const { return locals.defined() ? locals.cols() : 0; }
  std::size_t num_relations() const {
    return relations.defined() ? relations.cols() : 0;
  }
  std::vector<double> local(std::size_t k) const;
  std::vector<double> relation(std::size_t k) const;
  std::vector<double> global_vec() const;
};

// Lowercases, truncates to `seq_len` and one-hot encodes. Unknown characters
// and padding columns are all-zero.
ad::Tensor encode_chars(std::string_view raw, const Alphabet& alphabet,
                        std::size_t seq_len);
TextInstance make_text_instance(std::string raw, const Alphabet& alphabet,
                                std::size_t seq_len);

// conv -> ReLU -> (optional) temporal max-pool per layer. Returns
// [last kernels x frames]. Throws std::invalid_argument naming the minimum
// length when the input is too short for the stack.
ad::Tensor char_cnn_forward(const ad::Tensor& onehot,
                            std::span<const ConvParams> stack,
                            const EncoderConfig& cfg);

// Per-step gate values, recorded when a trace is passed to lstm_forward.
struct LstmTrace {
  std::vector<ad::Tensor> input_gate, forget_gate, output_gate, cell_tanh;
};

// Runs the recurrence over the columns of `frames` ([input x m]) and returns
// H = [hidden x m].
ad::Tensor lstm_forward(const ad::Tensor& frames, const LstmParams& lstm,
                        const ad::Tensor& h0, const ad::Tensor& c0,
                        LstmTrace* trace = nullptr);
ad::Tensor lstm_forward(const ad::Tensor& frames, const LstmParams& lstm);

ad::Tensor mean_pool(const ad::Tensor& hidden);

struct AttentionOutput {
  ad::Tensor pooled;   // [hidden x 1]
  ad::Tensor weights;  // [1 x m]
};

// M = tanh(W_a H), a = softmax(w_a M), pooled = (1/m) sum_k a_k h_k.
AttentionOutput attention_pool(const ad::Tensor& hidden,
                               const AttentionParams& attn);

// Ordered region pairs (j, k), j != k, j-major.
std::vector<std::pair<std::size_t, std::size_t>> relation_pairs(std::size_t n);

struct RelationCandidates {
  std::vector<std::vector<double>> vectors;
  // True (and vectors empty) when fewer than two regions exist.
  bool disabled = false;
};

// Concatenations {r_j; r_k} over relation_pairs(n).
RelationCandidates build_relations(
    const std::vector<std::vector<double>>& regions);
// Same construction on a [dim x n] matrix; undefined result when n < 2.
ad::Tensor build_relations(const ad::Tensor& regions);

ad::Tensor project(const ad::Tensor& input, const HeadParams& head,
                   bool apply_tanh = false);

EmbeddingBundle encode_text(const TextInstance& text, const EncoderParams& params,
                            const EncoderConfig& cfg, Channels channels = {});
EmbeddingBundle encode_image(const ImageInstance& image,
                             const EncoderParams& params,
                             const EncoderConfig& cfg, Channels channels = {});

}  // namespace cran::enc

#endif  // CRAN_ENCODERS_HPP_
