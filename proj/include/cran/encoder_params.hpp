#ifndef CRAN_ENCODER_PARAMS_HPP_
#define CRAN_ENCODER_PARAMS_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cran/encoder_config.hpp"
#include "cran/gradcheck.hpp"
#include "cran/tensor.hpp"

namespace cran::enc {

struct ConvParams {
  ad::Tensor weight;  // [kernels x in_channels x width]
  ad::Tensor bias;    // [kernels x 1]
};

// Gate weights for input (i), forget (f), output (o) and cell update (u).
struct LstmParams {
  ad::Tensor W_i, W_f, W_o, W_u;  // [hidden x input]
  ad::Tensor U_i, U_f, U_o, U_u;  // [hidden x hidden]
  ad::Tensor b_i, b_f, b_o, b_u;  // [hidden x 1]
};

// Char-CNN followed by an LSTM.
struct TrunkParams {
  std::vector<ConvParams> conv;
  LstmParams lstm;
};

struct AttentionParams {
  ad::Tensor W_a;  // [attn_dim x hidden]
  ad::Tensor w_a;  // [1 x attn_dim]
};

struct HeadParams {
  ad::Tensor weight;  // [common x input]
  ad::Tensor bias;    // [common x 1]
};

enum class TextBranch { kGlobal = 0, kLocal = 1, kRelation = 2 };

struct EncoderParams {
  // One trunk per text branch, or a single shared trunk.
  std::vector<TrunkParams> trunks;
  AttentionParams attn_local;
  AttentionParams attn_relation;
  HeadParams text_global, text_local, text_relation;
  HeadParams image_global, image_local, image_relation;

  const TrunkParams& trunk(TextBranch branch) const;

  // Glorot-uniform weights from a seeded generator; see init_params.
  static EncoderParams init(const EncoderConfig& cfg, std::uint64_t seed);

  // Stable, ordered (name, tensor) listing; tensors share storage.
  std::vector<ad::NamedTensor> named() const;

  // Replaces every tensor with the checkpoint entry of the same name.
  // Throws std::runtime_error on a missing name or shape mismatch.
  static EncoderParams from_named(const EncoderConfig& cfg,
                                  const std::map<std::string, ad::Tensor>& named);

  EncoderParams clone() const;
  void set_requires_grad(bool on) const;
  void zero_grad() const;
};

}  // namespace cran::enc

#endif  // CRAN_ENCODER_PARAMS_HPP_
