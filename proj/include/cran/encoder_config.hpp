#ifndef CRAN_ENCODER_CONFIG_HPP_
#define CRAN_ENCODER_CONFIG_HPP_

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cran::enc {

// Ordered symbol set for one-hot character encoding. Lookup is by byte.
class Alphabet {
 public:
  explicit Alphabet(std::string symbols);

  // 26 lowercase letters, 10 digits, 33 punctuation/space symbols, newline.
  static const std::string& default_symbols();

  std::size_t size() const { return symbols_.size(); }
  const std::string& symbols() const { return symbols_; }
  std::optional<std::size_t> index_of(char c) const;

 private:
  std::string symbols_;
  std::array<int, 256> lookup_{};
};

struct ConvLayerSpec {
  std::size_t kernels = 0;
  std::size_t width = 0;
  // Temporal max-pool after this layer's activation.
  bool pool = false;
};

struct EncoderConfig {
  std::string alphabet = Alphabet::default_symbols();
  std::size_t seq_len = 60;
  std::vector<ConvLayerSpec> conv = {{8, 3, true}, {8, 3, false}, {16, 3, false}};
  std::size_t pool_width = 3;
  std::size_t pool_stride = 3;
  std::size_t hidden = 32;
  // Rows of the attention projection W_a.
  std::size_t attn_dim = 32;
  std::size_t common_dim = 32;
  // Dimensionality of image global and region features.
  std::size_t feature_dim = 32;
  bool share_text_trunk = false;
  // Apply tanh after each projection head.
  bool head_tanh = false;

  static EncoderConfig desk();
  static EncoderConfig paper();

  // Throws std::invalid_argument describing the first invalid field.
  void validate() const;
};

// Number of frames the conv stack yields for `seq_len` input columns, or
// nullopt if some stage would receive fewer columns than its window.
std::optional<std::size_t> conv_output_frames(const EncoderConfig& cfg,
                                              std::size_t seq_len);
// Smallest input length the conv stack accepts.
std::size_t min_sequence_length(const EncoderConfig& cfg);

}  // namespace cran::enc

#endif  // CRAN_ENCODER_CONFIG_HPP_
