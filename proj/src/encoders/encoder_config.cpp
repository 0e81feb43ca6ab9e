#include "cran/encoder_config.hpp"

#include <stdexcept>

namespace cran::enc {

Alphabet::Alphabet(std::string symbols) : symbols_(std::move(symbols)) {
  if (symbols_.empty()) throw std::invalid_argument("alphabet: empty");
  lookup_.fill(-1);
  for (std::size_t i = 0; i < symbols_.size(); ++i) {
    auto byte = static_cast<unsigned char>(symbols_[i]);
    if (lookup_[byte] != -1) {
      throw std::invalid_argument(std::string("alphabet: duplicate symbol '") +
                                  symbols_[i] + "'");
    }
    lookup_[byte] = static_cast<int>(i);
  }
}

const std::string& Alphabet::default_symbols() {
  static const std::string symbols =
      "abcdefghijklmnopqrstuvwxyz"
      "0123456789"
      " -,;.!?:'\"/\\|_@#$%^&*~`+=<>()[]{}"
      "\n";
  return symbols;
}

std::optional<std::size_t> Alphabet::index_of(char c) const {
  const int idx = lookup_[static_cast<unsigned char>(c)];
  if (idx < 0) return std::nullopt;
  return static_cast<std::size_t>(idx);
}

EncoderConfig EncoderConfig::desk() { return EncoderConfig{}; }

EncoderConfig EncoderConfig::paper() {
  EncoderConfig cfg;
  cfg.seq_len = 201;
  cfg.conv = {{384, 4, true}, {512, 4, false}, {2048, 4, false}};
  cfg.hidden = 2048;
  cfg.attn_dim = 2048;
  cfg.common_dim = 1024;
  cfg.feature_dim = 4096;
  return cfg;
}

void EncoderConfig::validate() const {
  Alphabet check(alphabet);
  if (seq_len == 0) throw std::invalid_argument("encoder: seq_len must be >= 1");
  if (conv.empty()) throw std::invalid_argument("encoder: empty conv stack");
  for (std::size_t i = 0; i < conv.size(); ++i) {
    if (conv[i].kernels == 0 || conv[i].width == 0) {
      throw std::invalid_argument("encoder: conv layer " + std::to_string(i) +
                                  " needs positive kernels and width");
    }
  }
  if (pool_width == 0 || pool_stride == 0) {
    throw std::invalid_argument("encoder: pool width/stride must be positive");
  }
  if (hidden == 0 || attn_dim == 0 || common_dim == 0 || feature_dim == 0) {
    throw std::invalid_argument("encoder: dimensions must be positive");
  }
  if (!conv_output_frames(*this, seq_len)) {
    throw std::invalid_argument(
        "encoder: seq_len " + std::to_string(seq_len) +
        " is shorter than the conv stack's receptive field (minimum " +
        std::to_string(min_sequence_length(*this)) + ")");
  }
}

std::optional<std::size_t> conv_output_frames(const EncoderConfig& cfg,
                                              std::size_t seq_len) {
  std::size_t t = seq_len;
  for (const auto& layer : cfg.conv) {
    if (t < layer.width) return std::nullopt;
    t = t - layer.width + 1;
    if (layer.pool) {
      if (t < cfg.pool_width) return std::nullopt;
      t = (t - cfg.pool_width) / cfg.pool_stride + 1;
    }
  }
  return t;
}

std::size_t min_sequence_length(const EncoderConfig& cfg) {
  std::size_t len = 1;
  while (!conv_output_frames(cfg, len)) ++len;
  return len;
}

}  // namespace cran::enc
