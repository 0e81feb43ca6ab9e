#include "cran/encoders.hpp"

#include <cctype>
#include <stdexcept>

#include "cran/ops.hpp"

namespace cran::enc {

using ad::Tensor;

namespace {

std::vector<double> column_of(const Tensor& m, std::size_t k) {
  if (!m.defined() || k >= m.cols()) {
    throw std::out_of_range("embedding: column " + std::to_string(k) +
                            " out of range");
  }
  std::vector<double> v(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) v[r] = m.at(r, k);
  return v;
}

void check_dim(std::string_view what, std::size_t got, std::size_t want) {
  if (got != want) {
    throw std::invalid_argument(std::string(what) + ": dimension " +
                                std::to_string(got) + " does not match " +
                                std::to_string(want));
  }
}

Tensor regions_matrix(const std::vector<std::vector<double>>& regions,
                      std::size_t dim) {
  const std::size_t n = regions.size();
  std::vector<double> data(dim * n);
  for (std::size_t k = 0; k < n; ++k) {
    check_dim("image region " + std::to_string(k), regions[k].size(), dim);
    for (std::size_t r = 0; r < dim; ++r) data[r * n + k] = regions[k][r];
  }
  return Tensor::matrix(dim, n, std::move(data));
}

}  // namespace

std::vector<double> EmbeddingBundle::local(std::size_t k) const {
  return column_of(locals, k);
}

std::vector<double> EmbeddingBundle::relation(std::size_t k) const {
  return column_of(relations, k);
}

std::vector<double> EmbeddingBundle::global_vec() const {
  return column_of(global, 0);
}

Tensor encode_chars(std::string_view raw, const Alphabet& alphabet,
                    std::size_t seq_len) {
  if (seq_len == 0) throw std::invalid_argument("encode_chars: length must be >= 1");
  const std::size_t rows = alphabet.size();
  std::vector<double> data(rows * seq_len, 0.0);
  const std::size_t used = std::min(raw.size(), seq_len);
  for (std::size_t t = 0; t < used; ++t) {
    const char c = static_cast<char>(
        std::tolower(static_cast<unsigned char>(raw[t])));
    if (auto idx = alphabet.index_of(c)) data[*idx * seq_len + t] = 1.0;
  }
  return Tensor::matrix(rows, seq_len, std::move(data));
}

TextInstance make_text_instance(std::string raw, const Alphabet& alphabet,
                                std::size_t seq_len) {
  Tensor onehot = encode_chars(raw, alphabet, seq_len);
  return {std::move(raw), std::move(onehot)};
}

Tensor char_cnn_forward(const Tensor& onehot, std::span<const ConvParams> stack,
                        const EncoderConfig& cfg) {
  if (stack.size() != cfg.conv.size()) {
    throw std::invalid_argument("char_cnn: " + std::to_string(stack.size()) +
                                " layers given, configuration has " +
                                std::to_string(cfg.conv.size()));
  }
  if (!conv_output_frames(cfg, onehot.cols())) {
    throw std::invalid_argument(
        "char_cnn: sequence of " + std::to_string(onehot.cols()) +
        " columns is shorter than the receptive field; need at least " +
        std::to_string(min_sequence_length(cfg)));
  }
  Tensor x = onehot;
  for (std::size_t i = 0; i < stack.size(); ++i) {
    x = ad::relu(ad::conv1d(x, stack[i].weight, stack[i].bias));
    if (cfg.conv[i].pool) x = ad::maxpool1d(x, cfg.pool_width, cfg.pool_stride);
  }
  return x;
}

Tensor lstm_forward(const Tensor& frames, const LstmParams& lstm,
                    const Tensor& h0, const Tensor& c0, LstmTrace* trace) {
  const std::size_t hidden = lstm.U_i.rows();
  if (frames.rows() != lstm.W_i.cols()) {
    throw std::invalid_argument("lstm: frame dimension " +
                                std::to_string(frames.rows()) +
                                " does not match input weights " +
                                ad::shape_str(lstm.W_i.shape()));
  }
  if (h0.shape() != ad::Shape{hidden, 1} || c0.shape() != ad::Shape{hidden, 1}) {
    throw std::invalid_argument("lstm: initial states must be [" +
                                std::to_string(hidden) + "x1], got " +
                                ad::shape_str(h0.shape()) + " and " +
                                ad::shape_str(c0.shape()));
  }
  // Input contributions for all steps at once: W x_t + b.
  const Tensor xi = ad::add(ad::matmul(lstm.W_i, frames), lstm.b_i);
  const Tensor xf = ad::add(ad::matmul(lstm.W_f, frames), lstm.b_f);
  const Tensor xo = ad::add(ad::matmul(lstm.W_o, frames), lstm.b_o);
  const Tensor xu = ad::add(ad::matmul(lstm.W_u, frames), lstm.b_u);

  Tensor h = h0;
  Tensor c = c0;
  std::vector<Tensor> states;
  states.reserve(frames.cols());
  for (std::size_t t = 0; t < frames.cols(); ++t) {
    Tensor i = ad::sigmoid(ad::add(ad::column(xi, t), ad::matmul(lstm.U_i, h)));
    Tensor f = ad::sigmoid(ad::add(ad::column(xf, t), ad::matmul(lstm.U_f, h)));
    Tensor o = ad::sigmoid(ad::add(ad::column(xo, t), ad::matmul(lstm.U_o, h)));
    Tensor u = ad::tanh(ad::add(ad::column(xu, t), ad::matmul(lstm.U_u, h)));
    c = ad::add(ad::mul(c, f), ad::mul(u, i));
    Tensor squashed = ad::tanh(c);
    h = ad::mul(o, squashed);
    if (trace) {
      trace->input_gate.push_back(i);
      trace->forget_gate.push_back(f);
      trace->output_gate.push_back(o);
      trace->cell_tanh.push_back(squashed);
    }
    states.push_back(h);
  }
  return ad::concat(states, 1);
}

Tensor lstm_forward(const Tensor& frames, const LstmParams& lstm) {
  const std::size_t hidden = lstm.U_i.rows();
  return lstm_forward(frames, lstm, Tensor::zeros({hidden, 1}),
                      Tensor::zeros({hidden, 1}));
}

Tensor mean_pool(const Tensor& hidden) {
  if (!hidden.defined()) throw std::invalid_argument("mean_pool: empty sequence");
  return ad::mean_cols(hidden);
}

AttentionOutput attention_pool(const Tensor& hidden, const AttentionParams& attn) {
  if (attn.W_a.cols() != hidden.rows()) {
    throw std::invalid_argument("attention: W_a " + ad::shape_str(attn.W_a.shape()) +
                                " incompatible with hidden sequence " +
                                ad::shape_str(hidden.shape()));
  }
  const Tensor scores = ad::matmul(attn.w_a, ad::tanh(ad::matmul(attn.W_a, hidden)));
  Tensor weights = ad::softmax(scores);
  const double inv_m = 1.0 / static_cast<double>(hidden.cols());
  Tensor pooled = ad::scale(ad::matmul(hidden, ad::transpose(weights)), inv_m);
  return {std::move(pooled), std::move(weights)};
}

std::vector<std::pair<std::size_t, std::size_t>> relation_pairs(std::size_t n) {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  if (n < 2) return pairs;
  pairs.reserve(n * (n - 1));
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t k = 0; k < n; ++k) {
      if (j != k) pairs.emplace_back(j, k);
    }
  }
  return pairs;
}

RelationCandidates build_relations(const std::vector<std::vector<double>>& regions) {
  RelationCandidates out;
  if (regions.size() < 2) {
    out.disabled = true;
    return out;
  }
  for (const auto& r : regions) {
    check_dim("build_relations", r.size(), regions.front().size());
  }
  for (auto [j, k] : relation_pairs(regions.size())) {
    std::vector<double> v = regions[j];
    v.insert(v.end(), regions[k].begin(), regions[k].end());
    out.vectors.push_back(std::move(v));
  }
  return out;
}

Tensor build_relations(const Tensor& regions) {
  const auto pairs = relation_pairs(regions.cols());
  if (pairs.empty()) return {};
  std::vector<std::size_t> first, second;
  for (auto [j, k] : pairs) {
    first.push_back(j);
    second.push_back(k);
  }
  const Tensor parts[] = {ad::gather_cols(regions, first),
                          ad::gather_cols(regions, second)};
  return ad::concat(parts, 0);
}

Tensor project(const Tensor& input, const HeadParams& head, bool apply_tanh) {
  if (input.rows() != head.weight.cols()) {
    throw std::invalid_argument("project: input " + ad::shape_str(input.shape()) +
                                " does not match head " +
                                ad::shape_str(head.weight.shape()));
  }
  Tensor out = ad::add(ad::matmul(head.weight, input), head.bias);
  return apply_tanh ? ad::tanh(out) : out;
}

EmbeddingBundle encode_text(const TextInstance& text, const EncoderParams& params,
                            const EncoderConfig& cfg, Channels channels) {
  const bool shared = params.trunks.size() == 1;
  Tensor shared_hidden;
  auto hidden_for = [&](TextBranch branch) {
    if (shared) {
      if (!shared_hidden.defined()) {
        const auto& trunk = params.trunk(branch);
        shared_hidden = lstm_forward(char_cnn_forward(text.onehot, trunk.conv, cfg),
                                     trunk.lstm);
      }
      return shared_hidden;
    }
    const auto& trunk = params.trunk(branch);
    return lstm_forward(char_cnn_forward(text.onehot, trunk.conv, cfg), trunk.lstm);
  };

  EmbeddingBundle bundle;
  if (channels.global) {
    bundle.global = project(mean_pool(hidden_for(TextBranch::kGlobal)),
                            params.text_global, cfg.head_tanh);
  }
  if (channels.local) {
    auto att = attention_pool(hidden_for(TextBranch::kLocal), params.attn_local);
    bundle.locals = project(att.pooled, params.text_local, cfg.head_tanh);
    bundle.attn_local.assign(att.weights.data().begin(), att.weights.data().end());
  }
  if (channels.relation) {
    auto att = attention_pool(hidden_for(TextBranch::kRelation), params.attn_relation);
    bundle.relations = project(att.pooled, params.text_relation, cfg.head_tanh);
    bundle.attn_relation.assign(att.weights.data().begin(),
                                att.weights.data().end());
  }
  return bundle;
}

EmbeddingBundle encode_image(const ImageInstance& image, const EncoderParams& params,
                             const EncoderConfig& cfg, Channels channels) {
  if (image.regions.empty()) {
    throw std::invalid_argument("encode_image: image has no regions");
  }
  check_dim("image global feature", image.global_feat.size(), cfg.feature_dim);
  EmbeddingBundle bundle;
  if (channels.global) {
    bundle.global = project(Tensor::column(image.global_feat), params.image_global,
                            cfg.head_tanh);
  }
  const Tensor regions = regions_matrix(image.regions, cfg.feature_dim);
  if (channels.local) {
    bundle.locals = project(regions, params.image_local, cfg.head_tanh);
  }
  bundle.relations_disabled = image.regions.size() < 2;
  if (channels.relation && !bundle.relations_disabled) {
    bundle.relations = project(build_relations(regions), params.image_relation,
                               cfg.head_tanh);
  }
  return bundle;
}

}  // namespace cran::enc
