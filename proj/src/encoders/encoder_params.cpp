#include "cran/encoder_params.hpp"

#include <cmath>
#include <functional>
#include <random>
#include <stdexcept>

namespace cran::enc {

using ad::Shape;
using ad::Tensor;

namespace {

constexpr const char* kBranchNames[] = {"global", "local", "relation"};

using Visitor = std::function<void(const std::string&, Tensor&)>;

void visit_trunk(TrunkParams& trunk, const std::string& prefix,
                 const Visitor& fn) {
  for (std::size_t i = 0; i < trunk.conv.size(); ++i) {
    const std::string p = prefix + ".conv" + std::to_string(i);
    fn(p + ".weight", trunk.conv[i].weight);
    fn(p + ".bias", trunk.conv[i].bias);
  }
  auto& l = trunk.lstm;
  const std::string p = prefix + ".lstm.";
  fn(p + "W_i", l.W_i);
  fn(p + "W_f", l.W_f);
  fn(p + "W_o", l.W_o);
  fn(p + "W_u", l.W_u);
  fn(p + "U_i", l.U_i);
  fn(p + "U_f", l.U_f);
  fn(p + "U_o", l.U_o);
  fn(p + "U_u", l.U_u);
  fn(p + "b_i", l.b_i);
  fn(p + "b_f", l.b_f);
  fn(p + "b_o", l.b_o);
  fn(p + "b_u", l.b_u);
}

void visit_head(HeadParams& head, const std::string& prefix, const Visitor& fn) {
  fn(prefix + ".weight", head.weight);
  fn(prefix + ".bias", head.bias);
}

void visit(EncoderParams& p, const Visitor& fn) {
  if (p.trunks.size() == 1) {
    visit_trunk(p.trunks[0], "text.shared", fn);
  } else {
    for (std::size_t b = 0; b < p.trunks.size(); ++b) {
      visit_trunk(p.trunks[b], std::string("text.") + kBranchNames[b], fn);
    }
  }
  fn("text.local.attn.W_a", p.attn_local.W_a);
  fn("text.local.attn.w_a", p.attn_local.w_a);
  fn("text.relation.attn.W_a", p.attn_relation.W_a);
  fn("text.relation.attn.w_a", p.attn_relation.w_a);
  visit_head(p.text_global, "text.global.head", fn);
  visit_head(p.text_local, "text.local.head", fn);
  visit_head(p.text_relation, "text.relation.head", fn);
  visit_head(p.image_global, "image.global.head", fn);
  visit_head(p.image_local, "image.local.head", fn);
  visit_head(p.image_relation, "image.relation.head", fn);
}

// Shapes only; values are zero.
EncoderParams skeleton(const EncoderConfig& cfg) {
  const std::size_t H = cfg.hidden;
  auto trunk = [&] {
    TrunkParams t;
    std::size_t in = Alphabet(cfg.alphabet).size();
    for (const auto& layer : cfg.conv) {
      t.conv.push_back({Tensor::zeros({layer.kernels, in, layer.width}),
                        Tensor::zeros({layer.kernels, 1})});
      in = layer.kernels;
    }
    auto& l = t.lstm;
    for (Tensor* w : {&l.W_i, &l.W_f, &l.W_o, &l.W_u}) *w = Tensor::zeros({H, in});
    for (Tensor* u : {&l.U_i, &l.U_f, &l.U_o, &l.U_u}) *u = Tensor::zeros({H, H});
    for (Tensor* b : {&l.b_i, &l.b_f, &l.b_o, &l.b_u}) *b = Tensor::zeros({H, 1});
    return t;
  };
  auto head = [&](std::size_t in) {
    return HeadParams{Tensor::zeros({cfg.common_dim, in}),
                      Tensor::zeros({cfg.common_dim, 1})};
  };
  auto attention = [&] {
    return AttentionParams{Tensor::zeros({cfg.attn_dim, H}),
                           Tensor::zeros({1, cfg.attn_dim})};
  };

  EncoderParams p;
  const std::size_t trunks = cfg.share_text_trunk ? 1 : 3;
  for (std::size_t i = 0; i < trunks; ++i) p.trunks.push_back(trunk());
  p.attn_local = attention();
  p.attn_relation = attention();
  p.text_global = head(H);
  p.text_local = head(H);
  p.text_relation = head(H);
  p.image_global = head(cfg.feature_dim);
  p.image_local = head(cfg.feature_dim);
  p.image_relation = head(2 * cfg.feature_dim);
  return p;
}

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

const TrunkParams& EncoderParams::trunk(TextBranch branch) const {
  if (trunks.size() == 1) return trunks[0];
  return trunks.at(static_cast<std::size_t>(branch));
}

EncoderParams EncoderParams::init(const EncoderConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  EncoderParams p = skeleton(cfg);
  std::mt19937_64 rng(seed);
  visit(p, [&](const std::string& name, Tensor& t) {
    const auto& shape = t.shape();
    double bound = 0.0;
    if (shape.size() == 3) {
      const double fan_in = static_cast<double>(shape[1] * shape[2]);
      const double fan_out = static_cast<double>(shape[0] * shape[2]);
      bound = std::sqrt(6.0 / (fan_in + fan_out));
    } else if (shape[1] != 1) {
      bound = std::sqrt(6.0 / static_cast<double>(shape[0] + shape[1]));
    } else if (name.find(".conv") != std::string::npos && ends_with(name, ".bias")) {
      // Nonzero conv biases keep all-padding frames off the ReLU kink.
      bound = 0.1;
    }
    if (bound == 0.0) return;
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& v : t.mutable_data()) v = dist(rng);
  });
  return p;
}

std::vector<ad::NamedTensor> EncoderParams::named() const {
  std::vector<ad::NamedTensor> out;
  visit(const_cast<EncoderParams&>(*this),
        [&](const std::string& name, Tensor& t) { out.emplace_back(name, t); });
  return out;
}

EncoderParams EncoderParams::from_named(
    const EncoderConfig& cfg, const std::map<std::string, Tensor>& named) {
  cfg.validate();
  EncoderParams p = skeleton(cfg);
  visit(p, [&](const std::string& name, Tensor& t) {
    auto it = named.find(name);
    if (it == named.end()) {
      throw std::runtime_error("parameters: missing tensor " + name);
    }
    if (it->second.shape() != t.shape()) {
      throw std::runtime_error("parameters: " + name + " has shape " +
                               ad::shape_str(it->second.shape()) +
                               ", configuration expects " +
                               ad::shape_str(t.shape()));
    }
    t = it->second;
  });
  return p;
}

EncoderParams EncoderParams::clone() const {
  EncoderParams copy = *this;
  visit(copy, [](const std::string&, Tensor& t) { t = t.clone(); });
  return copy;
}

void EncoderParams::set_requires_grad(bool on) const {
  for (auto& [name, t] : named()) {
    Tensor handle = t;
    handle.set_requires_grad(on);
  }
}

void EncoderParams::zero_grad() const {
  for (auto& [name, t] : named()) {
    Tensor handle = t;
    handle.drop_grad();
  }
}

}  // namespace cran::enc
