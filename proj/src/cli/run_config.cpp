#include "cran/run_config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <stdexcept>

namespace cran::cli {

using nlohmann::json;

namespace {

void reject_unknown(const json& obj, const std::string& where,
                    const std::set<std::string>& allowed) {
  if (!obj.is_object()) throw std::invalid_argument("config: " + where + " must be an object");
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.count(key)) {
      throw std::invalid_argument("config: unknown key '" + where + "." + key + "'");
    }
  }
}

template <typename T>
void read(const json& obj, const char* key, const std::string& where, T& into) {
  auto it = obj.find(key);
  if (it == obj.end()) return;
  try {
    into = it->get<T>();
  } catch (const json::exception&) {
    throw std::invalid_argument("config: bad value for '" + where + "." + key + "'");
  }
}

// json's get<size_t> silently wraps negatives.
void read_count(const json& obj, const char* key, const std::string& where,
                std::size_t& into) {
  auto it = obj.find(key);
  if (it == obj.end()) return;
  if (!it->is_number_integer() || it->get<long long>() < 0) {
    throw std::invalid_argument("config: '" + where + "." + key +
                                "' must be a non-negative integer");
  }
  into = it->get<std::size_t>();
}

json encoder_json(const enc::EncoderConfig& e) {
  json conv = json::array();
  for (const auto& layer : e.conv) {
    conv.push_back({{"kernels", layer.kernels}, {"width", layer.width}, {"pool", layer.pool}});
  }
  return {{"alphabet", e.alphabet},       {"seq_len", e.seq_len},
          {"conv", conv},                 {"pool_width", e.pool_width},
          {"pool_stride", e.pool_stride}, {"hidden", e.hidden},
          {"attn_dim", e.attn_dim},       {"common_dim", e.common_dim},
          {"feature_dim", e.feature_dim}, {"share_text_trunk", e.share_text_trunk},
          {"head_tanh", e.head_tanh}};
}

void merge_encoder(const json& j, enc::EncoderConfig& e) {
  const std::string w = "encoder";
  reject_unknown(j, w,
                 {"alphabet", "seq_len", "conv", "pool_width", "pool_stride", "hidden",
                  "attn_dim", "common_dim", "feature_dim", "share_text_trunk",
                  "head_tanh"});
  read(j, "alphabet", w, e.alphabet);
  read_count(j, "seq_len", w, e.seq_len);
  read_count(j, "pool_width", w, e.pool_width);
  read_count(j, "pool_stride", w, e.pool_stride);
  read_count(j, "hidden", w, e.hidden);
  read_count(j, "attn_dim", w, e.attn_dim);
  read_count(j, "common_dim", w, e.common_dim);
  read_count(j, "feature_dim", w, e.feature_dim);
  read(j, "share_text_trunk", w, e.share_text_trunk);
  read(j, "head_tanh", w, e.head_tanh);
  if (auto it = j.find("conv"); it != j.end()) {
    if (!it->is_array()) throw std::invalid_argument("config: encoder.conv must be a list");
    e.conv.clear();
    for (std::size_t i = 0; i < it->size(); ++i) {
      const std::string lw = "encoder.conv[" + std::to_string(i) + "]";
      const json& layer = (*it)[i];
      reject_unknown(layer, lw, {"kernels", "width", "pool"});
      enc::ConvLayerSpec spec;
      read_count(layer, "kernels", lw, spec.kernels);
      read_count(layer, "width", lw, spec.width);
      read(layer, "pool", lw, spec.pool);
      e.conv.push_back(spec);
    }
  }
}

}  // namespace

RunConfig RunConfig::from_preset(std::string_view name) {
  RunConfig cfg;
  if (name == "desk") {
    cfg.encoder = enc::EncoderConfig::desk();
  } else if (name == "paper") {
    cfg.encoder = enc::EncoderConfig::paper();
  } else {
    throw std::invalid_argument("config: unknown preset '" + std::string(name) +
                                "' (expected desk|paper)");
  }
  cfg.preset = std::string(name);
  return cfg;
}

json RunConfig::to_json() const {
  return {
      {"preset", preset},
      {"encoder", encoder_json(encoder)},
      {"loss",
       {{"margin", loss.margin},
        {"k", loss.k},
        {"w_global", loss.w_global},
        {"w_local", loss.w_local},
        {"w_relation", loss.w_relation},
        {"mode", cran::to_string(loss.mode)}}},
      {"optimizer",
       {{"kind", train::to_string(optimizer.kind)},
        {"lr", optimizer.lr},
        {"momentum", optimizer.momentum},
        {"weight_decay", optimizer.weight_decay},
        {"beta1", optimizer.beta1},
        {"beta2", optimizer.beta2},
        {"eps", optimizer.eps}}},
      {"train",
       {{"epochs", train.epochs},
        {"batch_size", train.batch_size},
        {"seed", train.seed},
        {"workers", train.eval_workers}}},
      {"paths",
       {{"dataset", paths.dataset},
        {"checkpoint", paths.checkpoint},
        {"best_checkpoint", paths.best_checkpoint},
        {"log", paths.log},
        {"report", paths.report}}},
  };
}

void RunConfig::merge(const json& doc) {
  reject_unknown(doc, "config", {"preset", "encoder", "loss", "optimizer", "train", "paths"});
  if (auto it = doc.find("preset"); it != doc.end()) {
    if (!it->is_string()) throw std::invalid_argument("config: preset must be a string");
    *this = from_preset(it->get<std::string>());
  }
  if (auto it = doc.find("encoder"); it != doc.end()) merge_encoder(*it, encoder);
  if (auto it = doc.find("loss"); it != doc.end()) {
    const std::string w = "loss";
    reject_unknown(*it, w, {"margin", "k", "w_global", "w_local", "w_relation", "mode"});
    read(*it, "margin", w, loss.margin);
    read_count(*it, "k", w, loss.k);
    read(*it, "w_global", w, loss.w_global);
    read(*it, "w_local", w, loss.w_local);
    read(*it, "w_relation", w, loss.w_relation);
    if (it->contains("mode")) {
      std::string mode;
      read(*it, "mode", w, mode);
      loss.mode = parse_mode(mode);
    }
  }
  if (auto it = doc.find("optimizer"); it != doc.end()) {
    const std::string w = "optimizer";
    reject_unknown(*it, w,
                   {"kind", "lr", "momentum", "weight_decay", "beta1", "beta2", "eps"});
    if (it->contains("kind")) {
      std::string kind;
      read(*it, "kind", w, kind);
      optimizer.kind = train::parse_optimizer(kind);
    }
    read(*it, "lr", w, optimizer.lr);
    read(*it, "momentum", w, optimizer.momentum);
    read(*it, "weight_decay", w, optimizer.weight_decay);
    read(*it, "beta1", w, optimizer.beta1);
    read(*it, "beta2", w, optimizer.beta2);
    read(*it, "eps", w, optimizer.eps);
  }
  if (auto it = doc.find("train"); it != doc.end()) {
    const std::string w = "train";
    reject_unknown(*it, w, {"epochs", "batch_size", "seed", "workers"});
    read_count(*it, "epochs", w, train.epochs);
    read_count(*it, "batch_size", w, train.batch_size);
    read_count(*it, "workers", w, train.eval_workers);
    if (auto s = it->find("seed"); s != it->end()) {
      if (!s->is_number_unsigned()) {
        throw std::invalid_argument("config: 'train.seed' must be a non-negative integer");
      }
      train.seed = s->get<std::uint64_t>();
    }
  }
  if (auto it = doc.find("paths"); it != doc.end()) {
    const std::string w = "paths";
    reject_unknown(*it, w, {"dataset", "checkpoint", "best_checkpoint", "log", "report"});
    read(*it, "dataset", w, paths.dataset);
    read(*it, "checkpoint", w, paths.checkpoint);
    read(*it, "best_checkpoint", w, paths.best_checkpoint);
    read(*it, "log", w, paths.log);
    read(*it, "report", w, paths.report);
  }
}

void RunConfig::validate() const {
  encoder.validate();
  loss.validate();
  optimizer.validate();
  if (train.batch_size < 2) throw std::invalid_argument("config: train.batch_size must be >= 2");
  if (train.eval_workers == 0) throw std::invalid_argument("config: train.workers must be >= 1");
}

std::string RunConfig::best_checkpoint_path() const {
  if (!paths.best_checkpoint.empty()) return paths.best_checkpoint;
  const std::string& p = paths.checkpoint;
  const auto dot = p.rfind('.');
  const auto slash = p.find_last_of('/');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) {
    return p + ".best";
  }
  return p.substr(0, dot) + ".best" + p.substr(dot);
}

void RunConfig::merge_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("config " + path + ": " + e.what());
  }
  merge(doc);
}

RunConfig load_run_config(const std::string& path, std::string_view preset) {
  RunConfig cfg = RunConfig::from_preset(preset);
  if (!path.empty()) cfg.merge_file(path);
  return cfg;
}

std::optional<std::uint64_t> seed_from_env() {
  const char* raw = std::getenv("CRAN_SEED");
  if (raw == nullptr || *raw == '\0') return std::nullopt;
  const std::string text(raw);
  if (text.find_first_not_of("0123456789") != std::string::npos) {
    throw std::invalid_argument("CRAN_SEED must be a non-negative integer, got '" + text + "'");
  }
  try {
    return std::stoull(text);
  } catch (const std::exception&) {
    throw std::invalid_argument("CRAN_SEED out of range: '" + text + "'");
  }
}

}  // namespace cran::cli
