#include "cran/checkpoint.hpp"

#include <fstream>
#include <stdexcept>

namespace cran::ad {

using nlohmann::json;

json checkpoint_to_json(const std::vector<NamedTensor>& params,
                        const json& config) {
  json doc = json::object();
  for (const auto& [name, t] : params) {
    if (name.rfind("__", 0) == 0) {
      throw std::invalid_argument("checkpoint: reserved parameter name " + name);
    }
    auto values = t.data();
    doc[name] = {{"shape", t.shape()},
                 {"data", std::vector<double>(values.begin(), values.end())}};
  }
  if (!config.is_null()) doc["__config__"] = config;
  return doc;
}

Checkpoint checkpoint_from_json(const json& doc) {
  if (!doc.is_object()) throw std::runtime_error("checkpoint: not a JSON object");
  Checkpoint ckpt;
  for (const auto& [name, entry] : doc.items()) {
    if (name == "__config__") {
      ckpt.config = entry;
      continue;
    }
    if (name.rfind("__", 0) == 0) continue;
    if (!entry.is_object() || !entry.contains("shape") || !entry.contains("data")) {
      throw std::runtime_error("checkpoint: parameter " + name +
                               " lacks shape/data");
    }
    auto shape = entry.at("shape").get<Shape>();
    auto data = entry.at("data").get<std::vector<double>>();
    try {
      ckpt.params.emplace(name, Tensor(std::move(shape), std::move(data)));
    } catch (const std::invalid_argument& e) {
      throw std::runtime_error("checkpoint: parameter " + name + ": " + e.what());
    }
  }
  return ckpt;
}

void save_checkpoint(const std::string& path,
                     const std::vector<NamedTensor>& params,
                     const json& config) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("checkpoint: cannot write " + path);
  out << checkpoint_to_json(params, config).dump() << '\n';
  if (!out) throw std::runtime_error("checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::parse_error& e) {
    throw std::runtime_error("checkpoint: " + path + ": " + e.what());
  }
  return checkpoint_from_json(doc);
}

}  // namespace cran::ad
