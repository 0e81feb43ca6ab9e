#include "cran/dataset.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <stdexcept>
#include <unordered_map>

#include "json.hpp"

namespace cran::data {

using nlohmann::json;

std::string to_string(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "unknown";
}

Split parse_split(std::string_view text) {
  if (text == "train") return Split::kTrain;
  if (text == "val") return Split::kVal;
  if (text == "test") return Split::kTest;
  throw std::invalid_argument("unknown split '" + std::string(text) +
                              "' (expected train, val or test)");
}

namespace {

[[noreturn]] void record_error(std::size_t i, const std::string& id,
                               const std::string& what) {
  std::string msg = "record " + std::to_string(i);
  if (!id.empty()) msg += " (" + id + ")";
  throw std::runtime_error(msg + ": " + what);
}

std::size_t find_root(std::vector<std::size_t>& parent, std::size_t x) {
  while (parent[x] != x) {
    parent[x] = parent[parent[x]];
    x = parent[x];
  }
  return x;
}

}  // namespace

void validate(const std::vector<Record>& records, const DatasetMeta& meta) {
  if (records.empty()) throw std::runtime_error("dataset: no records");
  if (meta.feature_dim == 0) throw std::runtime_error("dataset: feature_dim is 0");
  std::unordered_map<std::string, std::size_t> by_id;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (r.id.empty()) record_error(i, r.id, "empty id");
    if (!by_id.emplace(r.id, i).second) record_error(i, r.id, "duplicate id");
    if (r.image.global_feat.size() != meta.feature_dim) {
      record_error(i, r.id, "global feature has dimension " +
                                std::to_string(r.image.global_feat.size()) +
                                ", expected " + std::to_string(meta.feature_dim));
    }
    if (r.image.regions.empty()) record_error(i, r.id, "no regions");
    for (std::size_t k = 0; k < r.image.regions.size(); ++k) {
      if (r.image.regions[k].size() != meta.feature_dim) {
        record_error(i, r.id, "region " + std::to_string(k) + " has dimension " +
                                  std::to_string(r.image.regions[k].size()) +
                                  ", expected " + std::to_string(meta.feature_dim));
      }
    }
    if (r.gt_links.empty()) record_error(i, r.id, "no gt_links");
  }
  std::vector<bool> caption_linked(records.size(), false);
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    for (const auto& link : r.gt_links) {
      auto it = by_id.find(link);
      if (it == by_id.end()) {
        record_error(i, r.id, "gt_link '" + link + "' does not name a record");
      }
      if (records[it->second].split != r.split) {
        record_error(i, r.id, "gt_link '" + link + "' crosses splits");
      }
      caption_linked[it->second] = true;
    }
  }
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!caption_linked[i]) {
      record_error(i, records[i].id, "caption is not linked to any image");
    }
  }
}

Dataset::Dataset(std::vector<Record> records, DatasetMeta meta)
    : records_(std::move(records)), meta_(meta) {
  validate(records_, meta_);
  index();
}

void Dataset::index() {
  const std::size_t n = records_.size();
  std::unordered_map<std::string, std::size_t> by_id;
  for (std::size_t i = 0; i < n; ++i) by_id.emplace(records_[i].id, i);
  image_to_texts_.assign(n, {});
  text_to_images_.assign(n, {});
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  for (std::size_t p = 0; p < n; ++p) {
    std::set<std::size_t> linked;
    for (const auto& link : records_[p].gt_links) linked.insert(by_id.at(link));
    for (auto q : linked) {
      image_to_texts_[p].push_back(q);
      text_to_images_[q].push_back(p);
      parent[find_root(parent, p)] = find_root(parent, q);
    }
  }
  for (auto& v : text_to_images_) std::sort(v.begin(), v.end());
  groups_.resize(n);
  for (std::size_t p = 0; p < n; ++p) groups_[p] = find_root(parent, p);
}

std::vector<std::size_t> Dataset::indices(Split split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < records_.size(); ++i) {
    if (records_[i].split == split) out.push_back(i);
  }
  return out;
}

std::optional<std::size_t> Dataset::find(std::string_view id) const {
  for (std::size_t i = 0; i < records_.size(); ++i) {
    if (records_[i].id == id) return i;
  }
  return std::nullopt;
}

namespace {

constexpr const char* kFormat = "cran-dataset";
constexpr int kVersion = 1;

void append_floats(std::string& buffer, const std::vector<double>& values) {
  for (double v : values) {
    const float f = static_cast<float>(v);
    std::uint32_t bits;
    std::memcpy(&bits, &f, sizeof bits);
    for (int b = 0; b < 4; ++b) {
      buffer.push_back(static_cast<char>((bits >> (8 * b)) & 0xffu));
    }
  }
}

std::vector<double> read_floats(const std::string& buffer, std::size_t offset,
                                std::size_t count, std::size_t record) {
  if ((offset + count) * 4 > buffer.size()) {
    record_error(record, "", "sidecar offset out of range");
  }
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) {
      bits |= static_cast<std::uint32_t>(
                  static_cast<unsigned char>(buffer[(offset + i) * 4 + b]))
              << (8 * b);
    }
    float f;
    std::memcpy(&f, &bits, sizeof f);
    out[i] = f;
  }
  return out;
}

std::string sidecar_path(const std::string& path) { return path + ".bin"; }

std::string basename(const std::string& path) {
  auto pos = path.find_last_of('/');
  return pos == std::string::npos ? path : path.substr(pos + 1);
}

std::string dirname(const std::string& path) {
  auto pos = path.find_last_of('/');
  return pos == std::string::npos ? "" : path.substr(0, pos + 1);
}

template <typename T>
T field(const json& obj, const char* name, std::size_t record) {
  auto it = obj.find(name);
  if (it == obj.end()) {
    record_error(record, obj.value("id", std::string{}),
                 std::string("missing field '") + name + "'");
  }
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    record_error(record, obj.value("id", std::string{}),
                 std::string("field '") + name + "' has the wrong type");
  }
}

}  // namespace

void save_dataset(const std::string& path, const Dataset& dataset,
                  const SaveOptions& options) {
  const auto& records = dataset.records();
  std::size_t counts[3] = {0, 0, 0};
  for (const auto& r : records) ++counts[static_cast<int>(r.split)];

  json header = {{"format", kFormat},
                 {"version", kVersion},
                 {"num_pairs", records.size()},
                 {"feature_dim", dataset.meta().feature_dim},
                 {"num_regions", dataset.meta().num_regions},
                 {"seed", dataset.meta().seed},
                 {"splits", {{"train", counts[0]}, {"val", counts[1]}, {"test", counts[2]}}}};

  std::string sidecar;
  std::vector<std::size_t> offsets;
  if (options.binary_sidecar) {
    for (const auto& r : records) {
      offsets.push_back(sidecar.size() / 4);
      append_floats(sidecar, r.image.global_feat);
      for (const auto& region : r.image.regions) append_floats(sidecar, region);
    }
    header["sidecar"] = {{"path", basename(sidecar_path(path))},
                         {"encoding", "float32-le"},
                         {"offsets", offsets}};
  }

  std::ofstream out(path);
  if (!out) throw std::runtime_error("dataset: cannot write " + path);
  out << header.dump() << '\n';
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    json obj = {{"id", r.id}, {"split", to_string(r.split)}};
    if (options.binary_sidecar) {
      obj["num_regions"] = r.image.regions.size();
    } else {
      obj["global"] = r.image.global_feat;
      obj["regions"] = r.image.regions;
    }
    obj["caption"] = r.caption;
    obj["gt_links"] = r.gt_links;
    out << obj.dump() << '\n';
  }
  if (!out) throw std::runtime_error("dataset: write failed for " + path);
  if (options.binary_sidecar) {
    std::ofstream bin(sidecar_path(path), std::ios::binary);
    bin.write(sidecar.data(), static_cast<std::streamsize>(sidecar.size()));
    if (!bin) throw std::runtime_error("dataset: cannot write sidecar for " + path);
  }
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("dataset: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("dataset: empty file " + path);
  json header;
  try {
    header = json::parse(line);
  } catch (const json::parse_error& e) {
    throw std::runtime_error("dataset: bad header: " + std::string(e.what()));
  }
  if (header.value("format", std::string{}) != kFormat) {
    throw std::runtime_error("dataset: " + path + " is not a " + kFormat + " file");
  }
  DatasetMeta meta;
  meta.feature_dim = header.value("feature_dim", std::size_t{0});
  meta.num_regions = header.value("num_regions", std::size_t{0});
  meta.seed = header.value("seed", std::uint64_t{0});

  std::string sidecar;
  std::vector<std::size_t> offsets;
  const bool binary = header.contains("sidecar");
  if (binary) {
    const auto& sc = header.at("sidecar");
    offsets = sc.at("offsets").get<std::vector<std::size_t>>();
    const std::string bin_path = dirname(path) + sc.at("path").get<std::string>();
    std::ifstream bin(bin_path, std::ios::binary);
    if (!bin) throw std::runtime_error("dataset: cannot open sidecar " + bin_path);
    sidecar.assign(std::istreambuf_iterator<char>(bin), {});
  }

  std::vector<Record> records;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::size_t i = records.size();
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      record_error(i, "", std::string("malformed JSON: ") + e.what());
    }
    Record r;
    r.id = field<std::string>(obj, "id", i);
    try {
      r.split = parse_split(field<std::string>(obj, "split", i));
    } catch (const std::invalid_argument& e) {
      record_error(i, r.id, e.what());
    }
    if (binary) {
      if (i >= offsets.size()) record_error(i, r.id, "no sidecar offset");
      const auto n = field<std::size_t>(obj, "num_regions", i);
      std::size_t at = offsets[i];
      r.image.global_feat = read_floats(sidecar, at, meta.feature_dim, i);
      at += meta.feature_dim;
      for (std::size_t k = 0; k < n; ++k, at += meta.feature_dim) {
        r.image.regions.push_back(read_floats(sidecar, at, meta.feature_dim, i));
      }
    } else {
      r.image.global_feat = field<std::vector<double>>(obj, "global", i);
      r.image.regions = field<std::vector<std::vector<double>>>(obj, "regions", i);
    }
    r.caption = field<std::string>(obj, "caption", i);
    r.gt_links = field<std::vector<std::string>>(obj, "gt_links", i);
    records.push_back(std::move(r));
  }
  return Dataset(std::move(records), meta);
}

BatchIterator::BatchIterator(const Dataset& dataset, Split split,
                             std::size_t batch_size, std::uint64_t seed)
    : dataset_(&dataset),
      members_(dataset.indices(split)),
      batch_size_(batch_size),
      seed_(seed) {
  if (members_.empty()) {
    throw std::invalid_argument("batch_iter: split " + to_string(split) +
                                " is empty");
  }
  if (batch_size < 2) throw std::invalid_argument("batch_iter: batch_size must be >= 2");
}

std::vector<std::vector<std::size_t>> BatchIterator::epoch(
    std::size_t epoch_index) const {
  std::seed_seq seq{static_cast<std::uint32_t>(seed_),
                    static_cast<std::uint32_t>(seed_ >> 32),
                    static_cast<std::uint32_t>(epoch_index)};
  std::mt19937_64 rng(seq);
  auto has_two_groups = [&](const std::vector<std::size_t>& batch) {
    for (auto idx : batch) {
      if (dataset_->group(idx) != dataset_->group(batch.front())) return true;
    }
    return false;
  };

  constexpr int kMaxAttempts = 100;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    std::vector<std::size_t> order = members_;
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t start = 0; start < order.size(); start += batch_size_) {
      const std::size_t end = std::min(order.size(), start + batch_size_);
      if (end - start < 2) break;
      batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                           order.begin() + static_cast<std::ptrdiff_t>(end));
    }
    if (std::all_of(batches.begin(), batches.end(), has_two_groups)) return batches;
  }
  throw std::runtime_error(
      "batch_iter: could not form batches spanning two link groups");
}

}  // namespace cran::data
