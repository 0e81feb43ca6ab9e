#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include "doctest.h"
#include "cran/dataset.hpp"
#include "cran/synthetic.hpp"
#include "json.hpp"
#include "support/oracles.hpp"

using namespace cran;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "cran_test_data";
  fs::create_directories(dir);
  return dir / name;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool same_records(const data::Dataset& a, const data::Dataset& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto& x = a.records()[i];
    const auto& y = b.records()[i];
    if (x.id != y.id || x.split != y.split || x.caption != y.caption || x.gt_links != y.gt_links ||
        x.image.global_feat != y.image.global_feat || x.image.regions != y.image.regions) {
      return false;
    }
  }
  return true;
}

data::SyntheticSpec spec_with(std::size_t pairs, std::size_t test, double sigma, std::uint64_t seed) {
  data::SyntheticSpec s;
  s.num_pairs = pairs;
  s.num_test = test;
  s.noise_sigma = sigma;
  s.seed = seed;
  return s;
}

// Rewrites line `line` (0 = header) of a JSONL file through `edit`.
void edit_line(const fs::path& p, std::size_t line, const std::function<void(nlohmann::json&)>& edit) {
  std::ifstream in(p);
  std::vector<std::string> lines;
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  auto j = nlohmann::json::parse(lines.at(line));
  edit(j);
  lines[line] = j.dump();
  std::ofstream out(p);
  for (const auto& l : lines) out << l << '\n';
}

}  // namespace

TEST_CASE("save/load round trip reproduces generated data exactly") {
  const auto ds = data::generate_synthetic(spec_with(30, 6, 0.1, 7));
  const auto path = scratch("round.jsonl");
  data::save_dataset(path.string(), ds);
  const auto back = data::load_dataset(path.string());
  CHECK(same_records(ds, back));
  CHECK(back.meta().feature_dim == 32);
  CHECK(back.meta().num_regions == 5);
  CHECK(back.meta().seed == 7);

  // save of the loaded copy is byte-identical
  const auto again = scratch("round2.jsonl");
  data::save_dataset(again.string(), back);
  CHECK(slurp(path) == slurp(again));
}

TEST_CASE("binary sidecar round trip is exact up to float32") {
  const auto ds = data::generate_synthetic(spec_with(12, 2, 0.1, 3));
  const auto path = scratch("side.jsonl");
  data::save_dataset(path.string(), ds, {.binary_sidecar = true});
  CHECK(fs::exists(path.string() + ".bin"));
  const auto back = data::load_dataset(path.string());
  REQUIRE(back.size() == ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& a = ds.records()[i].image;
    const auto& b = back.records()[i].image;
    for (std::size_t d = 0; d < a.global_feat.size(); ++d) {
      CHECK(b.global_feat[d] == static_cast<double>(static_cast<float>(a.global_feat[d])));
    }
    for (std::size_t k = 0; k < a.regions.size(); ++k) {
      for (std::size_t d = 0; d < a.regions[k].size(); ++d) {
        CHECK(b.regions[k][d] == static_cast<double>(static_cast<float>(a.regions[k][d])));
      }
    }
    CHECK(ds.records()[i].caption == back.records()[i].caption);
  }
}

TEST_CASE("load rejects a 4-dim region among 32-dim records, naming the record") {
  const auto ds = data::generate_synthetic(spec_with(10, 2, 0.1, 1));
  const auto path = scratch("bad_dim.jsonl");
  data::save_dataset(path.string(), ds);
  edit_line(path, 4, [](nlohmann::json& j) { j["regions"][2] = {1.0, 2.0, 3.0, 4.0}; });
  try {
    data::load_dataset(path.string());
    FAIL("expected rejection");
  } catch (const std::runtime_error& e) {
    const std::string msg = e.what();
    CHECK(msg.find("record 3") != std::string::npos);
    CHECK(msg.find("dimension 4") != std::string::npos);
  }
}

TEST_CASE("load rejects dangling links, missing fields and empty datasets") {
  const auto ds = data::generate_synthetic(spec_with(10, 2, 0.1, 1));
  const auto path = scratch("dangling.jsonl");
  data::save_dataset(path.string(), ds);
  edit_line(path, 2, [](nlohmann::json& j) { j["gt_links"] = {"nobody"}; });
  CHECK_THROWS_WITH_AS(data::load_dataset(path.string()), doctest::Contains("record 1"),
                       std::runtime_error);

  data::save_dataset(path.string(), ds);
  edit_line(path, 5, [](nlohmann::json& j) { j.erase("caption"); });
  CHECK_THROWS_WITH_AS(data::load_dataset(path.string()), doctest::Contains("record 4"),
                       std::runtime_error);

  CHECK_THROWS(data::Dataset({}, data::DatasetMeta{32, 5, 0}));
  CHECK_THROWS(data::load_dataset(scratch("does_not_exist.jsonl").string()));
}

TEST_CASE("splits are disjoint, cover everything, and links stay within a split") {
  data::SyntheticSpec s = spec_with(40, 10, 0.1, 2);
  s.num_val = 5;
  const auto ds = data::generate_synthetic(s);
  const auto train = ds.indices(data::Split::kTrain);
  const auto val = ds.indices(data::Split::kVal);
  const auto test = ds.indices(data::Split::kTest);
  CHECK(train.size() == 25);
  CHECK(val.size() == 5);
  CHECK(test.size() == 10);
  std::set<std::size_t> all(train.begin(), train.end());
  all.insert(val.begin(), val.end());
  all.insert(test.begin(), test.end());
  CHECK(all.size() == 40);
  for (std::size_t p = 0; p < ds.size(); ++p) {
    CHECK_FALSE(ds.texts_for_image(p).empty());
    CHECK_FALSE(ds.images_for_text(p).empty());
    for (auto q : ds.texts_for_image(p)) CHECK(ds.records()[q].split == ds.records()[p].split);
  }
}

TEST_CASE("batching: 10 pairs by 4 gives 4,4,2; 9 by 8 gives 8; seeded order") {
  const auto ten = data::generate_synthetic(spec_with(10, 0, 0.1, 1));
  data::BatchIterator it(ten, data::Split::kTrain, 4, 5);
  auto batches = it.epoch(0);
  REQUIRE(batches.size() == 3);
  CHECK(batches[0].size() == 4);
  CHECK(batches[1].size() == 4);
  CHECK(batches[2].size() == 2);
  std::set<std::size_t> seen;
  for (const auto& b : batches) seen.insert(b.begin(), b.end());
  CHECK(seen.size() == 10);

  const auto nine = data::generate_synthetic(spec_with(9, 0, 0.1, 1));
  auto eight = data::BatchIterator(nine, data::Split::kTrain, 8, 5).epoch(0);
  REQUIRE(eight.size() == 1);
  CHECK(eight[0].size() == 8);

  CHECK(data::BatchIterator(ten, data::Split::kTrain, 4, 5).epoch(3) == it.epoch(3));
  CHECK(it.epoch(0) != it.epoch(1));
  CHECK(data::BatchIterator(ten, data::Split::kTrain, 4, 6).epoch(0) != it.epoch(0));

  CHECK_THROWS(data::BatchIterator(ten, data::Split::kTest, 4, 5));
  CHECK_THROWS(data::BatchIterator(ten, data::Split::kTrain, 1, 5));
}

TEST_CASE("every batch spans at least two link groups") {
  // ten records sharing one image's links: 5 groups of 2
  auto ds = data::generate_synthetic(spec_with(10, 0, 0.1, 4));
  std::vector<data::Record> records = ds.records();
  for (std::size_t i = 0; i < records.size(); i += 2) {
    records[i].gt_links = {records[i].id, records[i + 1].id};
    records[i + 1].gt_links = {records[i].id, records[i + 1].id};
  }
  const data::Dataset linked(records, ds.meta());
  CHECK(linked.group(0) == linked.group(1));
  CHECK(linked.group(0) != linked.group(2));
  data::BatchIterator it(linked, data::Split::kTrain, 2, 9);
  for (std::size_t e = 0; e < 30; ++e) {
    for (const auto& b : it.epoch(e)) {
      std::set<std::size_t> groups;
      for (auto i : b) groups.insert(linked.group(i));
      CHECK(groups.size() >= 2);
    }
  }
}

TEST_CASE("generator: seeded, sigma-0 reproducible, unique tuples, rejects bad specs") {
  const auto a = data::generate_synthetic(spec_with(50, 10, 0.0, 7));
  const auto b = data::generate_synthetic(spec_with(50, 10, 0.0, 7));
  CHECK(same_records(a, b));
  const auto c = data::generate_synthetic(spec_with(50, 10, 0.1, 8));
  CHECK_FALSE(same_records(a, c));

  const auto spec = spec_with(250, 50, 0.1, 7);
  const auto big = data::generate_synthetic(spec);
  oracle::PlantedDecoder decoder(spec);
  std::set<std::tuple<std::size_t, std::size_t, std::size_t>> keys;
  for (const auto& r : big.records()) {
    const auto t = decoder.decode_caption(r.caption);
    REQUIRE(t.subject < spec.objects.size());
    REQUIRE(t.object < spec.objects.size());
    REQUIRE(t.relation < spec.relations.size());
    CHECK(t.subject != t.object);
    CHECK(r.caption == data::caption_for(spec, t.subject, t.relation, t.object));
    CHECK(keys.insert({std::min(t.subject, t.object), std::max(t.subject, t.object), t.relation}).second);
    CHECK(r.image.regions.size() == 5);
  }

  auto bad = spec;
  bad.noise_sigma = -0.1;
  CHECK_THROWS_AS(data::generate_synthetic(bad), std::invalid_argument);
  bad = spec;
  bad.num_regions = 1;
  CHECK_THROWS_AS(data::generate_synthetic(bad), std::invalid_argument);
  bad = spec;
  bad.num_pairs = 1000000;
  CHECK_THROWS_AS(data::generate_synthetic(bad), std::invalid_argument);
}

TEST_CASE("captions of pairs that share no concepts have disjoint content words") {
  const auto spec = spec_with(120, 0, 0.1, 11);
  const auto ds = data::generate_synthetic(spec);
  oracle::PlantedDecoder decoder(spec);
  auto content = [](const std::string& caption) {
    std::istringstream in(caption);
    std::set<std::string> words;
    for (std::string w; in >> w;) {
      if (w != "a") words.insert(w);
    }
    return words;
  };
  std::size_t compared = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (std::size_t j = i + 1; j < ds.size(); ++j) {
      const auto x = decoder.decode_caption(ds.records()[i].caption);
      const auto y = decoder.decode_caption(ds.records()[j].caption);
      const std::set<std::size_t> ox = {x.subject, x.object};
      if (ox.count(y.subject) || ox.count(y.object) || x.relation == y.relation) continue;
      ++compared;
      const auto wx = content(ds.records()[i].caption);
      const auto wy = content(ds.records()[j].caption);
      for (const auto& w : wx) CHECK(wy.count(w) == 0);
    }
  }
  CHECK(compared > 0);
}

TEST_CASE("global feature is the region mean plus noise") {
  const auto ds = data::generate_synthetic(spec_with(20, 0, 0.0, 5));
  for (const auto& r : ds.records()) {
    for (std::size_t d = 0; d < r.image.global_feat.size(); ++d) {
      double mean = 0.0;
      for (const auto& region : r.image.regions) mean += region[d];
      mean /= static_cast<double>(r.image.regions.size());
      CHECK(r.image.global_feat[d] == doctest::Approx(mean).epsilon(1e-12));
    }
  }
}

TEST_CASE("planted decoder recovers every tuple at sigma 0 and scores R@1 = 1") {
  const auto spec = spec_with(250, 50, 0.0, 7);
  const auto ds = data::generate_synthetic(spec);
  oracle::PlantedDecoder decoder(spec);
  std::size_t correct = 0;
  for (const auto& r : ds.records()) {
    if (decoder.decode_image(r.image) == decoder.decode_caption(r.caption)) ++correct;
  }
  CHECK(correct == ds.size());

  const auto recall = oracle::recall_at_1(decoder.similarity(ds, ds.indices(data::Split::kTest)));
  CHECK(recall.image_to_text == 1.0);
  CHECK(recall.text_to_image == 1.0);
}
