#include "cran/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "cran/checkpoint.hpp"
#include "cran/dataset.hpp"
#include "cran/encoders.hpp"
#include "cran/retrieval.hpp"
#include "cran/synthetic.hpp"
#include "cran/tape.hpp"
#include "cran/training.hpp"

namespace cran::cli {

using nlohmann::json;

namespace {

// Thrown for bad flag combinations caught after parsing.
struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Flags shared by every command that reads a RunConfig. Unset optionals
// leave the configured value alone.
struct ConfigFlags {
  std::string config_path;
  std::string preset = "desk";
  std::optional<std::uint64_t> seed;
  std::optional<std::string> mode;
  std::optional<std::size_t> workers;
  std::optional<std::size_t> k;
  std::optional<std::string> dataset;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON run config");
    cmd->add_option("--preset", preset, "desk | paper")->check(CLI::IsMember({"desk", "paper"}));
    cmd->add_option("--seed", seed, "run seed (overrides CRAN_SEED and the config)");
    cmd->add_option("--mode", mode, "baseline | local | relation | full");
    cmd->add_option("--workers", workers, "evaluation worker threads");
    cmd->add_option("--k", k, "neighbours averaged by the local/relation terms");
    cmd->add_option("--dataset", dataset, "dataset JSONL");
  }

  // preset < checkpoint config < config file < CRAN_SEED < flags
  RunConfig resolve(const json& checkpoint_config = nullptr) const {
    RunConfig cfg = RunConfig::from_preset(preset);
    if (checkpoint_config.is_object()) cfg.merge(checkpoint_config);
    if (!config_path.empty()) cfg.merge_file(config_path);
    if (auto env = seed_from_env()) cfg.train.seed = *env;
    if (seed) cfg.train.seed = *seed;
    if (mode) cfg.loss.mode = parse_mode(*mode);
    if (workers) cfg.train.eval_workers = *workers;
    if (k) cfg.loss.k = *k;
    if (dataset) cfg.paths.dataset = *dataset;
    return cfg;
  }
};

data::Dataset load_configured_dataset(const RunConfig& cfg) {
  if (cfg.paths.dataset.empty()) {
    throw UsageError("no dataset given (--dataset or paths.dataset)");
  }
  return data::load_dataset(cfg.paths.dataset);
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  return out;
}

std::string fixed(double v, int precision) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(precision) << v;
  return s.str();
}

// ---------------------------------------------------------------- gen-data

struct GenDataFlags {
  std::optional<std::size_t> pairs;
  std::size_t dim = 32;
  std::size_t regions = 5;
  double noise = 0.1;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> test;
  std::size_t val = 0;
  std::size_t background = 8;
  std::string out = "synthetic.jsonl";
  bool sidecar = false;
};

int cmd_gen_data(const GenDataFlags& f, std::ostream& out) {
  if (!f.pairs) throw UsageError("gen-data: --pairs is required");
  data::SyntheticSpec spec;
  spec.num_pairs = *f.pairs;
  spec.feature_dim = f.dim;
  spec.num_regions = f.regions;
  spec.noise_sigma = f.noise;
  spec.num_val = f.val;
  spec.num_test = f.test ? *f.test : *f.pairs / 5;
  spec.num_background = f.background;
  spec.seed = 7;
  if (auto env = seed_from_env()) spec.seed = *env;
  if (f.seed) spec.seed = *f.seed;
  try {
    spec.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const auto dataset = data::generate_synthetic(spec);
  data::SaveOptions options;
  options.binary_sidecar = f.sidecar;
  data::save_dataset(f.out, dataset, options);
  const std::size_t num_train = spec.num_pairs - spec.num_val - spec.num_test;
  out << "wrote " << f.out << ": " << spec.num_pairs << " pairs (train " << num_train
      << ", val " << spec.num_val << ", test " << spec.num_test << "), dim "
      << spec.feature_dim << ", regions " << spec.num_regions << ", noise "
      << spec.noise_sigma << ", seed " << spec.seed << '\n';
  return 0;
}

// ------------------------------------------------------------------- train

struct TrainFlags {
  ConfigFlags common;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> batch_size;
  std::optional<double> lr;
  std::optional<std::string> optimizer;
  std::optional<std::string> checkpoint;
  std::optional<std::string> best_checkpoint;
  std::optional<std::string> log;
};

int cmd_train(const TrainFlags& f, std::ostream& out, std::ostream& err) {
  RunConfig cfg = f.common.resolve();
  if (f.epochs) cfg.train.epochs = *f.epochs;
  if (f.batch_size) cfg.train.batch_size = *f.batch_size;
  if (f.lr) cfg.optimizer.lr = *f.lr;
  if (f.optimizer) cfg.optimizer.kind = train::parse_optimizer(*f.optimizer);
  if (f.checkpoint) cfg.paths.checkpoint = *f.checkpoint;
  if (f.best_checkpoint) cfg.paths.best_checkpoint = *f.best_checkpoint;
  if (f.log) cfg.paths.log = *f.log;
  cfg.validate();
  const auto dataset = load_configured_dataset(cfg);

  const json echoed = cfg.to_json();
  auto log = open_out(cfg.paths.log);
  log << json{{"config", echoed}}.dump() << '\n';

  train::TrainConfig tc = cfg.train;
  tc.optimizer = cfg.optimizer;
  auto outcome = train::train(dataset, cfg.encoder, cfg.loss, tc,
                              [&](const train::StepRecord& r) {
                                log << r.to_json().dump() << '\n';
                              });
  json summary = {{"steps", outcome.log.size()},
                  {"aborted", outcome.aborted},
                  {"best_epoch", outcome.best_epoch}};
  if (outcome.best_val_r1 >= 0.0) summary["best_val_r1"] = outcome.best_val_r1;
  log << json{{"summary", summary}}.dump() << '\n';
  log.close();

  ad::save_checkpoint(cfg.paths.checkpoint, outcome.final_params.named(), echoed);
  if (outcome.aborted) {
    err << "train: " << outcome.diagnostic << "; kept the last good parameters in "
        << cfg.paths.checkpoint << '\n';
    return 1;
  }
  ad::save_checkpoint(cfg.best_checkpoint_path(), outcome.best_params.named(), echoed);

  out << "trained " << cfg.train.epochs << " epochs (" << outcome.log.size()
      << " steps, mode " << to_string(cfg.loss.mode) << ", seed " << cfg.train.seed
      << ")\n";
  if (!outcome.log.empty()) {
    const auto& last = outcome.log.back();
    out << "final loss " << fixed(last.total, 6) << " (global " << fixed(last.global, 6)
        << ", local " << fixed(last.local, 6) << ", relation "
        << fixed(last.relation, 6) << ")\n";
  }
  if (outcome.best_val_r1 >= 0.0) {
    out << "best val R@1 " << fixed(outcome.best_val_r1, 4) << " at epoch "
        << outcome.best_epoch << '\n';
  }
  out << "checkpoint " << cfg.paths.checkpoint << ", best " << cfg.best_checkpoint_path()
      << ", log " << cfg.paths.log << '\n';
  return 0;
}

// -------------------------------------------------------------------- eval

struct EvalFlags {
  ConfigFlags common;
  std::string checkpoint;
  std::string split = "test";
  std::optional<std::string> report;
  std::string sim_csv;
};

struct Loaded {
  RunConfig cfg;
  enc::EncoderParams params;
};

Loaded load_model(const ConfigFlags& common, const std::string& checkpoint) {
  auto ck = ad::load_checkpoint(checkpoint);
  Loaded out{common.resolve(ck.config), {}};
  out.cfg.validate();
  out.params = enc::EncoderParams::from_named(out.cfg.encoder, ck.params);
  return out;
}

void print_table(std::ostream& out, const retrieval::Evaluation& ev) {
  const int w = 10;
  out << std::left << std::setw(3 * w) << "Image annotation" << "Image retrieval" << '\n';
  for (int side = 0; side < 2; ++side) {
    for (const char* h : {"R@1", "R@5", "R@10"}) out << std::setw(w) << h;
  }
  out << '\n';
  for (const auto* report : {&ev.image_to_text, &ev.text_to_image}) {
    for (std::size_t k : {1, 5, 10}) {
      auto it = report->recall_at.find(k);
      out << std::setw(w) << (it == report->recall_at.end() ? "-" : fixed(it->second, 4));
    }
  }
  out << std::right << '\n';
}

int cmd_eval(const EvalFlags& f, std::ostream& out) {
  auto [cfg, params] = load_model(f.common, f.checkpoint);
  if (f.report) cfg.paths.report = *f.report;
  const auto dataset = load_configured_dataset(cfg);
  const auto split = data::parse_split(f.split);

  retrieval::EvalOptions options;
  options.k = cfg.loss.k;
  options.mode = cfg.loss.mode;
  options.workers = cfg.train.eval_workers;
  options.recall_ks = {1, 5, 10};
  const auto ev = retrieval::evaluate(dataset, split, params, cfg.encoder, options);

  out << "mode " << to_string(cfg.loss.mode) << ", split " << data::to_string(split) << ", "
      << ev.ids.size() << " pairs\n";
  print_table(out, ev);

  json report = {{"config", cfg.to_json()},
                 {"checkpoint", f.checkpoint},
                 {"split", data::to_string(split)},
                 {"reports", {ev.image_to_text.to_json(), ev.text_to_image.to_json()}}};
  auto file = open_out(cfg.paths.report);
  file << report.dump(2) << '\n';
  if (!f.sim_csv.empty()) retrieval::write_similarity_csv(f.sim_csv, ev);
  return 0;
}

// --------------------------------------------------------------- gradcheck

struct GradcheckFlags {
  ConfigFlags common;
  double tolerance = 1e-4;
  std::size_t max_per_tensor = 0;
};

int cmd_gradcheck(const GradcheckFlags& f, std::ostream& out, std::ostream& err) {
  RunConfig cfg = f.common.resolve();
  cfg.validate();
  ad::GradCheckOptions options;
  options.tolerance = f.tolerance;
  options.max_entries_per_tensor = f.max_per_tensor;
  options.seed = cfg.train.seed;

  const auto start = std::chrono::steady_clock::now();
  const auto report = gradcheck_config(cfg, options);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  std::size_t width = 0;
  for (const auto& p : report.params) width = std::max(width, p.name.size());
  std::size_t entries = 0, failed = 0;
  char rel[32];
  for (const auto& p : report.params) {
    std::snprintf(rel, sizeof rel, "%.3e", p.max_rel_error);
    out << std::left << std::setw(static_cast<int>(width) + 2) << p.name << std::right
        << std::setw(7) << p.checked << "  max rel " << rel << "  "
        << (p.passed ? "ok" : "FAIL") << '\n';
    entries += p.checked;
    if (!p.passed) ++failed;
  }
  std::snprintf(rel, sizeof rel, "%.3e", report.max_rel_error);
  char tol[32];
  std::snprintf(tol, sizeof tol, "%.1e", f.tolerance);
  out << "gradcheck " << (report.passed ? "PASS" : "FAIL") << ": max rel error " << rel
      << ", tolerance " << tol << ", " << report.params.size() << " groups, " << entries
      << " entries";
  if (failed > 0) out << ", " << failed << " groups over tolerance";
  out << '\n';
  err << "gradcheck took " << fixed(seconds, 1) << " s\n";
  return report.passed ? 0 : 1;
}

// ------------------------------------------------------------------ encode

struct EncodeFlags {
  ConfigFlags common;
  std::string checkpoint;
  std::string split = "test";
  std::string out = "bundles.jsonl";
};

json columns(const ad::Tensor& m) {
  json cols = json::array();
  if (!m.defined()) return cols;
  auto data = m.data();
  for (std::size_t c = 0; c < m.cols(); ++c) {
    std::vector<double> col(m.rows());
    for (std::size_t r = 0; r < m.rows(); ++r) col[r] = data[r * m.cols() + c];
    cols.push_back(col);
  }
  return cols;
}

json bundle_json(const enc::EmbeddingBundle& b) {
  json j = {{"global", b.global_vec()},
            {"locals", columns(b.locals)},
            {"relations", columns(b.relations)}};
  if (!b.attn_local.empty()) j["attn_local"] = b.attn_local;
  if (!b.attn_relation.empty()) j["attn_relation"] = b.attn_relation;
  return j;
}

int cmd_encode(const EncodeFlags& f, std::ostream& out) {
  auto [cfg, params] = load_model(f.common, f.checkpoint);
  const auto dataset = load_configured_dataset(cfg);
  const auto split = data::parse_split(f.split);
  const auto members = dataset.indices(split);
  if (members.empty()) throw std::invalid_argument("encode: split " + f.split + " is empty");
  if (dataset.meta().feature_dim != cfg.encoder.feature_dim) {
    throw std::invalid_argument("encode: dataset feature_dim " +
                                std::to_string(dataset.meta().feature_dim) +
                                " does not match model feature_dim " +
                                std::to_string(cfg.encoder.feature_dim));
  }
  ad::NoGradScope no_grad;
  const Channels ch = channels_for(cfg.loss.mode);
  const enc::Alphabet alphabet(cfg.encoder.alphabet);
  auto file = open_out(f.out);
  file << json{{"config", cfg.to_json()}, {"split", f.split}}.dump() << '\n';
  for (auto idx : members) {
    const auto& rec = dataset.records()[idx];
    const auto image = enc::encode_image(rec.image, params, cfg.encoder, ch);
    const auto text = enc::encode_text(
        enc::make_text_instance(rec.caption, alphabet, cfg.encoder.seq_len), params,
        cfg.encoder, ch);
    file << json{{"id", rec.id}, {"image", bundle_json(image)}, {"text", bundle_json(text)}}
                .dump()
         << '\n';
  }
  out << "encoded " << members.size() << " pairs of split " << f.split << " to " << f.out
      << '\n';
  return 0;
}

}  // namespace

ad::GradCheckReport gradcheck_config(const RunConfig& cfg,
                                     const ad::GradCheckOptions& options) {
  data::SyntheticSpec spec;
  spec.num_pairs = 2;
  spec.num_test = 0;
  spec.feature_dim = cfg.encoder.feature_dim;
  spec.seed = cfg.train.seed;
  const auto dataset = data::generate_synthetic(spec);

  const enc::Alphabet alphabet(cfg.encoder.alphabet);
  std::vector<enc::TextInstance> texts;
  train::BatchView batch;
  for (const auto& rec : dataset.records()) {
    texts.push_back(enc::make_text_instance(rec.caption, alphabet, cfg.encoder.seq_len));
  }
  for (std::size_t b = 0; b < dataset.size(); ++b) {
    batch.images.push_back(&dataset.records()[b].image);
    batch.texts.push_back(&texts[b]);
    batch.groups.push_back(dataset.group(b));
  }
  const auto params = enc::EncoderParams::init(
      cfg.encoder,
      train::derive_seed(cfg.train.seed, static_cast<std::uint64_t>(train::SeedStream::kInit)));
  std::mt19937_64 rng(
      train::derive_seed(cfg.train.seed, static_cast<std::uint64_t>(train::SeedStream::kTriplets)));
  const auto triplets = align::sample_triplets(batch.groups, rng);
  return train::check_loss_gradients(batch, triplets, params, cfg.encoder, cfg.loss, options);
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Cross-media relation-aware retrieval: data, training and evaluation",
               "cran"};
  app.require_subcommand(1);

  GenDataFlags gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "write a planted synthetic dataset");
  gen_cmd->add_option("--pairs", gen.pairs, "total pairs (required)");
  gen_cmd->add_option("--dim", gen.dim, "feature dimension")->capture_default_str();
  gen_cmd->add_option("--regions", gen.regions, "regions per image")->capture_default_str();
  gen_cmd->add_option("--noise", gen.noise, "region noise sigma")->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed, "generator seed (default 7, or CRAN_SEED)");
  gen_cmd->add_option("--test", gen.test, "test pairs (default pairs/5)");
  gen_cmd->add_option("--val", gen.val, "validation pairs")->capture_default_str();
  gen_cmd->add_option("--background", gen.background, "unnamed background prototypes")
      ->capture_default_str();
  gen_cmd->add_option("--out", gen.out, "output JSONL")->capture_default_str();
  gen_cmd->add_flag("--binary-sidecar", gen.sidecar, "store features in <out>.bin");

  TrainFlags tr;
  auto* train_cmd = app.add_subcommand("train", "train encoders and write checkpoints");
  tr.common.attach(train_cmd);
  train_cmd->add_option("--epochs", tr.epochs, "training epochs");
  train_cmd->add_option("--batch-size", tr.batch_size, "pairs per batch");
  train_cmd->add_option("--lr", tr.lr, "learning rate");
  train_cmd->add_option("--optimizer", tr.optimizer, "sgd | adam");
  train_cmd->add_option("--checkpoint", tr.checkpoint, "final checkpoint path");
  train_cmd->add_option("--best-checkpoint", tr.best_checkpoint,
                        "best-validation checkpoint path");
  train_cmd->add_option("--log", tr.log, "training log (JSONL)");

  EvalFlags ev;
  auto* eval_cmd = app.add_subcommand("eval", "recall@K for both retrieval directions");
  ev.common.attach(eval_cmd);
  eval_cmd->add_option("--checkpoint", ev.checkpoint, "checkpoint to evaluate")->required();
  eval_cmd->add_option("--split", ev.split, "train | val | test")->capture_default_str();
  eval_cmd->add_option("--report", ev.report, "JSON report path");
  eval_cmd->add_option("--sim-csv", ev.sim_csv, "write the similarity matrix as CSV");

  GradcheckFlags gc;
  auto* gc_cmd = app.add_subcommand("gradcheck", "finite-difference check of total_loss");
  gc.common.attach(gc_cmd);
  gc_cmd->add_option("--tolerance", gc.tolerance, "max relative error")->capture_default_str();
  gc_cmd->add_option("--max-per-tensor", gc.max_per_tensor,
                     "entries sampled per tensor (0 = all)")
      ->capture_default_str();

  EncodeFlags en;
  auto* encode_cmd = app.add_subcommand("encode", "dump embedding bundles to JSONL");
  en.common.attach(encode_cmd);
  encode_cmd->add_option("--checkpoint", en.checkpoint, "checkpoint to load")->required();
  encode_cmd->add_option("--split", en.split, "train | val | test")->capture_default_str();
  encode_cmd->add_option("--out", en.out, "output JSONL")->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : 2;
  }

  try {
    if (*gen_cmd) return cmd_gen_data(gen, out);
    if (*train_cmd) return cmd_train(tr, out, err);
    if (*eval_cmd) return cmd_eval(ev, out);
    if (*gc_cmd) return cmd_gradcheck(gc, out, err);
    if (*encode_cmd) return cmd_encode(en, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n\n" << app.get_subcommands().front()->help();
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace cran::cli
