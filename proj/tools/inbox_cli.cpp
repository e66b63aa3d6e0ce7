// inbox: dataset preparation, staged training, evaluation, synthetic data
// generation and embedding export.
//
// Exit status: 0 success, 2 configuration error, 3 data error,
// 4 numeric divergence, 1 anything else.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "inbox/checkpoint.hpp"
#include "inbox/config.hpp"
#include "inbox/errors.hpp"
#include "inbox/evaluation.hpp"
#include "inbox/kg_data.hpp"
#include "inbox/log.hpp"
#include "inbox/projection.hpp"
#include "inbox/synthbench.hpp"
#include "inbox/training.hpp"

namespace fs = std::filesystem;
using namespace inbox;

namespace {

enum Exit { kOk = 0, kOther = 1, kConfig = 2, kData = 3, kDiverged = 4 };

void require_dir(const std::string& path, const char* what) {
  if (path.empty()) throw ConfigError(std::string("missing ") + what);
  if (!fs::is_directory(path)) throw DataError(std::string(what) + " '" + path + "' does not exist");
}

// --- prepare ----------------------------------------------------------------

struct PrepareArgs {
  std::string dataset;
  std::string out;
  std::string expected;
};

int cmd_prepare(const PrepareArgs& a) {
  require_dir(a.dataset, "dataset directory");
  const Dataset ds = load_dataset(a.dataset);
  const DatasetManifest m = make_manifest(ds);
  const fs::path out = a.out.empty() ? fs::path(a.dataset) / "manifest.txt" : fs::path(a.out);
  write_manifest(m, out);

  write_manifest(m, std::cout);
  char buf[128];
  for (auto t : {TripletType::IRI, TripletType::TRT, TripletType::IRT}) {
    std::snprintf(buf, sizeof(buf), "%s %.2f%%\n", to_string(t), m.share(t));
    std::cout << buf;
  }
  if (ds.kg.size() == 0) log_warn("knowledge graph is empty: all triplet counts are 0");

  if (!a.expected.empty()) {
    const auto problems = compare_manifest(read_manifest_fields(a.expected), m);
    if (!problems.empty()) {
      for (const auto& p : problems) std::cerr << "mismatch: " << p << "\n";
      throw DataError("dataset does not match the expected manifest '" + a.expected + "'");
    }
    std::cout << "manifest matches " << a.expected << "\n";
  }
  return kOk;
}

// --- train ------------------------------------------------------------------

struct TrainArgs {
  std::string config;
  std::string dataset;
  std::string out;
  std::string resume;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  bool no_pretrain = false;
  bool only_irt = false;
  bool no_intersection = false;
  bool maxmin = false;
  bool no_user_bias = false;
  bool only_user_bias = false;
  bool literal_loss = false;
  bool deterministic = false;
};

RunConfig effective_config(const TrainArgs& a) {
  RunConfig cfg;
  if (!a.config.empty()) cfg = load_run_config(a.config);
  KeyValues overrides;
  for (const auto& s : a.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
    overrides[s.substr(0, eq)] = s.substr(eq + 1);
  }
  apply_key_values(overrides, cfg);
  if (!a.dataset.empty()) cfg.dataset = a.dataset;
  if (!a.out.empty()) cfg.out_dir = a.out;
  if (a.seed) cfg.train.seed = *a.seed;
  if (a.no_pretrain) cfg.train.pretrain = false;
  if (a.only_irt) cfg.train.only_irt = true;
  if (a.no_intersection) cfg.train.intersection = false;
  if (a.maxmin) cfg.train.interest.variant = IntersectionVariant::MaxMin;
  if (a.no_user_bias && a.only_user_bias) {
    throw ConfigError("--no-user-bias and --only-user-bias are mutually exclusive");
  }
  if (a.no_user_bias) cfg.train.interest.combine = CombineMode::ItemOnly;
  if (a.only_user_bias) cfg.train.interest.combine = CombineMode::UserOnly;
  if (a.literal_loss) cfg.train.literal_loss = true;
  if (a.deterministic) cfg.deterministic = true;
  if (cfg.deterministic) cfg.train.eval_threads = 1;
  if (cfg.out_dir.empty()) throw ConfigError("missing output directory (--out or out_dir)");
  cfg.train.validate();
  return cfg;
}

Checkpoint to_checkpoint(const PipelineState& st, const TrainConfig& cfg) {
  return Checkpoint{st.store, cfg.interest, st.optimizer};
}

int cmd_train(const TrainArgs& a) {
  const RunConfig cfg = effective_config(a);
  require_dir(cfg.dataset, "dataset directory");
  const Dataset ds = load_dataset(cfg.dataset);
  const fs::path out = cfg.out_dir;
  fs::create_directories(out);
  write_run_config(cfg, out / "config.txt");

  PipelineState st;
  if (!a.resume.empty()) {
    Checkpoint ck = checkpoint_load(a.resume);
    st.store = std::move(ck.store);
    st.optimizer = ck.optimizer ? std::move(*ck.optimizer)
                                : OptimizerState{0, zeros_like(st.store.params),
                                                 zeros_like(st.store.params)};
  } else {
    st = init_pipeline(ds, cfg.train);
  }

  std::ofstream log(out / "train.log", a.resume.empty() ? std::ios::trunc : std::ios::app);
  if (!log) throw DataError("cannot write '" + (out / "train.log").string() + "'");
  Stage current{};
  bool announced = false;
  PipelineHooks hooks;
  hooks.on_epoch = [&](const LogRecord& r) {
    if (!announced || r.stage != current) {
      log << "# stage " << static_cast<int>(r.stage) << " " << to_string(r.stage)
          << " intersection_variant " << to_string(cfg.train.interest.variant) << " combine "
          << to_string(cfg.train.interest.combine) << "\n";
      current = r.stage;
      announced = true;
    }
    write_log_record(log, r);
    log.flush();
  };
  hooks.on_stage_end = [&](Stage s, const PipelineState& state) {
    const auto path = out / ("stage" + std::to_string(static_cast<int>(s)) + ".ckpt");
    checkpoint_save(to_checkpoint(state, cfg.train), path);
    std::cout << "stage " << static_cast<int>(s) << " (" << to_string(s) << ") done: " << path.string()
              << "\n";
  };
  run_pipeline(ds, cfg.train, st, hooks);
  checkpoint_save(to_checkpoint(st, cfg.train), out / "model.ckpt");
  std::cout << "checkpoint: " << (out / "model.ckpt").string() << "\n";
  return kOk;
}

// --- eval -------------------------------------------------------------------

struct EvalArgs {
  std::string checkpoint;
  std::string dataset;
  std::string out;
  std::size_t k = 20;
  std::size_t threads = 1;
  bool deterministic = false;
};

void check_shapes(const ParamStore& s, const Dataset& ds) {
  const auto mismatch = [](const char* what, std::size_t ck, std::size_t data) {
    throw DataError(std::string("checkpoint has ") + std::to_string(ck) + " " + what +
                    ", dataset has " + std::to_string(data));
  };
  if (s.dims.n_users != ds.n_users()) mismatch("users", s.dims.n_users, ds.n_users());
  if (s.dims.n_items != ds.n_items()) mismatch("items", s.dims.n_items, ds.n_items());
  if (s.dims.n_tags != ds.n_tags()) mismatch("tags", s.dims.n_tags, ds.n_tags());
  if (s.dims.n_relations != ds.n_relations()) {
    mismatch("relations", s.dims.n_relations, ds.n_relations());
  }
}

int cmd_eval(const EvalArgs& a) {
  if (a.k == 0) throw ConfigError("--k must be positive");
  require_dir(a.dataset, "dataset directory");
  const Checkpoint ck = checkpoint_load(a.checkpoint);
  const Dataset ds = load_dataset(a.dataset);
  check_shapes(ck.store, ds);
  EvalOptions opts;
  opts.k = a.k;
  opts.threads = a.deterministic ? 1 : a.threads;
  const EvalReport r = evaluate_all(ck.store, ds, ck.interest, opts);
  write_report(r, std::cout);
  if (!a.out.empty()) write_report(r, fs::path(a.out));
  return kOk;
}

// --- synth ------------------------------------------------------------------

struct SynthArgs {
  SynthConfig cfg;
  std::string out;
  bool no_trt = false;
};

int cmd_synth(SynthArgs a) {
  if (a.out.empty()) throw ConfigError("missing --out");
  a.cfg.emit_trt = !a.no_trt;
  const SynthData data = generate_synthetic(a.cfg);
  write_synthetic(data, a.out);
  const Dataset ds = data.dataset();
  write_manifest(make_manifest(ds), fs::path(a.out) / "manifest.txt");
  const EvalReport oracle = oracle_metrics(data.truth, ds.graph);
  const EvalReport random = random_baseline(ds.graph, a.cfg.seed);
  char buf[160];
  std::snprintf(buf, sizeof(buf), "oracle recall@20 %.4f ndcg@20 %.4f\nrandom recall@20 %.4f\n",
                oracle.recall, oracle.ndcg, random.recall);
  std::cout << "wrote " << a.out << "\n" << buf;
  return kOk;
}

// --- export-projection ------------------------------------------------------

struct ExportArgs {
  std::string checkpoint;
  std::string dataset;
  std::string out;
  Id relation = 0;
  Id tag = 0;
  std::size_t n_random = 200;
  std::uint64_t seed = 0;
};

int cmd_export(const ExportArgs& a) {
  require_dir(a.dataset, "dataset directory");
  const Checkpoint ck = checkpoint_load(a.checkpoint);
  const Dataset ds = load_dataset(a.dataset);
  check_shapes(ck.store, ds);
  const auto rows = export_projection(ck.store, ds, Concept{a.relation, a.tag}, a.n_random, a.seed);
  if (a.out.empty()) {
    write_projection_csv(rows, std::cout);
  } else {
    std::ofstream out(a.out);
    if (!out) throw DataError("cannot write '" + a.out + "'");
    write_projection_csv(rows, out);
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"InBox: knowledge-graph box embeddings for recommendation"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Progress messages on stderr");

  PrepareArgs prep;
  auto* p = app.add_subcommand("prepare", "Validate a dataset directory and write its manifest");
  p->add_option("dataset", prep.dataset, "Directory with train.txt, test.txt, kg_final.txt")
      ->required();
  p->add_option("--out", prep.out, "Manifest path (default: <dataset>/manifest.txt)");
  p->add_option("--expected", prep.expected, "Manifest the counts must match");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Run the staged training pipeline");
  t->add_option("config", tr.config, "key = value configuration file");
  t->add_option("--dataset", tr.dataset, "Dataset directory (overrides config)");
  t->add_option("--out", tr.out, "Run directory (overrides config)");
  t->add_option("--seed", tr.seed, "Random seed (overrides config)");
  t->add_option("--set", tr.sets, "Override a config key: --set key=value");
  t->add_option("--resume", tr.resume, "Continue from a stage checkpoint");
  t->add_flag("--no-pretrain", tr.no_pretrain, "Skip the basic pretraining stage (w/o B)");
  t->add_flag("--only-irt", tr.only_irt, "Pretrain on IRT triplets only");
  t->add_flag("--no-intersection", tr.no_intersection, "Skip the box intersection stage (w/o I)");
  t->add_flag("--maxmin", tr.maxmin, "Use the max-min intersection (M-M I)");
  t->add_flag("--no-user-bias", tr.no_user_bias, "Item-only intersection boxes (w/o userI)");
  t->add_flag("--only-user-bias", tr.only_user_bias, "User-bias intersection boxes only");
  t->add_flag("--literal-loss", tr.literal_loss, "Negative term with the sign as printed");
  t->add_flag("--deterministic", tr.deterministic, "Single worker everywhere");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "All-ranking recall@K and ndcg@K");
  e->add_option("--checkpoint", ev.checkpoint, "Model checkpoint")->required();
  e->add_option("--dataset", ev.dataset, "Dataset directory")->required();
  e->add_option("--k", ev.k, "Cutoff K")->capture_default_str();
  e->add_option("--out", ev.out, "Report file");
  e->add_option("--threads", ev.threads, "Evaluation workers")->capture_default_str();
  e->add_flag("--deterministic", ev.deterministic, "Single worker");

  SynthArgs sy;
  auto* s = app.add_subcommand("synth", "Generate a synthetic dataset with planted concepts");
  s->add_option("--out", sy.out, "Output directory")->required();
  s->add_option("--n-concepts", sy.cfg.n_concepts)->capture_default_str();
  s->add_option("--n-items", sy.cfg.n_items)->capture_default_str();
  s->add_option("--n-users", sy.cfg.n_users)->capture_default_str();
  s->add_option("--d-true", sy.cfg.d_true)->capture_default_str();
  s->add_option("--concepts-per-interest", sy.cfg.concepts_per_interest)->capture_default_str();
  s->add_option("--items-per-user", sy.cfg.items_per_user)->capture_default_str();
  s->add_option("--n-relations", sy.cfg.n_relations)->capture_default_str();
  s->add_option("--noise", sy.cfg.noise)->capture_default_str();
  s->add_option("--seed", sy.cfg.seed)->capture_default_str();
  s->add_flag("--no-trt", sy.no_trt, "Do not emit TRT triplets");

  ExportArgs ex;
  auto* x = app.add_subcommand("export-projection", "PCA projection of item points as CSV");
  x->add_option("--checkpoint", ex.checkpoint, "Model checkpoint")->required();
  x->add_option("--dataset", ex.dataset, "Dataset directory")->required();
  x->add_option("--relation", ex.relation, "Concept relation id (augmented)")->required();
  x->add_option("--tag", ex.tag, "Concept tag id")->required();
  x->add_option("--n-random", ex.n_random, "Unlinked items to add")->capture_default_str();
  x->add_option("--seed", ex.seed)->capture_default_str();
  x->add_option("--out", ex.out, "CSV path (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kOk : kConfig;
  }
  if (verbose) set_log_level(LogLevel::Info);

  try {
    if (*p) return cmd_prepare(prep);
    if (*t) return cmd_train(tr);
    if (*e) return cmd_eval(ev);
    if (*s) return cmd_synth(sy);
    if (*x) return cmd_export(ex);
  } catch (const ConfigError& err) {
    std::cerr << "config error: " << err.what() << "\n";
    return kConfig;
  } catch (const DivergedError& err) {
    std::cerr << "diverged: " << err.what() << "\n";
    return kDiverged;
  } catch (const Error& err) {
    // Data, parse, range, checkpoint and sampling problems.
    std::cerr << "data error: " << err.what() << "\n";
    return kData;
  } catch (const fs::filesystem_error& err) {
    std::cerr << "data error: " << err.what() << "\n";
    return kData;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kOther;
  }
  return kOther;
}
