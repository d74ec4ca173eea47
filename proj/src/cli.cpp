#include "alseg/cli.hpp"

#include <atomic>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "toml.hpp"

#include "alseg/error.hpp"
#include "alseg/harness.hpp"
#include "alseg/pca.hpp"
#include "alseg/serialize.hpp"
#include "alseg/umap.hpp"

namespace alseg::cli {

namespace fs = std::filesystem;

namespace {

/// Bad flags, config keys or missing inputs (exit code 2).
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void require_file(const fs::path& p, const std::string& what) {
  if (!fs::is_regular_file(p)) throw UsageError(what + " not found: " + p.string());
}

// ---------------------------------------------------------------------------
// TOML configuration.

template <typename T>
T get(const toml::node& node, const std::string& key) {
  if constexpr (std::is_same_v<T, double>) {
    if (auto v = node.value<double>()) return *v;
  } else if constexpr (std::is_same_v<T, bool>) {
    if (auto v = node.as_boolean()) return v->get();
  } else if constexpr (std::is_same_v<T, std::string>) {
    if (auto v = node.as_string()) return v->get();
  } else {
    if (auto v = node.as_integer()) {
      if (v->get() < 0 && std::is_unsigned_v<T>) throw UsageError("config: " + key + " must be >= 0");
      return static_cast<T>(v->get());
    }
  }
  throw UsageError("config: " + key + " has the wrong type");
}

void check_keys(const toml::table& t, const std::string& section, const std::set<std::string>& allowed) {
  for (const auto& [k, v] : t) {
    const std::string key(k.str());
    if (!allowed.count(key)) {
      throw UsageError("config: unknown key '" + (section.empty() ? key : section + "." + key) + "'");
    }
  }
}

const toml::table* section(const toml::table& root, const char* name) {
  const auto* node = root.get(name);
  if (!node) return nullptr;
  const auto* t = node->as_table();
  if (!t) throw UsageError(std::string("config: '") + name + "' must be a table");
  return t;
}

void apply_toml(const fs::path& path, ExperimentConfig& cfg) {
  require_file(path, "config file");
  toml::table root;
  try {
    root = toml::parse_file(path.string());
  } catch (const toml::parse_error& e) {
    throw UsageError("config: " + std::string(e.description()));
  }
  check_keys(root, "", {"experiment", "strategy", "umap", "learner"});

  if (const auto* t = section(root, "experiment")) {
    check_keys(*t, "experiment",
               {"dataset", "iterations", "epochs_per_iter", "initial_fraction", "seeding_dice_threshold",
                "seeding_max_epochs", "seed", "variant", "reset_optimizer"});
    for (const auto& [k, v] : *t) {
      const std::string key(k.str());
      if (key == "dataset") cfg.dataset = get<std::string>(v, key);
      if (key == "iterations") cfg.iterations = get<int>(v, key);
      if (key == "epochs_per_iter") cfg.epochs_per_iter = get<int>(v, key);
      if (key == "initial_fraction") cfg.initial_fraction = get<double>(v, key);
      if (key == "seeding_dice_threshold") cfg.seeding_dice_threshold = get<double>(v, key);
      if (key == "seeding_max_epochs") cfg.seeding_max_epochs = get<int>(v, key);
      if (key == "seed") cfg.seed = get<std::uint64_t>(v, key);
      if (key == "variant") {
        const auto s = get<std::string>(v, key);
        if (s == "standard") cfg.variant = Variant::standard;
        else if (s == "large_initial" || s == "large-initial") cfg.variant = Variant::large_initial;
        else throw UsageError("config: unknown variant '" + s + "'");
      }
      if (key == "reset_optimizer") cfg.reset_optimizer = get<bool>(v, key);
    }
  }
  if (const auto* t = section(root, "strategy")) {
    check_keys(*t, "strategy", {"name", "n_u", "n_c", "seed"});
    for (const auto& [k, v] : *t) {
      const std::string key(k.str());
      if (key == "name") cfg.strategy.name = strategy_from_string(get<std::string>(v, key));
      if (key == "n_u") cfg.strategy.n_u = get<int>(v, key);
      if (key == "n_c") cfg.strategy.n_c = get<int>(v, key);
      if (key == "seed") cfg.strategy.seed = get<std::uint64_t>(v, key);
    }
  }
  if (const auto* t = section(root, "umap")) {
    check_keys(*t, "umap", {"n_neighbors", "min_dist", "n_epochs", "negative_sample_rate", "initial_lr",
                            "transform_epochs"});
    auto& u = cfg.strategy.umap;
    for (const auto& [k, v] : *t) {
      const std::string key(k.str());
      if (key == "n_neighbors") u.n_neighbors = get<int>(v, key);
      if (key == "min_dist") u.min_dist = get<double>(v, key);
      if (key == "n_epochs") u.n_epochs = get<int>(v, key);
      if (key == "negative_sample_rate") u.negative_sample_rate = get<int>(v, key);
      if (key == "initial_lr") u.initial_lr = get<double>(v, key);
      if (key == "transform_epochs") u.transform_epochs = get<int>(v, key);
    }
  }
  if (const auto* t = section(root, "learner")) {
    check_keys(*t, "learner", {"learning_rate", "loss", "gamma", "normalize_bce", "channels", "batch_size",
                               "beta1", "beta2", "adam_epsilon"});
    auto& l = cfg.learner;
    for (const auto& [k, v] : *t) {
      const std::string key(k.str());
      if (key == "learning_rate") l.learning_rate = get<double>(v, key);
      if (key == "loss") l.loss.kind = loss_kind_from_string(get<std::string>(v, key));
      if (key == "gamma") l.loss.gamma = get<double>(v, key);
      if (key == "normalize_bce") l.loss.normalize_bce = get<bool>(v, key);
      if (key == "batch_size") l.batch_size = get<int>(v, key);
      if (key == "beta1") l.beta1 = get<double>(v, key);
      if (key == "beta2") l.beta2 = get<double>(v, key);
      if (key == "adam_epsilon") l.adam_epsilon = get<double>(v, key);
      if (key == "channels") {
        const auto* arr = v.as_array();
        if (!arr || arr->size() != 3) throw UsageError("config: learner.channels must be 3 integers");
        l.shape.c1 = get<int>(*arr->get(0), key);
        l.shape.c2 = get<int>(*arr->get(1), key);
        l.shape.bottleneck = get<int>(*arr->get(2), key);
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Subcommands.

struct SynthArgs {
  SynthOptions opts;
  std::string name = "synthetic";
  std::string out;
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  auto m = synth_dataset(a.opts);
  m.name = a.name;
  const fs::path path = fs::path(a.out) / "manifest.json";
  fs::create_directories(a.out);
  save_manifest(m, path);
  out << path.string() << '\n';
  return 0;
}

struct RunArgs {
  std::string manifest;
  std::string config;
  std::string out;
  std::vector<std::string> strategies;
  std::optional<std::uint64_t> seed;
  std::optional<int> iterations, epochs, n_u, n_c;
  std::optional<double> lr, initial_fraction;
  std::string loss, variant;
  bool full_data = false;
  bool no_diagnostics = false;
  int jobs = 1;
};

ExperimentConfig build_config(const RunArgs& a) {
  ExperimentConfig cfg;
  if (!a.config.empty()) apply_toml(a.config, cfg);
  cfg.dataset = a.manifest;
  if (a.seed) {
    cfg.seed = *a.seed;
    cfg.strategy.seed = *a.seed;
  }
  if (a.iterations) cfg.iterations = *a.iterations;
  if (a.epochs) cfg.epochs_per_iter = *a.epochs;
  if (a.n_u) cfg.strategy.n_u = *a.n_u;
  if (a.n_c) cfg.strategy.n_c = *a.n_c;
  if (a.lr) cfg.learner.learning_rate = *a.lr;
  if (a.initial_fraction) cfg.initial_fraction = *a.initial_fraction;
  if (!a.loss.empty()) cfg.learner.loss.kind = loss_kind_from_string(a.loss);
  if (!a.variant.empty()) {
    if (a.variant == "standard") cfg.variant = Variant::standard;
    else if (a.variant == "large_initial" || a.variant == "large-initial") cfg.variant = Variant::large_initial;
    else throw UsageError("unknown variant '" + a.variant + "'");
  }
  return cfg;
}

int cmd_run(const RunArgs& a, std::ostream& out, std::ostream& err) {
  require_file(a.manifest, "manifest");
  const ExperimentConfig base = build_config(a);
  std::vector<ExperimentConfig> configs;
  if (a.strategies.empty()) {
    configs.push_back(base);
  } else {
    for (const auto& s : a.strategies) {
      ExperimentConfig c = base;
      c.strategy.name = strategy_from_string(s);
      configs.push_back(c);
    }
  }
  for (const auto& c : configs) validate(c);
  const DatasetManifest manifest = load_manifest(a.manifest);

  auto out_dir = [&](const ExperimentConfig& c) {
    if (configs.size() == 1) return fs::path(a.out);
    return fs::path(a.out) / to_string(c.strategy.name);
  };

  std::mutex io;
  std::atomic<std::size_t> next{0};
  std::vector<std::string> failures(configs.size());
  auto worker = [&] {
    for (std::size_t i = next++; i < configs.size(); i = next++) {
      const auto& c = configs[i];
      const std::string label = a.full_data ? "full_data" : to_string(c.strategy.name);
      RunOptions opts;
      opts.output_dir = out_dir(c);
      opts.write_diagnostics = !a.no_diagnostics;
      opts.on_iteration = [&](const IterationRow& row) {
        std::lock_guard lock(io);
        out << label << " iteration " << row.iteration << " labeled " << row.n_labeled << " dice "
            << std::setprecision(4) << row.metrics[0] << '\n';
      };
      try {
        if (a.full_data) full_data_reference(c, manifest, opts);
        else run(c, manifest, opts);
        std::lock_guard lock(io);
        out << (opts.output_dir / "run.json").string() << '\n';
      } catch (const std::exception& e) {
        failures[i] = e.what();
      }
    }
  };
  const int jobs = std::max(1, std::min<int>(a.jobs, static_cast<int>(configs.size())));
  std::vector<std::thread> pool;
  for (int j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  int code = 0;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    if (failures[i].empty()) continue;
    err << "error: " << to_string(configs[i].strategy.name) << ": " << failures[i] << '\n';
    code = 1;
  }
  return code;
}

int cmd_eval(const std::string& checkpoint, const std::string& manifest_path, const std::string& out_path,
             std::ostream& out) {
  require_file(checkpoint, "checkpoint");
  require_file(manifest_path, "manifest");
  const Learner learner = Learner::load_checkpoint(checkpoint);
  const DatasetManifest m = load_manifest(manifest_path);
  RunRecord rec;
  rec.kind = "eval";
  for (auto i : m.splits.holdout) {
    const auto& s = m.samples[i];
    rec.final_metrics.push_back(evaluate_sample(s.id, learner.forward(s.image).probs, s.mask, m.pixel_spacing));
  }
  write_holdout_metrics_csv(rec, out_path);
  for (int k = 0; k < kMetricCount; ++k) {
    const auto metric = static_cast<Metric>(k);
    double sum = 0.0;
    int n = 0;
    for (const auto& s : rec.final_metrics) {
      if (is_distance_metric(metric) && !s.distance_valid()) continue;
      sum += s.value(metric);
      ++n;
    }
    out << to_string(metric) << ' ' << (n ? sum / n : std::nan("")) << " (n=" << n << ")\n";
  }
  return 0;
}

int cmd_compare(const std::string& baseline_path, const std::vector<std::string>& runs, const std::string& out_dir,
                std::ostream& out) {
  if (baseline_path.empty()) throw UsageError("compare: --baseline is required");
  require_file(baseline_path, "baseline run record");
  const RunRecord baseline = load_run_record(baseline_path);
  std::vector<RunRecord> records{baseline};
  for (const auto& r : runs) {
    require_file(r, "run record");
    records.push_back(load_run_record(r));
  }
  const MetricReport report = compare(records, baseline);
  fs::create_directories(out_dir);
  write_comparison_csv(report, fs::path(out_dir) / "comparison.csv");
  {
    std::ofstream js(fs::path(out_dir) / "comparison.json");
    js << to_json(report).dump(2) << '\n';
  }
  out << std::left << std::setw(24) << "metric";
  for (const auto& c : report.rows.front().cells) out << std::setw(26) << c.strategy;
  out << '\n';
  for (const auto& row : report.rows) {
    out << std::setw(24) << to_string(row.metric);
    for (const auto& c : row.cells) {
      std::ostringstream cell;
      cell << std::setprecision(4) << c.value << " (p=" << std::setprecision(3) << c.test.p_one_sided << ")"
           << (c.significant ? "*" : "");
      out << std::setw(26) << cell.str();
    }
    out << '\n';
  }
  return 0;
}

struct EmbedArgs {
  std::string checkpoint, manifest, out;
  std::uint64_t seed = 0;
  int n_neighbors = 15;
};

int cmd_embed(const EmbedArgs& a, std::ostream& out) {
  require_file(a.checkpoint, "checkpoint");
  require_file(a.manifest, "manifest");
  const Learner learner = Learner::load_checkpoint(a.checkpoint);
  const DatasetManifest m = load_manifest(a.manifest);

  auto features_of = [&](const std::vector<std::size_t>& idx) {
    RowMatrix f;
    for (std::size_t r = 0; r < idx.size(); ++r) {
      const auto v = learner.forward(m.samples[idx[r]].image).features;
      if (r == 0) f.resize(static_cast<Eigen::Index>(idx.size()), v.size());
      f.row(static_cast<Eigen::Index>(r)) = v.cast<double>().transpose();
    }
    return f;
  };
  const auto& train = m.splits.train;
  const auto& hold = m.splits.holdout;
  const RowMatrix ftrain = features_of(train);
  const RowMatrix fhold = hold.empty() ? RowMatrix(0, ftrain.cols()) : features_of(hold);

  const PcaModel pca = pca_fit(ftrain, 2);
  UmapConfig ucfg;
  ucfg.seed = a.seed;
  ucfg.n_neighbors = a.n_neighbors;
  const UmapModel umap = umap_fit(ftrain, ucfg);

  std::ofstream csv = [&] {
    if (fs::path(a.out).has_parent_path()) fs::create_directories(fs::path(a.out).parent_path());
    std::ofstream f(a.out);
    if (!f) throw std::runtime_error("cannot write " + a.out);
    return f;
  }();
  csv << std::setprecision(10) << "sample_id,split,method,x,y\n";
  auto emit = [&](const char* method, const RowMatrix& tr, const RowMatrix& ho) {
    for (std::size_t i = 0; i < train.size(); ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      csv << m.samples[train[i]].id << ",train," << method << ',' << tr(r, 0) << ',' << tr(r, 1) << '\n';
    }
    for (std::size_t i = 0; i < hold.size(); ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      csv << m.samples[hold[i]].id << ",holdout," << method << ',' << ho(r, 0) << ',' << ho(r, 1) << '\n';
    }
  };
  emit("pca", pca_transform(pca, ftrain), pca_transform(pca, fhold));
  emit("umap", umap.embedding, umap_transform(umap, fhold));
  out << a.out << '\n';
  return 0;
}

int cmd_replay(const std::string& record_path, std::string manifest_path, const std::string& out_dir,
               std::ostream& out, std::ostream& err) {
  require_file(record_path, "run record");
  const RunRecord rec = load_run_record(record_path);
  if (manifest_path.empty()) manifest_path = rec.config.dataset;
  require_file(manifest_path, "manifest");
  const DatasetManifest m = load_manifest(manifest_path);
  RunOptions opts;
  opts.output_dir = out_dir;
  const ReplayReport rep = replay(rec, m, opts);
  if (rep.identical) {
    out << "replay: queried-id history identical (" << rec.history.size() << " iterations)\n";
    return 0;
  }
  err << "replay: history differs starting at iteration " << rep.first_mismatch << '\n';
  return 1;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Active-learning query strategies for binary segmentation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "alseg 1.0");

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Generate a synthetic ellipse dataset");
  s->add_option("--subjects", synth.opts.n_subjects, "Number of subjects")->check(CLI::PositiveNumber);
  s->add_option("--slices", synth.opts.slices_per_subject, "Slices per subject")->check(CLI::PositiveNumber);
  s->add_option("--side", synth.opts.side, "Image side length (>= 16; the network needs a multiple of 4)");
  s->add_option("--noise", synth.opts.noise_sd, "Gaussian noise sd")->check(CLI::NonNegativeNumber);
  s->add_option("--seed", synth.opts.seed, "Random seed");
  s->add_option("--holdout-fraction", synth.opts.holdout_fraction, "Hold-out fraction");
  s->add_flag("--hard", synth.opts.hard_mode, "Add a second ellipse with probability 0.25");
  s->add_option("--name", synth.name, "Dataset name");
  s->add_option("-o,--out", synth.out, "Output directory")->required();

  RunArgs ra;
  std::string strategy_list;
  auto* r = app.add_subcommand("run", "Run active-learning experiments");
  r->add_option("-m,--manifest", ra.manifest, "Dataset manifest")->required();
  r->add_option("-c,--config", ra.config, "TOML experiment config");
  r->add_option("-o,--out", ra.out, "Output directory")->required();
  r->add_option("-s,--strategy", strategy_list, "Strategy name or comma-separated list");
  r->add_option("--seed", ra.seed, "Seed for pool, learner and queries");
  r->add_option("--iterations", ra.iterations, "Active-learning iterations");
  r->add_option("--epochs", ra.epochs, "Training epochs per iteration");
  r->add_option("--nu", ra.n_u, "Query budget N_u");
  r->add_option("--nc", ra.n_c, "Intermediate budget N_c");
  r->add_option("--lr", ra.lr, "Learning rate");
  r->add_option("--initial-fraction", ra.initial_fraction, "Initial labeled fraction");
  r->add_option("--loss", ra.loss, "focal_dice or dice_bce");
  r->add_option("--variant", ra.variant, "standard or large_initial");
  r->add_option("-j,--jobs", ra.jobs, "Parallel workers across strategies")->check(CLI::PositiveNumber);
  r->add_flag("--full-data", ra.full_data, "Train on the whole train split instead");
  r->add_flag("--no-diagnostics", ra.no_diagnostics, "Skip per-iteration query diagnostics");

  std::string ev_ckpt, ev_manifest, ev_out;
  auto* e = app.add_subcommand("eval", "Evaluate a checkpoint on the hold-out split");
  e->add_option("--checkpoint", ev_ckpt, "Checkpoint JSON")->required();
  e->add_option("-m,--manifest", ev_manifest, "Dataset manifest")->required();
  e->add_option("-o,--out", ev_out, "Per-sample metric CSV")->required();

  std::string cmp_baseline, cmp_out;
  std::vector<std::string> cmp_runs;
  auto* c = app.add_subcommand("compare", "Compare run records against a random baseline");
  c->add_option("-b,--baseline", cmp_baseline, "Baseline run.json");
  c->add_option("runs", cmp_runs, "Other run.json files")->required();
  c->add_option("-o,--out", cmp_out, "Output directory")->required();

  EmbedArgs ea;
  auto* em = app.add_subcommand("embed", "Dump PCA and UMAP embeddings of bottleneck features");
  em->add_option("--checkpoint", ea.checkpoint, "Checkpoint JSON")->required();
  em->add_option("-m,--manifest", ea.manifest, "Dataset manifest")->required();
  em->add_option("-o,--out", ea.out, "Output CSV")->required();
  em->add_option("--seed", ea.seed, "UMAP seed");
  em->add_option("--n-neighbors", ea.n_neighbors, "UMAP neighbours");

  std::string rp_record, rp_manifest, rp_out;
  auto* rp = app.add_subcommand("replay", "Re-run a recorded experiment and compare query histories");
  rp->add_option("record", rp_record, "run.json")->required();
  rp->add_option("-m,--manifest", rp_manifest, "Dataset manifest (defaults to the recorded path)");
  rp->add_option("-o,--out", rp_out, "Write the replayed run here");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& ex) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << "alseg 1.0\n";
    return 0;
  } catch (const CLI::ParseError& ex) {
    err << "error: " << ex.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (s->parsed()) return cmd_synth(synth, out);
    if (r->parsed()) {
      std::stringstream ss(strategy_list);
      for (std::string item; std::getline(ss, item, ',');) {
        if (!item.empty()) ra.strategies.push_back(item);
      }
      for (const auto& name : ra.strategies) strategy_from_string(name);
      return cmd_run(ra, out, err);
    }
    if (e->parsed()) return cmd_eval(ev_ckpt, ev_manifest, ev_out, out);
    if (c->parsed()) return cmd_compare(cmp_baseline, cmp_runs, cmp_out, out);
    if (em->parsed()) return cmd_embed(ea, out);
    if (rp->parsed()) return cmd_replay(rp_record, rp_manifest, rp_out, out, err);
  } catch (const UsageError& ex) {
    err << "error: " << ex.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& ex) {
    err << "error: " << ex.what() << '\n';
    return 2;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace alseg::cli
