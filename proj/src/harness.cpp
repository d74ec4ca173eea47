#include "alseg/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

#include "alseg/error.hpp"
#include "alseg/serialize.hpp"

namespace alseg {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint64_t kPoolStream = 1;
constexpr std::uint64_t kLearnerStream = 2;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

constexpr std::array<Metric, kMetricCount> kMetrics = {
    Metric::dice,          Metric::precision,
    Metric::sensitivity,   Metric::volumetric_similarity,
    Metric::avg_hausdorff, Metric::mean_surface_distance,
    Metric::hd95,
};

bool same(double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); }

bool same(const SampleMetrics& a, const SampleMetrics& b) {
  if (a.sample_id != b.sample_id || a.single_contour != b.single_contour ||
      a.distance.defined != b.distance.defined) {
    return false;
  }
  for (auto m : kMetrics) {
    if (!same(a.value(m), b.value(m))) return false;
  }
  return true;
}

std::vector<const SliceSample*> pointers(const DatasetManifest& m,
                                         const std::vector<std::size_t>& idx) {
  std::vector<const SliceSample*> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(&m.samples.at(i));
  return out;
}

std::vector<SampleMetrics> evaluate_holdout(const Learner& learner, const DatasetManifest& m) {
  std::vector<SampleMetrics> out;
  out.reserve(m.splits.holdout.size());
  for (auto i : m.splits.holdout) {
    const auto& s = m.samples[i];
    out.push_back(evaluate_sample(s.id, learner.forward(s.image).probs, s.mask, m.pixel_spacing));
  }
  return out;
}

void summarize(const std::vector<SampleMetrics>& metrics, IterationRow& row) {
  for (std::size_t k = 0; k < kMetrics.size(); ++k) {
    const Metric m = kMetrics[k];
    double sum = 0.0;
    int count = 0;
    for (const auto& s : metrics) {
      if (is_distance_metric(m) && !s.distance_valid()) continue;
      sum += s.value(m);
      ++count;
    }
    row.metrics[k] = count > 0 ? sum / count : kNaN;
  }
  row.n_single_contour = static_cast<int>(
      std::count_if(metrics.begin(), metrics.end(), [](const auto& s) { return s.distance_valid(); }));
}

double elapsed(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string iteration_tag(int t) {
  std::ostringstream os;
  os << "iter_" << std::setw(3) << std::setfill('0') << t << ".csv";
  return os.str();
}

void write_outputs(const RunRecord& record, const Learner* learner, const fs::path& dir) {
  if (dir.empty()) return;
  fs::create_directories(dir);
  if (learner) learner->save_checkpoint(dir / record.checkpoint);
  write_curve_csv(record, dir / "curve.csv");
  write_timings_csv(record, dir / "timings.csv");
  write_holdout_metrics_csv(record, dir / "holdout_metrics.csv");
  save_run_record(record, dir / "run.json");
}

json number_or_null(double v) { return std::isnan(v) ? json(nullptr) : json(v); }

double number_from(const json& j) { return j.is_null() ? kNaN : j.get<double>(); }

std::string variant_name(Variant v) { return v == Variant::standard ? "standard" : "large_initial"; }

Variant variant_from(const std::string& s) {
  if (s == "standard") return Variant::standard;
  if (s == "large_initial" || s == "large-initial") return Variant::large_initial;
  throw std::invalid_argument("unknown variant '" + s + "' (expected standard or large_initial)");
}

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  std::ostringstream os;
  os << std::setprecision(12) << v;
  return os.str();
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

double median(std::vector<double> v) {
  if (v.empty()) return kNaN;
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

double mean(const std::vector<double>& v) {
  if (v.empty()) return kNaN;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

void validate(const ExperimentConfig& cfg) {
  if (cfg.iterations < 1) throw std::invalid_argument("iterations must be >= 1");
  if (cfg.epochs_per_iter < 0) throw std::invalid_argument("epochs_per_iter must be >= 0");
  if (!(cfg.initial_fraction > 0.0 && cfg.initial_fraction <= 1.0)) {
    throw std::invalid_argument("initial_fraction must lie in (0, 1]");
  }
  if (cfg.seeding_max_epochs < 0) throw std::invalid_argument("seeding_max_epochs must be >= 0");
  if (cfg.strategy.n_u < 1) throw std::invalid_argument("N_u must be >= 1");
  if (cfg.strategy.n_c < cfg.strategy.n_u) throw std::invalid_argument("N_c must be >= N_u");
  validate(cfg.learner);
  validate(cfg.strategy.umap);
}

Schedule schedule(const ExperimentConfig& cfg, std::size_t train_size) {
  Schedule s;
  s.iterations = cfg.iterations;
  s.initial_labeled = static_cast<std::size_t>(
      std::ceil(cfg.initial_fraction * static_cast<double>(train_size) - 1e-9));
  if (cfg.variant == Variant::large_initial) {
    s.iterations = (cfg.iterations + 1) / 2;
    s.initial_labeled += static_cast<std::size_t>(cfg.iterations - s.iterations) *
                         static_cast<std::size_t>(cfg.strategy.n_u);
  }
  return s;
}

bool IterationRow::operator==(const IterationRow& o) const {
  if (iteration != o.iteration || n_labeled != o.n_labeled ||
      n_single_contour != o.n_single_contour || query_seed != o.query_seed ||
      !same(train_loss, o.train_loss)) {
    return false;
  }
  for (std::size_t k = 0; k < metrics.size(); ++k) {
    if (!same(metrics[k], o.metrics[k])) return false;
  }
  return true;
}

bool RunRecord::operator==(const RunRecord& o) const {
  if (!(config == o.config) || kind != o.kind || pool_seed != o.pool_seed ||
      learner_seed != o.learner_seed || seed_epochs != o.seed_epochs ||
      !same(seed_train_dice, o.seed_train_dice) || initial_labeled != o.initial_labeled ||
      rows != o.rows || history != o.history || checkpoint != o.checkpoint || error != o.error ||
      final_metrics.size() != o.final_metrics.size()) {
    return false;
  }
  for (std::size_t i = 0; i < final_metrics.size(); ++i) {
    if (!same(final_metrics[i], o.final_metrics[i])) return false;
  }
  return true;
}

RunRecord run(const ExperimentConfig& cfg, const DatasetManifest& manifest,
              const RunOptions& options) {
  validate(cfg);
  const auto& train = manifest.splits.train;
  const Schedule sched = schedule(cfg, train.size());

  RunRecord record;
  record.config = cfg;
  record.pool_seed = derive_seed(cfg.seed, kPoolStream);
  record.learner_seed = derive_seed(cfg.seed, kLearnerStream);
  record.checkpoint = "checkpoint.json";

  PoolState pool = init_pool_count(manifest, sched.initial_labeled, record.pool_seed);
  record.initial_labeled = pool.labeled;
  const std::size_t needed =
      static_cast<std::size_t>(sched.iterations) * static_cast<std::size_t>(cfg.strategy.n_u);
  if (needed > pool.unlabeled.size()) {
    throw std::invalid_argument("budget: " + std::to_string(sched.iterations) + " iterations x N_u = " +
                                std::to_string(cfg.strategy.n_u) + " need " + std::to_string(needed) +
                                " unlabeled samples, only " + std::to_string(pool.unlabeled.size()) +
                                " available");
  }

  LearnerConfig lc = cfg.learner;
  lc.seed = record.learner_seed;
  Learner learner(lc);

  try {
    const auto seed_set = pointers(manifest, pool.labeled);
    double dice = mean_hard_dice(learner, seed_set);
    while (dice < cfg.seeding_dice_threshold && record.seed_epochs < cfg.seeding_max_epochs) {
      learner.train(seed_set, 1);
      ++record.seed_epochs;
      dice = mean_hard_dice(learner, seed_set);
    }
    record.seed_train_dice = dice;

    for (int t = 1; t <= sched.iterations; ++t) {
      const auto start = std::chrono::steady_clock::now();
      std::vector<PredictionBundle> predictions;
      if (cfg.strategy.uses_predictions()) {
        predictions.reserve(pool.unlabeled.size());
        for (auto i : pool.unlabeled) predictions.push_back(learner.forward(manifest.samples[i].image));
      }
      IterationRow row;
      row.iteration = t;
      row.query_seed = derive_seed(cfg.strategy.seed, static_cast<std::uint64_t>(t));
      const QueryResult q = query(cfg.strategy, manifest, pool, predictions, row.query_seed);
      if (!options.output_dir.empty() && options.write_diagnostics) {
        write_query_diagnostics(options.output_dir / "diagnostics" / iteration_tag(t), manifest,
                                pool, q);
      }
      pool = apply_query(pool, q.selected, t);
      check_pool_invariants(pool, train, record.initial_labeled.size());
      if (options.on_pool) options.on_pool(pool);

      if (cfg.reset_optimizer) learner.reset_optimizer();
      const auto trace = learner.train(pointers(manifest, pool.labeled), cfg.epochs_per_iter);
      row.train_loss = trace.empty() ? kNaN : trace.back();
      row.n_labeled = pool.labeled.size();
      record.final_metrics = evaluate_holdout(learner, manifest);
      summarize(record.final_metrics, row);
      row.wall_time_s = elapsed(start);
      record.rows.push_back(row);
      record.history = pool.history;
      if (options.on_iteration) options.on_iteration(row);
    }
  } catch (const DivergedTraining& e) {
    record.error = e.what();
    record.history = pool.history;
    write_outputs(record, nullptr, options.output_dir);
    throw;
  }
  write_outputs(record, &learner, options.output_dir);
  return record;
}

RunRecord full_data_reference(const ExperimentConfig& cfg, const DatasetManifest& manifest,
                              const RunOptions& options) {
  validate(cfg);
  RunRecord record;
  record.config = cfg;
  record.kind = "full_data";
  record.learner_seed = derive_seed(cfg.seed, kLearnerStream);
  record.checkpoint = "checkpoint.json";
  record.initial_labeled = manifest.splits.train;
  std::sort(record.initial_labeled.begin(), record.initial_labeled.end());
  if (record.initial_labeled.empty()) throw std::invalid_argument("train split is empty");

  LearnerConfig lc = cfg.learner;
  lc.seed = record.learner_seed;
  Learner learner(lc);
  const auto all = pointers(manifest, record.initial_labeled);
  const int iterations = schedule(cfg, record.initial_labeled.size()).iterations;
  try {
    for (int t = 1; t <= iterations; ++t) {
      const auto start = std::chrono::steady_clock::now();
      IterationRow row;
      row.iteration = t;
      const auto trace = learner.train(all, cfg.epochs_per_iter);
      row.train_loss = trace.empty() ? kNaN : trace.back();
      row.n_labeled = all.size();
      record.final_metrics = evaluate_holdout(learner, manifest);
      summarize(record.final_metrics, row);
      row.wall_time_s = elapsed(start);
      record.rows.push_back(row);
      if (options.on_iteration) options.on_iteration(row);
    }
  } catch (const DivergedTraining& e) {
    record.error = e.what();
    write_outputs(record, nullptr, options.output_dir);
    throw;
  }
  write_outputs(record, &learner, options.output_dir);
  return record;
}

ReplayReport replay(const RunRecord& record, const DatasetManifest& manifest,
                    const RunOptions& options) {
  if (record.kind != "active") throw std::invalid_argument("replay: record has no query history");
  ReplayReport rep;
  rep.replayed = run(record.config, manifest, options);
  rep.recorded_history = history_to_json(record.history).dump();
  rep.replayed_history = history_to_json(rep.replayed.history).dump();
  rep.identical = rep.recorded_history == rep.replayed_history;
  const std::size_t n = std::max(record.history.size(), rep.replayed.history.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (i >= record.history.size() || i >= rep.replayed.history.size() ||
        !(record.history[i] == rep.replayed.history[i])) {
      rep.first_mismatch = i < record.history.size() ? record.history[i].iteration
                                                      : rep.replayed.history[i].iteration;
      break;
    }
  }
  return rep;
}

const char* to_string(TestKind t) {
  switch (t) {
    case TestKind::paired_t: return "paired_t";
    case TestKind::welch_t: return "welch_t";
    case TestKind::wilcoxon: return "wilcoxon";
  }
  return "?";
}

std::string record_label(const RunRecord& r) {
  std::string label = r.kind == "full_data" ? "full_data" : to_string(r.config.strategy.name);
  if (r.config.variant == Variant::large_initial) label += "+large_initial";
  return label;
}

MetricReport compare(const std::vector<RunRecord>& records, const RunRecord& baseline) {
  auto ids_of = [](const RunRecord& r) {
    std::vector<std::int64_t> ids;
    for (const auto& s : r.final_metrics) ids.push_back(s.sample_id);
    std::sort(ids.begin(), ids.end());
    return ids;
  };
  const auto base_ids = ids_of(baseline);
  if (base_ids.empty()) throw std::invalid_argument("compare: baseline has no hold-out metrics");
  std::map<std::int64_t, const SampleMetrics*> base_by_id;
  for (const auto& s : baseline.final_metrics) base_by_id[s.sample_id] = &s;

  MetricReport report;
  report.baseline = record_label(baseline);
  for (auto m : kMetrics) {
    ComparisonRow row;
    row.metric = m;
    row.test = is_distance_metric(m)                  ? TestKind::welch_t
               : m == Metric::volumetric_similarity ? TestKind::wilcoxon
                                                      : TestKind::paired_t;
    report.rows.push_back(row);
  }

  for (const auto& rec : records) {
    if (ids_of(rec) != base_ids) {
      throw std::invalid_argument("compare: record '" + record_label(rec) +
                                  "' was evaluated on a different hold-out set");
    }
    for (auto& row : report.rows) {
      ComparisonCell cell;
      cell.strategy = record_label(rec);
      std::vector<double> x, y;
      if (row.test == TestKind::welch_t) {
        for (const auto& s : rec.final_metrics) {
          if (s.distance_valid()) x.push_back(s.value(row.metric));
        }
        for (const auto& s : baseline.final_metrics) {
          if (s.distance_valid()) y.push_back(s.value(row.metric));
        }
        cell.value = mean(x);
        cell.test = unpaired_t(x, y, Direction::less);
      } else {
        for (const auto& s : rec.final_metrics) {
          x.push_back(s.value(row.metric));
          y.push_back(base_by_id.at(s.sample_id)->value(row.metric));
        }
        if (row.test == TestKind::wilcoxon) {
          cell.value = median(x);
          cell.test = wilcoxon_signed_rank(x, y, Direction::greater);
        } else {
          cell.value = mean(x);
          cell.test = paired_t(x, y, Direction::greater);
        }
      }
      cell.significant = cell.test.p_one_sided < kSignificanceLevel;
      row.cells.push_back(cell);
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Serialization.

json to_json(const StrategySpec& s) {
  const auto& u = s.umap;
  return {{"name", to_string(s.name)},
          {"n_u", s.n_u},
          {"n_c", s.n_c},
          {"seed", s.seed},
          {"umap",
           {{"n_neighbors", u.n_neighbors},
            {"min_dist", u.min_dist},
            {"n_components", u.n_components},
            {"n_epochs", u.n_epochs},
            {"negative_sample_rate", u.negative_sample_rate},
            {"initial_lr", u.initial_lr},
            {"transform_epochs", u.transform_epochs}}}};
}

StrategySpec strategy_spec_from_json(const json& j) {
  StrategySpec s;
  s.name = strategy_from_string(j.at("name").get<std::string>());
  s.n_u = j.at("n_u").get<int>();
  s.n_c = j.at("n_c").get<int>();
  s.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("umap")) {
    const auto& u = j.at("umap");
    s.umap.n_neighbors = u.at("n_neighbors").get<int>();
    s.umap.min_dist = u.at("min_dist").get<double>();
    s.umap.n_components = u.at("n_components").get<int>();
    s.umap.n_epochs = u.at("n_epochs").get<int>();
    s.umap.negative_sample_rate = u.at("negative_sample_rate").get<int>();
    s.umap.initial_lr = u.at("initial_lr").get<double>();
    s.umap.transform_epochs = u.at("transform_epochs").get<int>();
  }
  return s;
}

json to_json(const ExperimentConfig& c) {
  return {{"dataset", c.dataset},
          {"strategy", to_json(c.strategy)},
          {"iterations", c.iterations},
          {"epochs_per_iter", c.epochs_per_iter},
          {"initial_fraction", c.initial_fraction},
          {"seeding_dice_threshold", c.seeding_dice_threshold},
          {"seeding_max_epochs", c.seeding_max_epochs},
          {"learner", to_json(c.learner)},
          {"seed", c.seed},
          {"variant", variant_name(c.variant)},
          {"reset_optimizer", c.reset_optimizer}};
}

ExperimentConfig experiment_config_from_json(const json& j) {
  ExperimentConfig c;
  c.dataset = j.at("dataset").get<std::string>();
  c.strategy = strategy_spec_from_json(j.at("strategy"));
  c.iterations = j.at("iterations").get<int>();
  c.epochs_per_iter = j.at("epochs_per_iter").get<int>();
  c.initial_fraction = j.at("initial_fraction").get<double>();
  c.seeding_dice_threshold = j.at("seeding_dice_threshold").get<double>();
  c.seeding_max_epochs = j.at("seeding_max_epochs").get<int>();
  c.learner = learner_config_from_json(j.at("learner"));
  c.seed = j.at("seed").get<std::uint64_t>();
  c.variant = variant_from(j.at("variant").get<std::string>());
  c.reset_optimizer = j.at("reset_optimizer").get<bool>();
  return c;
}

json history_to_json(const std::vector<QueryRecord>& history) {
  json out = json::array();
  for (const auto& h : history) out.push_back({{"iteration", h.iteration}, {"queried", h.queried}});
  return out;
}

json to_json(const RunRecord& r) {
  json rows = json::array();
  for (const auto& row : r.rows) {
    json metrics = json::object();
    for (std::size_t k = 0; k < kMetrics.size(); ++k) {
      metrics[to_string(kMetrics[k])] = number_or_null(row.metrics[k]);
    }
    rows.push_back({{"iteration", row.iteration},
                    {"n_labeled", row.n_labeled},
                    {"metrics", metrics},
                    {"n_single_contour", row.n_single_contour},
                    {"train_loss", number_or_null(row.train_loss)},
                    {"query_seed", row.query_seed}});
  }
  json finals = json::array();
  for (const auto& s : r.final_metrics) {
    json e = {{"sample_id", s.sample_id},
              {"single_contour", s.single_contour},
              {"distance_defined", s.distance.defined}};
    for (auto m : kMetrics) e[to_string(m)] = number_or_null(s.value(m));
    finals.push_back(e);
  }
  return {{"format", "alseg.run"},
          {"version", 1},
          {"kind", r.kind},
          {"config", to_json(r.config)},
          {"pool_seed", r.pool_seed},
          {"learner_seed", r.learner_seed},
          {"seed_epochs", r.seed_epochs},
          {"seed_train_dice", r.seed_train_dice},
          {"initial_labeled", r.initial_labeled},
          {"rows", rows},
          {"history", history_to_json(r.history)},
          {"final_metrics", finals},
          {"checkpoint", r.checkpoint},
          {"error", r.error}};
}

RunRecord run_record_from_json(const json& j) {
  if (j.value("format", "") != "alseg.run") throw ParseError("run record: format must be alseg.run");
  RunRecord r;
  try {
    r.kind = j.at("kind").get<std::string>();
    r.config = experiment_config_from_json(j.at("config"));
    r.pool_seed = j.at("pool_seed").get<std::uint64_t>();
    r.learner_seed = j.at("learner_seed").get<std::uint64_t>();
    r.seed_epochs = j.at("seed_epochs").get<int>();
    r.seed_train_dice = j.at("seed_train_dice").get<double>();
    r.initial_labeled = j.at("initial_labeled").get<std::vector<std::size_t>>();
    for (const auto& e : j.at("rows")) {
      IterationRow row;
      row.iteration = e.at("iteration").get<int>();
      row.n_labeled = e.at("n_labeled").get<std::size_t>();
      for (std::size_t k = 0; k < kMetrics.size(); ++k) {
        row.metrics[k] = number_from(e.at("metrics").at(to_string(kMetrics[k])));
      }
      row.n_single_contour = e.at("n_single_contour").get<int>();
      row.train_loss = number_from(e.at("train_loss"));
      row.query_seed = e.at("query_seed").get<std::uint64_t>();
      r.rows.push_back(row);
    }
    for (const auto& e : j.at("history")) {
      r.history.push_back({e.at("iteration").get<int>(), e.at("queried").get<std::vector<std::size_t>>()});
    }
    for (const auto& e : j.at("final_metrics")) {
      SampleMetrics s;
      s.sample_id = e.at("sample_id").get<std::int64_t>();
      s.single_contour = e.at("single_contour").get<bool>();
      s.distance.defined = e.at("distance_defined").get<bool>();
      s.overlap.dice = number_from(e.at("dice"));
      s.overlap.precision = number_from(e.at("precision"));
      s.overlap.sensitivity = number_from(e.at("sensitivity"));
      s.overlap.volumetric_similarity = number_from(e.at("volumetric_similarity"));
      s.distance.avg_hausdorff = number_from(e.at("avg_hausdorff"));
      s.distance.mean_surface_distance = number_from(e.at("mean_surface_distance"));
      s.distance.hd95 = number_from(e.at("hd95"));
      r.final_metrics.push_back(s);
    }
    r.checkpoint = j.at("checkpoint").get<std::string>();
    r.error = j.value("error", "");
  } catch (const json::exception& e) {
    throw ParseError(std::string("run record: ") + e.what());
  }
  return r;
}

json to_json(const MetricReport& report) {
  json rows = json::array();
  for (const auto& row : report.rows) {
    json cells = json::array();
    for (const auto& c : row.cells) {
      cells.push_back({{"strategy", c.strategy},
                       {"value", number_or_null(c.value)},
                       {"statistic", number_or_null(c.test.statistic)},
                       {"p_value", number_or_null(c.test.p_one_sided)},
                       {"n", c.test.n},
                       {"degenerate", c.test.degenerate},
                       {"significant", c.significant}});
    }
    rows.push_back({{"metric", to_string(row.metric)},
                    {"aggregate", row.metric == Metric::volumetric_similarity ? "median" : "mean"},
                    {"test", to_string(row.test)},
                    {"direction", is_distance_metric(row.metric) ? "less" : "greater"},
                    {"cells", cells}});
  }
  return {{"baseline", report.baseline}, {"alpha", kSignificanceLevel}, {"rows", rows}};
}

void save_run_record(const RunRecord& r, const fs::path& path) {
  auto out = open_out(path);
  out << to_json(r).dump(2) << '\n';
}

RunRecord load_run_record(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw ParseError("cannot open run record " + path.string());
  json j;
  try {
    j = json::parse(is);
  } catch (const json::exception& e) {
    throw ParseError("run record " + path.string() + ": " + e.what());
  }
  return run_record_from_json(j);
}

void write_curve_csv(const RunRecord& r, const fs::path& path) {
  auto out = open_out(path);
  out << "iteration,n_labeled";
  for (auto m : kMetrics) out << ',' << to_string(m);
  out << ",n_single_contour,train_loss\n";
  for (const auto& row : r.rows) {
    out << row.iteration << ',' << row.n_labeled;
    for (double v : row.metrics) out << ',' << fmt(v);
    out << ',' << row.n_single_contour << ',' << fmt(row.train_loss) << '\n';
  }
}

void write_timings_csv(const RunRecord& r, const fs::path& path) {
  auto out = open_out(path);
  out << "iteration,wall_time_s\n";
  for (const auto& row : r.rows) out << row.iteration << ',' << fmt(row.wall_time_s) << '\n';
}

void write_holdout_metrics_csv(const RunRecord& r, const fs::path& path) {
  auto out = open_out(path);
  out << "sample_id,metric,value,single_contour\n";
  for (const auto& s : r.final_metrics) {
    for (auto m : kMetrics) {
      out << s.sample_id << ',' << to_string(m) << ',' << fmt(s.value(m)) << ','
          << (s.single_contour ? 1 : 0) << '\n';
    }
  }
}

void write_comparison_csv(const MetricReport& report, const fs::path& path) {
  auto out = open_out(path);
  out << "metric,strategy,aggregate,value,test,statistic,p_value,n,significant\n";
  for (const auto& row : report.rows) {
    for (const auto& c : row.cells) {
      out << to_string(row.metric) << ',' << c.strategy << ','
          << (row.metric == Metric::volumetric_similarity ? "median" : "mean") << ','
          << fmt(c.value) << ',' << to_string(row.test) << ',' << fmt(c.test.statistic) << ','
          << fmt(c.test.p_one_sided) << ',' << c.test.n << ',' << (c.significant ? 1 : 0) << '\n';
    }
  }
}

}  // namespace alseg
