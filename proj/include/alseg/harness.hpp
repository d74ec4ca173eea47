#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"

#include "alseg/corpus.hpp"
#include "alseg/learner.hpp"
#include "alseg/metrics.hpp"
#include "alseg/stats.hpp"
#include "alseg/strategies.hpp"

namespace alseg {

enum class Variant { standard, large_initial };

struct ExperimentConfig {
  /// Manifest path, recorded for provenance only.
  std::string dataset;
  StrategySpec strategy;
  int iterations = 50;
  int epochs_per_iter = 10;
  double initial_fraction = 0.10;
  double seeding_dice_threshold = 0.10;
  int seeding_max_epochs = 50;
  LearnerConfig learner;
  /// Drives the initial pool and the learner initialization. Query seeds
  /// derive from `strategy.seed`.
  std::uint64_t seed = 0;
  Variant variant = Variant::standard;
  /// Clears the Adam moments before each iteration's training.
  bool reset_optimizer = false;

  bool operator==(const ExperimentConfig&) const = default;
};

void validate(const ExperimentConfig& cfg);

/// Iterations and initial labeled count after applying the variant.
struct Schedule {
  int iterations = 0;
  std::size_t initial_labeled = 0;
};
Schedule schedule(const ExperimentConfig& cfg, std::size_t train_size);

struct IterationRow {
  int iteration = 0;
  std::size_t n_labeled = 0;
  /// Hold-out means in Metric order; distance metrics average over
  /// single-contour predictions only (NaN when there are none).
  std::array<double, kMetricCount> metrics{};
  int n_single_contour = 0;
  double train_loss = 0.0;
  std::uint64_t query_seed = 0;
  /// Excluded from equality and from the deterministic outputs.
  double wall_time_s = 0.0;

  bool operator==(const IterationRow& o) const;
};

struct RunRecord {
  ExperimentConfig config;
  std::string kind = "active";  // or "full_data"
  std::uint64_t pool_seed = 0;
  std::uint64_t learner_seed = 0;
  int seed_epochs = 0;
  double seed_train_dice = 0.0;
  std::vector<std::size_t> initial_labeled;
  std::vector<IterationRow> rows;
  std::vector<QueryRecord> history;
  std::vector<SampleMetrics> final_metrics;  // per hold-out sample
  std::string checkpoint;
  /// Set when the run was aborted (e.g. diverged training).
  std::string error;

  bool operator==(const RunRecord& o) const;
};

struct RunOptions {
  /// When set, curve.csv, run.json, holdout_metrics.csv, timings.csv, the
  /// checkpoint and per-iteration query diagnostics are written here.
  std::filesystem::path output_dir;
  bool write_diagnostics = true;
  /// Called after every iteration (for progress logging).
  std::function<void(const IterationRow&)> on_iteration;
  /// Called with the pool after every apply_query.
  std::function<void(const PoolState&)> on_pool;
};

RunRecord run(const ExperimentConfig& cfg, const DatasetManifest& manifest,
              const RunOptions& options = {});

/// Trains on the whole train split for iterations x epochs_per_iter epochs,
/// evaluating after each block of epochs_per_iter.
RunRecord full_data_reference(const ExperimentConfig& cfg, const DatasetManifest& manifest,
                              const RunOptions& options = {});

struct ReplayReport {
  bool identical = false;
  /// First iteration whose queried ids differ, -1 if none.
  int first_mismatch = -1;
  std::string recorded_history;
  std::string replayed_history;
  RunRecord replayed;
};

/// Re-executes a recorded run and compares the queried-id histories as
/// serialized JSON.
ReplayReport replay(const RunRecord& record, const DatasetManifest& manifest,
                    const RunOptions& options = {});

enum class TestKind { paired_t, welch_t, wilcoxon };
const char* to_string(TestKind t);

struct ComparisonCell {
  std::string strategy;
  double value = 0.0;  // mean, or median for volumetric similarity
  TestResult test;
  bool significant = false;
};

struct ComparisonRow {
  Metric metric = Metric::dice;
  TestKind test = TestKind::paired_t;
  std::vector<ComparisonCell> cells;  // one per record, in input order
};

struct MetricReport {
  std::string baseline;
  std::vector<ComparisonRow> rows;  // kMetricCount rows
};

inline constexpr double kSignificanceLevel = 0.05;

/// Strategy x metric table against `baseline`. Overlap metrics are paired on
/// common sample ids; distance metrics use single-contour samples only.
MetricReport compare(const std::vector<RunRecord>& records, const RunRecord& baseline);

/// Label used for a record in comparison tables.
std::string record_label(const RunRecord& r);

// Serialization.
nlohmann::json to_json(const StrategySpec& s);
StrategySpec strategy_spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& c);
ExperimentConfig experiment_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RunRecord& r);
RunRecord run_record_from_json(const nlohmann::json& j);
nlohmann::json to_json(const MetricReport& r);
nlohmann::json history_to_json(const std::vector<QueryRecord>& history);

void save_run_record(const RunRecord& r, const std::filesystem::path& path);
RunRecord load_run_record(const std::filesystem::path& path);

void write_curve_csv(const RunRecord& r, const std::filesystem::path& path);
void write_timings_csv(const RunRecord& r, const std::filesystem::path& path);
void write_holdout_metrics_csv(const RunRecord& r, const std::filesystem::path& path);
void write_comparison_csv(const MetricReport& report, const std::filesystem::path& path);

}  // namespace alseg
