#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "alseg/harness.hpp"

using namespace alseg;
namespace fs = std::filesystem;

namespace {

DatasetManifest tiny_dataset(int n_subjects = 4, int slices = 5, int side = 16) {
  SynthOptions o;
  o.n_subjects = n_subjects;
  o.slices_per_subject = slices;
  o.side = side;
  o.seed = 1;
  return synth_dataset(o);
}

ExperimentConfig tiny_config(StrategyName name, int iterations, int n_u, int n_c) {
  ExperimentConfig c;
  c.strategy.name = name;
  c.strategy.n_u = n_u;
  c.strategy.n_c = n_c;
  c.iterations = iterations;
  c.epochs_per_iter = 1;
  c.seeding_max_epochs = 2;
  c.learner.learning_rate = 1e-3;
  c.seed = 4;
  return c;
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("alseg_harness_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

SampleMetrics synthetic_metrics(std::int64_t id, double dice, double hd) {
  SampleMetrics m;
  m.sample_id = id;
  m.overlap = {dice, dice, dice, 0.5 + dice / 2};
  m.distance = {true, hd, hd, hd};
  m.single_contour = true;
  return m;
}

RunRecord synthetic_record(StrategyName name, double dice_shift) {
  RunRecord r;
  r.config.strategy.name = name;
  for (int i = 0; i < 30; ++i) {
    const double base = 0.5 + 0.3 * std::sin(i * 1.7);
    r.final_metrics.push_back(synthetic_metrics(i, base + dice_shift, 2.0 + std::cos(i * 0.9)));
  }
  return r;
}

}  // namespace

TEST(Schedule, Variants) {
  auto cfg = tiny_config(StrategyName::random, 10, 6, 12);
  auto s = schedule(cfg, 160);
  EXPECT_EQ(s.iterations, 10);
  EXPECT_EQ(s.initial_labeled, 16u);
  cfg.variant = Variant::large_initial;
  s = schedule(cfg, 160);
  EXPECT_EQ(s.iterations, 5);
  EXPECT_EQ(s.initial_labeled + 5u * 6u, 16u + 60u);
}

TEST(Run, ExhaustiveSingleQueryLabelsEverything) {
  const auto m = tiny_dataset();
  const std::size_t train = m.splits.train.size();
  const auto cfg0 = tiny_config(StrategyName::random, 1, 1, 1);
  const auto initial = schedule(cfg0, train).initial_labeled;
  const int rest = static_cast<int>(train - initial);
  const auto r = run(tiny_config(StrategyName::random, 1, rest, rest), m);
  ASSERT_EQ(r.rows.size(), 1u);
  EXPECT_EQ(r.rows[0].n_labeled, train);
}

TEST(Run, BookkeepingAndPoolInvariants) {
  SynthOptions o;
  o.side = 16;
  const auto m = synth_dataset(o);
  ASSERT_EQ(m.samples.size(), 200u);
  const auto cfg = tiny_config(StrategyName::random, 10, 6, 12);
  const auto initial = schedule(cfg, m.splits.train.size()).initial_labeled;
  RunOptions opts;
  int pools = 0;
  std::size_t previous = 0;
  opts.on_pool = [&](const PoolState& p) {
    EXPECT_NO_THROW(check_pool_invariants(p, m.splits.train, initial));
    EXPECT_GT(p.labeled.size(), previous);
    previous = p.labeled.size();
    ++pools;
  };
  const auto r = run(cfg, m, opts);
  EXPECT_EQ(pools, 10);
  ASSERT_EQ(r.rows.size(), 10u);
  for (std::size_t t = 0; t < 10; ++t) {
    EXPECT_EQ(r.rows[t].iteration, static_cast<int>(t + 1));
    EXPECT_EQ(r.rows[t].n_labeled, r.initial_labeled.size() + 6 * (t + 1));
    EXPECT_EQ(r.history[t].queried.size(), 6u);
  }
  EXPECT_EQ(r.final_metrics.size(), m.splits.holdout.size());
}

TEST(Run, DeterministicAndPersisted) {
  const auto m = tiny_dataset();
  const auto cfg = tiny_config(StrategyName::entropy_pca, 3, 2, 4);
  RunOptions opts;
  opts.output_dir = scratch("det");
  const auto a = run(cfg, m, opts);
  const auto b = run(cfg, m);
  EXPECT_TRUE(a == b);
  for (const char* f : {"curve.csv", "timings.csv", "holdout_metrics.csv", "run.json",
                        "checkpoint.json", "diagnostics/iter_001.csv", "diagnostics/iter_003.csv"}) {
    EXPECT_TRUE(fs::exists(opts.output_dir / f)) << f;
  }
  const auto curve = slurp(opts.output_dir / "curve.csv");
  EXPECT_EQ(curve.substr(0, curve.find('\n')),
            "iteration,n_labeled,dice,precision,sensitivity,volumetric_similarity,avg_hausdorff,"
            "mean_surface_distance,hd95,n_single_contour,train_loss");
  const auto back = load_run_record(opts.output_dir / "run.json");
  EXPECT_TRUE(back == a);

  // Same config again writes byte-identical deterministic outputs.
  RunOptions again;
  again.output_dir = scratch("det2");
  run(cfg, m, again);
  EXPECT_EQ(slurp(again.output_dir / "curve.csv"), curve);
  EXPECT_EQ(slurp(again.output_dir / "holdout_metrics.csv"), slurp(opts.output_dir / "holdout_metrics.csv"));
}

TEST(Run, BudgetExhaustionRejected) {
  const auto m = tiny_dataset();
  EXPECT_THROW(run(tiny_config(StrategyName::random, 20, 6, 12), m), std::invalid_argument);
}

TEST(Run, LargeInitialMatchesFinalPoolSize) {
  const auto m = tiny_dataset();
  auto cfg = tiny_config(StrategyName::random, 4, 2, 4);
  const auto standard = run(cfg, m);
  cfg.variant = Variant::large_initial;
  const auto large = run(cfg, m);
  EXPECT_EQ(large.rows.size(), 2u);
  EXPECT_EQ(large.rows.back().n_labeled, standard.rows.back().n_labeled);
}

TEST(FullData, RowsAndDeterminism) {
  const auto m = tiny_dataset();
  const auto cfg = tiny_config(StrategyName::random, 3, 2, 4);
  const auto a = full_data_reference(cfg, m);
  EXPECT_EQ(a.kind, "full_data");
  ASSERT_EQ(a.rows.size(), 3u);
  for (const auto& row : a.rows) EXPECT_EQ(row.n_labeled, m.splits.train.size());
  EXPECT_TRUE(a == full_data_reference(cfg, m));
}

TEST(Replay, ReproducesHistory) {
  const auto m = tiny_dataset();
  const auto rec = run(tiny_config(StrategyName::entropy_umap, 2, 2, 4), m);
  const auto rep = replay(rec, m);
  EXPECT_TRUE(rep.identical);
  EXPECT_EQ(rep.first_mismatch, -1);
  EXPECT_EQ(rep.recorded_history, rep.replayed_history);

  auto tampered = rec;
  tampered.history[1].queried[0] += 1;
  const auto bad = replay(tampered, m);
  EXPECT_FALSE(bad.identical);
  EXPECT_EQ(bad.first_mismatch, 2);
}

TEST(Compare, SelfComparison) {
  const auto base = synthetic_record(StrategyName::random, 0.0);
  const auto report = compare({base}, base);
  ASSERT_EQ(report.rows.size(), static_cast<std::size_t>(kMetricCount));
  for (const auto& row : report.rows) {
    ASSERT_EQ(row.cells.size(), 1u);
    const auto& cell = row.cells[0];
    if (row.test == TestKind::wilcoxon) {
      EXPECT_EQ(cell.test.p_one_sided, 1.0);
      EXPECT_TRUE(cell.test.degenerate);
    } else {
      EXPECT_EQ(cell.test.p_one_sided, 0.5) << to_string(row.metric);
    }
    EXPECT_FALSE(cell.significant);
  }
}

TEST(Compare, ShapeTestsAndShiftedDice) {
  const auto base = synthetic_record(StrategyName::random, 0.0);
  const auto better = synthetic_record(StrategyName::entropy, 0.1);
  const auto other = synthetic_record(StrategyName::umap, -0.05);
  const auto report = compare({base, better, other}, base);
  ASSERT_EQ(report.rows.size(), 7u);
  for (const auto& row : report.rows) {
    EXPECT_EQ(row.cells.size(), 3u);
    const auto expected = row.metric == Metric::volumetric_similarity ? TestKind::wilcoxon
                          : is_distance_metric(row.metric)           ? TestKind::welch_t
                                                                      : TestKind::paired_t;
    EXPECT_EQ(row.test, expected);
  }
  const auto& dice = report.rows[0];
  ASSERT_EQ(dice.metric, Metric::dice);
  EXPECT_LT(dice.cells[1].test.p_one_sided, 0.05);
  EXPECT_TRUE(dice.cells[1].significant);
  EXPECT_NEAR(dice.cells[1].value - dice.cells[0].value, 0.1, 1e-12);
  EXPECT_FALSE(dice.cells[2].significant);
}

TEST(Compare, DistanceUsesSingleContourOnly) {
  auto base = synthetic_record(StrategyName::random, 0.0);
  auto rec = synthetic_record(StrategyName::entropy, 0.0);
  for (int i = 0; i < 10; ++i) {
    rec.final_metrics[i].single_contour = false;
    rec.final_metrics[i].distance.hd95 = 1e6;
  }
  const auto report = compare({rec}, base);
  for (const auto& row : report.rows) {
    if (!is_distance_metric(row.metric)) continue;
    EXPECT_EQ(row.cells[0].test.n, 20 + 30);
    EXPECT_LT(row.cells[0].value, 10.0);
  }
}

TEST(Compare, MismatchedHoldoutRejected) {
  const auto base = synthetic_record(StrategyName::random, 0.0);
  auto rec = base;
  rec.final_metrics.pop_back();
  EXPECT_THROW(compare({rec}, base), std::invalid_argument);
}

TEST(Serialization, ConfigRoundTrip) {
  auto cfg = tiny_config(StrategyName::umap_entropy, 7, 3, 9);
  cfg.variant = Variant::large_initial;
  cfg.learner.loss.kind = LossKind::focal_dice;
  cfg.strategy.umap.n_neighbors = 9;
  cfg.reset_optimizer = true;
  EXPECT_EQ(experiment_config_from_json(to_json(cfg)), cfg);
  EXPECT_EQ(strategy_spec_from_json(to_json(cfg.strategy)), cfg.strategy);
}
