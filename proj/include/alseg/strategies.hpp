#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "alseg/cluster.hpp"
#include "alseg/corpus.hpp"
#include "alseg/learner.hpp"
#include "alseg/umap.hpp"

namespace alseg {

enum class StrategyName {
  random,
  entropy,
  pca,
  umap,
  entropy_umap,
  entropy_random,
  entropy_pca,
  umap_entropy,
  pca_entropy,
  random_entropy,
  coreset,
};

/// All strategies in declaration order.
const std::vector<StrategyName>& all_strategies();
std::string to_string(StrategyName name);
/// Accepts `entropy_umap` and `entropy-umap`; throws std::invalid_argument
/// listing the valid names otherwise.
StrategyName strategy_from_string(std::string_view name);

struct StrategySpec {
  StrategyName name = StrategyName::random;
  int n_u = 6;
  int n_c = 12;
  std::uint64_t seed = 0;
  /// Hyperparameters for the UMAP-based strategies; the seed field is
  /// replaced per query.
  UmapConfig umap;

  bool uses_predictions() const;
  bool operator==(const StrategySpec&) const = default;
};

/// Budget checks against the current unlabeled pool size.
void validate(const StrategySpec& spec, std::size_t unlabeled_size);

enum class Reducer { pca, umap };

struct QueryResult {
  std::vector<std::size_t> selected;
  /// Output of the first stage of a hybrid strategy.
  std::vector<std::size_t> intermediate;
  /// Per unlabeled sample (pool order). Empty when predictions were not used.
  std::vector<double> entropy;
  /// Per unlabeled sample, -1 where no clustering was involved.
  std::vector<int> cluster_labels;
  /// 2D embedding of the clustered samples, if any.
  RowMatrix embedding;
  std::vector<std::size_t> embedding_ids;
};

/// -sum_i [p ln p + (1 - p) ln(1 - p)] with 0 ln 0 = 0.
double entropy_score(const Image& probs);
std::vector<double> entropy_scores(std::span<const PredictionBundle> predictions);

/// The k ids with the highest score, in descending score order (ties to the
/// smaller id). `scores[i]` belongs to `ids[i]`.
std::vector<std::size_t> top_k_entropy(std::span<const double> scores,
                                       std::span<const std::size_t> ids, int k);

struct RepSelection {
  std::vector<std::size_t> selected;
  RowMatrix embedding;
  Eigen::VectorXi labels;
};

/// Reduce to 2D, k-means(k), then nearest_to_centroids.
RepSelection rep_select(const RowMatrix& features, std::span<const std::size_t> ids,
                        Reducer reducer, int k, std::uint64_t seed, const UmapConfig& umap = {});

/// 2D embedding of `features` with the given reducer. Falls back to fewer
/// neighbours / components when there are too few rows for the defaults.
RowMatrix reduce_2d(const RowMatrix& features, Reducer reducer, std::uint64_t seed,
                    const UmapConfig& umap = {});

/// Round-robin over labels 0..n_u-1 from a random start label; each visit to
/// a label still present among the remaining members moves one uniformly
/// chosen member with that label into the query set. Stops at n_u picks.
std::vector<std::size_t> label_coverage_select(std::span<const int> labels,
                                               std::span<const std::size_t> ids, int n_u,
                                               std::uint64_t seed);

/// k-center greedy on flattened raw pixels with squared Euclidean distance.
std::vector<std::size_t> coreset_greedy(const DatasetManifest& manifest,
                                        std::span<const std::size_t> labeled,
                                        std::span<const std::size_t> unlabeled, int n_u);

/// Same algorithm over arbitrary points; rows are indexed by position.
std::vector<std::size_t> coreset_greedy_points(const RowMatrix& points,
                                               std::span<const std::size_t> centers,
                                               std::span<const std::size_t> candidates, int n_u);

/// One acquisition step. `predictions` is aligned with `pool.unlabeled` and
/// may be empty for strategies that do not consume it (random, coreset).
/// All randomness derives from `seed`.
QueryResult query(const StrategySpec& spec, const DatasetManifest& manifest,
                  const PoolState& pool, std::span<const PredictionBundle> predictions,
                  std::uint64_t seed);

/// CSV with columns sample_id, entropy, cluster_label, selected.
void write_query_diagnostics(const std::filesystem::path& path, const DatasetManifest& manifest,
                             const PoolState& pool, const QueryResult& result);

}  // namespace alseg
