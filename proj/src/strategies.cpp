#include "alseg/strategies.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "alseg/error.hpp"
#include "alseg/random.hpp"

namespace alseg {

namespace {

const std::vector<std::pair<StrategyName, const char*>>& name_table() {
  static const std::vector<std::pair<StrategyName, const char*>> table = {
      {StrategyName::random, "random"},
      {StrategyName::entropy, "entropy"},
      {StrategyName::pca, "pca"},
      {StrategyName::umap, "umap"},
      {StrategyName::entropy_umap, "entropy_umap"},
      {StrategyName::entropy_random, "entropy_random"},
      {StrategyName::entropy_pca, "entropy_pca"},
      {StrategyName::umap_entropy, "umap_entropy"},
      {StrategyName::pca_entropy, "pca_entropy"},
      {StrategyName::random_entropy, "random_entropy"},
      {StrategyName::coreset, "coreset"},
  };
  return table;
}

// Seed streams used inside one query call.
constexpr std::uint64_t kReducerStream = 1;
constexpr std::uint64_t kKmeansStream = 2;
constexpr std::uint64_t kSelectStream = 3;

RowMatrix feature_matrix(std::span<const PredictionBundle> predictions) {
  if (predictions.empty()) return RowMatrix(0, 0);
  const auto dim = predictions.front().features.size();
  RowMatrix out(static_cast<Eigen::Index>(predictions.size()), dim);
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (predictions[i].features.size() != dim) {
      throw ShapeError("query: feature vectors differ in length");
    }
    out.row(static_cast<Eigen::Index>(i)) = predictions[i].features.cast<double>().transpose();
  }
  return out;
}

std::vector<std::size_t> uniform_subset(std::span<const std::size_t> ids, int k, Rng& rng) {
  const auto picks = rng.sample_without_replacement(ids.size(), static_cast<std::size_t>(k));
  std::vector<std::size_t> out;
  out.reserve(picks.size());
  for (auto p : picks) out.push_back(ids[p]);
  return out;
}

// Positions (into `universe`) of each id in `subset`; `universe` is sorted.
std::vector<std::size_t> positions_in(std::span<const std::size_t> universe,
                                      std::span<const std::size_t> subset) {
  std::vector<std::size_t> out;
  out.reserve(subset.size());
  for (auto id : subset) {
    const auto it = std::lower_bound(universe.begin(), universe.end(), id);
    out.push_back(static_cast<std::size_t>(it - universe.begin()));
  }
  return out;
}

}  // namespace

const std::vector<StrategyName>& all_strategies() {
  static const std::vector<StrategyName> all = [] {
    std::vector<StrategyName> v;
    for (const auto& [n, s] : name_table()) v.push_back(n);
    return v;
  }();
  return all;
}

std::string to_string(StrategyName name) {
  for (const auto& [n, s] : name_table()) {
    if (n == name) return s;
  }
  throw std::invalid_argument("unknown strategy enum value");
}

StrategyName strategy_from_string(std::string_view name) {
  std::string norm(name);
  std::replace(norm.begin(), norm.end(), '-', '_');
  for (const auto& [n, s] : name_table()) {
    if (norm == s) return n;
  }
  std::string valid;
  for (const auto& [n, s] : name_table()) {
    if (!valid.empty()) valid += ", ";
    valid += s;
  }
  throw std::invalid_argument("unknown strategy '" + std::string(name) + "'; valid: " + valid);
}

bool StrategySpec::uses_predictions() const {
  return name != StrategyName::random && name != StrategyName::coreset;
}

void validate(const StrategySpec& spec, std::size_t unlabeled_size) {
  if (spec.n_u < 1) throw std::invalid_argument("strategy: N_u must be >= 1");
  if (spec.n_c < spec.n_u) throw std::invalid_argument("strategy: N_c must be >= N_u");
  if (static_cast<std::size_t>(spec.n_u) > unlabeled_size) {
    throw std::invalid_argument("strategy: N_u = " + std::to_string(spec.n_u) + " exceeds " +
                                std::to_string(unlabeled_size) + " unlabeled samples");
  }
}

double entropy_score(const Image& probs) {
  double h = 0.0;
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    const double p = probs.data()[i];
    if (p > 0.0) h -= p * std::log(p);
    if (p < 1.0) h -= (1.0 - p) * std::log1p(-p);
  }
  return h;
}

std::vector<double> entropy_scores(std::span<const PredictionBundle> predictions) {
  std::vector<double> out;
  out.reserve(predictions.size());
  for (const auto& p : predictions) out.push_back(entropy_score(p.probs));
  return out;
}

std::vector<std::size_t> top_k_entropy(std::span<const double> scores,
                                       std::span<const std::size_t> ids, int k) {
  if (scores.size() != ids.size()) throw std::invalid_argument("top_k_entropy: length mismatch");
  if (k < 0 || static_cast<std::size_t>(k) > ids.size()) {
    throw std::invalid_argument("top_k_entropy: k = " + std::to_string(k) + " exceeds pool of " +
                                std::to_string(ids.size()));
  }
  std::vector<std::size_t> order(ids.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::partial_sort(order.begin(), order.begin() + k, order.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (scores[a] != scores[b]) return scores[a] > scores[b];
                      return ids[a] < ids[b];
                    });
  std::vector<std::size_t> out;
  out.reserve(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) out.push_back(ids[order[static_cast<std::size_t>(i)]]);
  return out;
}

RowMatrix reduce_2d(const RowMatrix& features, Reducer reducer, std::uint64_t seed,
                    const UmapConfig& umap) {
  const Eigen::Index n = features.rows();
  if (reducer == Reducer::umap && n >= 3) {
    UmapConfig cfg = umap;
    cfg.seed = seed;
    cfg.n_components = 2;
    cfg.n_neighbors = static_cast<int>(std::min<Eigen::Index>(cfg.n_neighbors, n - 1));
    return umap_fit(features, cfg).embedding;
  }
  if (n < 2) return RowMatrix::Zero(n, 1);
  const int d = static_cast<int>(std::min<Eigen::Index>({2, n - 1, features.cols()}));
  return pca_transform(pca_fit(features, d), features);
}

RepSelection rep_select(const RowMatrix& features, std::span<const std::size_t> ids,
                        Reducer reducer, int k, std::uint64_t seed, const UmapConfig& umap) {
  if (static_cast<std::size_t>(features.rows()) != ids.size()) {
    throw std::invalid_argument("rep_select: ids and features differ in length");
  }
  if (k < 1 || static_cast<std::size_t>(k) > ids.size()) {
    throw std::invalid_argument("rep_select: k = " + std::to_string(k) + " with " +
                                std::to_string(ids.size()) + " candidates");
  }
  RepSelection out;
  out.embedding = reduce_2d(features, reducer, derive_seed(seed, kReducerStream), umap);
  const auto clustering = kmeans(out.embedding, k, derive_seed(seed, kKmeansStream));
  out.labels = clustering.labels;
  out.selected = nearest_to_centroids(clustering, out.embedding, ids);
  return out;
}

std::vector<std::size_t> label_coverage_select(std::span<const int> labels,
                                               std::span<const std::size_t> ids, int n_u,
                                               std::uint64_t seed) {
  if (labels.size() != ids.size()) {
    throw std::invalid_argument("label_coverage_select: length mismatch");
  }
  if (n_u < 1 || static_cast<std::size_t>(n_u) > ids.size()) {
    throw std::invalid_argument("label_coverage_select: N_c = " + std::to_string(ids.size()) +
                                " is smaller than N_u = " + std::to_string(n_u));
  }
  Rng rng(seed);
  std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(n_u));
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= n_u) {
      throw std::invalid_argument("label_coverage_select: label out of range");
    }
    members[static_cast<std::size_t>(labels[i])].push_back(i);
  }
  std::vector<std::size_t> out;
  auto label = static_cast<int>(rng.uniform_index(static_cast<std::size_t>(n_u)));
  while (static_cast<int>(out.size()) < n_u) {
    auto& bucket = members[static_cast<std::size_t>(label)];
    if (!bucket.empty()) {
      const std::size_t pick = rng.uniform_index(bucket.size());
      out.push_back(ids[bucket[pick]]);
      bucket.erase(bucket.begin() + static_cast<long>(pick));
    }
    label = (label + 1) % n_u;
  }
  return out;
}

std::vector<std::size_t> coreset_greedy_points(const RowMatrix& points,
                                               std::span<const std::size_t> centers,
                                               std::span<const std::size_t> candidates, int n_u) {
  if (centers.empty()) throw std::invalid_argument("coreset_greedy: labeled set is empty");
  if (n_u < 0 || static_cast<std::size_t>(n_u) > candidates.size()) {
    throw std::invalid_argument("coreset_greedy: N_u = " + std::to_string(n_u) + " exceeds " +
                                std::to_string(candidates.size()) + " unlabeled samples");
  }
  auto sq = [&](std::size_t a, std::size_t b) {
    return (points.row(static_cast<Eigen::Index>(a)) - points.row(static_cast<Eigen::Index>(b)))
        .squaredNorm();
  };
  std::vector<double> mind(candidates.size(), std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    for (auto c : centers) mind[i] = std::min(mind[i], sq(candidates[i], c));
  }
  std::vector<bool> picked(candidates.size(), false);
  std::vector<std::size_t> out;
  for (int step = 0; step < n_u; ++step) {
    std::size_t arg = candidates.size();
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      if (picked[i]) continue;
      if (arg == candidates.size() || mind[i] > mind[arg] ||
          (mind[i] == mind[arg] && candidates[i] < candidates[arg])) {
        arg = i;
      }
    }
    picked[arg] = true;
    out.push_back(candidates[arg]);
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      if (!picked[i]) mind[i] = std::min(mind[i], sq(candidates[i], candidates[arg]));
    }
  }
  return out;
}

std::vector<std::size_t> coreset_greedy(const DatasetManifest& manifest,
                                        std::span<const std::size_t> labeled,
                                        std::span<const std::size_t> unlabeled, int n_u) {
  if (labeled.empty()) throw std::invalid_argument("coreset_greedy: labeled set is empty");
  const auto& first = manifest.samples.at(labeled.front()).image;
  RowMatrix points(static_cast<Eigen::Index>(manifest.samples.size()), first.size());
  for (std::size_t i = 0; i < manifest.samples.size(); ++i) {
    const auto& img = manifest.samples[i].image;
    if (img.size() != first.size()) throw ShapeError("coreset_greedy: images differ in size");
    points.row(static_cast<Eigen::Index>(i)) =
        Eigen::Map<const Eigen::VectorXf>(img.data(), img.size()).cast<double>().transpose();
  }
  return coreset_greedy_points(points, labeled, unlabeled, n_u);
}

QueryResult query(const StrategySpec& spec, const DatasetManifest& manifest,
                  const PoolState& pool, std::span<const PredictionBundle> predictions,
                  std::uint64_t seed) {
  validate(spec, pool.unlabeled.size());
  const std::span<const std::size_t> pool_ids(pool.unlabeled);
  const std::size_t n_pool = pool_ids.size();
  const int n_c = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(spec.n_c), n_pool));
  if (spec.uses_predictions() && predictions.size() != n_pool) {
    throw std::invalid_argument("query: expected " + std::to_string(n_pool) +
                                " predictions, got " + std::to_string(predictions.size()));
  }

  QueryResult r;
  r.cluster_labels.assign(n_pool, -1);
  if (!predictions.empty()) r.entropy = entropy_scores(predictions);
  Rng rng(derive_seed(seed, kSelectStream));

  auto features = [&] { return feature_matrix(predictions); };
  auto record_clusters = [&](std::span<const std::size_t> ids, const RowMatrix& emb,
                             const Eigen::VectorXi& labels) {
    const auto pos = positions_in(pool_ids, ids);
    for (std::size_t i = 0; i < pos.size(); ++i) r.cluster_labels[pos[i]] = labels[static_cast<Eigen::Index>(i)];
    r.embedding = emb;
    r.embedding_ids.assign(ids.begin(), ids.end());
  };
  // Entropy over a subset of the pool, in the subset's order.
  auto entropy_of = [&](std::span<const std::size_t> ids) {
    std::vector<double> s;
    for (auto p : positions_in(pool_ids, ids)) s.push_back(r.entropy[p]);
    return s;
  };

  switch (spec.name) {
    case StrategyName::random:
      r.selected = uniform_subset(pool_ids, spec.n_u, rng);
      break;
    case StrategyName::entropy:
      r.selected = top_k_entropy(r.entropy, pool_ids, spec.n_u);
      break;
    case StrategyName::pca:
    case StrategyName::umap: {
      const auto red = spec.name == StrategyName::pca ? Reducer::pca : Reducer::umap;
      auto sel = rep_select(features(), pool_ids, red, spec.n_u, seed, spec.umap);
      record_clusters(pool_ids, sel.embedding, sel.labels);
      r.selected = std::move(sel.selected);
      break;
    }
    case StrategyName::entropy_random:
      r.intermediate = top_k_entropy(r.entropy, pool_ids, n_c);
      r.selected = uniform_subset(r.intermediate, spec.n_u, rng);
      break;
    case StrategyName::entropy_pca:
    case StrategyName::entropy_umap: {
      const auto red = spec.name == StrategyName::entropy_pca ? Reducer::pca : Reducer::umap;
      const RowMatrix emb = reduce_2d(features(), red, derive_seed(seed, kReducerStream), spec.umap);
      const auto clustering = kmeans(emb, spec.n_u, derive_seed(seed, kKmeansStream));
      record_clusters(pool_ids, emb, clustering.labels);
      r.intermediate = top_k_entropy(r.entropy, pool_ids, n_c);
      std::vector<int> labels;
      for (auto p : positions_in(pool_ids, r.intermediate)) labels.push_back(clustering.labels[static_cast<Eigen::Index>(p)]);
      r.selected = label_coverage_select(labels, r.intermediate, spec.n_u, rng.next_u64());
      break;
    }
    case StrategyName::umap_entropy:
    case StrategyName::pca_entropy: {
      const auto red = spec.name == StrategyName::pca_entropy ? Reducer::pca : Reducer::umap;
      auto sel = rep_select(features(), pool_ids, red, n_c, seed, spec.umap);
      record_clusters(pool_ids, sel.embedding, sel.labels);
      r.intermediate = std::move(sel.selected);
      r.selected = top_k_entropy(entropy_of(r.intermediate), r.intermediate, spec.n_u);
      break;
    }
    case StrategyName::random_entropy:
      r.intermediate = uniform_subset(pool_ids, n_c, rng);
      r.selected = top_k_entropy(entropy_of(r.intermediate), r.intermediate, spec.n_u);
      break;
    case StrategyName::coreset:
      r.selected = coreset_greedy(manifest, pool.labeled, pool_ids, spec.n_u);
      break;
  }
  return r;
}

void write_query_diagnostics(const std::filesystem::path& path, const DatasetManifest& manifest,
                             const PoolState& pool, const QueryResult& result) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.precision(17);
  out << "sample_id,entropy,cluster_label,selected\n";
  std::vector<std::size_t> selected = result.selected;
  std::sort(selected.begin(), selected.end());
  for (std::size_t i = 0; i < pool.unlabeled.size(); ++i) {
    const std::size_t idx = pool.unlabeled[i];
    out << manifest.samples.at(idx).id << ',';
    if (!result.entropy.empty()) out << result.entropy[i];
    out << ',' << (result.cluster_labels.empty() ? -1 : result.cluster_labels[i]) << ','
        << (std::binary_search(selected.begin(), selected.end(), idx) ? 1 : 0) << '\n';
  }
}

}  // namespace alseg
