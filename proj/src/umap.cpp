#include "alseg/umap.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include <Eigen/Cholesky>

#include "alseg/error.hpp"
#include "alseg/random.hpp"

namespace alseg {

namespace {

constexpr int kBisectionIterations = 64;
constexpr double kBisectionTolerance = 1e-5;
constexpr double kMinScale = 1e-3;
constexpr double kGradientClip = 4.0;

double clip(double v) { return std::clamp(v, -kGradientClip, kGradientClip); }

struct Edges {
  std::vector<int> head;
  std::vector<int> tail;
  std::vector<double> epochs_per_sample;
};

Edges edges_of(const SparseGraph& graph, int n_epochs) {
  Edges e;
  double max_w = 0.0;
  for (int c = 0; c < graph.outerSize(); ++c) {
    for (SparseGraph::InnerIterator it(graph, c); it; ++it) max_w = std::max(max_w, it.value());
  }
  for (int c = 0; c < graph.outerSize(); ++c) {
    for (SparseGraph::InnerIterator it(graph, c); it; ++it) {
      const double w = it.value();
      if (w <= 0.0) continue;
      const double eps = max_w / w;
      if (eps > static_cast<double>(n_epochs)) continue;
      e.head.push_back(static_cast<int>(it.row()));
      e.tail.push_back(static_cast<int>(it.col()));
      e.epochs_per_sample.push_back(eps);
    }
  }
  return e;
}

// Negative-sampling SGD on the fuzzy cross-entropy. Heads index `head_emb`,
// tails and negative samples index `tail_emb`. With `move_tail` the two are
// the same matrix and both ends of an edge move.
void optimize_layout(RowMatrix& head_emb, RowMatrix& tail_emb, bool move_tail, const Edges& edges,
                     double a, double b, int n_epochs, int negative_rate, double initial_lr,
                     Rng& rng) {
  const auto n_edges = edges.head.size();
  const auto dim = head_emb.cols();
  const auto n_tail = static_cast<std::size_t>(tail_emb.rows());
  std::vector<double> next_sample = edges.epochs_per_sample;
  std::vector<double> eps_negative(n_edges);
  for (std::size_t i = 0; i < n_edges; ++i) {
    eps_negative[i] = edges.epochs_per_sample[i] / negative_rate;
  }
  std::vector<double> next_negative = eps_negative;
  std::vector<double> diff(static_cast<std::size_t>(dim));

  for (int epoch = 0; epoch < n_epochs; ++epoch) {
    const double alpha = initial_lr * (1.0 - static_cast<double>(epoch) / n_epochs);
    const auto n = static_cast<double>(epoch);
    for (std::size_t i = 0; i < n_edges; ++i) {
      if (next_sample[i] > n) continue;
      const int j = edges.head[i];
      const int k = edges.tail[i];

      double d2 = 0.0;
      for (Eigen::Index c = 0; c < dim; ++c) {
        diff[c] = head_emb(j, c) - tail_emb(k, c);
        d2 += diff[c] * diff[c];
      }
      double coeff = 0.0;
      if (d2 > 0.0) {
        coeff = -2.0 * a * b * std::pow(d2, b - 1.0) / (a * std::pow(d2, b) + 1.0);
      }
      for (Eigen::Index c = 0; c < dim; ++c) {
        const double g = clip(coeff * diff[c]);
        head_emb(j, c) += g * alpha;
        if (move_tail) tail_emb(k, c) -= g * alpha;
      }
      next_sample[i] += edges.epochs_per_sample[i];

      const int n_neg = static_cast<int>((n - next_negative[i]) / eps_negative[i]);
      for (int p = 0; p < n_neg; ++p) {
        const auto other = static_cast<Eigen::Index>(rng.uniform_index(n_tail));
        double nd2 = 0.0;
        for (Eigen::Index c = 0; c < dim; ++c) {
          diff[c] = head_emb(j, c) - tail_emb(other, c);
          nd2 += diff[c] * diff[c];
        }
        double rep = 0.0;
        if (nd2 > 0.0) {
          rep = 2.0 * b / ((0.001 + nd2) * (a * std::pow(nd2, b) + 1.0));
        } else if (move_tail && other == j) {
          continue;
        }
        for (Eigen::Index c = 0; c < dim; ++c) {
          const double g = rep > 0.0 ? clip(rep * diff[c]) : kGradientClip;
          head_emb(j, c) += g * alpha;
        }
      }
      next_negative[i] += n_neg * eps_negative[i];
    }
  }
}

}  // namespace

void validate(const UmapConfig& cfg) {
  if (cfg.n_neighbors < 2) throw std::invalid_argument("umap: n_neighbors must be >= 2");
  if (cfg.n_components < 1) throw std::invalid_argument("umap: n_components must be >= 1");
  if (!(cfg.min_dist > 0.0 && cfg.min_dist < 1.0)) {
    throw std::invalid_argument("umap: min_dist must be in (0, 1)");
  }
  if (cfg.n_epochs < 1) throw std::invalid_argument("umap: n_epochs must be >= 1");
  if (cfg.transform_epochs < 1) throw std::invalid_argument("umap: transform_epochs must be >= 1");
  if (cfg.negative_sample_rate < 1) {
    throw std::invalid_argument("umap: negative_sample_rate must be >= 1");
  }
  if (!(cfg.initial_lr > 0.0)) throw std::invalid_argument("umap: initial_lr must be positive");
}

KnnResult knn_brute_force(const RowMatrix& queries, const RowMatrix& reference, int k,
                          bool exclude_self) {
  if (queries.cols() != reference.cols()) {
    throw ShapeError("knn: query and reference dimensions differ");
  }
  const Eigen::Index available = reference.rows() - (exclude_self ? 1 : 0);
  if (k < 1 || k > available) throw std::invalid_argument("knn: k out of range");

  KnnResult out;
  out.indices.resize(queries.rows(), k);
  out.distances.resize(queries.rows(), k);
  std::vector<std::pair<double, int>> row(static_cast<std::size_t>(reference.rows()));
  for (Eigen::Index i = 0; i < queries.rows(); ++i) {
    std::size_t m = 0;
    for (Eigen::Index j = 0; j < reference.rows(); ++j) {
      if (exclude_self && i == j) continue;
      row[m++] = {(queries.row(i) - reference.row(j)).squaredNorm(), static_cast<int>(j)};
    }
    std::partial_sort(row.begin(), row.begin() + k, row.begin() + static_cast<long>(m));
    for (int c = 0; c < k; ++c) {
      out.indices(i, c) = row[c].second;
      out.distances(i, c) = std::sqrt(row[c].first);
    }
  }
  return out;
}

SmoothKnn smooth_knn(const Eigen::MatrixXd& distances) {
  const auto n = distances.rows();
  const auto k = distances.cols();
  const double target = std::log2(static_cast<double>(k));
  const double mean_all = distances.size() > 0 ? distances.mean() : 0.0;
  SmoothKnn out;
  out.rho.resize(n);
  out.sigma.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double rho = distances(i, 0);
    double lo = 0.0, hi = std::numeric_limits<double>::infinity(), mid = 1.0;
    for (int it = 0; it < kBisectionIterations; ++it) {
      double psum = 0.0;
      for (Eigen::Index j = 0; j < k; ++j) {
        psum += std::exp(-std::max(0.0, distances(i, j) - rho) / mid);
      }
      if (std::abs(psum - target) < kBisectionTolerance) break;
      if (psum > target) {
        hi = mid;
        mid = 0.5 * (lo + hi);
      } else {
        lo = mid;
        mid = std::isinf(hi) ? mid * 2.0 : 0.5 * (lo + hi);
      }
    }
    const double mean_row = distances.row(i).mean();
    const double floor = kMinScale * (rho > 0.0 ? mean_row : mean_all);
    out.rho[i] = rho;
    out.sigma[i] = std::max({mid, floor, std::numeric_limits<double>::min()});
  }
  return out;
}

SparseGraph membership_graph(const KnnResult& knn, const SmoothKnn& sk, Eigen::Index n_cols) {
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(knn.indices.size()));
  for (Eigen::Index i = 0; i < knn.indices.rows(); ++i) {
    for (Eigen::Index c = 0; c < knn.indices.cols(); ++c) {
      const double w = std::exp(-std::max(0.0, knn.distances(i, c) - sk.rho[i]) / sk.sigma[i]);
      if (w > 0.0) triplets.emplace_back(static_cast<int>(i), knn.indices(i, c), w);
    }
  }
  SparseGraph g(knn.indices.rows(), n_cols);
  g.setFromTriplets(triplets.begin(), triplets.end());
  return g;
}

SparseGraph fuzzy_union(const SparseGraph& directed) {
  if (directed.rows() != directed.cols()) throw ShapeError("fuzzy_union: graph must be square");
  const SparseGraph t = directed.transpose();
  SparseGraph out = directed + t - directed.cwiseProduct(t);
  out.prune(0.0);
  return out;
}

std::pair<double, double> fit_ab(double min_dist) {
  if (!(min_dist > 0.0 && min_dist < 1.0)) {
    throw std::invalid_argument("fit_ab: min_dist must be in (0, 1)");
  }
  constexpr int kPoints = 300;
  constexpr int kIterations = 100;
  Eigen::VectorXd x(kPoints), y(kPoints);
  for (int i = 0; i < kPoints; ++i) {
    x[i] = 3.0 * i / (kPoints - 1);
    y[i] = x[i] <= min_dist ? 1.0 : std::exp(-(x[i] - min_dist));
  }
  auto residual = [&](double a, double b, Eigen::VectorXd& r, Eigen::MatrixXd* jac) {
    r.resize(kPoints);
    if (jac) jac->resize(kPoints, 2);
    for (int i = 0; i < kPoints; ++i) {
      const double p = x[i] > 0.0 ? std::pow(x[i], 2.0 * b) : 0.0;
      const double f = 1.0 / (1.0 + a * p);
      r[i] = f - y[i];
      if (jac) {
        (*jac)(i, 0) = -p * f * f;
        (*jac)(i, 1) = x[i] > 0.0 ? -a * p * 2.0 * std::log(x[i]) * f * f : 0.0;
      }
    }
    return r.squaredNorm();
  };

  double a = 1.0, b = 1.0;
  Eigen::VectorXd r;
  Eigen::MatrixXd jac;
  double cost = residual(a, b, r, &jac);
  for (int it = 0; it < kIterations; ++it) {
    const Eigen::Vector2d step = (jac.transpose() * jac).ldlt().solve(-jac.transpose() * r);
    double t = 1.0;
    bool improved = false;
    for (int half = 0; half < 30; ++half, t *= 0.5) {
      const double na = a + t * step[0], nb = b + t * step[1];
      if (na <= 0.0 || nb <= 0.0) continue;
      Eigen::VectorXd nr;
      const double nc = residual(na, nb, nr, nullptr);
      if (nc < cost) {
        a = na;
        b = nb;
        improved = true;
        break;
      }
    }
    if (!improved) break;
    cost = residual(a, b, r, &jac);
  }
  return {a, b};
}

UmapModel umap_fit(const RowMatrix& features, const UmapConfig& config) {
  validate(config);
  const Eigen::Index n = features.rows();
  if (n <= config.n_neighbors) {
    throw std::invalid_argument("umap_fit: need more than n_neighbors = " +
                                std::to_string(config.n_neighbors) + " points, got " +
                                std::to_string(n));
  }
  if (!features.allFinite()) throw std::invalid_argument("umap_fit: non-finite feature");

  UmapModel model;
  model.config = config;
  model.training = features;
  const auto knn = knn_brute_force(features, features, config.n_neighbors, true);
  const auto sk = smooth_knn(knn.distances);
  model.graph = fuzzy_union(membership_graph(knn, sk, n));
  std::tie(model.a, model.b) = fit_ab(config.min_dist);

  Rng rng(config.seed);
  model.embedding.resize(n, config.n_components);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index c = 0; c < config.n_components; ++c) {
      model.embedding(i, c) = rng.uniform(-10.0, 10.0);
    }
  }
  const Edges edges = edges_of(model.graph, config.n_epochs);
  optimize_layout(model.embedding, model.embedding, true, edges, model.a, model.b,
                  config.n_epochs, config.negative_sample_rate, config.initial_lr, rng);
  return model;
}

RowMatrix umap_transform(const UmapModel& model, const RowMatrix& features) {
  const auto& cfg = model.config;
  if (features.cols() != model.training.cols()) {
    throw ShapeError("umap_transform: features have " + std::to_string(features.cols()) +
                     " columns, model expects " + std::to_string(model.training.cols()));
  }
  const Eigen::Index m = features.rows();
  RowMatrix out(m, model.embedding.cols());
  if (m == 0) return out;

  const auto knn = knn_brute_force(features, model.training, cfg.n_neighbors, false);
  const auto sk = smooth_knn(knn.distances);
  const SparseGraph graph = membership_graph(knn, sk, model.training.rows());

  for (Eigen::Index i = 0; i < m; ++i) {
    double total = 0.0;
    out.row(i).setZero();
    for (Eigen::Index c = 0; c < knn.indices.cols(); ++c) {
      const double w = std::exp(-std::max(0.0, knn.distances(i, c) - sk.rho[i]) / sk.sigma[i]);
      out.row(i) += w * model.embedding.row(knn.indices(i, c));
      total += w;
    }
    out.row(i) /= total;
  }

  RowMatrix fixed = model.embedding;
  Rng rng(derive_seed(cfg.seed, 1));
  const Edges edges = edges_of(graph, cfg.transform_epochs);
  optimize_layout(out, fixed, false, edges, model.a, model.b, cfg.transform_epochs,
                  cfg.negative_sample_rate, cfg.initial_lr / 4.0, rng);
  return out;
}

}  // namespace alseg
