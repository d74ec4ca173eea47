#include "alseg/cluster.hpp"

#include <limits>
#include <stdexcept>
#include <string>

#include "alseg/error.hpp"
#include "alseg/random.hpp"

namespace alseg {

namespace {

constexpr int kMaxIterations = 300;
constexpr double kShiftTolerance = 1e-6;

double assign(const RowMatrix& centroids, const RowMatrix& points, Eigen::VectorXi& labels) {
  labels.resize(points.rows());
  double inertia = 0.0;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    int arg = 0;
    for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
      const double d = (points.row(i) - centroids.row(c)).squaredNorm();
      if (d < best) {
        best = d;
        arg = static_cast<int>(c);
      }
    }
    labels[i] = arg;
    inertia += best;
  }
  return inertia;
}

RowMatrix kmeanspp(const RowMatrix& points, int k, Rng& rng) {
  const auto n = static_cast<std::size_t>(points.rows());
  RowMatrix centroids(k, points.cols());
  std::vector<bool> chosen(n, false);
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());

  std::size_t pick = rng.uniform_index(n);
  for (int c = 0; c < k; ++c) {
    if (c > 0) {
      double total = 0.0;
      for (std::size_t i = 0; i < n; ++i) total += d2[i];
      if (total > 0.0) {
        const double r = rng.uniform() * total;
        double acc = 0.0;
        pick = n;
        for (std::size_t i = 0; i < n; ++i) {
          if (d2[i] <= 0.0) continue;
          acc += d2[i];
          pick = i;
          if (acc > r) break;
        }
      } else {
        std::vector<std::size_t> free;
        for (std::size_t i = 0; i < n; ++i) {
          if (!chosen[i]) free.push_back(i);
        }
        pick = free[rng.uniform_index(free.size())];
      }
    }
    chosen[pick] = true;
    centroids.row(c) = points.row(static_cast<Eigen::Index>(pick));
    for (std::size_t i = 0; i < n; ++i) {
      const double d = (points.row(static_cast<Eigen::Index>(i)) - centroids.row(c)).squaredNorm();
      d2[i] = std::min(d2[i], d);
    }
  }
  return centroids;
}

}  // namespace

Clustering kmeans(const RowMatrix& points, int k, std::uint64_t seed) {
  const Eigen::Index n = points.rows();
  if (k < 1 || k > n) {
    throw std::invalid_argument("kmeans: k = " + std::to_string(k) + " must be in [1, " +
                                std::to_string(n) + "]");
  }
  if (!points.allFinite()) throw std::invalid_argument("kmeans: non-finite point");

  Rng rng(seed);
  Clustering out;
  out.centroids = kmeanspp(points, k, rng);
  out.inertia = assign(out.centroids, points, out.labels);
  out.inertia_trace.push_back(out.inertia);

  for (int it = 0; it < kMaxIterations; ++it) {
    RowMatrix next = RowMatrix::Zero(k, points.cols());
    Eigen::VectorXi counts = Eigen::VectorXi::Zero(k);
    std::vector<bool> reseeded(static_cast<std::size_t>(n), false);
    for (Eigen::Index i = 0; i < n; ++i) {
      next.row(out.labels[i]) += points.row(i);
      ++counts[out.labels[i]];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        next.row(c) /= counts[c];
        continue;
      }
      // Empty cluster: move it onto the point farthest from its own centroid.
      double worst = -1.0;
      Eigen::Index arg = 0;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (reseeded[static_cast<std::size_t>(i)]) continue;
        const double d = (points.row(i) - out.centroids.row(out.labels[i])).squaredNorm();
        if (d > worst) {
          worst = d;
          arg = i;
        }
      }
      reseeded[static_cast<std::size_t>(arg)] = true;
      next.row(c) = points.row(arg);
    }
    const double shift = (next - out.centroids).rowwise().norm().maxCoeff();
    out.centroids = std::move(next);
    out.inertia = assign(out.centroids, points, out.labels);
    out.inertia_trace.push_back(out.inertia);
    out.iterations = it + 1;
    if (shift < kShiftTolerance) break;
  }
  return out;
}

Eigen::VectorXi assign_labels(const Clustering& clustering, const RowMatrix& points) {
  if (points.cols() != clustering.centroids.cols()) {
    throw ShapeError("assign_labels: point dimension does not match centroids");
  }
  Eigen::VectorXi labels;
  assign(clustering.centroids, points, labels);
  return labels;
}

std::vector<std::size_t> nearest_to_centroids(const Clustering& clustering,
                                              const RowMatrix& points,
                                              std::span<const std::size_t> ids) {
  const auto k = clustering.centroids.rows();
  if (static_cast<Eigen::Index>(ids.size()) != points.rows()) {
    throw std::invalid_argument("nearest_to_centroids: ids and points differ in length");
  }
  if (points.rows() < k) {
    throw std::invalid_argument("nearest_to_centroids: " + std::to_string(points.rows()) +
                                " candidates for " + std::to_string(k) + " centroids");
  }
  if (points.cols() != clustering.centroids.cols()) {
    throw ShapeError("nearest_to_centroids: point dimension does not match centroids");
  }
  std::vector<bool> taken(ids.size(), false);
  std::vector<std::size_t> out;
  out.reserve(static_cast<std::size_t>(k));
  for (Eigen::Index c = 0; c < k; ++c) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = ids.size();
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (taken[i]) continue;
      const double d = (points.row(static_cast<Eigen::Index>(i)) - clustering.centroids.row(c)).norm();
      if (d < best || (d == best && ids[i] < ids[arg])) {
        best = d;
        arg = i;
      }
    }
    taken[arg] = true;
    out.push_back(ids[arg]);
  }
  return out;
}

}  // namespace alseg
