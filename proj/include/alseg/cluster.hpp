#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "alseg/pca.hpp"

namespace alseg {

struct Clustering {
  RowMatrix centroids;  // k x d
  Eigen::VectorXi labels;
  double inertia = 0.0;
  int iterations = 0;
  /// Inertia after each Lloyd assignment step, starting with the seeding.
  std::vector<double> inertia_trace;
};

/// k-means++ seeding followed by Lloyd iterations until the largest centroid
/// shift drops below 1e-6 or 300 iterations.
Clustering kmeans(const RowMatrix& points, int k, std::uint64_t seed);

/// Nearest centroid per row, ties to the lower centroid index.
Eigen::VectorXi assign_labels(const Clustering& clustering, const RowMatrix& points);

/// For each centroid in order, the closest not-yet-chosen candidate (ties to
/// the smaller id). `ids[i]` is the sample id of `points.row(i)`.
std::vector<std::size_t> nearest_to_centroids(const Clustering& clustering,
                                              const RowMatrix& points,
                                              std::span<const std::size_t> ids);

}  // namespace alseg
