#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "alseg/pca.hpp"

namespace alseg {

struct UmapConfig {
  int n_neighbors = 15;
  double min_dist = 0.1;
  int n_components = 2;
  int n_epochs = 500;
  int negative_sample_rate = 5;
  double initial_lr = 1.0;
  std::uint64_t seed = 0;
  /// Epochs used when placing out-of-sample points.
  int transform_epochs = 30;

  bool operator==(const UmapConfig&) const = default;
};

void validate(const UmapConfig& cfg);

using SparseGraph = Eigen::SparseMatrix<double>;

struct UmapModel {
  UmapConfig config;
  RowMatrix training;
  SparseGraph graph;  // symmetric, weights in (0, 1], no diagonal
  RowMatrix embedding;
  double a = 0.0;
  double b = 0.0;
};

/// Neighbour lists from a brute-force search: for each query row, the k
/// nearest reference rows by Euclidean distance (ties to the lower index).
struct KnnResult {
  Eigen::MatrixXi indices;    // n x k
  Eigen::MatrixXd distances;  // n x k, ascending per row
};

/// With `exclude_self`, `queries` must be `reference` and row i never lists i.
KnnResult knn_brute_force(const RowMatrix& queries, const RowMatrix& reference, int k,
                          bool exclude_self);

/// Per-row rho (nearest distance) and sigma such that
/// sum_j exp(-max(0, d_j - rho) / sigma) = log2(k).
struct SmoothKnn {
  Eigen::VectorXd rho;
  Eigen::VectorXd sigma;
};
SmoothKnn smooth_knn(const Eigen::MatrixXd& distances);

/// Directed membership strengths as an n x m sparse matrix.
SparseGraph membership_graph(const KnnResult& knn, const SmoothKnn& sk, Eigen::Index n_cols);

/// w + w^T - w .* w^T.
SparseGraph fuzzy_union(const SparseGraph& directed);

/// Least-squares fit of 1 / (1 + a x^(2b)) to the min_dist target curve.
std::pair<double, double> fit_ab(double min_dist);

UmapModel umap_fit(const RowMatrix& features, const UmapConfig& config);

/// Places new rows into a fitted embedding; training positions stay fixed.
RowMatrix umap_transform(const UmapModel& model, const RowMatrix& features);

}  // namespace alseg
