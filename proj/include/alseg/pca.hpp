#pragma once

#include <Eigen/Core>

namespace alseg {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Principal axes of a feature matrix. Rows of `components` are orthonormal;
/// the largest-magnitude entry of each row is positive.
struct PcaModel {
  Eigen::VectorXd mean;
  RowMatrix components;  // d x D
  Eigen::VectorXd explained_variance;
};

/// Top-d principal components of the rows of `features` (n x D), computed by
/// SVD of the centered matrix. Requires n >= 2 and 1 <= d <= min(n - 1, D).
PcaModel pca_fit(const RowMatrix& features, int d);

/// (x - mean) * components^T for each row.
RowMatrix pca_transform(const PcaModel& model, const RowMatrix& features);

}  // namespace alseg
