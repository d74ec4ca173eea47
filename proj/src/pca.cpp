#include "alseg/pca.hpp"

#include <stdexcept>
#include <string>

#include <Eigen/SVD>

#include "alseg/error.hpp"

namespace alseg {

PcaModel pca_fit(const RowMatrix& features, int d) {
  const Eigen::Index n = features.rows();
  const Eigen::Index dim = features.cols();
  if (n < 2) throw std::invalid_argument("pca_fit: need at least 2 samples");
  if (d < 1 || d > std::min(n - 1, dim)) {
    throw std::invalid_argument("pca_fit: d = " + std::to_string(d) + " must be in [1, " +
                                std::to_string(std::min(n - 1, dim)) + "]");
  }
  if (!features.allFinite()) throw std::invalid_argument("pca_fit: non-finite feature");

  PcaModel model;
  model.mean = features.colwise().mean().transpose();
  const Eigen::MatrixXd centered = features.rowwise() - model.mean.transpose();
  Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
  const Eigen::MatrixXd& v = svd.matrixV();
  const Eigen::VectorXd& s = svd.singularValues();

  model.components.resize(d, dim);
  model.explained_variance.resize(d);
  for (int k = 0; k < d; ++k) {
    Eigen::VectorXd axis = v.col(k);
    Eigen::Index arg = 0;
    axis.cwiseAbs().maxCoeff(&arg);
    if (axis[arg] < 0) axis = -axis;
    model.components.row(k) = axis.transpose();
    model.explained_variance[k] = s[k] * s[k] / static_cast<double>(n - 1);
  }
  return model;
}

RowMatrix pca_transform(const PcaModel& model, const RowMatrix& features) {
  if (features.cols() != model.mean.size()) {
    throw ShapeError("pca_transform: features have " + std::to_string(features.cols()) +
                     " columns, model expects " + std::to_string(model.mean.size()));
  }
  if (features.rows() == 0) return RowMatrix(0, model.components.rows());
  return (features.rowwise() - model.mean.transpose()) * model.components.transpose();
}

}  // namespace alseg
