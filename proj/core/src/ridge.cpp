#include "predint/ridge.hpp"

#include <Eigen/Dense>

#include <stdexcept>

namespace predint {

RidgeModel RidgeModel::fit(const Dataset& ds, double lambda) {
  if (!(lambda >= 0.0)) throw std::invalid_argument("RidgeModel: lambda must be >= 0");
  const std::size_t n = ds.n();
  const std::size_t d = ds.dim();

  Eigen::MatrixXd X(n, d);
  Eigen::VectorXd y(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = ds.row(i);
    for (std::size_t j = 0; j < d; ++j) X(i, j) = r[j];
    y(i) = ds.target(i);
  }
  const Eigen::RowVectorXd x_mean = X.colwise().mean();
  const double y_mean = y.mean();
  X.rowwise() -= x_mean;
  y.array() -= y_mean;

  Eigen::MatrixXd A = X.transpose() * X;
  A.diagonal().array() += lambda;
  const Eigen::VectorXd beta = A.ldlt().solve(X.transpose() * y);

  RidgeModel m;
  m.coef_.assign(beta.data(), beta.data() + d);
  m.intercept_ = y_mean - x_mean * beta;
  return m;
}

double RidgeModel::predict(std::span<const double> x) const {
  if (x.size() != coef_.size()) {
    throw std::invalid_argument("RidgeModel::predict: bad dimension");
  }
  double s = intercept_;
  for (std::size_t j = 0; j < coef_.size(); ++j) s += coef_[j] * x[j];
  return s;
}

}  // namespace predint
