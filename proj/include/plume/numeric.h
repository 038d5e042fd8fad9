#pragma once

#include <Eigen/Core>

#include <cmath>
#include <limits>

namespace plume {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline double sigmoid(double a) {
  if (a >= 0.0) return 1.0 / (1.0 + std::exp(-a));
  const double e = std::exp(a);
  return e / (1.0 + e);
}

/// ln sigma(a) without overflow for large |a|.
inline double log_sigmoid(double a) {
  if (a >= 0.0) return -std::log1p(std::exp(-a));
  return a - std::log1p(std::exp(a));
}

template <typename Derived>
double log_sum_exp(const Eigen::MatrixBase<Derived>& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}

/// Row-wise log-sum-exp of an N x K matrix.
inline Vector row_log_sum_exp(const Matrix& m) {
  const Vector mx = m.rowwise().maxCoeff();
  return mx.array() + (m.colwise() - mx).array().exp().rowwise().sum().log();
}

/// Row-wise softmax with max subtraction.
inline Matrix row_softmax(const Matrix& m) {
  const Vector mx = m.rowwise().maxCoeff();
  Matrix e = (m.colwise() - mx).array().exp().matrix();
  const Vector s = e.rowwise().sum();
  return e.array().colwise() / s.array();
}

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace plume
