#include "plume/model.h"

#include <sstream>
#include <string>

namespace plume {

namespace {

void check_point(const ModelParams& params, const AugmentedPoint& x) {
  if (x.dim() != params.dim()) {
    std::ostringstream msg;
    msg << "point has " << x.dim() << " features, model expects " << params.dim();
    throw DimensionError(msg.str());
  }
}

Vector point_logits(const ModelParams& params, const AugmentedPoint& x) {
  check_point(params, x);
  return params.weights() * x.values();
}

}  // namespace

ModelParams::ModelParams(Matrix weights, double gamma)
    : weights_(std::move(weights)), gamma_(gamma) {
  if (weights_.rows() < 1) throw ConfigError("model needs at least one hyperplane");
  if (weights_.cols() < 2) throw ConfigError("model needs at least one feature");
  if (!(gamma_ > 0.0) || !std::isfinite(gamma_)) throw ConfigError("gamma must be positive and finite");
  if (!weights_.allFinite()) throw NumericalError("model weights contain NaN or Inf");
}

ModelParams ModelParams::zeros(Index experts, Index dim, double gamma) {
  return {Matrix::Zero(experts, dim + 1), gamma};
}

ModelParams ModelParams::from_flat(const Vector& theta, Index experts, Index dim,
                                   double gamma) {
  if (theta.size() != experts * (dim + 1)) {
    throw DimensionError("parameter vector length " + std::to_string(theta.size()) +
                         " does not match K(d+1) = " + std::to_string(experts * (dim + 1)));
  }
  // Row-major stacking: block k is w~_k.
  RowMatrix w = Eigen::Map<const RowMatrix>(theta.data(), experts, dim + 1);
  return {Matrix(w), gamma};
}

Vector ModelParams::flat() const {
  RowMatrix w = weights_;
  return Eigen::Map<const Vector>(w.data(), w.size());
}

AugmentedPoint AugmentedPoint::from_features(const Eigen::Ref<const Vector>& x) {
  Vector v(x.size() + 1);
  v.head(x.size()) = x;
  v[x.size()] = 1.0;
  return AugmentedPoint(std::move(v));
}

AugmentedPoint AugmentedPoint::from_augmented(Vector x_tilde) {
  if (x_tilde.size() < 2 || x_tilde[x_tilde.size() - 1] != 1.0) {
    throw DataError("augmented point must end with exactly 1");
  }
  return AugmentedPoint(std::move(x_tilde));
}

Dataset::Dataset(Matrix features, Eigen::VectorXi labels, std::optional<FeatureScale> feature_scale)
    : features_(std::move(features)), labels_(std::move(labels)), scale_(std::move(feature_scale)) {
  if (features_.rows() < 1) throw DataError("dataset is empty");
  if (features_.cols() < 1) throw DataError("dataset has no feature columns");
  if (labels_.size() != features_.rows()) {
    throw DimensionError("label count " + std::to_string(labels_.size()) +
                         " does not match row count " + std::to_string(features_.rows()));
  }
  for (Index i = 0; i < labels_.size(); ++i) {
    if (labels_[i] != 1 && labels_[i] != -1) {
      throw DataError("label at row " + std::to_string(i) + " is " +
                      std::to_string(labels_[i]) + ", expected -1 or +1");
    }
  }
  if (!features_.allFinite()) throw DataError("features contain NaN or Inf");
  if (scale_ && static_cast<Index>(scale_->size()) != features_.cols()) {
    throw DimensionError("feature scale length does not match feature count");
  }
  augmented_.resize(features_.rows(), features_.cols() + 1);
  augmented_.leftCols(features_.cols()) = features_;
  augmented_.col(features_.cols()).setOnes();
}

Index Dataset::count(int label) const { return (labels_.array() == label).count(); }

Dataset Dataset::subset(std::span<const Index> rows) const {
  Matrix f(static_cast<Index>(rows.size()), dim());
  Eigen::VectorXi y(static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    f.row(static_cast<Index>(i)) = features_.row(rows[i]);
    y[static_cast<Index>(i)] = labels_[rows[i]];
  }
  return {std::move(f), std::move(y), scale_};
}

void check_label(int y) {
  if (y != 1 && y != -1) throw DataError("label must be -1 or +1, got " + std::to_string(y));
}

double margin(const ModelParams& params, const AugmentedPoint& x) {
  return point_logits(params, x).minCoeff();
}

int classify(const ModelParams& params, const AugmentedPoint& x) {
  return margin(params, x) >= 0.0 ? 1 : -1;
}

Vector gating(const ModelParams& params, const AugmentedPoint& x) {
  const Vector z = -params.gamma() * point_logits(params, x);
  const Vector e = (z.array() - z.maxCoeff()).exp();
  return e / e.sum();
}

double posterior(const ModelParams& params, const AugmentedPoint& x, int y) {
  check_label(y);
  const Vector a = point_logits(params, x);
  const Vector g = gating(params, x);
  double p = 0.0;
  for (Index k = 0; k < a.size(); ++k) p += g[k] * sigmoid(y * a[k]);
  return p;
}

double log_posterior(const ModelParams& params, const AugmentedPoint& x, int y) {
  check_label(y);
  const Vector a = point_logits(params, x);
  const Vector gate_logits = -params.gamma() * a;
  Vector joint(a.size());
  for (Index k = 0; k < a.size(); ++k) joint[k] = gate_logits[k] + log_sigmoid(y * a[k]);
  return log_sum_exp(joint) - log_sum_exp(gate_logits);
}

Matrix expert_logits(const ModelParams& params, const Matrix& augmented) {
  if (augmented.cols() != params.weights().cols()) {
    throw DimensionError("data has " + std::to_string(augmented.cols() - 1) +
                         " features, model expects " + std::to_string(params.dim()));
  }
  return augmented * params.weights().transpose();
}

Vector log_posteriors(const ModelParams& params, const Dataset& data) {
  const Matrix a = expert_logits(params, data.augmented());
  const Matrix gate_logits = -params.gamma() * a;
  Matrix joint = gate_logits;
  const auto& y = data.labels();
  for (Index n = 0; n < a.rows(); ++n) {
    for (Index k = 0; k < a.cols(); ++k) joint(n, k) += log_sigmoid(y[n] * a(n, k));
  }
  return row_log_sum_exp(joint) - row_log_sum_exp(gate_logits);
}

double log_likelihood(const ModelParams& params, const Dataset& data) {
  return log_posteriors(params, data).sum();
}

Vector margins(const ModelParams& params, const Matrix& features) {
  if (features.cols() != params.dim()) {
    throw DimensionError("data has " + std::to_string(features.cols()) +
                         " features, model expects " + std::to_string(params.dim()));
  }
  const auto& w = params.weights();
  Matrix a = features * w.leftCols(params.dim()).transpose();
  a.rowwise() += w.col(params.dim()).transpose();
  return a.rowwise().minCoeff();
}

}  // namespace plume
