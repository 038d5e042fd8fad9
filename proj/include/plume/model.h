#pragma once

#include "plume/error.h"
#include "plume/numeric.h"

#include <optional>
#include <span>
#include <vector>

namespace plume {

/// Parameters of a K-hyperplane polyhedral classifier.
///
/// Row k of the weight matrix is the augmented vector [w_k; b_k], so the
/// matrix is K x (d+1) with the bias in the last column. `gamma` controls how
/// sharply the softmax gate selects the minimum-margin hyperplane.
class ModelParams {
 public:
  ModelParams(Matrix weights, double gamma);

  static ModelParams zeros(Index experts, Index dim, double gamma);
  /// Inverse of flat(): `theta` holds the rows of the weight matrix back to back.
  static ModelParams from_flat(const Vector& theta, Index experts, Index dim,
                               double gamma);

  const Matrix& weights() const noexcept { return weights_; }
  double gamma() const noexcept { return gamma_; }
  Index experts() const noexcept { return weights_.rows(); }
  /// Feature dimension d (bias excluded).
  Index dim() const noexcept { return weights_.cols() - 1; }
  /// Length of the stacked parameter vector, K (d+1).
  Index size() const noexcept { return weights_.size(); }

  Vector flat() const;
  ModelParams with_weights(Matrix weights) const { return {std::move(weights), gamma_}; }

  bool operator==(const ModelParams& other) const {
    return gamma_ == other.gamma_ && weights_.rows() == other.weights_.rows() &&
           weights_.cols() == other.weights_.cols() && weights_ == other.weights_;
  }

 private:
  Matrix weights_;
  double gamma_;
};

/// A feature vector with a trailing 1 appended.
class AugmentedPoint {
 public:
  static AugmentedPoint from_features(const Eigen::Ref<const Vector>& x);
  /// Checks that the last component is exactly 1.
  static AugmentedPoint from_augmented(Vector x_tilde);

  const Vector& values() const noexcept { return values_; }
  Index dim() const noexcept { return values_.size() - 1; }

 private:
  explicit AugmentedPoint(Vector v) : values_(std::move(v)) {}
  Vector values_;
};

/// Per-column affine normalization: x_std = (x - shift) / scale.
struct ColumnScale {
  double shift = 0.0;
  double scale = 1.0;
  bool operator==(const ColumnScale&) const = default;
};

using FeatureScale = std::vector<ColumnScale>;

/// Labelled sample with labels in {-1, +1}.
class Dataset {
 public:
  Dataset(Matrix features, Eigen::VectorXi labels,
          std::optional<FeatureScale> feature_scale = std::nullopt);

  const Matrix& features() const noexcept { return features_; }
  /// N x (d+1) design matrix with a trailing column of ones.
  const Matrix& augmented() const noexcept { return augmented_; }
  const Eigen::VectorXi& labels() const noexcept { return labels_; }
  const std::optional<FeatureScale>& feature_scale() const noexcept { return scale_; }

  Index size() const noexcept { return features_.rows(); }
  Index dim() const noexcept { return features_.cols(); }
  Index count(int label) const;
  bool has_both_classes() const { return count(1) > 0 && count(-1) > 0; }

  Dataset subset(std::span<const Index> rows) const;

 private:
  Matrix features_;
  Matrix augmented_;
  Eigen::VectorXi labels_;
  std::optional<FeatureScale> scale_;
};

void check_label(int y);

/// min_k w~_k^T x~.
double margin(const ModelParams& params, const AugmentedPoint& x);

/// +1 iff margin >= 0.
int classify(const ModelParams& params, const AugmentedPoint& x);

/// Softmax of -gamma w~_k^T x~ over the K experts.
Vector gating(const ModelParams& params, const AugmentedPoint& x);

/// p(y | x) = sum_k g_k(x) sigma(y w~_k^T x~).
double posterior(const ModelParams& params, const AugmentedPoint& x, int y);

/// ln p(y | x), evaluated entirely in log space.
double log_posterior(const ModelParams& params, const AugmentedPoint& x, int y);

/// Sum over the sample of ln p(y_n | x_n).
double log_likelihood(const ModelParams& params, const Dataset& data);

// Batched forms used by the trainer. `augmented` is N x (d+1).

/// N x K matrix of w~_k^T x~_n.
Matrix expert_logits(const ModelParams& params, const Matrix& augmented);
/// Per-example ln p(y_n | x_n).
Vector log_posteriors(const ModelParams& params, const Dataset& data);
/// min-rule margins for raw feature rows (N x d).
Vector margins(const ModelParams& params, const Matrix& features);

}  // namespace plume
