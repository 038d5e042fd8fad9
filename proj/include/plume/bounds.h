#pragma once

#include "plume/model.h"

#include <vector>

namespace plume {

/// Quantities entering the Rademacher risk bound for a K-expert model.
struct BoundInputs {
  std::vector<double> w_max_per_expert;  // bounds on ||w_k||, bias excluded
  double radius = 0.0;                   // R >= ||x|| over the data
  double gamma = 1.0;
  Index n_samples = 0;
  double delta = 0.05;  // confidence level 1 - delta
  double empirical_risk = 0.0;

  Index experts() const noexcept { return static_cast<Index>(w_max_per_expert.size()); }
  void validate() const;
};

struct BoundReport {
  double c1 = 0.0;
  double c2 = 0.0;
  double rademacher_bound = 0.0;
  double risk_bound = 0.0;
  double w_max = 0.0;
  double w_min = 0.0;
  double empirical_risk = 0.0;
  double radius = 0.0;
  Index n_samples = 0;
  double delta = 0.0;
  /// risk_bound > ln 2 + 10.
  bool vacuous = false;
};

/// (3 sqrt(K-1) / sqrt(2) + 1) * sum_k W_k R / sqrt(N).
double rademacher_bound(const BoundInputs& in);

/// Loss Lipschitz/range constant (1 + e^{W R}) e^{gamma (W + W_min) R}.
double loss_constant(double w_max, double w_min, double radius, double gamma);

/// c2 * sqrt(ln(2/delta) / (2N)). Accepts any delta > 0.
double confidence_term(double c2, double delta, Index n_samples);

BoundReport risk_bound(const BoundInputs& in);

/// Instantiates the bound for a fitted model: W_k = ||w_k||, R = max ||x_n||,
/// empirical risk = mean cross-entropy -ln p(y_n | x_n).
BoundReport bound_for_model(const ModelParams& params, const Dataset& data, double delta);

}  // namespace plume
