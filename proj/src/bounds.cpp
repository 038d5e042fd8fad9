#include "plume/bounds.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace plume {

namespace {

double capacity_factor(Index experts) {
  return 3.0 * std::sqrt(static_cast<double>(experts - 1)) / std::numbers::sqrt2 + 1.0;
}

double weight_sum(const BoundInputs& in) {
  return std::accumulate(in.w_max_per_expert.begin(), in.w_max_per_expert.end(), 0.0);
}

}  // namespace

void BoundInputs::validate() const {
  if (w_max_per_expert.empty()) throw ConfigError("bound needs at least one expert");
  for (double w : w_max_per_expert) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("weight norm bounds must be finite and nonnegative");
  }
  if (!(radius >= 0.0) || !std::isfinite(radius)) throw ConfigError("radius must be finite and nonnegative");
  if (!(gamma > 0.0)) throw ConfigError("gamma must be positive");
  if (n_samples < 1) throw ConfigError("sample size must be positive");
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("delta must lie in (0, 1)");
  if (!(empirical_risk >= 0.0) || !std::isfinite(empirical_risk)) {
    throw ConfigError("empirical risk must be finite and nonnegative");
  }
}

double rademacher_bound(const BoundInputs& in) {
  in.validate();
  return capacity_factor(in.experts()) * weight_sum(in) * in.radius /
         std::sqrt(static_cast<double>(in.n_samples));
}

double loss_constant(double w_max, double w_min, double radius, double gamma) {
  return (1.0 + std::exp(w_max * radius)) * std::exp(gamma * (w_max + w_min) * radius);
}

double confidence_term(double c2, double delta, Index n_samples) {
  if (!(delta > 0.0)) throw ConfigError("delta must be positive");
  if (n_samples < 1) throw ConfigError("sample size must be positive");
  return c2 * std::sqrt(std::log(2.0 / delta) / (2.0 * static_cast<double>(n_samples)));
}

BoundReport risk_bound(const BoundInputs& in) {
  in.validate();
  BoundReport r;
  const auto [lo, hi] = std::minmax_element(in.w_max_per_expert.begin(), in.w_max_per_expert.end());
  r.w_max = *hi;
  r.w_min = *lo;
  const double lip = loss_constant(r.w_max, r.w_min, in.radius, in.gamma);
  r.c1 = lip * capacity_factor(in.experts());
  r.c2 = 3.0 * lip;
  r.rademacher_bound = rademacher_bound(in);
  const double complexity = r.c1 * weight_sum(in) * in.radius / std::sqrt(static_cast<double>(in.n_samples));
  r.risk_bound = in.empirical_risk + complexity + confidence_term(r.c2, in.delta, in.n_samples);
  r.empirical_risk = in.empirical_risk;
  r.radius = in.radius;
  r.n_samples = in.n_samples;
  r.delta = in.delta;
  r.vacuous = !(r.risk_bound <= std::numbers::ln2 + 10.0);
  return r;
}

BoundReport bound_for_model(const ModelParams& params, const Dataset& data, double delta) {
  if (data.dim() != params.dim()) {
    throw DimensionError("data has " + std::to_string(data.dim()) + " features, model expects " +
                         std::to_string(params.dim()));
  }
  BoundInputs in;
  const Matrix w = params.weights().leftCols(params.dim());
  for (Index k = 0; k < params.experts(); ++k) in.w_max_per_expert.push_back(w.row(k).norm());
  in.radius = data.features().rowwise().norm().maxCoeff();
  in.gamma = params.gamma();
  in.n_samples = data.size();
  in.delta = delta;
  in.empirical_risk = std::max(0.0, -log_posteriors(params, data).mean());
  return risk_bound(in);
}

}  // namespace plume
