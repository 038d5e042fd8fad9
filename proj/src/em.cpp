#include "plume/em.h"

#include <chrono>
#include <cmath>
#include <random>
#include <string>

namespace plume {

namespace {

constexpr double kInitHalfWidth = 0.1;
constexpr double kDeadExpertFraction = 1e-6;
constexpr int kLogisticInitSteps = 100;

Matrix uniform_noise(Index rows, Index cols, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-kInitHalfWidth, kInitHalfWidth);
  Matrix m(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) m(r, c) = u(rng);
  }
  return m;
}

// Single logistic separator fitted by line-searched gradient ascent.
Vector logistic_separator(const Dataset& data, const LineSearchConfig& ls) {
  const Matrix& x = data.augmented();
  const Eigen::VectorXd y = data.labels().cast<double>();
  const auto loglik = [&](const Vector& w) {
    const Vector a = (x * w).cwiseProduct(y);
    double s = 0.0;
    for (Index n = 0; n < a.size(); ++n) s += log_sigmoid(a[n]);
    return s;
  };
  const auto gradient = [&](const Vector& w) {
    const Vector a = (x * w).cwiseProduct(y);
    Vector c(a.size());
    for (Index n = 0; n < a.size(); ++n) c[n] = y[n] * sigmoid(-a[n]);
    return Vector(x.transpose() * c);
  };
  Vector w = Vector::Zero(x.cols());
  for (int step = 0; step < kLogisticInitSteps; ++step) {
    const Vector g = gradient(w);
    try {
      w += backtracking_search(loglik, w, g, g, ls) * g;
    } catch (const LineSearchError&) {
      break;
    }
  }
  return w;
}

// Replaces experts whose total responsibility has collapsed with a perturbed
// copy of the most responsible expert. A replacement is kept only if the
// likelihood does not drop, so the EM trajectory stays monotone.
ModelParams revive_dead_experts(ModelParams params, double& loglik, const Dataset& data,
                                std::mt19937_64& rng, int& revived) {
  if (params.experts() < 2) return params;
  const Vector totals = responsibilities(params, data).totals();
  const double floor = kDeadExpertFraction * static_cast<double>(data.size());
  Index best = 0;
  totals.maxCoeff(&best);
  for (Index k = 0; k < totals.size(); ++k) {
    if (totals[k] >= floor) continue;
    Matrix w = params.weights();
    w.row(k) = w.row(best) + uniform_noise(1, w.cols(), rng);
    ModelParams candidate = params.with_weights(std::move(w));
    const double candidate_ll = log_likelihood(candidate, data);
    if (std::isfinite(candidate_ll) && candidate_ll >= loglik) {
      params = std::move(candidate);
      loglik = candidate_ll;
      ++revived;
    }
  }
  return params;
}

FitReport run_em(const TrainConfig& cfg, const Dataset& data) {
  FitReport report{initialize(cfg, data), {}};
  report.seed_used = cfg.seed;
  std::mt19937_64 revive_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);

  ModelParams params = report.final_params;
  double loglik = log_likelihood(params, data);
  if (!std::isfinite(loglik)) {
    throw NumericalError("initial log-likelihood is not finite; check feature scaling");
  }
  report.ll_trajectory.push_back(loglik);

  const MStepConfig mstep{cfg.optimizer, cfg.line_search, cfg.inner_grad_tol, cfg.max_inner_iters};
  const double scale = cfg.epsilon_mode == EpsilonMode::PerExample ? 1.0 / static_cast<double>(data.size()) : 1.0;

  for (int c = 0; c < cfg.max_em_iters; ++c) {
    const Responsibilities pi = responsibilities(params, data);
    ModelParams next = maximize_q(params, pi, data, mstep).params;
    double next_ll = log_likelihood(next, data);
    if (!std::isfinite(next_ll)) {
      throw NumericalError("log-likelihood became non-finite at EM iteration " + std::to_string(c + 1));
    }
    next = revive_dead_experts(std::move(next), next_ll, data, revive_rng, report.reinitialized_experts);

    const double gain = (next_ll - loglik) * scale;
    params = std::move(next);
    loglik = next_ll;
    report.ll_trajectory.push_back(loglik);
    report.em_iterations = c + 1;
    if (gain < cfg.epsilon) {
      report.converged = true;
      break;
    }
  }
  report.final_params = std::move(params);
  report.train_accuracy = accuracy(predict(report.final_params, data.features()), data.labels());
  return report;
}

}  // namespace

std::string_view to_string(Init init) {
  return init == Init::SmallRandom ? "random" : "logistic";
}

Init parse_init(std::string_view name) {
  if (name == "random") return Init::SmallRandom;
  if (name == "logistic") return Init::PerturbedLogistic;
  throw ConfigError("unknown init '" + std::string(name) + "' (expected random or logistic)");
}

std::string_view to_string(EpsilonMode mode) {
  return mode == EpsilonMode::PerExample ? "mean" : "total";
}

EpsilonMode parse_epsilon_mode(std::string_view name) {
  if (name == "mean") return EpsilonMode::PerExample;
  if (name == "total") return EpsilonMode::Total;
  throw ConfigError("unknown epsilon mode '" + std::string(name) + "' (expected mean or total)");
}

void TrainConfig::validate() const {
  if (k_experts < 1) throw ConfigError("k must be at least 1");
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw ConfigError("gamma must be positive");
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
  if (max_em_iters < 1) throw ConfigError("max_em_iters must be at least 1");
  if (max_inner_iters < 1) throw ConfigError("max_inner_iters must be at least 1");
  if (!(inner_grad_tol > 0.0)) throw ConfigError("inner_grad_tol must be positive");
  if (restarts < 1) throw ConfigError("restarts must be at least 1");
  line_search.validate();
}

ModelParams initialize(const TrainConfig& cfg, const Dataset& data) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  const Index width = data.dim() + 1;
  if (cfg.init == Init::SmallRandom) {
    return {uniform_noise(cfg.k_experts, width, rng), cfg.gamma};
  }
  const Vector w = logistic_separator(data, cfg.line_search);
  Matrix weights = uniform_noise(cfg.k_experts, width, rng);
  weights.rowwise() += w.transpose();
  return {std::move(weights), cfg.gamma};
}

FitReport fit(const TrainConfig& cfg, const Dataset& data) {
  cfg.validate();
  if (!data.has_both_classes()) throw DataError("training data must contain both classes");
  const auto t0 = std::chrono::steady_clock::now();

  std::optional<FitReport> best;
  for (int r = 0; r < cfg.restarts; ++r) {
    TrainConfig run_cfg = cfg;
    run_cfg.seed = cfg.seed + static_cast<std::uint64_t>(r);
    FitReport rep = run_em(run_cfg, data);
    if (!best || rep.ll_trajectory.back() > best->ll_trajectory.back()) best = std::move(rep);
  }
  best->wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return std::move(*best);
}

Eigen::VectorXi predict(const ModelParams& params, const Matrix& features) {
  const Vector m = margins(params, features);
  return (m.array() >= 0.0).select(Eigen::VectorXi::Ones(m.size()), -Eigen::VectorXi::Ones(m.size()));
}

double accuracy(const Eigen::VectorXi& predicted, const Eigen::VectorXi& truth) {
  if (predicted.size() != truth.size()) throw DimensionError("prediction and label counts differ");
  if (truth.size() == 0) return 0.0;
  return static_cast<double>((predicted.array() == truth.array()).count()) / static_cast<double>(truth.size());
}

}  // namespace plume
