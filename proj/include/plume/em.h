#pragma once

#include "plume/model.h"
#include "plume/optim.h"

#include <cstdint>
#include <string_view>
#include <vector>

namespace plume {

enum class Init { SmallRandom, PerturbedLogistic };

/// How the likelihood-improvement tolerance is scaled.
enum class EpsilonMode {
  PerExample,  // compare (L' - L) / N against epsilon
  Total,       // compare L' - L against epsilon
};

std::string_view to_string(Init init);
Init parse_init(std::string_view name);
std::string_view to_string(EpsilonMode mode);
EpsilonMode parse_epsilon_mode(std::string_view name);

struct TrainConfig {
  Index k_experts = 2;
  double gamma = 1.0;
  double epsilon = 1e-6;
  EpsilonMode epsilon_mode = EpsilonMode::PerExample;
  Optimizer optimizer = Optimizer::Bfgs;
  int max_em_iters = 500;
  Init init = Init::SmallRandom;
  std::uint64_t seed = 0;
  LineSearchConfig line_search;
  /// Inner M-step limits.
  int max_inner_iters = 100;
  double inner_grad_tol = 1e-6;
  /// Independent EM runs with seeds seed, seed+1, ...; the best final likelihood wins.
  int restarts = 1;

  void validate() const;
};

struct FitReport {
  ModelParams final_params;
  std::vector<double> ll_trajectory;  // L(Theta^0), ..., L(Theta^c)
  int em_iterations = 0;
  bool converged = false;
  double wall_time = 0.0;  // seconds, all restarts included
  double train_accuracy = 0.0;
  int reinitialized_experts = 0;
  std::uint64_t seed_used = 0;
};

ModelParams initialize(const TrainConfig& cfg, const Dataset& data);

/// Runs EM until the likelihood gain drops below epsilon or max_em_iters.
FitReport fit(const TrainConfig& cfg, const Dataset& data);

/// Labels for raw feature rows (N x d) under the min-rule classifier.
Eigen::VectorXi predict(const ModelParams& params, const Matrix& features);

double accuracy(const Eigen::VectorXi& predicted, const Eigen::VectorXi& truth);

}  // namespace plume
