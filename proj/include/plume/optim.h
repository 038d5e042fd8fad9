#pragma once

#include "plume/model.h"

#include <functional>
#include <string_view>

namespace plume {

/// E-step posterior memberships: pi(n, k) = P(z_nk = 1 | x_n, y_n, Theta^c).
class Responsibilities {
 public:
  /// Rows must be probability vectors (sum to 1 within 1e-10, entries in [0,1]).
  explicit Responsibilities(Matrix pi);

  const Matrix& matrix() const noexcept { return pi_; }
  Index examples() const noexcept { return pi_.rows(); }
  Index experts() const noexcept { return pi_.cols(); }
  /// Sum over examples, one entry per expert.
  Vector totals() const { return pi_.colwise().sum().transpose(); }

 private:
  Matrix pi_;
};

Responsibilities responsibilities(const ModelParams& current, const Dataset& data);

/// Expected complete-data log-likelihood Q(Theta, Theta^c) for fixed pi.
double q_value(const ModelParams& params, const Responsibilities& pi, const Dataset& data);

/// dQ/dTheta, stacked per expert in the same order as ModelParams::flat().
Vector q_gradient(const ModelParams& params, const Responsibilities& pi, const Dataset& data);

/// Full K(d+1) x K(d+1) Hessian of Q. Negative semidefinite.
Matrix q_hessian(const ModelParams& params, const Responsibilities& pi, const Dataset& data);

struct LineSearchConfig {
  double armijo_c = 1e-4;
  double shrink_rho = 0.5;
  double initial_step = 1.0;
  int max_backtracks = 50;

  void validate() const;
};

class LineSearchError : public NumericalError {
 public:
  enum class Reason { NonAscent, Exhausted };

  LineSearchError(Reason reason, double best_step, const std::string& what)
      : NumericalError(what), reason_(reason), best_step_(best_step) {}

  Reason reason() const noexcept { return reason_; }
  /// Step with the highest objective among those tried (0 for NonAscent).
  double best_step() const noexcept { return best_step_; }

 private:
  Reason reason_;
  double best_step_;
};

using Objective = std::function<double(const Vector&)>;

/// Armijo backtracking for maximization. Returns the largest
/// initial_step * rho^m (m <= max_backtracks) with
///   f(theta + a d) >= f(theta) + c a grad^T d.
/// Throws LineSearchError when grad^T d <= 0 or no trial step is accepted.
double backtracking_search(const Objective& objective, const Vector& theta,
                           const Vector& direction, const Vector& grad,
                           const LineSearchConfig& cfg);

/// Same search when objective(theta) is already known; the objective value at
/// the accepted step is stored in `accepted_value` when given.
double backtracking_search(const Objective& objective, const Vector& theta,
                           const Vector& direction, const Vector& grad,
                           const LineSearchConfig& cfg, double f0,
                           double* accepted_value = nullptr);

/// Quasi-Newton state for maximizing an objective.
///
/// `b_inv` approximates the inverse Hessian of the negated objective, which is
/// positive definite for a concave objective; the ascent direction is
/// b_inv * grad.
struct BfgsState {
  Matrix b_inv;
  Vector prev_grad;
  Vector prev_theta;

  static BfgsState start(const Vector& theta, const Vector& grad);
};

/// Rank-two inverse update from the secant pair (theta change, gradient change).
/// Resets b_inv to the identity when the curvature term is degenerate.
BfgsState bfgs_update(BfgsState state, const Vector& new_theta, const Vector& new_grad);

/// Solves (H - lambda I) delta = -grad for an ascent step on a concave
/// objective, growing lambda tenfold (at most five times) if the factorization
/// fails.
Vector newton_direction(const Matrix& hessian, const Vector& grad);

enum class Optimizer { GradientAscent, Newton, Bfgs };

std::string_view to_string(Optimizer opt);
Optimizer parse_optimizer(std::string_view name);

struct MStepConfig {
  Optimizer optimizer = Optimizer::Bfgs;
  LineSearchConfig line_search;
  double grad_tol = 1e-6;
  int max_iters = 100;
};

struct MStepResult {
  ModelParams params;
  int iterations = 0;
  bool converged = false;  // gradient tolerance reached
};

/// Ascent on Q starting from `start`. Stops early (generalized EM) when the
/// iteration cap is hit or the line search cannot make progress.
MStepResult maximize_q(const ModelParams& start, const Responsibilities& pi,
                       const Dataset& data, const MStepConfig& cfg);

}  // namespace plume
