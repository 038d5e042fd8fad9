#include "plume/optim.h"

#include <Eigen/Cholesky>

#include <algorithm>
#include <limits>
#include <string>

namespace plume {

namespace {

void check_shapes(const ModelParams& params, const Responsibilities& pi, const Dataset& data) {
  if (data.dim() != params.dim()) {
    throw DimensionError("data has " + std::to_string(data.dim()) + " features, model expects " +
                         std::to_string(params.dim()));
  }
  if (pi.examples() != data.size() || pi.experts() != params.experts()) {
    throw DimensionError("responsibilities are " + std::to_string(pi.examples()) + "x" +
                         std::to_string(pi.experts()) + ", expected " +
                         std::to_string(data.size()) + "x" + std::to_string(params.experts()));
  }
}

// Per-example quantities shared by Q, its gradient and its Hessian.
struct ExpertTerms {
  Matrix logits;    // a_nk = w~_k^T x~_n
  Matrix log_gate;  // ln g_k(x_n)
  Matrix gate;      // g_k(x_n)
};

ExpertTerms expert_terms(const ModelParams& params, const Dataset& data) {
  ExpertTerms t;
  t.logits = expert_logits(params, data.augmented());
  const Matrix z = -params.gamma() * t.logits;
  t.log_gate = z.colwise() - row_log_sum_exp(z);
  t.gate = t.log_gate.array().exp();
  return t;
}

// Q for a K x (d+1) weight matrix without constructing or validating a
// ModelParams; the line search calls this many times per ascent step.
template <typename Weights>
double q_value_weights(const Weights& w, double gamma, const Matrix& p, const Dataset& data) {
  const Matrix logits = data.augmented() * w.transpose();
  const auto& y = data.labels();
  const Index experts = logits.cols();
  double q = 0.0;
  for (Index n = 0; n < logits.rows(); ++n) {
    double mx = -gamma * logits(n, 0);
    for (Index k = 1; k < experts; ++k) mx = std::max(mx, -gamma * logits(n, k));
    double s = 0.0;
    for (Index k = 0; k < experts; ++k) s += std::exp(-gamma * logits(n, k) - mx);
    const double lse = mx + std::log(s);
    for (Index k = 0; k < experts; ++k) {
      q += p(n, k) * (-gamma * logits(n, k) - lse + log_sigmoid(y[n] * logits(n, k)));
    }
  }
  return q;
}

}  // namespace

Responsibilities::Responsibilities(Matrix pi) : pi_(std::move(pi)) {
  if (pi_.rows() < 1 || pi_.cols() < 1) throw DimensionError("responsibilities are empty");
  if (!pi_.allFinite()) throw NumericalError("responsibilities contain NaN or Inf");
  if (pi_.minCoeff() < 0.0 || pi_.maxCoeff() > 1.0) {
    throw NumericalError("responsibilities must lie in [0, 1]");
  }
  const Vector rows = pi_.rowwise().sum();
  if (((rows.array() - 1.0).abs() > 1e-10).any()) {
    throw NumericalError("responsibility rows must sum to 1");
  }
}

Responsibilities responsibilities(const ModelParams& current, const Dataset& data) {
  const Matrix a = expert_logits(current, data.augmented());
  const auto& y = data.labels();
  Matrix log_r = -current.gamma() * a;
  for (Index n = 0; n < a.rows(); ++n) {
    for (Index k = 0; k < a.cols(); ++k) log_r(n, k) += log_sigmoid(y[n] * a(n, k));
  }
  return Responsibilities(row_softmax(log_r));
}

double q_value(const ModelParams& params, const Responsibilities& pi, const Dataset& data) {
  check_shapes(params, pi, data);
  return q_value_weights(params.weights(), params.gamma(), pi.matrix(), data);
}

Vector q_gradient(const ModelParams& params, const Responsibilities& pi, const Dataset& data) {
  check_shapes(params, pi, data);
  const ExpertTerms t = expert_terms(params, data);
  const auto& y = data.labels();
  const Matrix& p = pi.matrix();
  const double gamma = params.gamma();

  // dQ/dw~_k = -sum_n [ gamma (pi_nk - g_nk) - y_n pi_nk (1 - sigma(y_n a_nk)) ] x~_n.
  // The gating part uses sum_k pi_nk = 1; this matches the printed form and
  // the finite-difference check in the tests.
  const Eigen::ArrayXd yd = y.cast<double>().array();
  const Eigen::ArrayXXd v = t.logits.array().colwise() * yd;
  // sigma(-v) = 1 / (1 + e^v); overflow of e^v gives the correct limit 0.
  const Eigen::ArrayXXd sig_neg = (1.0 + v.exp()).inverse();
  const Matrix coeff = (-gamma * (p.array() - t.gate.array()) + (p.array() * sig_neg).colwise() * yd).matrix();
  RowMatrix blocks = coeff.transpose() * data.augmented();  // K x (d+1)
  return Eigen::Map<const Vector>(blocks.data(), blocks.size());
}

Matrix q_hessian(const ModelParams& params, const Responsibilities& pi, const Dataset& data) {
  check_shapes(params, pi, data);
  const ExpertTerms t = expert_terms(params, data);
  const Matrix& p = pi.matrix();
  const Matrix& x = data.augmented();
  const Index experts = params.experts();
  const Index width = x.cols();
  const double g2 = params.gamma() * params.gamma();

  Matrix h = Matrix::Zero(experts * width, experts * width);
  Vector c(x.rows());
  for (Index k = 0; k < experts; ++k) {
    for (Index r = k; r < experts; ++r) {
      if (k == r) {
        for (Index n = 0; n < x.rows(); ++n) {
          // sigma(a)(1 - sigma(a)) is symmetric in a, so the label drops out.
          const double s = sigmoid(t.logits(n, k));
          c[n] = -g2 * t.gate(n, k) * (1.0 - t.gate(n, k)) - p(n, k) * s * (1.0 - s);
        }
      } else {
        c = g2 * t.gate.col(k).cwiseProduct(t.gate.col(r));
      }
      Matrix block = x.transpose() * c.asDiagonal() * x;
      if (k == r) block = (0.5 * (block + block.transpose())).eval();
      h.block(k * width, r * width, width, width) = block;
      if (k != r) h.block(r * width, k * width, width, width) = block.transpose();
    }
  }
  return h;
}

void LineSearchConfig::validate() const {
  if (!(armijo_c > 0.0 && armijo_c < 1.0)) throw ConfigError("armijo_c must be in (0, 1)");
  if (!(shrink_rho > 0.0 && shrink_rho < 1.0)) throw ConfigError("shrink_rho must be in (0, 1)");
  if (!(initial_step > 0.0) || !std::isfinite(initial_step)) {
    throw ConfigError("initial_step must be positive");
  }
  if (max_backtracks < 0) throw ConfigError("max_backtracks must be nonnegative");
}

double backtracking_search(const Objective& objective, const Vector& theta,
                           const Vector& direction, const Vector& grad,
                           const LineSearchConfig& cfg) {
  if (theta.size() != direction.size() || theta.size() != grad.size()) {
    throw DimensionError("line search vectors differ in length");
  }
  return backtracking_search(objective, theta, direction, grad, cfg, objective(theta));
}

double backtracking_search(const Objective& objective, const Vector& theta,
                           const Vector& direction, const Vector& grad,
                           const LineSearchConfig& cfg, double f0,
                           double* accepted_value) {
  cfg.validate();
  if (theta.size() != direction.size() || theta.size() != grad.size()) {
    throw DimensionError("line search vectors differ in length");
  }
  const double slope = grad.dot(direction);
  if (!(slope > 0.0)) {
    throw LineSearchError(LineSearchError::Reason::NonAscent, 0.0,
                          "search direction is not an ascent direction");
  }
  double alpha = cfg.initial_step;
  double best_alpha = alpha;
  double best_value = -std::numeric_limits<double>::infinity();
  for (int m = 0; m <= cfg.max_backtracks; ++m) {
    const double value = objective(theta + alpha * direction);
    if (value >= f0 + cfg.armijo_c * alpha * slope) {
      if (accepted_value) *accepted_value = value;
      return alpha;
    }
    if (value > best_value) {
      best_value = value;
      best_alpha = alpha;
    }
    alpha *= cfg.shrink_rho;
  }
  throw LineSearchError(LineSearchError::Reason::Exhausted, best_alpha,
                        "Armijo condition not met after " +
                            std::to_string(cfg.max_backtracks) + " backtracks");
}

BfgsState BfgsState::start(const Vector& theta, const Vector& grad) {
  if (theta.size() != grad.size()) throw DimensionError("theta and gradient differ in length");
  return {Matrix::Identity(theta.size(), theta.size()), grad, theta};
}

BfgsState bfgs_update(BfgsState state, const Vector& new_theta, const Vector& new_grad) {
  const Index n = state.b_inv.rows();
  if (state.b_inv.cols() != n || state.prev_grad.size() != n || state.prev_theta.size() != n ||
      new_theta.size() != n || new_grad.size() != n) {
    throw DimensionError("BFGS state and update vectors differ in size");
  }
  const Vector s = new_theta - state.prev_theta;
  // Gradient change of the minimized objective -Q.
  const Vector y = state.prev_grad - new_grad;
  const double sy = s.dot(y);
  state.prev_theta = new_theta;
  state.prev_grad = new_grad;

  // A non-positive curvature term would destroy positive definiteness; for a
  // concave Q it only happens through rounding.
  if (!(sy > 1e-12 * s.norm() * y.norm())) {
    state.b_inv.setIdentity();
    return state;
  }
  const Vector by = state.b_inv * y;
  const double ybY = y.dot(by);
  Matrix& b = state.b_inv;
  b += ((1.0 + ybY / sy) / sy) * (s * s.transpose());
  b -= (by * s.transpose() + s * by.transpose()) / sy;
  b = 0.5 * (b + b.transpose()).eval();
  return state;
}

Vector newton_direction(const Matrix& hessian, const Vector& grad) {
  if (hessian.rows() != hessian.cols() || hessian.rows() != grad.size()) {
    throw DimensionError("Hessian and gradient sizes disagree");
  }
  const double norm_inf = hessian.cwiseAbs().rowwise().sum().maxCoeff();
  double lambda = 1e-8 * (1.0 + norm_inf);
  const Matrix id = Matrix::Identity(grad.size(), grad.size());
  for (int attempt = 0; attempt <= 5; ++attempt) {
    // (lambda I - H) is positive definite when H is negative semidefinite.
    Eigen::LLT<Matrix> llt(lambda * id - hessian);
    if (llt.info() == Eigen::Success) {
      Vector delta = llt.solve(grad);
      if (delta.allFinite()) return delta;
    }
    lambda *= 10.0;
  }
  throw NumericalError("Newton system could not be factorized");
}

std::string_view to_string(Optimizer opt) {
  switch (opt) {
    case Optimizer::GradientAscent: return "ga";
    case Optimizer::Newton: return "newton";
    case Optimizer::Bfgs: return "bfgs";
  }
  return "unknown";
}

Optimizer parse_optimizer(std::string_view name) {
  if (name == "ga" || name == "gradient" || name == "gradient-ascent") return Optimizer::GradientAscent;
  if (name == "newton") return Optimizer::Newton;
  if (name == "bfgs") return Optimizer::Bfgs;
  throw ConfigError("unknown optimizer '" + std::string(name) + "' (expected ga, newton or bfgs)");
}

MStepResult maximize_q(const ModelParams& start, const Responsibilities& pi,
                       const Dataset& data, const MStepConfig& cfg) {
  const Index experts = start.experts();
  const Index dim = start.dim();
  const double gamma = start.gamma();
  const auto unflatten = [&](const Vector& t) { return ModelParams::from_flat(t, experts, dim, gamma); };
  check_shapes(start, pi, data);
  const Objective objective = [&](const Vector& t) {
    if (!t.allFinite()) return -std::numeric_limits<double>::infinity();
    const Eigen::Map<const RowMatrix> w(t.data(), experts, dim + 1);
    return q_value_weights(w, gamma, pi.matrix(), data);
  };

  Vector theta = start.flat();
  Vector grad = q_gradient(start, pi, data);
  double value = objective(theta);
  BfgsState bfgs = BfgsState::start(theta, grad);

  MStepResult result{start, 0, false};
  for (int it = 0; it < cfg.max_iters; ++it) {
    if (grad.lpNorm<Eigen::Infinity>() < cfg.grad_tol) {
      result.converged = true;
      break;
    }
    Vector direction;
    switch (cfg.optimizer) {
      case Optimizer::GradientAscent:
        direction = grad;
        break;
      case Optimizer::Newton:
        try {
          direction = newton_direction(q_hessian(unflatten(theta), pi, data), grad);
        } catch (const NumericalError&) {
          direction = grad;
        }
        break;
      case Optimizer::Bfgs:
        direction = bfgs.b_inv * grad;
        break;
    }
    if (!(grad.dot(direction) > 0.0)) {
      if (cfg.optimizer == Optimizer::Bfgs) bfgs.b_inv.setIdentity();
      direction = grad;
    }

    double step = 0.0;
    try {
      step = backtracking_search(objective, theta, direction, grad, cfg.line_search, value, &value);
    } catch (const LineSearchError&) {
      break;
    }
    const Vector next = theta + step * direction;
    const Vector next_grad = q_gradient(unflatten(next), pi, data);
    if (cfg.optimizer == Optimizer::Bfgs) bfgs = bfgs_update(std::move(bfgs), next, next_grad);
    theta = next;
    grad = next_grad;
    result.iterations = it + 1;
  }
  if (!result.converged && grad.lpNorm<Eigen::Infinity>() < cfg.grad_tol) result.converged = true;
  result.params = unflatten(theta);
  return result;
}

}  // namespace plume
