#include "plume/em.h"

#include "plume/data.h"
#include "test_support.h"

#include <doctest.h>

using namespace plume;

namespace {

Dataset wedge(std::uint64_t seed, Index n = 300, double margin = 0.05) {
  SynthSpec spec;
  spec.n_points = n;
  spec.margin = margin;
  spec.seed = seed;
  return synthesize(spec).data;
}

void check_monotone(const FitReport& r) {
  for (std::size_t c = 1; c < r.ll_trajectory.size(); ++c) {
    REQUIRE(r.ll_trajectory[c] >= r.ll_trajectory[c - 1] - 1e-8);
  }
}

}  // namespace

TEST_CASE("train config validation") {
  TrainConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.k_experts = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.gamma = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.epsilon = -1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.restarts = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("init and epsilon mode names round-trip") {
  CHECK(parse_init(to_string(Init::SmallRandom)) == Init::SmallRandom);
  CHECK(parse_init(to_string(Init::PerturbedLogistic)) == Init::PerturbedLogistic);
  CHECK(parse_epsilon_mode(to_string(EpsilonMode::Total)) == EpsilonMode::Total);
  CHECK(parse_epsilon_mode(to_string(EpsilonMode::PerExample)) == EpsilonMode::PerExample);
  CHECK_THROWS_AS(parse_init("zeros"), ConfigError);
}

TEST_CASE("small random initialization") {
  std::mt19937_64 rng(1);
  const Dataset data = testing::random_dataset(20, 4, rng);
  TrainConfig cfg;
  cfg.k_experts = 3;
  cfg.seed = 99;
  const ModelParams a = initialize(cfg, data);
  CHECK(a.weights().rows() == 3);
  CHECK(a.weights().cols() == 5);
  CHECK(a.weights().cwiseAbs().maxCoeff() < 0.1);
  CHECK(initialize(cfg, data) == a);
  cfg.seed = 100;
  CHECK_FALSE(initialize(cfg, data) == a);
}

TEST_CASE("perturbed logistic initialization on linearly separable data") {
  std::mt19937_64 rng(2);
  Matrix x = testing::gaussian(200, 3, rng);
  Eigen::VectorXi y(200);
  for (Index n = 0; n < 200; ++n) y[n] = x(n, 0) - 0.5 * x(n, 2) + 0.2 >= 0 ? 1 : -1;
  const Dataset data = standardize(Dataset(x, y));
  TrainConfig cfg;
  cfg.k_experts = 3;
  cfg.init = Init::PerturbedLogistic;
  const ModelParams p = initialize(cfg, data);
  CHECK(initialize(cfg, data) == p);
  for (Index k = 0; k < 3; ++k) {
    const ModelParams row(p.weights().row(k), p.gamma());
    CHECK(accuracy(predict(row, data.features()), data.labels()) >= 0.9);
  }
}

TEST_CASE("fit rejects single-class data") {
  const Dataset data(Matrix::Random(5, 2), Eigen::VectorXi::Ones(5));
  CHECK_THROWS_AS(fit(TrainConfig{}, data), DataError);
}

TEST_CASE("fit on a synthetic wedge with every optimizer") {
  const Dataset data = wedge(3);
  double lowest = 1.0, highest = 0.0;
  for (Optimizer opt : {Optimizer::GradientAscent, Optimizer::Newton, Optimizer::Bfgs}) {
    TrainConfig cfg;
    cfg.optimizer = opt;
    const FitReport r = fit(cfg, data);
    CAPTURE(to_string(opt));
    CHECK(r.train_accuracy >= 0.99);
    CHECK(r.ll_trajectory.size() == static_cast<std::size_t>(r.em_iterations) + 1);
    check_monotone(r);
    lowest = std::min(lowest, r.train_accuracy);
    highest = std::max(highest, r.train_accuracy);
  }
  CHECK(highest - lowest <= 0.02);
}

TEST_CASE("one expert on linearly separable data reaches full training accuracy") {
  std::mt19937_64 rng(4);
  Matrix x = testing::gaussian(100, 2, rng);
  Eigen::VectorXi y(100);
  for (Index n = 0; n < 100; ++n) y[n] = x(n, 0) + x(n, 1) >= 0 ? 1 : -1;
  TrainConfig cfg;
  cfg.k_experts = 1;
  cfg.optimizer = Optimizer::Newton;
  const FitReport r = fit(cfg, Dataset(x, y));
  CHECK(r.train_accuracy == 1.0);
  check_monotone(r);
}

TEST_CASE("property: EM log-likelihood never decreases") {
  const Optimizer optimizers[] = {Optimizer::GradientAscent, Optimizer::Newton, Optimizer::Bfgs};
  for (int run = 0; run < 15; ++run) {
    SynthSpec spec;
    spec.n_points = 120;
    spec.k_hyperplanes = 2 + run % 2;
    spec.dim = 2 + run % 3;
    spec.noise_flip = 0.05;
    spec.seed = 1000 + static_cast<std::uint64_t>(run);
    const Dataset data = standardize(synthesize(spec).data);
    TrainConfig cfg;
    cfg.k_experts = spec.k_hyperplanes;
    cfg.optimizer = optimizers[run % 3];
    cfg.seed = static_cast<std::uint64_t>(run);
    cfg.max_em_iters = 60;
    check_monotone(fit(cfg, data));
  }
}

TEST_CASE("fit is deterministic") {
  const Dataset data = wedge(5, 200);
  TrainConfig cfg;
  cfg.seed = 17;
  const FitReport a = fit(cfg, data);
  const FitReport b = fit(cfg, data);
  CHECK(a.final_params == b.final_params);
  CHECK(a.ll_trajectory == b.ll_trajectory);
  CHECK(a.em_iterations == b.em_iterations);
}

TEST_CASE("restarts keep the best final likelihood") {
  const Dataset data = standardize(wedge(6, 200, 0.0));
  TrainConfig cfg;
  cfg.max_em_iters = 20;
  cfg.seed = 40;
  double best = -std::numeric_limits<double>::infinity();
  for (int r = 0; r < 3; ++r) {
    TrainConfig single = cfg;
    single.seed = cfg.seed + static_cast<std::uint64_t>(r);
    best = std::max(best, fit(single, data).ll_trajectory.back());
  }
  cfg.restarts = 3;
  const FitReport multi = fit(cfg, data);
  CHECK(multi.ll_trajectory.back() == best);
}

TEST_CASE("epsilon modes differ by the sample size") {
  const Dataset data = wedge(7, 400);
  TrainConfig mean_cfg;
  mean_cfg.epsilon = 1e-4;
  TrainConfig total_cfg = mean_cfg;
  total_cfg.epsilon_mode = EpsilonMode::Total;
  total_cfg.epsilon = 1e-4 * 400;
  const FitReport a = fit(mean_cfg, data);
  const FitReport b = fit(total_cfg, data);
  CHECK(a.em_iterations == b.em_iterations);
  CHECK(a.final_params == b.final_params);
}

TEST_CASE("iteration cap leaves the fit unconverged") {
  TrainConfig cfg;
  cfg.max_em_iters = 2;
  cfg.epsilon = 1e-300;
  const FitReport r = fit(cfg, wedge(8));
  CHECK(r.em_iterations == 2);
  CHECK_FALSE(r.converged);
}

TEST_CASE("predict labels and accuracy") {
  Matrix w(1, 2);
  w << 1, 0;
  Matrix x(3, 1);
  x << -1, 0, 2;
  const Eigen::VectorXi labels = predict(ModelParams(w, 1.0), x);
  CHECK(labels[0] == -1);
  CHECK(labels[1] == 1);
  CHECK(labels[2] == 1);
  Eigen::VectorXi truth(3);
  truth << -1, -1, 1;
  CHECK(accuracy(labels, truth) == doctest::Approx(2.0 / 3.0));
  CHECK_THROWS_AS(accuracy(labels, Eigen::VectorXi::Ones(2)), DimensionError);

  CHECK((predict(ModelParams::zeros(2, 1, 1.0), x).array() == 1).all());
}

TEST_CASE("property: predict agrees with classify") {
  std::mt19937_64 rng(9);
  const ModelParams p(testing::gaussian(3, 4, rng), 1.0);
  const Matrix x = testing::gaussian(10000, 3, rng);
  const Eigen::VectorXi labels = predict(p, x);
  for (Index n = 0; n < x.rows(); ++n) {
    REQUIRE(labels[n] == classify(p, AugmentedPoint::from_features(x.row(n).transpose())));
  }
}
