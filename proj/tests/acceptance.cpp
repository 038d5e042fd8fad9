// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero when any selected criterion fails.
//
//   plume_acceptance [criterion ...] [--data-dir DIR] [--jobs N]

#include "plume/bounds.h"
#include "plume/crossval.h"
#include "plume/data.h"
#include "plume/em.h"
#include "plume/optim.h"
#include "test_support.h"

#include <CLI11.hpp>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <thread>

using namespace plume;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* pattern, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, pattern, args...);
  return buf;
}

ModelParams at(const Vector& theta, const testing::Instance& inst) {
  return ModelParams::from_flat(theta, inst.params.experts(), inst.params.dim(), inst.params.gamma());
}

// Shared by criteria 1 and 2.
std::vector<testing::Instance> oracle_instances() {
  std::mt19937_64 rng(2024);
  std::vector<testing::Instance> out;
  for (int i = 0; i < 100; ++i) out.push_back(testing::random_instance(rng));
  return out;
}

Outcome gradient_oracle() {
  const auto start = Clock::now();
  double worst = 0.0;
  const auto instances = oracle_instances();
  for (const auto& inst : instances) {
    const Vector analytic = q_gradient(inst.params, inst.pi, inst.data);
    const Vector numeric = testing::fd_gradient(
        [&](const Vector& t) { return q_value(at(t, inst), inst.pi, inst.data); }, inst.params.flat(), 1e-5);
    worst = std::max(worst, (analytic - numeric).norm() / std::max(numeric.norm(), 1e-8));
  }
  const double elapsed = seconds_since(start);
  return {worst < 1e-6 && elapsed < 30.0,
          fmt("%zu instances, max relative L2 error %.3g (< 1e-6), %.2f s (< 30 s)", instances.size(), worst,
              elapsed)};
}

Outcome hessian_oracle() {
  double worst = 0.0, top_eig = -std::numeric_limits<double>::infinity();
  const auto instances = oracle_instances();
  for (const auto& inst : instances) {
    const Matrix analytic = q_hessian(inst.params, inst.pi, inst.data);
    const Matrix numeric = testing::fd_jacobian(
        [&](const Vector& t) { return q_gradient(at(t, inst), inst.pi, inst.data); }, inst.params.flat(), 1e-5);
    worst = std::max(worst, (analytic - numeric).cwiseAbs().maxCoeff());
    const Eigen::SelfAdjointEigenSolver<Matrix> eig(analytic, Eigen::EigenvaluesOnly);
    top_eig = std::max(top_eig, eig.eigenvalues().maxCoeff());
  }
  return {worst < 1e-4 && top_eig <= 1e-8,
          fmt("%zu instances, max-abs error %.3g (< 1e-4), largest eigenvalue %.3g (<= 1e-8)", instances.size(),
              worst, top_eig)};
}

Outcome em_monotonicity() {
  const Optimizer optimizers[] = {Optimizer::GradientAscent, Optimizer::Newton, Optimizer::Bfgs};
  double worst_drop = 0.0;
  int fits = 0;
  for (int run = 0; run < 50; ++run) {
    SynthSpec spec;
    spec.n_points = 150;
    spec.k_hyperplanes = 2 + run % 2;
    spec.dim = 2 + run % 3;
    spec.noise_flip = 0.05;
    spec.seed = 500 + static_cast<std::uint64_t>(run);
    const Dataset data = standardize(synthesize(spec).data);
    TrainConfig cfg;
    cfg.k_experts = spec.k_hyperplanes;
    cfg.optimizer = optimizers[run % 3];
    cfg.seed = static_cast<std::uint64_t>(run);
    cfg.max_em_iters = 100;
    const FitReport r = fit(cfg, data);
    for (std::size_t c = 1; c < r.ll_trajectory.size(); ++c) {
      worst_drop = std::max(worst_drop, r.ll_trajectory[c - 1] - r.ll_trajectory[c]);
    }
    ++fits;
  }
  return {worst_drop <= 1e-8, fmt("%d fits, largest per-iteration decrease %.3g (<= 1e-8)", fits, worst_drop)};
}

Outcome normalization() {
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<Index> kd(1, 4);
  double gate_err = 0.0, resp_err = 0.0, post_err = 0.0;
  for (int trial = 0; trial < 10000; ++trial) {
    const Index k = kd(rng), d = kd(rng);
    const ModelParams p(testing::gaussian(k, d + 1, rng, 3.0), std::exp(testing::gaussian(1, 1, rng)(0, 0)));
    const AugmentedPoint x = AugmentedPoint::from_features(testing::gaussian(d, 1, rng, 2.0).col(0));
    gate_err = std::max(gate_err, std::abs(gating(p, x).sum() - 1.0));
    post_err = std::max(post_err, std::abs(posterior(p, x, 1) + posterior(p, x, -1) - 1.0));
    Matrix row = x.values().transpose().leftCols(d);
    Eigen::VectorXi y(1);
    y << (std::bernoulli_distribution(0.5)(rng) ? 1 : -1);
    const Responsibilities pi = responsibilities(p, Dataset(row, y));
    resp_err = std::max(resp_err, std::abs(pi.matrix().row(0).sum() - 1.0));
  }
  return {gate_err <= 1e-10 && resp_err <= 1e-10 && post_err <= 1e-12,
          fmt("1e4 evaluations: gating %.2g, responsibilities %.2g (<= 1e-10), posterior pair %.2g (<= 1e-12)",
              gate_err, resp_err, post_err)};
}

Outcome hard_gating() {
  std::mt19937_64 rng(99);
  double worst = 0.0;
  int checked = 0;
  for (int trial = 0; trial < 5000; ++trial) {
    const Matrix w = testing::gaussian(3, 4, rng);
    const AugmentedPoint x = AugmentedPoint::from_features(testing::gaussian(3, 1, rng).col(0));
    const Vector logits = w * x.values();
    const double scale = logits.cwiseAbs().maxCoeff() + 1.0;
    Vector sorted = logits;
    std::sort(sorted.data(), sorted.data() + sorted.size());
    if (sorted[1] - sorted[0] < 1e-3 * scale) continue;  // argmin not unique at this resolution
    const ModelParams p(w, 1e4 / scale);
    for (int y : {-1, 1}) worst = std::max(worst, std::abs(posterior(p, x, y) - sigmoid(y * sorted[0])));
    ++checked;
  }
  return {worst < 1e-3 && checked > 0, fmt("%d points, max deviation %.3g (< 1e-3)", checked, worst)};
}

Outcome generator_oracle() {
  double worst = 1.0;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    SynthSpec spec;
    spec.k_hyperplanes = 1 + static_cast<Index>(seed % 4);
    spec.dim = 1 + static_cast<Index>(seed % 5);
    spec.n_points = 500;
    spec.seed = seed;
    const SynthResult r = synthesize(spec);
    worst = std::min(worst, accuracy(predict(r.true_params, r.data.features()), r.data.labels()));
  }
  return {worst == 1.0, fmt("40 noiseless datasets, lowest accuracy under true_params %.6f (== 1)", worst)};
}

Outcome bfgs_recovery() {
  std::mt19937_64 rng(7);
  double worst = 0.0;
  int cases = 0;
  for (Index k = 1; k <= 3; ++k) {
    for (Index d = 1; d <= 4; ++d) {
      const Index n = k * (d + 1);
      const Matrix m = testing::gaussian(n, n, rng);
      const Matrix a = m * m.transpose() + Matrix::Identity(n, n);  // objective b.t - t'At/2
      const Vector b = testing::gaussian(n, 1, rng).col(0);
      const auto grad = [&](const Vector& t) { return Vector(b - a * t); };
      Vector theta = testing::gaussian(n, 1, rng).col(0);
      BfgsState s = BfgsState::start(theta, grad(theta));
      for (Index it = 0; it < n; ++it) {
        const Vector g = grad(theta);
        const Vector dir = s.b_inv * g;
        theta += (g.dot(dir) / dir.dot(a * dir)) * dir;  // exact maximizer along dir
        s = bfgs_update(std::move(s), theta, grad(theta));
      }
      worst = std::max(worst, (s.b_inv - a.inverse()).cwiseAbs().maxCoeff());
      ++cases;
    }
  }
  return {worst < 1e-6, fmt("%d quadratics of size K(d+1), max-abs error %.3g (< 1e-6)", cases, worst)};
}

Outcome bound_formulas() {
  const auto inputs = [](std::vector<double> w, double r, double g, Index n) {
    BoundInputs in;
    in.w_max_per_expert = std::move(w);
    in.radius = r;
    in.gamma = g;
    in.n_samples = n;
    return in;
  };
  const double rad = rademacher_bound(inputs({1.0}, 1.0, 1.0, 100));
  const BoundReport zero = risk_bound(inputs({0.0}, 1.0, 1.0, 100));
  bool halves = true;
  for (Index n : {1, 10, 100, 999, 123456}) {
    const double a = rademacher_bound(inputs({0.7, 1.9}, 3.0, 1.0, n));
    const double b = rademacher_bound(inputs({0.7, 1.9}, 3.0, 1.0, 4 * n));
    halves = halves && a == 2.0 * b;
  }
  const bool pass = std::abs(rad - 0.1) <= 1e-15 && zero.c1 == 2.0 && zero.c2 == 6.0 && halves;
  return {pass, fmt("rademacher %.17g (0.1), c1 %g (2), c2 %g (6), exact halving %s", rad, zero.c1, zero.c2,
                    halves ? "yes" : "no")};
}

struct BenchmarkRow {
  std::string file;
  CsvSchema schema;
  Index k = 2;
  Optimizer optimizer = Optimizer::GradientAscent;
  double target = 0.0;
};

Outcome benchmark_row(const std::filesystem::path& data_dir, const BenchmarkRow& row, int jobs) {
  const auto path = data_dir / row.file;
  if (!std::filesystem::exists(path)) return {false, "dataset missing: " + path.string()};
  const LoadResult loaded = load_csv(path, row.schema);
  CvOptions opt;
  opt.train.k_experts = row.k;
  opt.train.optimizer = row.optimizer;
  opt.plan = {10, 10, 0, false};
  opt.jobs = jobs;
  const auto start = Clock::now();
  const CvReport report = cross_validate(loaded.data, opt);
  const CvCell& cell = report.best_cell();
  const double mean = 100.0 * cell.mean_accuracy;
  return {std::abs(mean - row.target) <= 3.0,
          fmt("N=%ld K=%ld %s 10x10: %.2f +/- %.2f %% (target %.2f +/- 3.0), mean fit %.3f s, total %.0f s",
              static_cast<long>(loaded.data.size()), static_cast<long>(row.k),
              std::string(to_string(row.optimizer)).c_str(), mean, 100.0 * cell.std_accuracy, row.target,
              cell.mean_train_time, seconds_since(start))};
}

Outcome synthetic_wedge() {
  SynthSpec spec;
  spec.n_points = 1000;
  spec.margin = 0.05;
  spec.seed = 1;
  const Dataset data = standardize(synthesize(spec).data);
  bool pass = true;
  std::string detail;
  for (Optimizer opt : {Optimizer::GradientAscent, Optimizer::Newton, Optimizer::Bfgs}) {
    TrainConfig cfg;
    cfg.optimizer = opt;
    const FitReport r = fit(cfg, data);
    pass = pass && r.train_accuracy >= 0.99 && r.wall_time < 10.0;
    detail += fmt("%s acc %.4f in %.2f s (%d EM iters); ", std::string(to_string(opt)).c_str(), r.train_accuracy,
                  r.wall_time, r.em_iterations);
  }
  return {pass, detail + "need acc >= 0.99 and < 10 s each"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"plume acceptance checks"};
  std::vector<int> selected;
  std::string data_dir = PLUME_DATA_DIR;
  int jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  app.add_option("criteria", selected, "Criterion numbers to run (default: all)")->check(CLI::Range(1, 13));
  app.add_option("--data-dir", data_dir, "Directory with the bundled CSV files");
  app.add_option("--jobs", jobs, "Cross-validation threads")->check(CLI::PositiveNumber);
  CLI11_PARSE(app, argc, argv);

  const std::filesystem::path dir(data_dir);
  CsvSchema pima;
  pima.expect_counts = std::pair<Index, Index>{268, 500};
  CsvSchema ilpd;
  ilpd.label_mapping = {{"1", 1}, {"2", -1}};
  ilpd.categorical_columns = {1};

  const std::map<int, std::pair<std::string, std::function<Outcome()>>> criteria = {
      {1, {"gradient oracle", gradient_oracle}},
      {2, {"hessian oracle", hessian_oracle}},
      {3, {"EM monotonicity", em_monotonicity}},
      {4, {"normalization", normalization}},
      {5, {"hard-gating limit", hard_gating}},
      {6, {"generator oracle", generator_oracle}},
      {7, {"BFGS quadratic recovery", bfgs_recovery}},
      {8, {"bound formulas", bound_formulas}},
      {9, {"Heart", [&] { return benchmark_row(dir, {"heart.csv", {}, 2, Optimizer::Newton, 84.07}, jobs); }}},
      {10, {"Pima Indian", [&] { return benchmark_row(dir, {"pima.csv", pima, 2, Optimizer::GradientAscent, 77.95}, jobs); }}},
      {11, {"ILPD", [&] { return benchmark_row(dir, {"ilpd.csv", ilpd, 2, Optimizer::GradientAscent, 72.45}, jobs); }}},
      {12, {"Ionosphere",
            [&] { return benchmark_row(dir, {"ionosphere.csv", {}, 3, Optimizer::GradientAscent, 89.86}, jobs); }}},
      {13, {"synthetic wedge", synthetic_wedge}},
  };

  if (selected.empty()) {
    for (const auto& [id, entry] : criteria) selected.push_back(id);
  }
  std::sort(selected.begin(), selected.end());
  selected.erase(std::unique(selected.begin(), selected.end()), selected.end());

  int failures = 0;
  for (int id : selected) {
    const auto& [name, check] = criteria.at(id);
    Outcome outcome;
    try {
      outcome = check();
    } catch (const std::exception& e) {
      outcome = {false, std::string("error: ") + e.what()};
    }
    failures += !outcome.pass;
    std::cout << (outcome.pass ? "PASS" : "FAIL") << " criterion " << id << " (" << name << "): " << outcome.detail
              << std::endl;
  }
  if (std::find(selected.begin(), selected.end(), 12) != selected.end()) {
    std::cout << "INFO Adult: not run, no assertion (the 3042-row subset is not characterized)" << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
