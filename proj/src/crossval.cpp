#include "plume/crossval.h"

#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

namespace plume {

namespace {

FoldResult run_fold(const Dataset& data, const Fold& fold, const TrainConfig& cfg, bool scale) {
  Dataset train = data.subset(fold.train);
  Dataset test = data.subset(fold.test);
  if (scale) {
    train = standardize(train);
    test = apply_scale(test, *train.feature_scale());
  }
  const FitReport rep = fit(cfg, train);
  FoldResult out;
  out.repeat = fold.repeat;
  out.fold = fold.fold;
  out.accuracy = accuracy(predict(rep.final_params, test.features()), test.labels());
  out.train_time = rep.wall_time;
  out.em_iterations = rep.em_iterations;
  out.converged = rep.converged;
  return out;
}

}  // namespace

void summarize(CvCell& cell, int n_repeats) {
  cell.repeat_means.assign(static_cast<std::size_t>(n_repeats), 0.0);
  std::vector<int> counts(static_cast<std::size_t>(n_repeats), 0);
  double time = 0.0;
  for (const auto& f : cell.folds) {
    cell.repeat_means.at(static_cast<std::size_t>(f.repeat)) += f.accuracy;
    ++counts[static_cast<std::size_t>(f.repeat)];
    time += f.train_time;
  }
  double sum = 0.0;
  for (std::size_t r = 0; r < cell.repeat_means.size(); ++r) {
    if (counts[r] > 0) cell.repeat_means[r] /= counts[r];
    sum += cell.repeat_means[r];
  }
  cell.mean_accuracy = sum / n_repeats;
  double ss = 0.0;
  for (double m : cell.repeat_means) ss += (m - cell.mean_accuracy) * (m - cell.mean_accuracy);
  cell.std_accuracy = std::sqrt(ss / n_repeats);
  cell.mean_train_time = cell.folds.empty() ? 0.0 : time / static_cast<double>(cell.folds.size());
}

CvReport cross_validate(const Dataset& data, const CvOptions& options) {
  options.train.validate();
  options.plan.validate();
  if (options.jobs < 1) throw ConfigError("jobs must be at least 1");

  CvReport report{options, {}, 0};
  const std::vector<Index> ks = options.k_grid.empty() ? std::vector<Index>{options.train.k_experts} : options.k_grid;
  const std::vector<double> gammas =
      options.gamma_grid.empty() ? std::vector<double>{options.train.gamma} : options.gamma_grid;
  for (Index k : ks) {
    for (double g : gammas) {
      CvCell cell;
      cell.k_experts = k;
      cell.gamma = g;
      report.cells.push_back(std::move(cell));
    }
  }

  const std::vector<Fold> folds = kfold(options.plan, data);
  const std::size_t total = report.cells.size() * folds.size();
  for (auto& cell : report.cells) cell.folds.resize(folds.size());

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const auto worker = [&] {
    while (true) {
      const std::size_t task = next.fetch_add(1);
      if (task >= total) return;
      CvCell& cell = report.cells[task / folds.size()];
      const Fold& fold = folds[task % folds.size()];
      TrainConfig cfg = options.train;
      cfg.k_experts = cell.k_experts;
      cfg.gamma = cell.gamma;
      try {
        cell.folds[task % folds.size()] = run_fold(data, fold, cfg, options.standardize);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(total);
      }
    }
  };
  const auto n_threads = static_cast<std::size_t>(options.jobs) < total ? static_cast<std::size_t>(options.jobs) : total;
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  for (std::size_t c = 0; c < report.cells.size(); ++c) {
    summarize(report.cells[c], options.plan.n_repeats);
    if (report.cells[c].mean_accuracy > report.cells[report.best].mean_accuracy) report.best = c;
  }
  return report;
}

}  // namespace plume
