#pragma once

#include "plume/data.h"
#include "plume/em.h"

#include <vector>

namespace plume {

struct FoldResult {
  int repeat = 0;
  int fold = 0;
  double accuracy = 0.0;
  double train_time = 0.0;
  int em_iterations = 0;
  bool converged = false;
};

/// Results for one (K, gamma) grid point.
struct CvCell {
  Index k_experts = 0;
  double gamma = 0.0;
  std::vector<FoldResult> folds;
  std::vector<double> repeat_means;
  double mean_accuracy = 0.0;
  /// Population standard deviation of the per-repeat mean accuracies.
  double std_accuracy = 0.0;
  double mean_train_time = 0.0;
};

struct CvOptions {
  TrainConfig train;
  CvPlan plan;
  bool standardize = true;
  /// Empty grids fall back to train.k_experts / train.gamma.
  std::vector<Index> k_grid;
  std::vector<double> gamma_grid;
  int jobs = 1;
};

struct CvReport {
  CvOptions options;
  std::vector<CvCell> cells;
  std::size_t best = 0;  // cell with the highest mean accuracy

  const CvCell& best_cell() const { return cells.at(best); }
};

/// Fills repeat_means, mean_accuracy, std_accuracy and mean_train_time from folds.
void summarize(CvCell& cell, int n_repeats);

/// Repeated k-fold evaluation over the grid. Standardization is fitted on
/// each training split and applied to its test split. Folds and grid cells run
/// on up to `jobs` threads; results do not depend on the thread count.
CvReport cross_validate(const Dataset& data, const CvOptions& options);

}  // namespace plume
