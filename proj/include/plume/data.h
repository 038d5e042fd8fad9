#pragma once

#include "plume/model.h"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace plume {

struct CsvSchema {
  /// Zero-based label column; negative values count from the end (-1 = last).
  int label_column = -1;
  /// Raw label string -> {-1, +1}. Empty means numeric {0,1} or {-1,+1}.
  std::map<std::string, int> label_mapping;
  /// nullopt: treat the first row as a header if any feature cell is non-numeric.
  std::optional<bool> has_header;
  /// Zero-based source columns to one-hot encode.
  std::vector<int> categorical_columns;
  /// Rows that must be present per class, checked when set.
  std::optional<std::pair<Index, Index>> expect_counts;  // (positives, negatives)
};

struct LoadSummary {
  Index rows = 0;
  Index dropped_rows = 0;  // rows with empty or "?" cells
  Index positives = 0;
  Index negatives = 0;
  std::vector<std::string> feature_names;
};

struct LoadResult {
  Dataset data;
  LoadSummary summary;
};

/// Reads a labelled numeric CSV. Throws DataError naming the offending cell
/// for non-numeric values, unknown labels, ragged rows or a single-class file.
LoadResult load_csv(const std::filesystem::path& path, const CsvSchema& schema = {});

/// Feature-only CSV (no label column), as used for prediction.
Matrix load_features_csv(const std::filesystem::path& path, std::optional<bool> has_header = std::nullopt);

/// Writes features then the label (-1/1) using shortest round-trip decimals.
void save_csv(const Dataset& data, const std::filesystem::path& path,
              const std::vector<std::string>& feature_names = {});

/// Parses "pos=1,neg=-1" into a label mapping.
std::map<std::string, int> parse_label_mapping(const std::string& spec);

/// Zero-mean, unit-variance columns. Columns with variance below 1e-12 are
/// only centred. The recorded scale maps raw features to the result, composing
/// with any scale already present.
Dataset standardize(const Dataset& data);

/// (x - shift) / scale per column.
Matrix apply_scale(const Matrix& raw, const FeatureScale& scale);
/// Applies a stored scale to raw data and records it.
Dataset apply_scale(const Dataset& raw, const FeatureScale& scale);

struct CvPlan {
  int n_folds = 10;
  int n_repeats = 10;
  std::uint64_t seed = 0;
  bool stratified = false;

  void validate() const;
};

struct Fold {
  int repeat = 0;
  int fold = 0;
  std::vector<Index> train;
  std::vector<Index> test;
};

/// Folds for every repeat, in (repeat, fold) order. Each repeat shuffles with a
/// seeded generator and splits into contiguous folds; stratified plans deal
/// each class round-robin so per-fold class counts differ by at most one.
std::vector<Fold> kfold(const CvPlan& plan, const Dataset& data);

struct SynthSpec {
  Index k_hyperplanes = 2;
  Index dim = 2;
  Index n_points = 1000;
  double margin = 0.0;
  double noise_flip = 0.0;
  std::uint64_t seed = 0;
  /// Distance from the region's centre to every hyperplane.
  double offset = 1.0;

  void validate() const;
};

struct SynthResult {
  Dataset data;
  ModelParams true_params;
  Index flipped = 0;
};

/// Points uniform in [-2, 2]^d labelled by the min-rule of K unit-norm
/// hyperplanes that all keep a shifted centre at distance `offset` on their
/// positive side.
SynthResult synthesize(const SynthSpec& spec);

/// 64-bit FNV-1a over features and labels; identifies the training data in model files.
std::string dataset_fingerprint(const Dataset& data);

}  // namespace plume
