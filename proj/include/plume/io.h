#pragma once

#include "plume/bounds.h"
#include "plume/crossval.h"
#include "plume/data.h"
#include "plume/em.h"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>

namespace plume {

inline constexpr int kModelFormatVersion = 1;

struct TrainingMetadata {
  std::uint64_t seed = 0;
  std::string optimizer;
  std::string init;
  std::string dataset_fingerprint;
};

/// On-disk model: versioned JSON with shortest round-trip decimals, so
/// load(save(m)) reproduces the weights bit for bit.
struct ModelFile {
  int format_version = kModelFormatVersion;
  ModelParams params;
  std::optional<FeatureScale> feature_scale;
  TrainingMetadata metadata;
};

nlohmann::json to_json(const ModelFile& model);
ModelFile model_from_json(const nlohmann::json& j);

void save_model(const ModelFile& model, const std::filesystem::path& path);
ModelFile load_model(const std::filesystem::path& path);

nlohmann::json to_json(const TrainConfig& cfg);
nlohmann::json to_json(const FitReport& report);
nlohmann::json to_json(const BoundReport& report);
nlohmann::json to_json(const SynthSpec& spec);
nlohmann::json to_json(const CvCell& cell);
nlohmann::json to_json(const CvReport& report);

/// Writes `j` (indented) to `path`, or to standard output when path is empty or "-".
void write_json(const nlohmann::json& j, const std::string& path);

}  // namespace plume
