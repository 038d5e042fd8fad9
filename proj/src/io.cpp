#include "plume/io.h"

#include <fstream>
#include <iostream>

namespace plume {

using nlohmann::json;

namespace {

json scale_to_json(const std::optional<FeatureScale>& scale) {
  if (!scale) return nullptr;
  json arr = json::array();
  for (const auto& c : *scale) arr.push_back({{"shift", c.shift}, {"scale", c.scale}});
  return arr;
}

std::optional<FeatureScale> scale_from_json(const json& j) {
  if (j.is_null()) return std::nullopt;
  FeatureScale scale;
  for (const auto& c : j) scale.push_back({c.at("shift").get<double>(), c.at("scale").get<double>()});
  return scale;
}

// nlohmann writes NaN/Inf as null; keep the field but make the loss explicit.
json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

json to_json(const ModelFile& model) {
  const Matrix& w = model.params.weights();
  json rows = json::array();
  for (Index k = 0; k < w.rows(); ++k) {
    json row = json::array();
    for (Index j = 0; j < w.cols(); ++j) row.push_back(w(k, j));
    rows.push_back(std::move(row));
  }
  return {
      {"format_version", model.format_version},
      {"k", model.params.experts()},
      {"d", model.params.dim()},
      {"gamma", model.params.gamma()},
      {"weights", std::move(rows)},
      {"feature_scale", scale_to_json(model.feature_scale)},
      {"training_metadata",
       {{"seed", model.metadata.seed},
        {"optimizer", model.metadata.optimizer},
        {"init", model.metadata.init},
        {"dataset_fingerprint", model.metadata.dataset_fingerprint}}},
  };
}

ModelFile model_from_json(const json& j) {
  try {
    const int version = j.at("format_version").get<int>();
    if (version != kModelFormatVersion) {
      throw DataError("unsupported model format version " + std::to_string(version) + " (expected " +
                      std::to_string(kModelFormatVersion) + ")");
    }
    const auto k = j.at("k").get<Index>();
    const auto d = j.at("d").get<Index>();
    const auto& rows = j.at("weights");
    if (static_cast<Index>(rows.size()) != k) throw DataError("model weights have the wrong number of rows");
    Matrix w(k, d + 1);
    for (Index r = 0; r < k; ++r) {
      if (static_cast<Index>(rows[r].size()) != d + 1) throw DataError("model weight row has the wrong length");
      for (Index c = 0; c <= d; ++c) w(r, c) = rows[r][c].get<double>();
    }
    ModelFile m{version, ModelParams(std::move(w), j.at("gamma").get<double>()),
                scale_from_json(j.value("feature_scale", json(nullptr))), {}};
    if (m.feature_scale && static_cast<Index>(m.feature_scale->size()) != d) {
      throw DataError("model feature scale length does not match d");
    }
    if (j.contains("training_metadata")) {
      const auto& meta = j["training_metadata"];
      m.metadata.seed = meta.value("seed", std::uint64_t{0});
      m.metadata.optimizer = meta.value("optimizer", "");
      m.metadata.init = meta.value("init", "");
      m.metadata.dataset_fingerprint = meta.value("dataset_fingerprint", "");
    }
    return m;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed model file: ") + e.what());
  }
}

void save_model(const ModelFile& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << to_json(model).dump(2) << '\n';
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}

ModelFile load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open model '" + path.string() + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("model '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return model_from_json(j);
}

json to_json(const TrainConfig& cfg) {
  return {
      {"k", cfg.k_experts},
      {"gamma", cfg.gamma},
      {"epsilon", cfg.epsilon},
      {"epsilon_mode", std::string(to_string(cfg.epsilon_mode))},
      {"optimizer", std::string(to_string(cfg.optimizer))},
      {"max_em_iters", cfg.max_em_iters},
      {"init", std::string(to_string(cfg.init))},
      {"seed", cfg.seed},
      {"restarts", cfg.restarts},
      {"max_inner_iters", cfg.max_inner_iters},
      {"inner_grad_tol", cfg.inner_grad_tol},
      {"line_search",
       {{"armijo_c", cfg.line_search.armijo_c},
        {"shrink_rho", cfg.line_search.shrink_rho},
        {"initial_step", cfg.line_search.initial_step},
        {"max_backtracks", cfg.line_search.max_backtracks}}},
  };
}

json to_json(const FitReport& report) {
  return {
      {"ll_trajectory", report.ll_trajectory},
      {"em_iterations", report.em_iterations},
      {"converged", report.converged},
      {"wall_time", report.wall_time},
      {"train_accuracy", report.train_accuracy},
      {"final_log_likelihood", report.ll_trajectory.empty() ? 0.0 : report.ll_trajectory.back()},
      {"reinitialized_experts", report.reinitialized_experts},
      {"seed_used", report.seed_used},
  };
}

json to_json(const BoundReport& r) {
  return {
      {"c1", finite_or_null(r.c1)},
      {"c2", finite_or_null(r.c2)},
      {"rademacher_bound", finite_or_null(r.rademacher_bound)},
      {"risk_bound", finite_or_null(r.risk_bound)},
      {"empirical_risk", r.empirical_risk},
      {"w_max", r.w_max},
      {"w_min", r.w_min},
      {"radius", r.radius},
      {"n_samples", r.n_samples},
      {"delta", r.delta},
      {"vacuous", r.vacuous},
  };
}

json to_json(const SynthSpec& spec) {
  return {
      {"k_hyperplanes", spec.k_hyperplanes}, {"dim", spec.dim},       {"n_points", spec.n_points},
      {"margin", spec.margin},               {"noise_flip", spec.noise_flip}, {"seed", spec.seed},
      {"offset", spec.offset},
  };
}

json to_json(const CvCell& cell) {
  json folds = json::array();
  for (const auto& f : cell.folds) {
    folds.push_back({{"repeat", f.repeat},
                     {"fold", f.fold},
                     {"accuracy", f.accuracy},
                     {"train_time", f.train_time},
                     {"em_iterations", f.em_iterations},
                     {"converged", f.converged}});
  }
  return {
      {"k", cell.k_experts},
      {"gamma", cell.gamma},
      {"folds", std::move(folds)},
      {"repeat_means", cell.repeat_means},
      {"mean_accuracy", cell.mean_accuracy},
      {"std_accuracy", cell.std_accuracy},
      {"mean_train_time", cell.mean_train_time},
  };
}

json to_json(const CvReport& report) {
  json cells = json::array();
  for (const auto& c : report.cells) cells.push_back(to_json(c));
  const CvCell& best = report.best_cell();
  return {
      {"config", to_json(report.options.train)},
      {"plan",
       {{"folds", report.options.plan.n_folds},
        {"repeats", report.options.plan.n_repeats},
        {"seed", report.options.plan.seed},
        {"stratified", report.options.plan.stratified}}},
      {"standardize", report.options.standardize},
      {"cells", std::move(cells)},
      {"best", {{"k", best.k_experts}, {"gamma", best.gamma}, {"index", report.best}}},
      {"mean_accuracy", best.mean_accuracy},
      {"std_accuracy", best.std_accuracy},
      {"mean_train_time", best.mean_train_time},
  };
}

void write_json(const json& j, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << j.dump(2) << '\n';
    return;
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << j.dump(2) << '\n';
  if (!out) throw DataError("failed writing '" + path + "'");
}

}  // namespace plume
