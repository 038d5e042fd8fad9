// plume: train, evaluate and inspect polyhedral mixture-of-experts classifiers.
//
// Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numerical failure.

#include "plume/bounds.h"
#include "plume/crossval.h"
#include "plume/data.h"
#include "plume/em.h"
#include "plume/io.h"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

namespace {

using namespace plume;

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("plume");
  logger->set_pattern("[%l] %v");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::info);
  if (const char* level = std::getenv("PLUME_LOG")) {
    spdlog::set_level(spdlog::level::from_str(level));
  }
}

struct DataArgs {
  std::string path;
  int label_column = -1;
  std::string label_map;
  std::vector<int> categorical;
  std::string expect_counts;
  bool no_header = false;

  void add(CLI::App* cmd, bool required = true) {
    auto* opt = cmd->add_option("--data", path, "Labelled CSV file");
    if (required) opt->required()->check(CLI::ExistingFile);
    cmd->add_option("--label-column", label_column, "Zero-based label column, negative counts from the end");
    cmd->add_option("--label-map", label_map, "Label mapping, e.g. 'g=1,b=-1' (default: 0/1 or -1/+1)");
    cmd->add_option("--categorical", categorical, "Zero-based columns to one-hot encode");
    cmd->add_option("--expect-counts", expect_counts, "Expected class counts as POS/NEG, checked at load");
    cmd->add_flag("--no-header", no_header, "The first row is data");
  }

  LoadResult load() const {
    CsvSchema schema;
    schema.label_column = label_column;
    if (!label_map.empty()) schema.label_mapping = parse_label_mapping(label_map);
    schema.categorical_columns = categorical;
    if (no_header) schema.has_header = false;
    if (!expect_counts.empty()) {
      const auto slash = expect_counts.find('/');
      if (slash == std::string::npos) throw ConfigError("--expect-counts takes POS/NEG");
      schema.expect_counts = std::pair<Index, Index>{std::stoll(expect_counts.substr(0, slash)),
                                                     std::stoll(expect_counts.substr(slash + 1))};
    }
    LoadResult r = load_csv(path, schema);
    spdlog::info("loaded {}: {} rows, {} features, {} positive / {} negative, {} dropped",
                 path, r.summary.rows, r.data.dim(), r.summary.positives, r.summary.negatives,
                 r.summary.dropped_rows);
    return r;
  }
};

struct TrainArgs {
  Index k = 2;
  double gamma = 1.0;
  double epsilon = 1e-6;
  std::string epsilon_mode = "mean";
  std::string optimizer = "bfgs";
  std::string init = "random";
  std::uint64_t seed = 0;
  int max_em_iters = 500;
  int restarts = 1;
  bool no_standardize = false;

  void add(CLI::App* cmd) {
    cmd->add_option("--k", k, "Number of hyperplanes");
    cmd->add_option("--gamma", gamma, "Gating sharpness");
    cmd->add_option("--epsilon", epsilon, "Log-likelihood improvement tolerance");
    cmd->add_option("--epsilon-mode", epsilon_mode, "Scale epsilon per example (mean) or not (total)")
        ->check(CLI::IsMember({"mean", "total"}));
    cmd->add_option("--optimizer", optimizer, "M-step optimizer")->check(CLI::IsMember({"ga", "newton", "bfgs"}));
    cmd->add_option("--init", init, "Initialization")->check(CLI::IsMember({"random", "logistic"}));
    cmd->add_option("--seed", seed, "Random seed");
    cmd->add_option("--max-em-iters", max_em_iters, "EM iteration cap");
    cmd->add_option("--restarts", restarts, "Independent EM restarts; best likelihood wins");
    cmd->add_flag("--no-standardize", no_standardize, "Train on raw features");
  }

  TrainConfig config() const {
    TrainConfig cfg;
    cfg.k_experts = k;
    cfg.gamma = gamma;
    cfg.epsilon = epsilon;
    cfg.epsilon_mode = parse_epsilon_mode(epsilon_mode);
    cfg.optimizer = parse_optimizer(optimizer);
    cfg.init = parse_init(init);
    cfg.seed = seed;
    cfg.max_em_iters = max_em_iters;
    cfg.restarts = restarts;
    cfg.validate();
    return cfg;
  }
};

std::string sidecar_path(const std::string& csv) {
  std::filesystem::path p(csv);
  p.replace_extension(".json");
  return p.string();
}

int cmd_train(const DataArgs& data_args, const TrainArgs& train_args, const std::string& model_out,
              const std::string& report_out) {
  const TrainConfig cfg = train_args.config();
  const LoadResult loaded = data_args.load();
  Dataset data = train_args.no_standardize ? loaded.data : standardize(loaded.data);

  const FitReport rep = fit(cfg, data);
  spdlog::info("EM stopped after {} iterations (converged: {}), log-likelihood {:.6f}, train accuracy {:.4f}",
               rep.em_iterations, rep.converged, rep.ll_trajectory.back(), rep.train_accuracy);

  ModelFile model{kModelFormatVersion, rep.final_params, data.feature_scale(),
                  {cfg.seed, std::string(to_string(cfg.optimizer)), std::string(to_string(cfg.init)),
                   dataset_fingerprint(loaded.data)}};
  save_model(model, model_out);
  spdlog::info("model written to {}", model_out);

  nlohmann::json report = {{"config", to_json(cfg)},
                           {"data", data_args.path},
                           {"standardize", !train_args.no_standardize},
                           {"fit", to_json(rep)}};
  write_json(report, report_out);
  return 0;
}

int cmd_predict(const std::string& model_path, const std::string& data_path, bool labelled, int label_column,
                bool no_header, bool with_margins, const std::string& out_path) {
  const ModelFile model = load_model(model_path);
  Matrix features;
  std::optional<Eigen::VectorXi> truth;
  const std::optional<bool> header = no_header ? std::optional<bool>(false) : std::nullopt;
  if (labelled) {
    CsvSchema schema;
    schema.label_column = label_column;
    schema.has_header = header;
    LoadResult r = load_csv(data_path, schema);
    features = r.data.features();
    truth = r.data.labels();
  } else {
    features = load_features_csv(data_path, header);
  }
  if (features.cols() != model.params.dim()) {
    throw DimensionError("model expects " + std::to_string(model.params.dim()) + " features, data has " +
                         std::to_string(features.cols()));
  }
  if (model.feature_scale) features = apply_scale(features, *model.feature_scale);

  const Vector m = margins(model.params, features);
  const Eigen::VectorXi labels = predict(model.params, features);
  if (truth) spdlog::info("accuracy against file labels: {:.4f}", accuracy(labels, *truth));

  std::ofstream file;
  if (!out_path.empty() && out_path != "-") {
    file.open(out_path);
    if (!file) throw DataError("cannot write '" + out_path + "'");
  }
  std::ostream& out = file.is_open() ? file : std::cout;
  out << (with_margins ? "label,margin\n" : "label\n");
  for (Index n = 0; n < labels.size(); ++n) {
    out << labels[n];
    if (with_margins) out << ',' << nlohmann::json(m[n]).dump();
    out << '\n';
  }
  return 0;
}

int cmd_crossval(const DataArgs& data_args, const TrainArgs& train_args, int folds, int repeats,
                 std::uint64_t cv_seed, bool stratified, int jobs, const std::vector<Index>& k_grid,
                 const std::vector<double>& gamma_grid, const std::string& out) {
  CvOptions opt;
  opt.train = train_args.config();
  opt.plan = {folds, repeats, cv_seed, stratified};
  opt.standardize = !train_args.no_standardize;
  opt.k_grid = k_grid;
  opt.gamma_grid = gamma_grid;
  opt.jobs = jobs;
  const LoadResult loaded = data_args.load();
  const CvReport report = cross_validate(loaded.data, opt);
  for (const auto& cell : report.cells) {
    spdlog::info("K={} gamma={}: accuracy {:.2f} +/- {:.2f} %, mean train time {:.3f} s", cell.k_experts,
                 cell.gamma, 100.0 * cell.mean_accuracy, 100.0 * cell.std_accuracy, cell.mean_train_time);
  }
  nlohmann::json j = to_json(report);
  j["data"] = data_args.path;
  write_json(j, out);
  return 0;
}

int cmd_synth(const SynthSpec& spec, const std::string& out) {
  const SynthResult r = synthesize(spec);
  save_csv(r.data, out);
  ModelFile truth{kModelFormatVersion, r.true_params, std::nullopt, {spec.seed, "", "", dataset_fingerprint(r.data)}};
  nlohmann::json meta = {{"spec", to_json(spec)},
                         {"true_params", to_json(truth)},
                         {"positives", r.data.count(1)},
                         {"negatives", r.data.count(-1)},
                         {"flipped", r.flipped}};
  write_json(meta, sidecar_path(out));
  spdlog::info("wrote {} points ({} positive) to {} and metadata to {}", r.data.size(), r.data.count(1), out,
               sidecar_path(out));
  return 0;
}

int cmd_bound(const std::string& model_path, const DataArgs& data_args, double delta, const std::string& out) {
  const ModelFile model = load_model(model_path);
  const LoadResult loaded = data_args.load();
  const Dataset data = model.feature_scale ? apply_scale(loaded.data, *model.feature_scale) : loaded.data;
  const BoundReport rep = bound_for_model(model.params, data, delta);
  if (rep.vacuous) spdlog::warn("bound is vacuous (risk bound {:.4g} exceeds ln 2 + 10)", rep.risk_bound);
  write_json(to_json(rep), out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Polyhedral classifiers learned as a mixture of logistic experts"};
  app.require_subcommand(1);

  DataArgs train_data, cv_data, bound_data;
  TrainArgs train_args, cv_args;
  std::string model_out = "model.json", train_report = "-";
  auto* train = app.add_subcommand("train", "Fit a model with EM");
  train_data.add(train);
  train_args.add(train);
  train->add_option("--out", model_out, "Model file to write");
  train->add_option("--report", train_report, "Fit report (JSON); '-' for standard output");

  std::string predict_model, predict_data, predict_out = "-";
  bool predict_labelled = false, predict_margins = false, predict_no_header = false;
  int predict_label_col = -1;
  auto* predict_cmd = app.add_subcommand("predict", "Label feature rows with a saved model");
  predict_cmd->add_option("--model", predict_model, "Model file")->required()->check(CLI::ExistingFile);
  predict_cmd->add_option("--data", predict_data, "Feature CSV")->required()->check(CLI::ExistingFile);
  predict_cmd->add_flag("--labelled", predict_labelled, "The CSV also has a label column (ignored for prediction)");
  predict_cmd->add_option("--label-column", predict_label_col, "Label column when --labelled");
  predict_cmd->add_flag("--no-header", predict_no_header, "The first row is data");
  predict_cmd->add_flag("--margins", predict_margins, "Also emit the margin min_k w_k.x + b_k");
  predict_cmd->add_option("--out", predict_out, "Output file; '-' for standard output");

  int folds = 10, repeats = 10, jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  std::uint64_t cv_seed = 0;
  bool stratified = false;
  std::vector<Index> k_grid;
  std::vector<double> gamma_grid;
  std::string cv_out = "-";
  auto* cv = app.add_subcommand("crossval", "Repeated k-fold cross-validation");
  cv_data.add(cv);
  cv_args.add(cv);
  cv->add_option("--folds", folds, "Folds per repeat");
  cv->add_option("--repeats", repeats, "Repeats");
  cv->add_option("--cv-seed", cv_seed, "Seed for fold assignment");
  cv->add_flag("--stratified", stratified, "Preserve class ratios in each fold");
  cv->add_option("--jobs", jobs, "Concurrent fits");
  cv->add_option("--k-grid", k_grid, "Grid of K values");
  cv->add_option("--gamma-grid", gamma_grid, "Grid of gamma values");
  cv->add_option("--out", cv_out, "Report file; '-' for standard output");

  SynthSpec spec;
  std::string synth_out = "synth.csv";
  auto* synth = app.add_subcommand("synth", "Generate polyhedrally separable data");
  synth->add_option("--k", spec.k_hyperplanes, "Number of hyperplanes");
  synth->add_option("--dim", spec.dim, "Feature dimension");
  synth->add_option("--n", spec.n_points, "Number of points");
  synth->add_option("--margin", spec.margin, "Minimum |margin| of every point");
  synth->add_option("--noise", spec.noise_flip, "Fraction of labels flipped at random");
  synth->add_option("--offset", spec.offset, "Distance from the region centre to each hyperplane");
  synth->add_option("--seed", spec.seed, "Random seed");
  synth->add_option("--out", synth_out, "CSV to write; metadata goes next to it as .json");

  std::string bound_model, bound_out = "-";
  double delta = 0.05;
  auto* bound = app.add_subcommand("bound", "Generalization bound for a saved model");
  bound->add_option("--model", bound_model, "Model file")->required()->check(CLI::ExistingFile);
  bound_data.add(bound);
  bound->add_option("--delta", delta, "Confidence parameter in (0, 1)");
  bound->add_option("--out", bound_out, "Report file; '-' for standard output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*train) return cmd_train(train_data, train_args, model_out, train_report);
    if (*predict_cmd) {
      return cmd_predict(predict_model, predict_data, predict_labelled, predict_label_col, predict_no_header,
                         predict_margins, predict_out);
    }
    if (*cv) {
      return cmd_crossval(cv_data, cv_args, folds, repeats, cv_seed, stratified, jobs, k_grid, gamma_grid, cv_out);
    }
    if (*synth) return cmd_synth(spec, synth_out);
    if (*bound) return cmd_bound(bound_model, bound_data, delta, bound_out);
  } catch (const plume::Error& e) {
    spdlog::error("{}", e.what());
    return e.exit_code();
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 1;
}
