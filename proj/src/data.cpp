#include "plume/data.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

namespace plume {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    cells.push_back(trim(std::string_view(line).substr(start, comma == std::string::npos ? std::string::npos : comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return cells;
}

std::optional<double> parse_number(const std::string& cell) {
  if (cell.empty()) return std::nullopt;
  std::string_view sv(cell);
  if (sv.front() == '+') sv.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(sv.data(), sv.data() + sv.size(), v);
  if (ec != std::errc() || ptr != sv.data() + sv.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

bool is_missing(const std::string& cell) { return cell.empty() || cell == "?"; }

std::vector<std::vector<std::string>> read_rows(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    rows.push_back(split_row(line));
  }
  if (rows.empty()) throw DataError("'" + path.string() + "' is empty");
  return rows;
}

int map_label(const std::string& raw, const std::map<std::string, int>& mapping) {
  if (!mapping.empty()) {
    const auto it = mapping.find(raw);
    if (it == mapping.end()) throw DataError("unknown label '" + raw + "'");
    return it->second;
  }
  const auto v = parse_number(raw);
  if (v && (*v == 1.0)) return 1;
  if (v && (*v == 0.0 || *v == -1.0)) return -1;
  throw DataError("unknown label '" + raw + "' (expected 0/1 or -1/+1, or pass a label mapping)");
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

std::map<std::string, int> parse_label_mapping(const std::string& spec) {
  std::map<std::string, int> mapping;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ConfigError("label mapping entry '" + item + "' lacks '='");
    const std::string key = trim(std::string_view(item).substr(0, eq));
    const auto value = parse_number(trim(std::string_view(item).substr(eq + 1)));
    if (!value || (*value != 1.0 && *value != -1.0)) {
      throw ConfigError("label mapping for '" + key + "' must be -1 or 1");
    }
    mapping[key] = static_cast<int>(*value);
  }
  if (mapping.empty()) throw ConfigError("empty label mapping");
  return mapping;
}

LoadResult load_csv(const std::filesystem::path& path, const CsvSchema& schema) {
  auto rows = read_rows(path);
  const auto width = static_cast<int>(rows.front().size());
  if (width < 2) throw DataError("'" + path.string() + "' needs a label column and at least one feature");
  const int label_col = schema.label_column < 0 ? width + schema.label_column : schema.label_column;
  if (label_col < 0 || label_col >= width) throw ConfigError("label column out of range");
  const std::set<int> categorical(schema.categorical_columns.begin(), schema.categorical_columns.end());
  for (int c : categorical) {
    if (c < 0 || c >= width || c == label_col) throw ConfigError("invalid categorical column " + std::to_string(c));
  }

  bool header = false;
  if (schema.has_header) {
    header = *schema.has_header;
  } else {
    for (int c = 0; c < width; ++c) {
      if (c == label_col || categorical.count(c)) continue;
      if (!is_missing(rows.front()[c]) && !parse_number(rows.front()[c])) header = true;
    }
  }
  std::vector<std::string> names;
  if (header) {
    names = rows.front();
    rows.erase(rows.begin());
  } else {
    for (int c = 0; c < width; ++c) names.push_back("x" + std::to_string(c + 1));
  }
  const std::size_t first_data_line = header ? 2 : 1;

  // Category levels per categorical column, sorted for a stable encoding.
  std::map<int, std::vector<std::string>> levels;
  for (int c : categorical) {
    std::set<std::string> seen;
    for (const auto& r : rows) {
      if (static_cast<int>(r.size()) == width && !is_missing(r[c])) seen.insert(r[c]);
    }
    levels[c].assign(seen.begin(), seen.end());
  }

  LoadSummary summary;
  for (int c = 0; c < width; ++c) {
    if (c == label_col) continue;
    if (categorical.count(c)) {
      for (const auto& level : levels[c]) summary.feature_names.push_back(names[c] + "=" + level);
    } else {
      summary.feature_names.push_back(names[c]);
    }
  }
  const auto d = static_cast<Index>(summary.feature_names.size());

  std::vector<double> values;
  std::vector<int> labels;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    const std::size_t line_no = first_data_line + i;
    if (static_cast<int>(r.size()) != width) {
      throw DataError("row " + std::to_string(line_no) + " has " + std::to_string(r.size()) +
                      " cells, expected " + std::to_string(width));
    }
    if (std::any_of(r.begin(), r.end(), is_missing)) {
      ++summary.dropped_rows;
      continue;
    }
    for (int c = 0; c < width; ++c) {
      if (c == label_col) continue;
      if (categorical.count(c)) {
        for (const auto& level : levels[c]) values.push_back(r[c] == level ? 1.0 : 0.0);
        continue;
      }
      const auto v = parse_number(r[c]);
      if (!v) {
        throw DataError("non-numeric cell '" + r[c] + "' at row " + std::to_string(line_no) +
                        ", column " + std::to_string(c + 1) + " (" + names[c] + ")");
      }
      values.push_back(*v);
    }
    try {
      labels.push_back(map_label(r[label_col], schema.label_mapping));
    } catch (const DataError& e) {
      throw DataError(std::string(e.what()) + " at row " + std::to_string(line_no) + ", column " +
                      std::to_string(label_col + 1));
    }
  }
  if (labels.empty()) throw DataError("'" + path.string() + "' has no complete rows");

  const auto n = static_cast<Index>(labels.size());
  Matrix features = Eigen::Map<const RowMatrix>(values.data(), n, d);
  Eigen::VectorXi y = Eigen::Map<const Eigen::VectorXi>(labels.data(), n);
  Dataset data(std::move(features), std::move(y));

  summary.rows = n;
  summary.positives = data.count(1);
  summary.negatives = data.count(-1);
  if (!data.has_both_classes()) throw DataError("'" + path.string() + "' contains a single class");
  if (schema.expect_counts) {
    const auto [pos, neg] = *schema.expect_counts;
    if (summary.positives != pos || summary.negatives != neg) {
      throw DataError("class counts " + std::to_string(summary.positives) + "/" +
                      std::to_string(summary.negatives) + " differ from expected " +
                      std::to_string(pos) + "/" + std::to_string(neg));
    }
  }
  return {std::move(data), std::move(summary)};
}

Matrix load_features_csv(const std::filesystem::path& path, std::optional<bool> has_header) {
  auto rows = read_rows(path);
  const std::size_t width = rows.front().size();
  bool header = has_header.value_or(false);
  if (!has_header) {
    for (const auto& cell : rows.front()) {
      if (!is_missing(cell) && !parse_number(cell)) header = true;
    }
  }
  if (header) rows.erase(rows.begin());
  if (rows.empty()) throw DataError("'" + path.string() + "' has no data rows");
  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(width));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::size_t line_no = i + (header ? 2 : 1);
    if (rows[i].size() != width) {
      throw DataError("row " + std::to_string(line_no) + " has " + std::to_string(rows[i].size()) +
                      " cells, expected " + std::to_string(width));
    }
    for (std::size_t c = 0; c < width; ++c) {
      const auto v = parse_number(rows[i][c]);
      if (!v) {
        throw DataError("non-numeric cell '" + rows[i][c] + "' at row " + std::to_string(line_no) +
                        ", column " + std::to_string(c + 1));
      }
      m(static_cast<Index>(i), static_cast<Index>(c)) = *v;
    }
  }
  return m;
}

void save_csv(const Dataset& data, const std::filesystem::path& path,
              const std::vector<std::string>& feature_names) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  for (Index c = 0; c < data.dim(); ++c) {
    out << (static_cast<std::size_t>(c) < feature_names.size() ? feature_names[c] : "x" + std::to_string(c + 1))
        << ',';
  }
  out << "label\n";
  for (Index n = 0; n < data.size(); ++n) {
    for (Index c = 0; c < data.dim(); ++c) out << format_double(data.features()(n, c)) << ',';
    out << data.labels()[n] << '\n';
  }
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}

Dataset standardize(const Dataset& data) {
  if (data.size() < 2) throw DataError("standardization needs at least two rows");
  const Index d = data.dim();
  const auto n = static_cast<double>(data.size());
  FeatureScale step(static_cast<std::size_t>(d));
  for (Index c = 0; c < d; ++c) {
    const auto col = data.features().col(c);
    const double mean = col.mean();
    const double var = (col.array() - mean).square().sum() / n;
    step[c] = {mean, var < 1e-12 ? 1.0 : std::sqrt(var)};
  }
  Matrix scaled = apply_scale(data.features(), step);

  FeatureScale combined = step;
  if (data.feature_scale()) {
    // raw -> (raw - s1)/c1 -> ((raw - s1)/c1 - s2)/c2
    for (Index c = 0; c < d; ++c) {
      const ColumnScale& first = (*data.feature_scale())[c];
      combined[c] = {first.shift + first.scale * step[c].shift, first.scale * step[c].scale};
    }
  }
  return {std::move(scaled), data.labels(), std::move(combined)};
}

Matrix apply_scale(const Matrix& raw, const FeatureScale& scale) {
  if (static_cast<Index>(scale.size()) != raw.cols()) {
    throw DimensionError("feature scale has " + std::to_string(scale.size()) + " columns, data has " +
                         std::to_string(raw.cols()));
  }
  Matrix out(raw.rows(), raw.cols());
  for (Index c = 0; c < raw.cols(); ++c) {
    out.col(c) = (raw.col(c).array() - scale[c].shift) / scale[c].scale;
  }
  return out;
}

Dataset apply_scale(const Dataset& raw, const FeatureScale& scale) {
  return {apply_scale(raw.features(), scale), raw.labels(), scale};
}

void CvPlan::validate() const {
  if (n_folds < 2) throw ConfigError("cross-validation needs at least 2 folds");
  if (n_repeats < 1) throw ConfigError("cross-validation needs at least 1 repeat");
}

std::vector<Fold> kfold(const CvPlan& plan, const Dataset& data) {
  plan.validate();
  const Index n = data.size();
  if (plan.n_folds > n) {
    throw ConfigError(std::to_string(plan.n_folds) + " folds requested for " + std::to_string(n) + " rows");
  }
  std::mt19937_64 rng(plan.seed);
  std::vector<Fold> folds;
  folds.reserve(static_cast<std::size_t>(plan.n_folds * plan.n_repeats));
  for (int r = 0; r < plan.n_repeats; ++r) {
    std::vector<std::vector<Index>> members(static_cast<std::size_t>(plan.n_folds));
    if (plan.stratified) {
      // Deal each shuffled class round-robin, continuing where the last class stopped.
      std::size_t next = 0;
      for (int label : {1, -1}) {
        std::vector<Index> idx;
        for (Index i = 0; i < n; ++i) {
          if (data.labels()[i] == label) idx.push_back(i);
        }
        std::shuffle(idx.begin(), idx.end(), rng);
        for (Index i : idx) {
          members[next].push_back(i);
          next = (next + 1) % members.size();
        }
      }
    } else {
      std::vector<Index> idx(static_cast<std::size_t>(n));
      std::iota(idx.begin(), idx.end(), Index{0});
      std::shuffle(idx.begin(), idx.end(), rng);
      for (int f = 0; f < plan.n_folds; ++f) {
        const Index lo = n * f / plan.n_folds;
        const Index hi = n * (f + 1) / plan.n_folds;
        members[f].assign(idx.begin() + lo, idx.begin() + hi);
      }
    }
    for (int f = 0; f < plan.n_folds; ++f) {
      Fold fold{r, f, {}, members[f]};
      for (int g = 0; g < plan.n_folds; ++g) {
        if (g != f) fold.train.insert(fold.train.end(), members[g].begin(), members[g].end());
      }
      std::sort(fold.train.begin(), fold.train.end());
      std::sort(fold.test.begin(), fold.test.end());
      folds.push_back(std::move(fold));
    }
  }
  return folds;
}

void SynthSpec::validate() const {
  if (k_hyperplanes < 1) throw ConfigError("k_hyperplanes must be at least 1");
  if (dim < 1) throw ConfigError("dim must be at least 1");
  if (n_points < 2) throw ConfigError("n_points must be at least 2");
  if (!(margin >= 0.0)) throw ConfigError("margin must be nonnegative");
  if (!(noise_flip >= 0.0 && noise_flip < 1.0)) throw ConfigError("noise_flip must be in [0, 1)");
  if (!(offset > 0.0)) throw ConfigError("offset must be positive");
}

SynthResult synthesize(const SynthSpec& spec) {
  spec.validate();
  constexpr int kMaxAttempts = 100;
  const Index d = spec.dim;
  const Index k = spec.k_hyperplanes;
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> box(-2.0, 2.0);
  std::uniform_real_distribution<double> centre_u(-0.5, 0.5);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    Vector centre(d);
    for (Index j = 0; j < d; ++j) centre[j] = centre_u(rng);

    Matrix w(k, d + 1);
    if (d == 2) {
      // Spread the normals around the circle so K >= 3 gives a bounded polygon.
      const double base = 2.0 * std::numbers::pi * unit(rng);
      for (Index i = 0; i < k; ++i) {
        const double jitter = (unit(rng) - 0.5) * 0.6 * std::numbers::pi / static_cast<double>(k);
        const double angle = base + 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(k) + jitter;
        w(i, 0) = std::cos(angle);
        w(i, 1) = std::sin(angle);
      }
    } else {
      for (Index i = 0; i < k; ++i) {
        Vector v(d);
        for (Index j = 0; j < d; ++j) v[j] = normal(rng);
        w.row(i).head(d) = v.normalized().transpose();
      }
    }
    for (Index i = 0; i < k; ++i) w(i, d) = spec.offset - w.row(i).head(d).dot(centre);
    ModelParams truth(w, 1.0);

    Matrix x(spec.n_points, d);
    Eigen::VectorXi y(spec.n_points);
    const Index max_draws = 1000 * spec.n_points;
    Index draws = 0;
    bool exhausted = false;
    for (Index n = 0; n < spec.n_points && !exhausted; ++n) {
      while (true) {
        if (++draws > max_draws) {
          exhausted = true;
          break;
        }
        Vector p(d);
        for (Index j = 0; j < d; ++j) p[j] = box(rng);
        const double h = margin(truth, AugmentedPoint::from_features(p));
        if (std::abs(h) < spec.margin) continue;
        x.row(n) = p.transpose();
        y[n] = h >= 0.0 ? 1 : -1;
        break;
      }
    }
    if (exhausted) continue;

    Index flipped = 0;
    if (spec.noise_flip > 0.0) {
      std::bernoulli_distribution flip(spec.noise_flip);
      for (Index n = 0; n < spec.n_points; ++n) {
        if (flip(rng)) {
          y[n] = -y[n];
          ++flipped;
        }
      }
    }
    Dataset data(std::move(x), std::move(y));
    if (!data.has_both_classes()) continue;
    return {std::move(data), std::move(truth), flipped};
  }
  throw DataError("could not generate a two-class sample for this spec after " +
                  std::to_string(kMaxAttempts) + " attempts");
}

std::string dataset_fingerprint(const Dataset& data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const auto mix = [&h](const void* p, std::size_t len) {
    const auto* bytes = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < len; ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  };
  const Index n = data.size();
  const Index d = data.dim();
  mix(&n, sizeof n);
  mix(&d, sizeof d);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < d; ++j) {
      const double v = data.features()(i, j);
      mix(&v, sizeof v);
    }
    const int y = data.labels()[i];
    mix(&y, sizeof y);
  }
  std::ostringstream out;
  out << std::hex;
  out.width(16);
  out.fill('0');
  out << h;
  return out.str();
}

}  // namespace plume
