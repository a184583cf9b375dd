#include "ugss/ingestion.hpp"

#include "ugss/container.hpp"
#include "ugss/random.hpp"

#include <json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

namespace ugss::ingest {

const std::vector<std::string>& default_physionet_variables() {
  static const std::vector<std::string> vars = {
      "ALP",      "ALT",       "AST",      "Albumin",  "BUN",  "Bilirubin", "Cholesterol",
      "Creatinine", "DiasABP", "FiO2",     "GCS",      "Glucose", "HCO3",    "HCT",
      "HR",       "K",         "Lactate",  "MAP",      "Mg",   "NIDiasABP", "NIMAP",
      "NISysABP", "Na",        "PaCO2",    "PaO2",     "Platelets", "RespRate", "SaO2",
      "SysABP",   "Temp",      "TroponinI", "TroponinT", "Urine", "WBC",     "pH"};
  return vars;
}

std::vector<std::string> load_variable_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open variable manifest '" + path.string() + "'");
  const auto j = nlohmann::json::parse(in);
  auto vars = j.at("variables").get<std::vector<std::string>>();
  if (vars.empty()) throw ValidationError("variable manifest lists no variables");
  return vars;
}

// ---- PhysioNet --------------------------------------------------------------

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size() && std::isfinite(out);
}

// "HH:MM" -> hours.
bool parse_clock(const std::string& s, double& hours) {
  const auto colon = s.find(':');
  if (colon == std::string::npos) return false;
  int hh = 0, mm = 0;
  auto r1 = std::from_chars(s.data(), s.data() + colon, hh);
  auto r2 = std::from_chars(s.data() + colon + 1, s.data() + s.size(), mm);
  if (r1.ec != std::errc() || r2.ec != std::errc() || r1.ptr != s.data() + colon ||
      r2.ptr != s.data() + s.size() || mm < 0 || mm >= 60 || hh < 0) {
    return false;
  }
  hours = hh + mm / 60.0;
  return true;
}

std::optional<std::filesystem::path> find_outcomes(const std::filesystem::path& dir) {
  for (const auto& where : {dir, dir.parent_path()}) {
    if (where.empty() || !std::filesystem::is_directory(where)) continue;
    std::vector<std::filesystem::path> hits;
    for (const auto& e : std::filesystem::directory_iterator(where)) {
      if (e.is_regular_file() && e.path().filename().string().rfind("Outcomes", 0) == 0) {
        hits.push_back(e.path());
      }
    }
    std::sort(hits.begin(), hits.end());
    if (!hits.empty()) return hits.front();
  }
  return std::nullopt;
}

std::map<std::int64_t, int> read_outcomes(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open outcomes file '" + path.string() + "'");
  std::string line;
  std::getline(in, line);
  const auto header = split_csv(line);
  const auto id_col = std::find(header.begin(), header.end(), "RecordID") - header.begin();
  const auto y_col = std::find(header.begin(), header.end(), "In-hospital_death") - header.begin();
  if (id_col == static_cast<long>(header.size()) || y_col == static_cast<long>(header.size())) {
    throw ValidationError("outcomes file lacks RecordID / In-hospital_death columns");
  }
  std::map<std::int64_t, int> labels;
  while (std::getline(in, line)) {
    const auto f = split_csv(line);
    if (f.size() <= static_cast<std::size_t>(std::max(id_col, y_col))) continue;
    double id = 0, y = 0;
    if (!parse_double(f[id_col], id) || !parse_double(f[y_col], y)) continue;
    labels[static_cast<std::int64_t>(id)] = y > 0.5 ? 1 : 0;
  }
  return labels;
}

}  // namespace

PhysioNetResult load_physionet(const std::filesystem::path& dir, const PhysioNetOptions& options) {
  if (!std::filesystem::is_directory(dir)) {
    throw ValidationError("load_physionet: '" + dir.string() + "' is not a directory");
  }
  if (options.grid_hours <= 0 || options.horizon_hours % options.grid_hours != 0) {
    throw ValidationError("load_physionet: horizon must be a positive multiple of grid_hours");
  }
  const auto outcomes_path = options.outcomes ? options.outcomes : find_outcomes(dir);
  if (!outcomes_path) throw ValidationError("load_physionet: no Outcomes file found near '" + dir.string() + "'");
  const auto labels = read_outcomes(*outcomes_path);

  std::unordered_map<std::string, Eigen::Index> var_index;
  for (std::size_t i = 0; i < options.variables.size(); ++i) {
    var_index[options.variables[i]] = static_cast<Eigen::Index>(i);
  }
  const Eigen::Index steps = options.horizon_hours / options.grid_hours;
  const auto D = static_cast<Eigen::Index>(options.variables.size());

  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    const auto name = e.path().filename().string();
    if (e.is_regular_file() && e.path().extension() == ".txt" && name.rfind("Outcomes", 0) != 0) {
      files.push_back(e.path());
    }
  }

  PhysioNetResult result;
  auto& summary = result.summary;
  std::vector<TimeSeriesSample> samples;
  for (const auto& file : files) {
    ++summary.records_seen;
    std::ifstream in(file);
    std::string line;
    Matrix sums = Matrix::Zero(steps, D), counts = Matrix::Zero(steps, D);
    std::int64_t record_id = -1;
    bool first = true;
    while (std::getline(in, line)) {
      if (trim(line).empty()) continue;
      if (first) {
        first = false;
        if (line.rfind("Time", 0) == 0) continue;
      }
      const auto f = split_csv(line);
      double hours = 0, value = 0;
      if (f.size() != 3 || !parse_clock(f[0], hours) || !parse_double(f[2], value)) {
        ++summary.malformed_rows;
        continue;
      }
      if (f[1] == "RecordID") {
        record_id = static_cast<std::int64_t>(value);
        continue;
      }
      const auto it = var_index.find(f[1]);
      if (it == var_index.end()) continue;
      if (value < 0) {
        ++summary.invalid_values;
        continue;
      }
      const auto bucket = static_cast<Eigen::Index>(std::floor(hours / options.grid_hours));
      if (bucket >= steps) continue;
      sums(bucket, it->second) += value;
      counts(bucket, it->second) += 1.0;
    }
    if (record_id < 0) {
      double id = 0;
      if (!parse_double(file.stem().string(), id)) {
        ++summary.dropped_no_outcome;
        spdlog::warn("record file {} has no RecordID; skipped", file.string());
        continue;
      }
      record_id = static_cast<std::int64_t>(id);
    }
    const auto label = labels.find(record_id);
    if (label == labels.end()) {
      ++summary.dropped_no_outcome;
      spdlog::warn("record {} has no outcome entry; skipped", record_id);
      continue;
    }
    Matrix mask = (counts.array() > 0).cast<double>();
    if (mask.sum() == 0) {
      ++summary.dropped_no_observations;
      continue;
    }
    Matrix values = (sums.array() / counts.array().max(1.0)).matrix();
    Vector stamps(steps);
    for (Eigen::Index t = 0; t < steps; ++t) stamps(t) = static_cast<double>(t * options.grid_hours);
    samples.push_back(make_sample(std::move(values), std::move(mask), std::move(stamps), label->second, record_id));
  }
  if (summary.malformed_rows > 0) spdlog::warn("skipped {} malformed rows", summary.malformed_rows);

  std::sort(samples.begin(), samples.end(),
            [](const auto& a, const auto& b) { return a.record_id < b.record_id; });
  result.data.samples = std::move(samples);
  result.data.variable_names = options.variables;
  summary.missing_rate = result.data.missing_rate();
  summary.positives = result.data.positives();
  summary.negatives = result.data.size() - summary.positives;
  return result;
}

// ---- preprocessing ----------------------------------------------------------

double percentile(std::vector<double> values, double pct) {
  if (values.empty()) throw ValidationError("percentile of an empty set");
  std::sort(values.begin(), values.end());
  const double pos = pct / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

std::vector<VariableSpec> fit_preprocessor(const Dataset& train, const PreprocessOptions& options,
                                           std::vector<std::string>* dropped) {
  if (train.size() == 0) throw ValidationError("fit_preprocessor: empty training split");
  if (!(options.winsor_low_pct >= 0 && options.winsor_low_pct < options.winsor_high_pct &&
        options.winsor_high_pct <= 100)) {
    throw ValidationError("fit_preprocessor: invalid winsor percentiles");
  }
  std::vector<VariableSpec> specs;
  for (Eigen::Index d = 0; d < train.dims(); ++d) {
    const auto& name = train.variable_names[static_cast<std::size_t>(d)];
    std::vector<double> obs;
    for (const auto& s : train.samples) {
      for (Eigen::Index t = 0; t < s.steps(); ++t) {
        if (s.mask(t, d) != 0.0) obs.push_back(s.x_tilde(t, d));
      }
    }
    if (obs.empty()) {
      spdlog::warn("variable {} has no observations in the training split; dropped", name);
      if (dropped) dropped->push_back(name);
      continue;
    }
    VariableSpec v;
    v.name = name;
    v.winsor_low = percentile(obs, options.winsor_low_pct);
    v.winsor_high = percentile(obs, options.winsor_high_pct);
    double mean = 0.0;
    for (auto& x : obs) {
      x = std::clamp(x, v.winsor_low, v.winsor_high);
      mean += x;
    }
    mean /= static_cast<double>(obs.size());
    double var = 0.0;
    for (double x : obs) var += (x - mean) * (x - mean);
    var /= static_cast<double>(obs.size());
    if (!(var > 1e-24)) {
      spdlog::warn("variable {} has zero variance in the training split; dropped", name);
      if (dropped) dropped->push_back(name);
      continue;
    }
    v.mean = mean;
    v.std = std::sqrt(var);
    specs.push_back(v);
  }
  return specs;
}

Dataset apply_preprocessor(const Dataset& data, const std::vector<VariableSpec>& specs) {
  std::vector<Eigen::Index> source;
  for (const auto& v : specs) {
    const auto it = std::find(data.variable_names.begin(), data.variable_names.end(), v.name);
    if (it == data.variable_names.end()) {
      throw ValidationError("apply_preprocessor: variable '" + v.name + "' not present in data");
    }
    source.push_back(it - data.variable_names.begin());
  }
  const auto D = static_cast<Eigen::Index>(specs.size());
  Dataset out;
  out.normalization = specs;
  for (const auto& v : specs) out.variable_names.push_back(v.name);
  out.samples.reserve(data.size());
  auto transform = [&](double x, const VariableSpec& v) {
    return (std::clamp(x, v.winsor_low, v.winsor_high) - v.mean) / v.std;
  };
  for (const auto& s : data.samples) {
    TimeSeriesSample r;
    const auto T = s.steps();
    r.x_tilde = Matrix::Zero(T, D);
    r.mask = Matrix::Zero(T, D);
    r.imp_mask = Matrix::Zero(T, D);
    r.x_truth = Matrix::Zero(T, D);
    if (s.x_full.size() != 0) r.x_full = Matrix::Zero(T, D);
    for (Eigen::Index k = 0; k < D; ++k) {
      const auto d = source[static_cast<std::size_t>(k)];
      const auto& v = specs[static_cast<std::size_t>(k)];
      for (Eigen::Index t = 0; t < T; ++t) {
        r.mask(t, k) = s.mask(t, d);
        if (s.mask(t, d) != 0.0) r.x_tilde(t, k) = transform(s.x_tilde(t, d), v);
        if (s.imp_mask.size() != 0 && s.imp_mask(t, d) != 0.0) {
          r.imp_mask(t, k) = 1.0;
          r.x_truth(t, k) = transform(s.x_truth(t, d), v);
        }
        if (s.x_full.size() != 0) r.x_full(t, k) = transform(s.x_full(t, d), v);
      }
    }
    r.timestamps = s.timestamps;
    r.delta = compute_time_intervals(r.timestamps, r.mask);
    r.label = s.label;
    r.record_id = s.record_id;
    out.samples.push_back(std::move(r));
  }
  return out;
}

// ---- synthetic --------------------------------------------------------------

void SyntheticSpec::validate() const {
  if (n_samples == 0 || steps <= 0 || dims <= 0 || latent_dim <= 0) {
    throw ValidationError("synthetic spec: sizes must be positive");
  }
  if (!(missing_rate >= 0.0 && missing_rate < 1.0)) {
    throw ValidationError("synthetic spec: missing_rate must lie in [0, 1)");
  }
  if (!(class_balance > 0.0 && class_balance < 1.0)) {
    throw ValidationError("synthetic spec: class_balance must lie in (0, 1)");
  }
  if (!(noise_std >= 0.0)) throw ValidationError("synthetic spec: noise_std must be nonnegative");
}

SyntheticSpec parse_synthetic_spec(const std::string& json_text) {
  const auto j = nlohmann::json::parse(json_text);
  static const std::vector<std::string> known = {"n_samples", "T", "D", "latent_dim", "missing_rate",
                                                 "class_balance", "noise_std", "seed"};
  for (const auto& [key, _] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ValidationError("synthetic spec: unknown key '" + key + "'");
    }
  }
  SyntheticSpec s;
  s.n_samples = j.value("n_samples", s.n_samples);
  s.steps = j.value("T", s.steps);
  s.dims = j.value("D", s.dims);
  s.latent_dim = j.value("latent_dim", s.latent_dim);
  s.missing_rate = j.value("missing_rate", s.missing_rate);
  s.class_balance = j.value("class_balance", s.class_balance);
  s.noise_std = j.value("noise_std", s.noise_std);
  s.seed = j.value("seed", s.seed);
  s.validate();
  return s;
}

std::string to_json(const SyntheticSpec& s) {
  return nlohmann::json{{"n_samples", s.n_samples},   {"T", s.steps},
                        {"D", s.dims},                {"latent_dim", s.latent_dim},
                        {"missing_rate", s.missing_rate}, {"class_balance", s.class_balance},
                        {"noise_std", s.noise_std},   {"seed", s.seed}}
      .dump(2);
}

namespace {

constexpr double kLatentPersistence = 0.95;
constexpr double kLabelSharpness = 3.0;

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

Dataset generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  const auto K = spec.latent_dim, D = spec.dims, T = spec.steps;
  Rng rng(spec.seed);
  // Rotation scaled below one: persistent, oscillating, stationary dynamics.
  Eigen::HouseholderQR<Matrix> qr(rng.normal_matrix(K, K));
  const Matrix A = kLatentPersistence * Matrix(qr.householderQ());
  const double process_std = std::sqrt(1.0 - kLatentPersistence * kLatentPersistence);
  const Matrix B = rng.normal_matrix(D, K) / std::sqrt(static_cast<double>(K));
  Vector w = rng.normal_matrix(K, 1).col(0);
  w.normalize();

  Dataset data;
  for (Eigen::Index d = 0; d < D; ++d) data.variable_names.push_back("x" + std::to_string(d));
  std::vector<double> scores(spec.n_samples);
  std::vector<Matrix> complete(spec.n_samples), masks(spec.n_samples);
  std::vector<Rng> streams;
  streams.reserve(spec.n_samples);
  for (std::size_t n = 0; n < spec.n_samples; ++n) {
    streams.emplace_back(derive_seed(spec.seed, n));
    Rng& r = streams.back();
    Vector a = r.normal_matrix(K, 1).col(0);
    Matrix x(T, D);
    for (Eigen::Index t = 0; t < T; ++t) {
      if (t > 0) a = A * a + process_std * r.normal_matrix(K, 1).col(0);
      x.row(t) = (B * a).transpose() + spec.noise_std * r.normal_matrix(1, D);
    }
    Matrix m(T, D);
    for (Eigen::Index t = 0; t < T; ++t)
      for (Eigen::Index d = 0; d < D; ++d) m(t, d) = r.bernoulli(spec.missing_rate) ? 0.0 : 1.0;
    scores[n] = kLabelSharpness * w.dot(a);
    complete[n] = std::move(x);
    masks[n] = std::move(m);
  }
  // Bisection for the bias that yields the requested expected positive rate.
  double lo = -50.0, hi = 50.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    double rate = 0.0;
    for (double s : scores) rate += logistic(s + mid);
    rate /= static_cast<double>(scores.size());
    (rate < spec.class_balance ? lo : hi) = mid;
  }
  const double bias = 0.5 * (lo + hi);
  Vector stamps = Vector::LinSpaced(T, 0.0, static_cast<double>(T - 1));
  for (std::size_t n = 0; n < spec.n_samples; ++n) {
    const int label = streams[n].bernoulli(logistic(scores[n] + bias)) ? 1 : 0;
    auto s = make_sample(complete[n], masks[n], stamps, label, static_cast<std::int64_t>(n));
    s.x_full = std::move(complete[n]);
    data.samples.push_back(std::move(s));
  }
  return data;
}

// ---- gridded matrices -------------------------------------------------------

Dataset load_gridded_matrix(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw ValidationError("load_gridded_matrix: '" + dir.string() + "' is not a directory");
  }
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".ugss") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw ValidationError("load_gridded_matrix: no .ugss files in '" + dir.string() + "'");
  Dataset out;
  Eigen::Index steps = -1;
  for (const auto& f : files) {
    Dataset part = load_dataset(f);
    const Eigen::Index part_steps = part.max_steps();
    if (steps < 0) {
      steps = part_steps;
      out.variable_names = part.variable_names;
      out.normalization = part.normalization;
    } else if (part.dims() != out.dims() || part_steps != steps ||
               part.variable_names != out.variable_names) {
      throw ValidationError("load_gridded_matrix: shape mismatch in '" + f.string() + "' (T=" +
                            std::to_string(part_steps) + ", D=" + std::to_string(part.dims()) +
                            "; expected T=" + std::to_string(steps) +
                            ", D=" + std::to_string(out.dims()) + ")");
    }
    for (auto& s : part.samples) {
      if (s.steps() != steps) {
        throw ValidationError("load_gridded_matrix: ragged sample " + std::to_string(s.record_id) +
                              " in '" + f.string() + "'");
      }
      out.samples.push_back(std::move(s));
    }
  }
  return out;
}

}  // namespace ugss::ingest
