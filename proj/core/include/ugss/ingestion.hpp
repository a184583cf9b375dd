#pragma once

#include "ugss/data_model.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace ugss::ingest {

/// The 35 time-varying PhysioNet 2012 parameters used by default. Mirrors
/// core/data/physionet_variables.json.
const std::vector<std::string>& default_physionet_variables();

/// Reads a variable manifest: {"name": ..., "version": ..., "variables": [...]}.
std::vector<std::string> load_variable_manifest(const std::filesystem::path& path);

struct PhysioNetOptions {
  int grid_hours = 1;
  int horizon_hours = 48;
  std::vector<std::string> variables = default_physionet_variables();
  /// Outcomes CSV; when unset, the first Outcomes*.txt found in the record
  /// directory or its parent is used.
  std::optional<std::filesystem::path> outcomes;
};

struct PhysioNetSummary {
  std::size_t records_seen = 0;
  std::size_t dropped_no_observations = 0;
  std::size_t dropped_no_outcome = 0;
  std::size_t malformed_rows = 0;
  std::size_t invalid_values = 0;
  double missing_rate = 0.0;
  std::size_t positives = 0;
  std::size_t negatives = 0;
};

struct PhysioNetResult {
  Dataset data;
  PhysioNetSummary summary;
};

/// Buckets each record's (Time, Parameter, Value) rows onto a regular grid,
/// averaging repeated observations inside a bucket. Buckets are left-closed;
/// rows at or past the horizon are dropped. The result is independent of
/// directory listing order (records are sorted by id).
PhysioNetResult load_physionet(const std::filesystem::path& dir, const PhysioNetOptions& options = {});

struct PreprocessOptions {
  double winsor_low_pct = 1.0;
  double winsor_high_pct = 99.0;
};

/// Per-variable winsor bounds and z-score statistics from observed entries
/// of `train`. Variables with no observations or zero variance after
/// winsorisation are omitted; their names go to `dropped` when given.
std::vector<VariableSpec> fit_preprocessor(const Dataset& train, const PreprocessOptions& options = {},
                                           std::vector<std::string>* dropped = nullptr);

/// Keeps the variables named in `specs` (in that order), clamps observed
/// values to the winsor bounds and z-normalises them. Missing entries stay 0.
/// Held-out truth and complete ground truth get the same transform.
Dataset apply_preprocessor(const Dataset& data, const std::vector<VariableSpec>& specs);

/// Linear interpolation between closest ranks (numpy's default percentile).
double percentile(std::vector<double> values, double pct);

struct SyntheticSpec {
  std::size_t n_samples = 1000;
  Eigen::Index steps = 24;
  Eigen::Index dims = 8;
  Eigen::Index latent_dim = 3;
  double missing_rate = 0.6;
  double class_balance = 0.2;
  double noise_std = 0.1;
  std::uint64_t seed = 1;

  void validate() const;
};

SyntheticSpec parse_synthetic_spec(const std::string& json_text);
std::string to_json(const SyntheticSpec& spec);

/// Linear-Gaussian latent dynamics observed through a random linear map.
///
/// a_t = A a_{t-1} + w_t,  x_t = B a_t + noise_std * e_t, on a unit-hour grid.
/// The label is Bernoulli(sigmoid(k * <w, a_T> + b)) with b chosen so the
/// expected positive rate matches class_balance. Entries are removed i.i.d.
/// at missing_rate; the complete series is kept in x_full.
Dataset generate_synthetic(const SyntheticSpec& spec);

/// Loads every container file (*.ugss) in `dir`, in name order, and checks
/// that step count and variables agree across files.
Dataset load_gridded_matrix(const std::filesystem::path& dir);

}  // namespace ugss::ingest
