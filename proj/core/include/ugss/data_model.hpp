#pragma once

// Core data types shared by every stage: one patient's masked multivariate
// series, a padded mini-batch, and a named dataset.

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ugss {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Input that violates a documented precondition.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Training-set statistics for one variable.
struct VariableSpec {
  std::string name;
  double winsor_low = 0.0;
  double winsor_high = 0.0;
  double mean = 0.0;
  double std = 1.0;

  friend bool operator==(const VariableSpec&, const VariableSpec&) = default;
};

/// One patient. All T×D matrices are indexed (time, variable).
///
/// Unobserved entries of `x_tilde` are exactly zero. Entries that were
/// artificially held out for imputation scoring have imp_mask = 1, mask = 0,
/// and their ground truth in `x_truth` (zero elsewhere). `x_full`, when
/// non-empty, holds the complete ground-truth series (synthetic data only).
struct TimeSeriesSample {
  Matrix x_tilde;
  Matrix mask;
  Matrix delta;
  Vector timestamps;
  int label = 0;
  Matrix imp_mask;
  Matrix x_truth;
  Matrix x_full;
  std::int64_t record_id = 0;

  Eigen::Index steps() const { return x_tilde.rows(); }
  Eigen::Index dims() const { return x_tilde.cols(); }
  Eigen::Index observed_count() const;
  Eigen::Index held_out_count() const;
};

/// Builds a sample from raw observations; x_tilde is zeroed where mask = 0,
/// delta is computed, and imp_mask / x_truth start empty (all zero).
TimeSeriesSample make_sample(Matrix values, Matrix mask, Vector timestamps, int label,
                             std::int64_t record_id = 0);

/// Throws ValidationError describing the first broken invariant.
void validate(const TimeSeriesSample& sample);

/// Time since the last observation of each variable, on a shared clock.
///
/// delta(0, d) = 1; for t > 0 the gap s_t - s_{t-1} is added to delta(t-1, d)
/// when variable d was unobserved at t-1, and replaces it otherwise.
Matrix compute_time_intervals(const Vector& timestamps, const Matrix& mask);

/// Holds out ceil(ratio * #observed) observed entries, chosen uniformly
/// without replacement. Deterministic for a fixed seed.
TimeSeriesSample apply_artificial_masking(const TimeSeriesSample& sample, double ratio,
                                          std::uint64_t seed);

/// The same patient read backwards in time. Timestamps are mirrored as
/// s'_k = s_{L-1} - s_{L-1-k} and delta is recomputed on the mirrored clock.
TimeSeriesSample reverse_in_time(const TimeSeriesSample& sample);

struct Dataset {
  std::vector<TimeSeriesSample> samples;
  std::vector<std::string> variable_names;
  /// Empty for raw data; otherwise the statistics the values were normalised with.
  std::vector<VariableSpec> normalization;

  std::size_t size() const { return samples.size(); }
  Eigen::Index dims() const { return static_cast<Eigen::Index>(variable_names.size()); }
  Eigen::Index max_steps() const;
  double missing_rate() const;
  std::size_t positives() const;
};

Dataset subset(const Dataset& data, std::span<const std::size_t> indices);

/// Masks every sample that has at least one observation; the per-sample seed
/// is derived from `seed` and the sample's position.
Dataset apply_artificial_masking(const Dataset& data, double ratio, std::uint64_t seed);

/// Samples padded to a common length, split per time step.
///
/// Each per-step matrix is B×D (B×1 for `valid`). Padded steps carry
/// mask = 0, imp_mask = 0 and valid = 0.
struct Batch {
  Eigen::Index size = 0;
  Eigen::Index steps = 0;
  Eigen::Index dims = 0;
  std::vector<Matrix> x_tilde;
  std::vector<Matrix> mask;
  std::vector<Matrix> delta;
  std::vector<Matrix> imp_mask;
  std::vector<Matrix> x_truth;
  std::vector<Matrix> valid;
  Eigen::VectorXi lengths;
  Vector labels;
};

Batch make_batch(std::span<const TimeSeriesSample* const> samples);
Batch make_batch(const Dataset& data, std::span<const std::size_t> indices, bool reversed = false);

}  // namespace ugss
