#pragma once

// Ranking metrics, imputation error, uncertainty-error correlation and
// plot-data emission.

#include "ugss/data_model.hpp"

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ugss::eval {

/// A metric that is not defined for the given input (single class, zero
/// variance, too few points, no held-out entries).
class UndefinedMetric : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Probability that a random positive outscores a random negative; ties
/// count one half.
double auc(std::span<const double> scores, std::span<const int> labels);

/// Average precision: sum over distinct score thresholds (descending) of
/// (recall gain) x (precision at that threshold). Tied scores form one step.
double auprc(std::span<const double> scores, std::span<const int> labels);

/// Mean |x_truth - x_hat| over entries with imp_mask = 1.
double masked_mae(const Matrix& x_truth, const Matrix& x_hat, const Matrix& imp_mask);

/// Pools held-out entries across samples. `x_hat[i]` must match samples[i].
double masked_mae(const Dataset& data, std::span<const Matrix> x_hat);

struct Correlation {
  double r = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;
};

/// Pearson r between the two lists and the two-sided p-value of the
/// t-test against zero correlation.
Correlation pearson(std::span<const double> a, std::span<const double> b);

/// Per-sample MAE and mean uncertainty over each sample's held-out
/// entries; samples without held-out entries are skipped.
struct PerSampleErrors {
  std::vector<double> mae;
  std::vector<double> uncertainty;
  std::vector<std::size_t> sample_index;
};
PerSampleErrors per_sample_errors(const Dataset& data, std::span<const Matrix> x_hat,
                                  std::span<const Matrix> uncertainty);

/// pearson(per-sample MAE, per-sample mean uncertainty); needs >= 3 samples.
Correlation uncertainty_error_correlation(std::span<const double> mae, std::span<const double> uncertainty);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation, 0 for a single value
};
MeanStd mean_std(std::span<const double> values);
double median(std::vector<double> values);

/// Per-variable series for one sample: observed points, the imputed line,
/// the uncertainty band x_hat +/- u at missing steps, held-out truth and the
/// per-variable held-out MAE. Returned as a JSON document.
std::string imputation_plot_data(const TimeSeriesSample& sample, const Matrix& x_hat, const Matrix& uncertainty,
                                 const std::vector<std::string>& variable_names, double probability);

}  // namespace ugss::eval
