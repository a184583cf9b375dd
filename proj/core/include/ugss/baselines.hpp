#pragma once

// Zero- and mean-imputation followed by a plain GRU classifier.

#include "ugss/gru_u.hpp"
#include "ugss/training.hpp"

namespace ugss::baseline {

enum class Method { zero, mean };
Method parse_method(const std::string& name);
std::string to_string(Method m);

/// Missing entries stay 0.
Matrix zero_impute(const TimeSeriesSample& sample);
/// Missing entries take the per-variable mean `means(d)`.
Matrix mean_impute(const TimeSeriesSample& sample, const Vector& means);
/// Per-variable mean of the observed entries of `data` (0 for a variable
/// that is never observed).
Vector observed_means(const Dataset& data);

Matrix impute(const TimeSeriesSample& sample, Method method, const Vector& means);

struct BaselineGru {
  gru::GruParams gru;      // input width D
  ad::Parameter w_out;     // H×1
  Method method = Method::zero;
  Vector means;            // fill values for Method::mean

  BaselineGru(const ExperimentConfig& config, Eigen::Index dims, Method method, Vector means, std::uint64_t seed);
  std::vector<ad::Parameter*> parameters();
  std::vector<const ad::Parameter*> parameters() const;
};

/// Logits (B×1) of the GRU run over imputed inputs; padded steps freeze h.
ad::Var forward_logits(ad::Tape& tape, const BaselineGru& model, const Batch& imputed);

struct BaselinePrediction {
  std::vector<double> probabilities;
  std::vector<Matrix> x_hat;
};
BaselinePrediction predict(const BaselineGru& model, const Dataset& data, int batch_size = 64);

struct BaselineResult {
  BaselineGru model;
  std::vector<train::EpochRecord> history;  // only the cls terms are populated
  int best_epoch = 0;
};

/// Trains on the focal classification loss only, with the same optimiser,
/// schedule and validation-AUC model selection as the main model.
BaselineResult baseline_gru_train(const ExperimentConfig& config, Method method, const Dataset& train,
                                  const Dataset& val, const train::EpochCallback& on_epoch = {});

train::TestMetrics evaluate_baseline(const BaselineGru& model, const Dataset& data);

using BaselineFoldCallback =
    std::function<void(int fold, const BaselineResult&, const train::PreparedFold&, const train::FoldReport&)>;

/// The cross-validation protocol of train::cross_validate (same masking,
/// folds and preprocessing for a given config) with the baseline model.
train::CvReport baseline_cross_validate(const ExperimentConfig& config, Method method, const Dataset& raw,
                                        const BaselineFoldCallback& on_fold = {});

void save_baseline(const std::filesystem::path& path, const BaselineGru& model,
                   const std::vector<std::string>& variables, const std::vector<VariableSpec>& normalization,
                   const ExperimentConfig& config);

}  // namespace ugss::baseline
