#pragma once

// Training loop, model selection, stratified cross-validation, checkpoints
// and run manifests.

#include "ugss/evaluation.hpp"
#include "ugss/model.hpp"

#include <filesystem>
#include <functional>
#include <optional>

namespace ugss::train {

/// Loss exceeded the divergence bound or became non-finite.
class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kDivergenceBound = 1e6;

struct EpochRecord {
  int epoch = 0;             // 1-based
  LossBreakdown loss;        // mean over mini-batches
  double val_auc = 0.0;      // NaN when undefined
  double val_auprc = 0.0;    // NaN when undefined
  double val_mae = 0.0;      // NaN when undefined
  double learning_rate = 0.0;
  double seconds = 0.0;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

struct TrainResult {
  UgssModel model;  // parameters of the selected epoch
  std::vector<EpochRecord> history;
  int best_epoch = 0;
  double best_score = 0.0;
};

/// Optimises every parameter jointly on the composite loss with RAdam.
/// After each epoch the model is scored on `val`; the epoch with the best
/// validation AUC is kept (falling back to lowest validation MAE, then
/// lowest training loss, when AUC is undefined). The learning rate is
/// multiplied by lr_decay after lr_patience epochs without improvement.
TrainResult train(const ExperimentConfig& config, const Dataset& train, const Dataset& val,
                  const EpochCallback& on_epoch = {});

struct TestMetrics {
  std::optional<double> auc;
  std::optional<double> auprc;
  std::optional<double> mae;
  std::optional<eval::Correlation> correlation;
  std::size_t samples = 0;
};

/// Metrics of deterministic predictions; undefined metrics are left empty.
TestMetrics evaluate_model(const UgssModel& model, const Dataset& data);
TestMetrics score_predictions(const Dataset& data, std::span<const double> probabilities,
                              std::span<const Matrix> x_hat, std::span<const Matrix> uncertainty);

struct FoldSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

/// Stratified K-fold split. Each fold's remaining samples are split again,
/// stratified, into train and validation (`val_fraction` of each class).
std::vector<FoldSplit> make_folds(std::span<const int> labels, int folds, double val_fraction, std::uint64_t seed);

std::string folds_to_json(const std::vector<FoldSplit>& folds);
std::vector<FoldSplit> folds_from_json(const std::string& text);

/// Applies artificial masking with `ratio` unless the data already holds
/// out entries.
Dataset ensure_masked(const Dataset& data, double ratio, std::uint64_t seed);

struct PreparedFold {
  Dataset train;
  Dataset val;
  Dataset test;
  std::vector<VariableSpec> specs;
};

/// Splits masked data and normalises every part with statistics fitted on
/// the training part only. Data that already carries normalisation is split
/// as is.
PreparedFold prepare_fold(const Dataset& masked, const FoldSplit& split, const ExperimentConfig& config);

struct FoldReport {
  int fold = 0;
  TestMetrics test;
  int best_epoch = 0;
  std::vector<EpochRecord> history;
};

struct CvReport {
  std::vector<FoldReport> folds;
  std::optional<eval::MeanStd> auc;
  std::optional<eval::MeanStd> auprc;
  std::optional<eval::MeanStd> mae;
};

/// Called after each fold with the trained model and the prepared data.
using FoldCallback = std::function<void(int fold, const TrainResult&, const PreparedFold&, const FoldReport&)>;

/// Masks, splits, preprocesses, trains and tests each fold listed in
/// config.run_folds (all folds when empty).
CvReport cross_validate(const ExperimentConfig& config, const Dataset& raw, const FoldCallback& on_fold = {},
                        const EpochCallback& on_epoch = {});

void aggregate(CvReport& report);

// ---- persistence -----------------------------------------------------------

/// Checkpoint: every parameter under its qualified name plus a meta object
/// {"kind": "ugss-checkpoint", "format_version", "dims", "config",
/// "variables", "normalization"}.
void save_checkpoint(const std::filesystem::path& path, const UgssModel& model,
                     const std::vector<std::string>& variables, const std::vector<VariableSpec>& normalization);

struct LoadedCheckpoint {
  std::unique_ptr<UgssModel> model;
  ExperimentConfig config;
  std::vector<std::string> variables;
  std::vector<VariableSpec> normalization;
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

std::string normalization_to_json(const std::vector<VariableSpec>& specs);
std::vector<VariableSpec> normalization_from_json(const std::string& text);

std::string history_to_json(const std::vector<EpochRecord>& history);
std::string metrics_to_json(const TestMetrics& m);
std::string report_to_json(const CvReport& report);

/// `git rev-parse HEAD` of the working directory, or "unknown".
std::string git_revision();

/// {"config", "seed", "git_revision", "optimizer", "folds", "per_epoch", "metrics"}
void write_run_manifest(const std::filesystem::path& path, const ExperimentConfig& config, const CvReport& report,
                        const std::string& model_kind);

}  // namespace ugss::train
