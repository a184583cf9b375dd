#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ugss {

enum class CellType { gru_u, vanilla_gru };
enum class WeightMode { diagonal, full };
enum class AlphaInput { concat, multiply };
enum class Normalization { layer, none };

/// Every hyperparameter of a run. Serialised as a flat JSON object whose
/// keys are the field names below; unknown keys are rejected.
struct ExperimentConfig {
  // architecture
  int latent_dim = 16;
  std::vector<int> mlp_hidden = {32, 16};
  int hidden_dim = 64;
  int feature_x_dim = 32;
  int feature_z_dim = 32;
  int conv_channels = 2;
  Normalization normalization = Normalization::layer;
  double logvar_clamp = 10.0;
  CellType cell = CellType::gru_u;
  WeightMode w_alpha = WeightMode::diagonal;
  WeightMode w_gamma = WeightMode::diagonal;
  AlphaInput alpha_input = AlphaInput::concat;
  bool bidirectional = true;
  int latent_samples = 1;

  // composite loss
  double lambda_vrnn = 1e-5;
  double lambda_cons = 1.0;
  double lambda_imp = 1e-2;
  double focal_w1 = 0.25;
  double focal_w2 = 5.0;
  bool imp_per_sample_norm = true;

  // optimisation
  double learning_rate = 1e-3;
  double lr_decay = 0.5;
  int lr_patience = 10;
  int epochs = 80;
  int batch_size = 64;
  double grad_clip = 0.0;

  // data protocol
  double masking_ratio = 0.05;
  int folds = 5;
  std::vector<int> run_folds;
  double val_fraction = 0.2;
  double winsor_low = 1.0;
  double winsor_high = 99.0;

  std::uint64_t seed = 1;

  /// Throws ValidationError on out-of-range values.
  void validate() const;
};

ExperimentConfig parse_config(const std::string& json_text);
std::string to_json(const ExperimentConfig& config);

std::string to_string(CellType c);
std::string to_string(WeightMode m);

}  // namespace ugss
