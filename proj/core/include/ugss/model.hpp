#pragma once

// The full model: per-direction parameters, the recurrent forward pass, the
// bidirectional composite loss and batched inference.

#include "ugss/data_model.hpp"
#include "ugss/gru_u.hpp"
#include "ugss/imputation.hpp"
#include "ugss/losses.hpp"
#include "ugss/vrnn_core.hpp"

#include <array>
#include <functional>
#include <optional>

namespace ugss::train {

using ad::Parameter;

/// A non-finite value appeared during a forward pass.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Direction { forward = 0, backward = 1 };
std::string to_string(Direction d);

/// Parameters of one direction.
struct DirectionParams {
  vrnn::VrnnNetworks vrnn;
  impute::DecayParams decay;
  std::optional<gru::GruUParams> gru_u;    // cell = gru_u
  std::optional<gru::GruParams> vanilla;  // cell = vanilla_gru, input concat(fx, fz)
  Parameter w_out;                        // H×1, no bias

  DirectionParams() = default;
  DirectionParams(const std::string& prefix, const ExperimentConfig& config, Eigen::Index dims, Rng& rng);
  void collect(std::vector<Parameter*>& out);
};

class UgssModel {
 public:
  UgssModel(const ExperimentConfig& config, Eigen::Index dims, std::uint64_t seed);

  const ExperimentConfig& config() const { return config_; }
  Eigen::Index dims() const { return dims_; }
  bool bidirectional() const { return backward_.has_value(); }

  DirectionParams& forward() { return forward_; }
  const DirectionParams& forward() const { return forward_; }
  DirectionParams& backward() { return *backward_; }
  const DirectionParams& backward() const { return *backward_; }

  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
  Parameter* find(const std::string& name);

 private:
  ExperimentConfig config_;
  Eigen::Index dims_;
  DirectionParams forward_;
  std::optional<DirectionParams> backward_;
};

/// Supplies standard-normal noise of the requested shape for (step, draw).
using NoiseFn = std::function<ad::Matrix(Eigen::Index step, int draw, Eigen::Index rows, Eigen::Index cols)>;
NoiseFn zero_noise();
NoiseFn gaussian_noise(Rng& rng);

/// Per-step nodes of one direction. All B-row.
struct StepVars {
  vrnn::GaussianParams prior;
  vrnn::GaussianParams posterior;
  vrnn::GaussianParams reconstruction;
  Var z;
  Var x_hat;
  Var u;
  Var alpha;
  Var h;
};

struct DirectionPass {
  std::vector<StepVars> steps;
  Var logit;      // B×1, W_o h_T
  Var vrnn_loss;  // 1×1
  Var imp_loss;   // 1×1
  Var cls_loss;   // 1×1, focal loss on this direction's own probability
};

/// Runs one direction over a batch (already time-reversed for the backward
/// direction). Padded steps leave the hidden state unchanged, so the final
/// state is each sample's h at its last valid step.
DirectionPass run_direction(Tape& tape, const ExperimentConfig& config, const DirectionParams& params,
                            const Batch& batch, const NoiseFn& noise, Direction direction);

/// The four loss terms per direction and their weighted total.
struct LossBreakdown {
  std::array<double, 2> vrnn{};
  std::array<double, 2> cons{};
  std::array<double, 2> imp{};
  std::array<double, 2> cls{};
  double total = 0.0;

  /// lambda_vrnn (fwd+bwd vrnn) + lambda_cons (fwd+bwd cons) + lambda_imp (fwd+bwd imp) + (fwd+bwd cls)
  double compose(const ExperimentConfig& config) const;
  LossBreakdown& operator+=(const LossBreakdown& o);
  LossBreakdown& operator/=(double n);
};

struct ForwardResult {
  DirectionPass fwd;
  std::optional<DirectionPass> bwd;
  /// Backward-direction x_hat re-indexed onto forward time.
  std::vector<Var> bwd_x_hat_aligned;
  std::vector<Var> bwd_u_aligned;
  Var consistency;  // 1×1
  Var total;        // 1×1
  Var probability;  // B×1
  LossBreakdown breakdown;
};

/// Forward pass of the whole model with its composite loss. `reversed` must be
/// the time-reversed version of `batch` when the model is bidirectional.
ForwardResult run_model(Tape& tape, const UgssModel& model, const Batch& batch, const Batch* reversed,
                        const NoiseFn& fwd_noise, const NoiseFn& bwd_noise);

/// Re-indexes a stream produced on per-sample reversed time back onto
/// forward time: row i of result[t] is row i of stream[L_i - 1 - t]; rows at
/// t >= L_i are zero.
std::vector<Var> align_reversed(Tape& tape, std::span<const Var> stream, const Eigen::VectorXi& lengths);

/// Per-sample, per-step state, as laid out in StepState.
struct StepState {
  Vector z;
  Vector x_hat;
  Vector u;
  Vector alpha;
  Vector h;
};

struct SamplePrediction {
  double probability = 0.5;
  Matrix x_hat;        // T×D; mean of both directions when bidirectional
  Matrix uncertainty;  // T×D; same averaging
  std::vector<StepState> forward_states;  // only when requested
};

/// Deterministic inference (latent noise fixed at zero, z = posterior mean).
std::vector<SamplePrediction> predict(const UgssModel& model, const Dataset& data, int batch_size = 64,
                                      bool keep_states = false);

}  // namespace ugss::train
