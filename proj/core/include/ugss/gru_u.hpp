#pragma once

// GRU-U: a gated recurrent cell whose gates also read uncertainty-derived
// attention weights and the observation mask.

#include "ugss/config.hpp"
#include "ugss/layers.hpp"

#include <optional>

namespace ugss::gru {

using ad::Parameter;
using ad::Tape;
using ad::Var;

/// One gate's input-to-hidden (in×H), hidden-to-hidden (H×H) weights and bias.
struct GateWeights {
  Parameter w;
  Parameter u;
  Parameter b;
};

/// Parameters of a plain GRU over an input of width `in`.
struct GruParams {
  GateWeights reset;
  GateWeights update;
  GateWeights candidate;

  GruParams() = default;
  GruParams(const std::string& prefix, Eigen::Index in, Eigen::Index hidden, Rng& rng);

  Eigen::Index input_width() const { return reset.w.value.rows(); }
  Eigen::Index hidden() const { return reset.u.value.rows(); }
  void collect(std::vector<Parameter*>& out);
};

struct GruUParams {
  Parameter w_alpha;  // D×D, diagonal-masked unless configured full
  Parameter b_alpha;  // 1×D
  GruParams core;     // input width = |fx| + D + |fz|
  Parameter v_r;      // D×H, mask -> reset gate
  Parameter v_u;      // D×H, mask -> update gate
  Parameter v_h;      // D×H, mask -> candidate
  /// |fx|×D projection used only with AlphaInput::multiply.
  std::optional<Parameter> alpha_projection;

  GruUParams() = default;
  GruUParams(const std::string& prefix, Eigen::Index feature_x, Eigen::Index dims, Eigen::Index feature_z,
             Eigen::Index hidden, WeightMode alpha_mode, AlphaInput alpha_input, Rng& rng);

  Eigen::Index dims() const { return b_alpha.value.cols(); }
  void collect(std::vector<Parameter*>& out);
};

/// alpha = exp(-max(0, u W_alpha + b_alpha)), in (0, 1].
Var attention_weights(Tape& tape, const GruUParams& p, const Var& u);

/// One GRU-U update. The cell input is concat(fx, alpha, fz) (or, with an
/// alpha projection, concat(fx, alpha * (fx P), fz)); gates are logistic
/// and the candidate is tanh:
///
///   r  = sigmoid(in W_r + h U_r + m V_r + b_r)
///   g  = sigmoid(in W_u + h U_u + m V_u + b_u)
///   h~ = tanh(in W_h + (r * h) U_h + m V_h + b_h)
///   h' = (1 - g) * h + g * h~
Var gru_u_step(Tape& tape, const GruUParams& p, const Var& fx, const Var& alpha, const Var& fz,
               const Var& h_prev, const Var& mask);

/// Standard GRU update over a prepared input.
Var vanilla_gru_step(Tape& tape, const GruParams& p, const Var& input, const Var& h_prev);

}  // namespace ugss::gru
