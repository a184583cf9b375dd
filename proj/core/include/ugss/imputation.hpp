#pragma once

// Turns the reconstruction distribution into final imputations and their
// uncertainties: temporal decay, history blending, cross-feature regression,
// a width-1 convolution with channel max-pooling, observed-value overwrite.

#include "ugss/config.hpp"
#include "ugss/layers.hpp"

namespace ugss::impute {

using ad::Parameter;
using ad::Tape;
using ad::Var;

/// All weights act on row vectors (x W). `w_gamma` is diagonal-masked unless
/// configured full; `w_x` always carries a zero-diagonal mask so component d
/// of the feature-correlation estimate never reads mu_x^d.
struct DecayParams {
  Parameter w_gamma;  // D×D
  Parameter b_gamma;  // 1×D
  Parameter w_beta;   // 2D×D, input is concat(gamma, mask)
  Parameter b_beta;   // 1×D
  Parameter w_x;      // D×D, zero diagonal
  Parameter b_x;      // 1×D
  Parameter conv_kernel;  // 2×C: row 0 weights c, row 1 weights c~
  Parameter conv_bias;    // 1×C

  DecayParams() = default;
  DecayParams(const std::string& prefix, Eigen::Index dims, Eigen::Index channels, WeightMode gamma_mode,
              Rng& rng);

  Eigen::Index dims() const { return b_gamma.value.cols(); }
  Eigen::Index channels() const { return conv_kernel.value.cols(); }
  void collect(std::vector<Parameter*>& out);
};

/// gamma = exp(-max(0, delta W_gamma + b_gamma)), in (0, 1].
Var temporal_decay(Tape& tape, const DecayParams& p, const Var& delta);

/// beta = sigmoid(concat(gamma, m) W_beta + b_beta);
/// c = beta * x_tilde + (1 - beta) * mu_x.
Var blend_history(Tape& tape, const DecayParams& p, const Var& x_tilde, const Var& mu_x,
                  const Var& gamma, const Var& mask);

/// c~ = mu_x W_x + b_x with diag(W_x) = 0.
Var feature_correlation(Tape& tape, const DecayParams& p, const Var& mu_x);

/// Stacks (c, c~) as two channels per position, applies the 2->C width-1
/// convolution and max-pools across the C output channels.
Var combine(Tape& tape, const DecayParams& p, const Var& c, const Var& c_tilde);

/// x_hat = m * x_tilde + (1 - m) * c_hat. Observed entries pass through
/// bit-exactly.
Var finalize_imputation(const Var& x_tilde, const Var& mask, const Var& c_hat);

/// u = (1 - m) * sigma_x.
Var extract_uncertainty(const Var& mask, const Var& sigma_x);

}  // namespace ugss::impute
