#pragma once

// The stochastic backbone of one recurrent step: feature extractors, the
// prior / inference / generation networks, reparameterised sampling and the
// closed-form diagonal-Gaussian divergences.

#include "ugss/config.hpp"
#include "ugss/layers.hpp"

#include <vector>

namespace ugss::vrnn {

using ad::Parameter;
using ad::Tape;
using ad::Var;

/// Diagonal Gaussian as (mean, log-variance) nodes, both B×k.
struct GaussianParams {
  Var mean;
  Var log_var;
};

/// Stack of [affine -> normalisation -> ReLU] layers followed by an affine
/// head producing a mean and a clamped log-variance.
class GaussianMlp {
 public:
  GaussianMlp() = default;
  GaussianMlp(const std::string& name, Eigen::Index in, const std::vector<int>& hidden,
              Eigen::Index out, Normalization norm, double logvar_clamp, Rng& rng);

  GaussianParams operator()(Tape& tape, const Var& input) const;

  Eigen::Index out_dim() const { return out_; }
  nn::Dense& head() { return head_; }
  std::vector<nn::Dense>& hidden_layers() { return layers_; }
  void collect(std::vector<Parameter*>& out);

 private:
  std::vector<nn::Dense> layers_;
  std::vector<nn::LayerNorm> norms_;
  nn::Dense head_;
  Eigen::Index out_ = 0;
  double logvar_clamp_ = 10.0;
};

struct VrnnDims {
  Eigen::Index inputs = 0;  // D
  Eigen::Index hidden = 0;  // H
  Eigen::Index latent = 0;
  Eigen::Index feature_x = 0;
  Eigen::Index feature_z = 0;
  std::vector<int> mlp_hidden;
  Normalization norm = Normalization::layer;
  double logvar_clamp = 10.0;

  static VrnnDims from_config(const ExperimentConfig& c, Eigen::Index inputs);
};

/// F^x, F^z, F^prior, F^inf and F^gen for one direction.
struct VrnnNetworks {
  nn::Dense feature_x;
  nn::Dense feature_z;
  GaussianMlp prior_net;
  GaussianMlp inference_net;
  GaussianMlp generation_net;

  VrnnNetworks() = default;
  VrnnNetworks(const std::string& prefix, const VrnnDims& dims, Rng& rng);

  /// tanh(x W + b)
  Var extract_x(Tape& tape, const Var& x) const;
  Var extract_z(Tape& tape, const Var& z) const;

  GaussianParams prior(Tape& tape, const Var& h_prev) const;
  GaussianParams infer_posterior(Tape& tape, const Var& x_tilde, const Var& h_prev) const;
  GaussianParams infer_posterior_from_features(Tape& tape, const Var& fx, const Var& h_prev) const;
  GaussianParams generate(Tape& tape, const Var& z, const Var& h_prev) const;
  GaussianParams generate_from_features(Tape& tape, const Var& fz, const Var& h_prev) const;

  void collect(std::vector<Parameter*>& out);
};

/// z = mean + exp(log_var / 2) * noise
Var sample_latent(const GaussianParams& params, const Var& noise);

/// exp(log_var / 2)
Var standard_deviation(const GaussianParams& params);

/// Per-row KL(q || p) between diagonal Gaussians, as a B×1 column.
Var kl_gaussians(const GaussianParams& q, const GaussianParams& p);

/// Per-row negative log-density of x under a diagonal Gaussian, counting only
/// entries where `weight` is nonzero (weighted by it). B×1 column.
Var gaussian_nll(const Var& x, const GaussianParams& p, const Var& weight);

}  // namespace ugss::vrnn
