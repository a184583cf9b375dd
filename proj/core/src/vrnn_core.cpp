#include "ugss/vrnn_core.hpp"

#include <array>
#include <numbers>

namespace ugss::vrnn {

GaussianMlp::GaussianMlp(const std::string& name, Eigen::Index in, const std::vector<int>& hidden,
                         Eigen::Index out, Normalization norm, double logvar_clamp, Rng& rng)
    : out_(out), logvar_clamp_(logvar_clamp) {
  Eigen::Index width = in;
  for (std::size_t i = 0; i < hidden.size(); ++i) {
    const std::string layer = name + ".l" + std::to_string(i);
    layers_.emplace_back(layer, width, hidden[i], rng);
    if (norm == Normalization::layer) norms_.emplace_back(layer + ".norm", hidden[i]);
    width = hidden[i];
  }
  head_ = nn::Dense(name + ".head", width, 2 * out, rng);
}

GaussianParams GaussianMlp::operator()(Tape& tape, const Var& input) const {
  Var x = input;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    x = layers_[i](tape, x);
    if (!norms_.empty()) x = norms_[i](tape, x);
    x = ad::relu(x);
  }
  const Var out = head_(tape, x);
  return {ad::slice_cols(out, 0, out_),
          ad::clamp(ad::slice_cols(out, out_, out_), -logvar_clamp_, logvar_clamp_)};
}

void GaussianMlp::collect(std::vector<Parameter*>& out) {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    layers_[i].collect(out);
    if (!norms_.empty()) norms_[i].collect(out);
  }
  head_.collect(out);
}

VrnnDims VrnnDims::from_config(const ExperimentConfig& c, Eigen::Index inputs) {
  VrnnDims d;
  d.inputs = inputs;
  d.hidden = c.hidden_dim;
  d.latent = c.latent_dim;
  d.feature_x = c.feature_x_dim;
  d.feature_z = c.feature_z_dim;
  d.mlp_hidden = c.mlp_hidden;
  d.norm = c.normalization;
  d.logvar_clamp = c.logvar_clamp;
  return d;
}

VrnnNetworks::VrnnNetworks(const std::string& prefix, const VrnnDims& d, Rng& rng)
    : feature_x(prefix + ".feature_x", d.inputs, d.feature_x, rng),
      feature_z(prefix + ".feature_z", d.latent, d.feature_z, rng),
      prior_net(prefix + ".prior", d.hidden, d.mlp_hidden, d.latent, d.norm, d.logvar_clamp, rng),
      inference_net(prefix + ".inference", d.feature_x + d.hidden, d.mlp_hidden, d.latent, d.norm,
                    d.logvar_clamp, rng),
      generation_net(prefix + ".generation", d.feature_z + d.hidden, d.mlp_hidden, d.inputs, d.norm,
                     d.logvar_clamp, rng) {}

Var VrnnNetworks::extract_x(Tape& tape, const Var& x) const { return ad::tanh(feature_x(tape, x)); }

Var VrnnNetworks::extract_z(Tape& tape, const Var& z) const { return ad::tanh(feature_z(tape, z)); }

GaussianParams VrnnNetworks::prior(Tape& tape, const Var& h_prev) const {
  return prior_net(tape, h_prev);
}

GaussianParams VrnnNetworks::infer_posterior(Tape& tape, const Var& x_tilde, const Var& h_prev) const {
  return infer_posterior_from_features(tape, extract_x(tape, x_tilde), h_prev);
}

GaussianParams VrnnNetworks::infer_posterior_from_features(Tape& tape, const Var& fx,
                                                           const Var& h_prev) const {
  const std::array<Var, 2> parts{fx, h_prev};
  return inference_net(tape, ad::concat_cols(parts));
}

GaussianParams VrnnNetworks::generate(Tape& tape, const Var& z, const Var& h_prev) const {
  return generate_from_features(tape, extract_z(tape, z), h_prev);
}

GaussianParams VrnnNetworks::generate_from_features(Tape& tape, const Var& fz, const Var& h_prev) const {
  const std::array<Var, 2> parts{fz, h_prev};
  return generation_net(tape, ad::concat_cols(parts));
}

void VrnnNetworks::collect(std::vector<Parameter*>& out) {
  feature_x.collect(out);
  feature_z.collect(out);
  prior_net.collect(out);
  inference_net.collect(out);
  generation_net.collect(out);
}

Var standard_deviation(const GaussianParams& p) { return ad::exp(ad::scale(p.log_var, 0.5)); }

Var sample_latent(const GaussianParams& p, const Var& noise) {
  return ad::add(p.mean, ad::mul(standard_deviation(p), noise));
}

Var kl_gaussians(const GaussianParams& q, const GaussianParams& p) {
  // 1/2 [ lv_p - lv_q + (exp(lv_q) + (mu_q - mu_p)^2) exp(-lv_p) - 1 ]
  const Var inv_var_p = ad::exp(ad::scale(p.log_var, -1.0));
  const Var spread = ad::add(ad::exp(q.log_var), ad::square(ad::sub(q.mean, p.mean)));
  const Var terms = ad::add_scalar(
      ad::add(ad::sub(p.log_var, q.log_var), ad::mul(spread, inv_var_p)), -1.0);
  return ad::scale(ad::row_sum(terms), 0.5);
}

Var gaussian_nll(const Var& x, const GaussianParams& p, const Var& weight) {
  const double log_2pi = std::log(2.0 * std::numbers::pi);
  const Var sq = ad::mul(ad::square(ad::sub(x, p.mean)), ad::exp(ad::scale(p.log_var, -1.0)));
  const Var per_entry = ad::scale(ad::add_scalar(ad::add(p.log_var, sq), log_2pi), 0.5);
  return ad::row_sum(ad::mul(per_entry, weight));
}

}  // namespace ugss::vrnn
