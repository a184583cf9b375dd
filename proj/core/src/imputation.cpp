#include "ugss/imputation.hpp"

#include <array>
#include <vector>

namespace ugss::impute {

DecayParams::DecayParams(const std::string& prefix, Eigen::Index dims, Eigen::Index channels,
                         WeightMode gamma_mode, Rng& rng)
    : w_gamma(nn::uniform_weight(prefix + ".w_gamma", dims, dims, rng,
                                 gamma_mode == WeightMode::diagonal ? nn::diagonal_mask(dims)
                                                                    : ad::Matrix{})),
      b_gamma(nn::zeros(prefix + ".b_gamma", 1, dims)),
      w_beta(nn::uniform_weight(prefix + ".w_beta", 2 * dims, dims, rng)),
      b_beta(nn::zeros(prefix + ".b_beta", 1, dims)),
      w_x(nn::uniform_weight(prefix + ".w_x", dims, dims, rng, nn::off_diagonal_mask(dims))),
      b_x(nn::zeros(prefix + ".b_x", 1, dims)),
      conv_kernel(nn::uniform_weight(prefix + ".conv_kernel", 2, channels, rng)),
      conv_bias(nn::zeros(prefix + ".conv_bias", 1, channels)) {}

void DecayParams::collect(std::vector<Parameter*>& out) {
  for (Parameter* p : {&w_gamma, &b_gamma, &w_beta, &b_beta, &w_x, &b_x, &conv_kernel, &conv_bias}) {
    out.push_back(p);
  }
}

Var temporal_decay(Tape& tape, const DecayParams& p, const Var& delta) {
  return ad::neg_exp_relu(
      ad::add_row(ad::matmul(delta, tape.parameter(p.w_gamma)), tape.parameter(p.b_gamma)));
}

Var blend_history(Tape& tape, const DecayParams& p, const Var& x_tilde, const Var& mu_x,
                  const Var& gamma, const Var& mask) {
  const std::array<Var, 2> parts{gamma, mask};
  const Var beta = ad::sigmoid(
      ad::add_row(ad::matmul(ad::concat_cols(parts), tape.parameter(p.w_beta)), tape.parameter(p.b_beta)));
  return ad::add(ad::mul(beta, x_tilde), ad::mul(ad::one_minus(beta), mu_x));
}

Var feature_correlation(Tape& tape, const DecayParams& p, const Var& mu_x) {
  return ad::add_row(ad::matmul(mu_x, tape.parameter(p.w_x)), tape.parameter(p.b_x));
}

Var combine(Tape& tape, const DecayParams& p, const Var& c, const Var& c_tilde) {
  const Var kernel = tape.parameter(p.conv_kernel);
  const Var bias = tape.parameter(p.conv_bias);
  std::vector<Var> channels;
  channels.reserve(static_cast<std::size_t>(p.channels()));
  for (Eigen::Index k = 0; k < p.channels(); ++k) {
    const Var mixed = ad::add(ad::scale_by(c, ad::element(kernel, 0, k)),
                              ad::scale_by(c_tilde, ad::element(kernel, 1, k)));
    channels.push_back(ad::shift_by(mixed, ad::element(bias, 0, k)));
  }
  return ad::max_elementwise(channels);
}

namespace {

// where(mask != 0, on, off), routing gradients by the mask.
Var select(const Var& mask, const Var& on, const Var& off) {
  const ad::Matrix& m = mask.value();
  ad::Matrix out = on.value();
  for (Eigen::Index j = 0; j < out.cols(); ++j)
    for (Eigen::Index i = 0; i < out.rows(); ++i)
      if (m(i, j) == 0.0) out(i, j) = off.value()(i, j);
  Tape& tape = *mask.tape();
  const int im = mask.id(), ion = on.id(), ioff = off.id();
  const bool grad = tape.requires_grad(ion) || tape.requires_grad(ioff);
  return tape.push(std::move(out), grad, [im, ion, ioff](Tape& tp, int, const ad::Matrix& g) {
    const ad::Matrix keep = (tp.value(im).array() != 0.0).cast<double>();
    if (tp.requires_grad(ion)) tp.accumulate_expr(ion, g.cwiseProduct(keep));
    if (tp.requires_grad(ioff)) tp.accumulate_expr(ioff, ad::Matrix(g.array() * (1.0 - keep.array())));
  });
}

}  // namespace

Var finalize_imputation(const Var& x_tilde, const Var& mask, const Var& c_hat) {
  return select(mask, x_tilde, c_hat);
}

Var extract_uncertainty(const Var& mask, const Var& sigma_x) {
  Tape& tape = *mask.tape();
  const Var zero = tape.constant(ad::Matrix::Zero(sigma_x.rows(), sigma_x.cols()));
  return select(mask, zero, sigma_x);
}

}  // namespace ugss::impute
