#include "ugss/gru_u.hpp"

#include <array>

namespace ugss::gru {

namespace {

GateWeights make_gate(const std::string& name, Eigen::Index in, Eigen::Index hidden, Rng& rng) {
  return {nn::uniform_weight(name + ".w", in, hidden, rng),
          nn::uniform_weight(name + ".u", hidden, hidden, rng), nn::zeros(name + ".b", 1, hidden)};
}

void collect_gate(GateWeights& g, std::vector<Parameter*>& out) {
  out.push_back(&g.w);
  out.push_back(&g.u);
  out.push_back(&g.b);
}

}  // namespace

GruParams::GruParams(const std::string& prefix, Eigen::Index in, Eigen::Index hidden, Rng& rng)
    : reset(make_gate(prefix + ".reset", in, hidden, rng)),
      update(make_gate(prefix + ".update", in, hidden, rng)),
      candidate(make_gate(prefix + ".candidate", in, hidden, rng)) {}

void GruParams::collect(std::vector<Parameter*>& out) {
  collect_gate(reset, out);
  collect_gate(update, out);
  collect_gate(candidate, out);
}

GruUParams::GruUParams(const std::string& prefix, Eigen::Index feature_x, Eigen::Index dims,
                       Eigen::Index feature_z, Eigen::Index hidden, WeightMode alpha_mode,
                       AlphaInput alpha_input, Rng& rng)
    : w_alpha(nn::uniform_weight(prefix + ".w_alpha", dims, dims, rng,
                                 alpha_mode == WeightMode::diagonal ? nn::diagonal_mask(dims)
                                                                    : ad::Matrix{})),
      b_alpha(nn::zeros(prefix + ".b_alpha", 1, dims)),
      core(prefix, feature_x + dims + feature_z, hidden, rng),
      v_r(nn::uniform_weight(prefix + ".reset.v", dims, hidden, rng)),
      v_u(nn::uniform_weight(prefix + ".update.v", dims, hidden, rng)),
      v_h(nn::uniform_weight(prefix + ".candidate.v", dims, hidden, rng)) {
  if (alpha_input == AlphaInput::multiply) {
    alpha_projection = nn::uniform_weight(prefix + ".alpha_projection", feature_x, dims, rng);
  }
}

void GruUParams::collect(std::vector<Parameter*>& out) {
  out.push_back(&w_alpha);
  out.push_back(&b_alpha);
  core.collect(out);
  out.push_back(&v_r);
  out.push_back(&v_u);
  out.push_back(&v_h);
  if (alpha_projection) out.push_back(&*alpha_projection);
}

Var attention_weights(Tape& tape, const GruUParams& p, const Var& u) {
  return ad::neg_exp_relu(
      ad::add_row(ad::matmul(u, tape.parameter(p.w_alpha)), tape.parameter(p.b_alpha)));
}

Var gru_u_step(Tape& tape, const GruUParams& p, const Var& fx, const Var& alpha, const Var& fz,
               const Var& h_prev, const Var& mask) {
  Var gated = alpha;
  if (p.alpha_projection) gated = ad::mul(alpha, ad::matmul(fx, tape.parameter(*p.alpha_projection)));
  const std::array<Var, 3> parts{fx, gated, fz};
  const Var input = ad::concat_cols(parts);

  auto gate_sum = [&](const GateWeights& g, const Parameter& v, const Var& recurrent) {
    const Var in_term = ad::matmul(input, tape.parameter(g.w));
    const Var h_term = ad::matmul(recurrent, tape.parameter(g.u));
    const Var m_term = ad::matmul(mask, tape.parameter(v));
    return ad::add_row(ad::add(ad::add(in_term, h_term), m_term), tape.parameter(g.b));
  };
  const Var r = ad::sigmoid(gate_sum(p.core.reset, p.v_r, h_prev));
  const Var g = ad::sigmoid(gate_sum(p.core.update, p.v_u, h_prev));
  const Var candidate = ad::tanh(gate_sum(p.core.candidate, p.v_h, ad::mul(r, h_prev)));
  return ad::add(ad::mul(ad::one_minus(g), h_prev), ad::mul(g, candidate));
}

Var vanilla_gru_step(Tape& tape, const GruParams& p, const Var& input, const Var& h_prev) {
  auto gate_sum = [&](const GateWeights& g, const Var& recurrent) {
    const Var in_term = ad::matmul(input, tape.parameter(g.w));
    const Var h_term = ad::matmul(recurrent, tape.parameter(g.u));
    return ad::add_row(ad::add(in_term, h_term), tape.parameter(g.b));
  };
  const Var r = ad::sigmoid(gate_sum(p.reset, h_prev));
  const Var g = ad::sigmoid(gate_sum(p.update, h_prev));
  const Var candidate = ad::tanh(gate_sum(p.candidate, ad::mul(r, h_prev)));
  return ad::add(ad::mul(ad::one_minus(g), h_prev), ad::mul(g, candidate));
}

}  // namespace ugss::gru
