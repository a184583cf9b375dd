#include "ugss/layers.hpp"

#include <cmath>

namespace ugss::nn {

Parameter uniform_weight(std::string name, Eigen::Index in, Eigen::Index out, Rng& rng, Matrix mask) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  return Parameter(std::move(name), rng.uniform_matrix(in, out, -bound, bound), std::move(mask));
}

Parameter zeros(std::string name, Eigen::Index rows, Eigen::Index cols) {
  return Parameter(std::move(name), Matrix::Zero(rows, cols));
}

Parameter constant(std::string name, Eigen::Index rows, Eigen::Index cols, double value) {
  return Parameter(std::move(name), Matrix::Constant(rows, cols, value));
}

Matrix diagonal_mask(Eigen::Index n) { return Matrix::Identity(n, n); }

Matrix off_diagonal_mask(Eigen::Index n) {
  return Matrix::Ones(n, n) - Matrix::Identity(n, n);
}

Dense::Dense(const std::string& name, Eigen::Index in, Eigen::Index out, Rng& rng)
    : weight(uniform_weight(name + ".weight", in, out, rng)), bias(zeros(name + ".bias", 1, out)) {}

Var Dense::operator()(Tape& tape, const Var& x) const {
  return ad::add_row(ad::matmul(x, tape.parameter(weight)), tape.parameter(bias));
}

void Dense::collect(std::vector<Parameter*>& out) {
  out.push_back(&weight);
  out.push_back(&bias);
}

LayerNorm::LayerNorm(const std::string& name, Eigen::Index width)
    : gain(constant(name + ".gain", 1, width, 1.0)), shift(zeros(name + ".shift", 1, width)) {}

Var LayerNorm::operator()(Tape& tape, const Var& x) const {
  return ad::add_row(ad::mul_row(ad::layer_norm(x), tape.parameter(gain)), tape.parameter(shift));
}

void LayerNorm::collect(std::vector<Parameter*>& out) {
  out.push_back(&gain);
  out.push_back(&shift);
}

}  // namespace ugss::nn
