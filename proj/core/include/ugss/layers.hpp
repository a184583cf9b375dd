#pragma once

#include "ugss/autodiff.hpp"
#include "ugss/random.hpp"

#include <string>
#include <vector>

namespace ugss::nn {

using ad::Matrix;
using ad::Parameter;
using ad::Tape;
using ad::Var;

/// in×out weight drawn uniformly from ±1/sqrt(in).
Parameter uniform_weight(std::string name, Eigen::Index in, Eigen::Index out, Rng& rng,
                         Matrix mask = {});
Parameter zeros(std::string name, Eigen::Index rows, Eigen::Index cols);
Parameter constant(std::string name, Eigen::Index rows, Eigen::Index cols, double value);

/// Identity mask (diagonal-only weights).
Matrix diagonal_mask(Eigen::Index n);
/// All-ones mask with a zero diagonal.
Matrix off_diagonal_mask(Eigen::Index n);

/// x W + b, with x rows as samples.
struct Dense {
  Parameter weight;
  Parameter bias;

  Dense() = default;
  Dense(const std::string& name, Eigen::Index in, Eigen::Index out, Rng& rng);

  Var operator()(Tape& tape, const Var& x) const;
  Eigen::Index in() const { return weight.value.rows(); }
  Eigen::Index out() const { return weight.value.cols(); }
  void collect(std::vector<Parameter*>& out);
};

/// Per-row layer normalisation followed by a learned gain and shift.
struct LayerNorm {
  Parameter gain;
  Parameter shift;

  LayerNorm() = default;
  LayerNorm(const std::string& name, Eigen::Index width);

  Var operator()(Tape& tape, const Var& x) const;
  void collect(std::vector<Parameter*>& out);
};

}  // namespace ugss::nn
