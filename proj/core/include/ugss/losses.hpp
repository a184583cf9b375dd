#pragma once

#include "ugss/vrnn_core.hpp"

#include <span>
#include <vector>

namespace ugss::train {

using ad::Tape;
using ad::Var;

/// Everything one time step contributes to the VRNN objective. All B-row.
struct VrnnStepTerms {
  vrnn::GaussianParams posterior;
  vrnn::GaussianParams prior;
  vrnn::GaussianParams reconstruction;
  /// Further latent draws; the reconstruction NLL is averaged over all draws.
  std::vector<vrnn::GaussianParams> extra_reconstructions;
  Var x_tilde;
  Var mask;   // observed entries (0 on padded steps)
  Var valid;  // B×1, 0 on padded steps
};

/// Sum over batch rows and steps of the reconstruction negative
/// log-likelihood on observed entries plus KL(posterior || prior): the
/// single-sample negated ELBO. Returns a 1×1 node.
Var vrnn_loss(std::span<const VrnnStepTerms> steps);

/// Mean absolute difference between two aligned imputation streams over
/// valid (step, variable) cells.
Var consistency_loss(std::span<const Var> x_hat_a, std::span<const Var> x_hat_b,
                     std::span<const Var> valid);

/// Masked MAE on held-out entries: (1/N) sum_n |X - X_hat| * M_imp, where each
/// sample's sum is additionally divided by its held-out count when
/// `per_sample_norm` is set. A batch with no held-out entries gives 0.
Var imputation_loss(std::span<const Var> x_truth, std::span<const Var> x_hat,
                    std::span<const Var> imp_mask, bool per_sample_norm);

inline constexpr double kProbabilityEpsilon = 1e-7;

/// sum_n -w1 (1 - y_hat)^w2 log(y_hat), y_hat = p if y = 1 else 1 - p, with p
/// clamped to [eps, 1 - eps]. `prob` and `labels` are B×1.
Var focal_loss(const Var& prob, const Var& labels, double w1, double w2);

/// Scalar helpers mirroring the node versions, for reporting and tests.
double focal_loss(double p, int y, double w1, double w2);
double binary_cross_entropy(double p, int y);

}  // namespace ugss::train
