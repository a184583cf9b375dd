#include "ugss/model.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace ugss::train {

std::string to_string(Direction d) { return d == Direction::forward ? "forward" : "backward"; }

DirectionParams::DirectionParams(const std::string& prefix, const ExperimentConfig& c, Eigen::Index dims,
                                 Rng& rng)
    : vrnn(prefix, vrnn::VrnnDims::from_config(c, dims), rng),
      decay(prefix + ".decay", dims, c.conv_channels, c.w_gamma, rng) {
  if (c.cell == CellType::gru_u) {
    gru_u.emplace(prefix + ".gru_u", c.feature_x_dim, dims, c.feature_z_dim, c.hidden_dim, c.w_alpha,
                  c.alpha_input, rng);
  } else {
    vanilla.emplace(prefix + ".gru", c.feature_x_dim + c.feature_z_dim, c.hidden_dim, rng);
  }
  w_out = nn::uniform_weight(prefix + ".w_out", c.hidden_dim, 1, rng);
}

void DirectionParams::collect(std::vector<Parameter*>& out) {
  vrnn.collect(out);
  decay.collect(out);
  if (gru_u) gru_u->collect(out);
  if (vanilla) vanilla->collect(out);
  out.push_back(&w_out);
}

UgssModel::UgssModel(const ExperimentConfig& config, Eigen::Index dims, std::uint64_t seed)
    : config_(config), dims_(dims) {
  config_.validate();
  if (dims < 1) throw ValidationError("model needs at least one input variable");
  Rng fwd_rng(derive_seed(seed, 0));
  forward_ = DirectionParams("fwd", config_, dims, fwd_rng);
  if (config_.bidirectional) {
    Rng bwd_rng(derive_seed(seed, 1));
    backward_.emplace("bwd", config_, dims, bwd_rng);
  }
}

std::vector<Parameter*> UgssModel::parameters() {
  std::vector<Parameter*> out;
  forward_.collect(out);
  if (backward_) backward_->collect(out);
  return out;
}

std::vector<const Parameter*> UgssModel::parameters() const {
  auto params = const_cast<UgssModel*>(this)->parameters();
  return {params.begin(), params.end()};
}

Parameter* UgssModel::find(const std::string& name) {
  for (Parameter* p : parameters())
    if (p->name == name) return p;
  return nullptr;
}

NoiseFn zero_noise() {
  return [](Eigen::Index, int, Eigen::Index rows, Eigen::Index cols) { return ad::Matrix::Zero(rows, cols); };
}

NoiseFn gaussian_noise(Rng& rng) {
  return [&rng](Eigen::Index, int, Eigen::Index rows, Eigen::Index cols) { return rng.normal_matrix(rows, cols); };
}

namespace {

void check_finite(const Var& v, const char* name, Eigen::Index step, Direction d) {
  if (!v.value().allFinite()) {
    throw NumericalError("non-finite " + std::string(name) + " at step " + std::to_string(step) + " (" +
                         to_string(d) + " direction)");
  }
}

}  // namespace

DirectionPass run_direction(Tape& tape, const ExperimentConfig& config, const DirectionParams& params,
                            const Batch& batch, const NoiseFn& noise, Direction direction) {
  if (batch.steps < 1 || batch.size < 1) throw ValidationError("empty batch");
  if (batch.dims != params.decay.dims()) {
    throw ValidationError("batch has " + std::to_string(batch.dims) + " variables, model expects " +
                          std::to_string(params.decay.dims()));
  }
  const Eigen::Index rows = batch.size;
  const Eigen::Index latent = config.latent_dim;
  const bool padded = (batch.lengths.array() < static_cast<int>(batch.steps)).any();

  DirectionPass pass;
  pass.steps.reserve(static_cast<std::size_t>(batch.steps));
  std::vector<VrnnStepTerms> terms;
  std::vector<Var> truth, x_hats, imp_masks;
  terms.reserve(static_cast<std::size_t>(batch.steps));

  Var h = tape.constant(ad::Matrix::Zero(rows, config.hidden_dim));
  for (Eigen::Index t = 0; t < batch.steps; ++t) {
    const std::size_t ts = static_cast<std::size_t>(t);
    const Var x = tape.constant(batch.x_tilde[ts]);
    const Var m = tape.constant(batch.mask[ts]);
    const Var d = tape.constant(batch.delta[ts]);
    const Var valid = tape.constant(batch.valid[ts]);

    StepVars s;
    s.prior = params.vrnn.prior(tape, h);
    s.posterior = params.vrnn.infer_posterior(tape, x, h);
    s.z = vrnn::sample_latent(s.posterior, tape.constant(noise(t, 0, rows, latent)));
    const Var fz = params.vrnn.extract_z(tape, s.z);
    s.reconstruction = params.vrnn.generate_from_features(tape, fz, h);

    VrnnStepTerms term{s.posterior, s.prior, s.reconstruction, {}, x, m, valid};
    for (int k = 1; k < config.latent_samples; ++k) {
      const Var zk = vrnn::sample_latent(s.posterior, tape.constant(noise(t, k, rows, latent)));
      term.extra_reconstructions.push_back(params.vrnn.generate(tape, zk, h));
    }
    terms.push_back(std::move(term));

    const Var mu_x = s.reconstruction.mean;
    const Var gamma = impute::temporal_decay(tape, params.decay, d);
    const Var c = impute::blend_history(tape, params.decay, x, mu_x, gamma, m);
    const Var c_tilde = impute::feature_correlation(tape, params.decay, mu_x);
    const Var c_hat = impute::combine(tape, params.decay, c, c_tilde);
    s.x_hat = impute::finalize_imputation(x, m, c_hat);
    s.u = impute::extract_uncertainty(m, vrnn::standard_deviation(s.reconstruction));

    const Var fx = params.vrnn.extract_x(tape, s.x_hat);
    Var h_next;
    if (params.gru_u) {
      s.alpha = gru::attention_weights(tape, *params.gru_u, s.u);
      h_next = gru::gru_u_step(tape, *params.gru_u, fx, s.alpha, fz, h, m);
    } else {
      s.alpha = tape.constant(ad::Matrix::Ones(rows, batch.dims));
      const std::array<Var, 2> parts{fx, fz};
      h_next = gru::vanilla_gru_step(tape, *params.vanilla, ad::concat_cols(parts), h);
    }
    h = padded ? ad::add(ad::mul_col(h_next, valid), ad::mul_col(h, ad::one_minus(valid))) : h_next;
    s.h = h;

    check_finite(s.z, "z", t, direction);
    check_finite(s.x_hat, "x_hat", t, direction);
    check_finite(s.u, "u", t, direction);
    check_finite(s.alpha, "alpha", t, direction);
    check_finite(s.h, "h", t, direction);

    truth.push_back(tape.constant(batch.x_truth[ts]));
    imp_masks.push_back(tape.constant(batch.imp_mask[ts]));
    x_hats.push_back(s.x_hat);
    pass.steps.push_back(std::move(s));
  }

  pass.logit = ad::matmul(h, tape.parameter(params.w_out));
  pass.vrnn_loss = vrnn_loss(terms);
  pass.imp_loss = imputation_loss(truth, x_hats, imp_masks, config.imp_per_sample_norm);
  const Var labels = tape.constant(batch.labels);
  pass.cls_loss = focal_loss(ad::sigmoid(pass.logit), labels, config.focal_w1, config.focal_w2);
  check_finite(pass.logit, "logit", batch.steps - 1, direction);
  return pass;
}

std::vector<Var> align_reversed(Tape& tape, std::span<const Var> stream, const Eigen::VectorXi& lengths) {
  const Eigen::Index steps = static_cast<Eigen::Index>(stream.size());
  const Eigen::Index rows = lengths.size();
  std::vector<Var> out;
  out.reserve(stream.size());
  for (Eigen::Index t = 0; t < steps; ++t) {
    // source step -> rows reading from it
    std::map<Eigen::Index, std::vector<Eigen::Index>> groups;
    for (Eigen::Index i = 0; i < rows; ++i) {
      if (lengths(i) > t) groups[lengths(i) - 1 - t].push_back(i);
    }
    const Eigen::Index cols = stream[0].cols();
    if (groups.size() == 1 && static_cast<Eigen::Index>(groups.begin()->second.size()) == rows) {
      out.push_back(stream[static_cast<std::size_t>(groups.begin()->first)]);
      continue;
    }
    Var acc = tape.constant(ad::Matrix::Zero(rows, cols));
    for (const auto& [k, members] : groups) {
      ad::Matrix ind = ad::Matrix::Zero(rows, 1);
      for (Eigen::Index i : members) ind(i, 0) = 1.0;
      acc = ad::add(acc, ad::mul_col(stream[static_cast<std::size_t>(k)], tape.constant(std::move(ind))));
    }
    out.push_back(acc);
  }
  return out;
}

double LossBreakdown::compose(const ExperimentConfig& c) const {
  return c.lambda_vrnn * (vrnn[0] + vrnn[1]) + c.lambda_cons * (cons[0] + cons[1]) +
         c.lambda_imp * (imp[0] + imp[1]) + (cls[0] + cls[1]);
}

LossBreakdown& LossBreakdown::operator+=(const LossBreakdown& o) {
  for (int i = 0; i < 2; ++i) {
    vrnn[i] += o.vrnn[i];
    cons[i] += o.cons[i];
    imp[i] += o.imp[i];
    cls[i] += o.cls[i];
  }
  total += o.total;
  return *this;
}

LossBreakdown& LossBreakdown::operator/=(double n) {
  for (int i = 0; i < 2; ++i) {
    vrnn[i] /= n;
    cons[i] /= n;
    imp[i] /= n;
    cls[i] /= n;
  }
  total /= n;
  return *this;
}

ForwardResult run_model(Tape& tape, const UgssModel& model, const Batch& batch, const Batch* reversed,
                        const NoiseFn& fwd_noise, const NoiseFn& bwd_noise) {
  const ExperimentConfig& c = model.config();
  ForwardResult r;
  r.fwd = run_direction(tape, c, model.forward(), batch, fwd_noise, Direction::forward);
  const auto scalar = [](const Var& v) { return v.value()(0, 0); };
  r.breakdown.vrnn[0] = scalar(r.fwd.vrnn_loss);
  r.breakdown.imp[0] = scalar(r.fwd.imp_loss);
  r.breakdown.cls[0] = scalar(r.fwd.cls_loss);

  Var total = ad::add(ad::add(ad::scale(r.fwd.vrnn_loss, c.lambda_vrnn), ad::scale(r.fwd.imp_loss, c.lambda_imp)),
                      r.fwd.cls_loss);
  if (!model.bidirectional()) {
    r.consistency = tape.constant(ad::Matrix::Zero(1, 1));
    r.probability = ad::sigmoid(r.fwd.logit);
  } else {
    if (reversed == nullptr) throw std::invalid_argument("run_model: bidirectional model needs a reversed batch");
    r.bwd = run_direction(tape, c, model.backward(), *reversed, bwd_noise, Direction::backward);
    std::vector<Var> bx, bu, fx, valid;
    for (const auto& s : r.bwd->steps) {
      bx.push_back(s.x_hat);
      bu.push_back(s.u);
    }
    for (std::size_t t = 0; t < r.fwd.steps.size(); ++t) {
      fx.push_back(r.fwd.steps[t].x_hat);
      valid.push_back(tape.constant(batch.valid[t]));
    }
    r.bwd_x_hat_aligned = align_reversed(tape, bx, batch.lengths);
    r.bwd_u_aligned = align_reversed(tape, bu, batch.lengths);
    r.consistency = consistency_loss(fx, r.bwd_x_hat_aligned, valid);

    r.breakdown.vrnn[1] = scalar(r.bwd->vrnn_loss);
    r.breakdown.imp[1] = scalar(r.bwd->imp_loss);
    r.breakdown.cls[1] = scalar(r.bwd->cls_loss);
    r.breakdown.cons[0] = r.breakdown.cons[1] = scalar(r.consistency);

    total = ad::add(total, ad::add(ad::add(ad::scale(r.bwd->vrnn_loss, c.lambda_vrnn),
                                           ad::scale(r.bwd->imp_loss, c.lambda_imp)),
                                   r.bwd->cls_loss));
    total = ad::add(total, ad::scale(r.consistency, 2.0 * c.lambda_cons));
    r.probability = ad::sigmoid(ad::scale(ad::add(r.fwd.logit, r.bwd->logit), 0.5));
  }
  r.total = total;
  r.breakdown.total = scalar(total);
  if (!std::isfinite(r.breakdown.total)) throw NumericalError("non-finite composite loss");
  return r;
}

std::vector<SamplePrediction> predict(const UgssModel& model, const Dataset& data, int batch_size,
                                      bool keep_states) {
  if (batch_size < 1) throw std::invalid_argument("predict: batch_size must be positive");
  std::vector<SamplePrediction> out(data.size());
  const NoiseFn noise = zero_noise();
  for (std::size_t start = 0; start < data.size(); start += static_cast<std::size_t>(batch_size)) {
    const std::size_t stop = std::min(data.size(), start + static_cast<std::size_t>(batch_size));
    std::vector<std::size_t> idx(stop - start);
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = start + i;
    const Batch fwd = make_batch(data, idx, false);
    std::optional<Batch> bwd;
    if (model.bidirectional()) bwd = make_batch(data, idx, true);

    Tape tape(false);
    const ForwardResult r = run_model(tape, model, fwd, bwd ? &*bwd : nullptr, noise, noise);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const auto row = static_cast<Eigen::Index>(i);
      const Eigen::Index len = fwd.lengths(row);
      SamplePrediction& p = out[idx[i]];
      p.probability = r.probability.value()(row, 0);
      p.x_hat.resize(len, fwd.dims);
      p.uncertainty.resize(len, fwd.dims);
      for (Eigen::Index t = 0; t < len; ++t) {
        const auto& s = r.fwd.steps[static_cast<std::size_t>(t)];
        if (r.bwd) {
          const auto ts = static_cast<std::size_t>(t);
          p.x_hat.row(t) = 0.5 * (s.x_hat.value().row(row) + r.bwd_x_hat_aligned[ts].value().row(row));
          p.uncertainty.row(t) = 0.5 * (s.u.value().row(row) + r.bwd_u_aligned[ts].value().row(row));
        } else {
          p.x_hat.row(t) = s.x_hat.value().row(row);
          p.uncertainty.row(t) = s.u.value().row(row);
        }
        if (keep_states) {
          p.forward_states.push_back({s.z.value().row(row).transpose(), s.x_hat.value().row(row).transpose(),
                                      s.u.value().row(row).transpose(), s.alpha.value().row(row).transpose(),
                                      s.h.value().row(row).transpose()});
        }
      }
    }
  }
  return out;
}

}  // namespace ugss::train
