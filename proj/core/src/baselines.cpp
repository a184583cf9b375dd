#include "ugss/baselines.hpp"

#include "ugss/container.hpp"
#include "ugss/optimizer.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

namespace ugss::baseline {

Method parse_method(const std::string& name) {
  if (name == "zero") return Method::zero;
  if (name == "mean") return Method::mean;
  throw ValidationError("unknown baseline method '" + name + "' (expected zero or mean)");
}

std::string to_string(Method m) { return m == Method::zero ? "zero" : "mean"; }

Matrix zero_impute(const TimeSeriesSample& s) { return s.x_tilde.cwiseProduct(s.mask); }

Matrix mean_impute(const TimeSeriesSample& s, const Vector& means) {
  if (means.size() != s.dims()) throw std::invalid_argument("mean_impute: one mean per variable required");
  Matrix out = s.x_tilde;
  for (Eigen::Index t = 0; t < s.steps(); ++t)
    for (Eigen::Index d = 0; d < s.dims(); ++d)
      if (s.mask(t, d) == 0.0) out(t, d) = means(d);
  return out;
}

Vector observed_means(const Dataset& data) {
  const Eigen::Index D = data.dims();
  Vector sum = Vector::Zero(D), count = Vector::Zero(D);
  for (const auto& s : data.samples) {
    sum += s.x_tilde.cwiseProduct(s.mask).colwise().sum().transpose();
    count += s.mask.colwise().sum().transpose();
  }
  Vector out(D);
  for (Eigen::Index d = 0; d < D; ++d) out(d) = count(d) > 0.0 ? sum(d) / count(d) : 0.0;
  return out;
}

Matrix impute(const TimeSeriesSample& s, Method method, const Vector& means) {
  return method == Method::zero ? zero_impute(s) : mean_impute(s, means);
}

BaselineGru::BaselineGru(const ExperimentConfig& c, Eigen::Index dims, Method m, Vector mu, std::uint64_t seed)
    : method(m), means(std::move(mu)) {
  Rng rng(derive_seed(seed, 31));
  gru = gru::GruParams("baseline.gru", dims, c.hidden_dim, rng);
  w_out = nn::uniform_weight("baseline.w_out", c.hidden_dim, 1, rng);
  if (means.size() == 0) means = Vector::Zero(dims);
}

std::vector<ad::Parameter*> BaselineGru::parameters() {
  std::vector<ad::Parameter*> out;
  gru.collect(out);
  out.push_back(&w_out);
  return out;
}

std::vector<const ad::Parameter*> BaselineGru::parameters() const {
  auto p = const_cast<BaselineGru*>(this)->parameters();
  return {p.begin(), p.end()};
}

namespace {

// Batch whose x_tilde holds the imputed series.
Batch imputed_batch(const Dataset& data, std::span<const std::size_t> idx, Method method, const Vector& means) {
  std::vector<TimeSeriesSample> storage;
  storage.reserve(idx.size());
  for (auto i : idx) {
    TimeSeriesSample s = data.samples.at(i);
    s.x_tilde = impute(s, method, means);
    storage.push_back(std::move(s));
  }
  std::vector<const TimeSeriesSample*> ptrs;
  for (const auto& s : storage) ptrs.push_back(&s);
  return make_batch(ptrs);
}

}  // namespace

ad::Var forward_logits(ad::Tape& tape, const BaselineGru& model, const Batch& b) {
  ad::Var h = tape.constant(ad::Matrix::Zero(b.size, model.gru.hidden()));
  for (Eigen::Index t = 0; t < b.steps; ++t) {
    const auto ts = static_cast<std::size_t>(t);
    const ad::Var x = tape.constant(b.x_tilde[ts]);
    const ad::Var valid = tape.constant(b.valid[ts]);
    const ad::Var next = gru::vanilla_gru_step(tape, model.gru, x, h);
    h = ad::add(ad::mul_col(next, valid), ad::mul_col(h, ad::one_minus(valid)));
  }
  return ad::matmul(h, tape.parameter(model.w_out));
}

BaselinePrediction predict(const BaselineGru& model, const Dataset& data, int batch_size) {
  BaselinePrediction out;
  out.probabilities.resize(data.size());
  for (std::size_t start = 0; start < data.size(); start += static_cast<std::size_t>(batch_size)) {
    const std::size_t stop = std::min(data.size(), start + static_cast<std::size_t>(batch_size));
    std::vector<std::size_t> idx(stop - start);
    std::iota(idx.begin(), idx.end(), start);
    ad::Tape tape(false);
    const ad::Var p = ad::sigmoid(forward_logits(tape, model, imputed_batch(data, idx, model.method, model.means)));
    for (std::size_t i = 0; i < idx.size(); ++i) out.probabilities[idx[i]] = p.value()(static_cast<Eigen::Index>(i), 0);
  }
  for (const auto& s : data.samples) out.x_hat.push_back(impute(s, model.method, model.means));
  return out;
}

train::TestMetrics evaluate_baseline(const BaselineGru& model, const Dataset& data) {
  const auto p = predict(model, data);
  return train::score_predictions(data, p.probabilities, p.x_hat, {});
}

BaselineResult baseline_gru_train(const ExperimentConfig& config, Method method, const Dataset& train_data,
                                  const Dataset& val, const train::EpochCallback& on_epoch) {
  config.validate();
  if (train_data.size() == 0) throw ValidationError("baseline: empty training set");
  BaselineResult result{BaselineGru(config, train_data.dims(), method, observed_means(train_data),
                                    derive_seed(config.seed, 11)),
                        {}, 0};
  auto params = result.model.parameters();
  train::RAdam optimizer(params, config.learning_rate);
  Rng rng(derive_seed(config.seed, 12));

  std::vector<Matrix> best_values;
  double best = -std::numeric_limits<double>::infinity();
  int stale = 0;
  std::vector<std::size_t> order(train_data.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    train::EpochRecord rec;
    rec.epoch = epoch;
    rec.learning_rate = optimizer.learning_rate();
    std::shuffle(order.begin(), order.end(), rng.engine());
    std::size_t batches = 0;
    for (std::size_t i = 0; i < order.size(); i += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t stop = std::min(order.size(), i + static_cast<std::size_t>(config.batch_size));
      const std::span<const std::size_t> idx(order.data() + i, stop - i);
      const Batch b = imputed_batch(train_data, idx, method, result.model.means);
      ad::Tape tape;
      const ad::Var logit = forward_logits(tape, result.model, b);
      const ad::Var loss = train::focal_loss(ad::sigmoid(logit), tape.constant(b.labels), config.focal_w1,
                                             config.focal_w2);
      const double value = loss.value()(0, 0);
      if (!std::isfinite(value) || value > train::kDivergenceBound) {
        throw train::TrainingDiverged("baseline epoch " + std::to_string(epoch) + ": loss " + std::to_string(value));
      }
      optimizer.zero_grad();
      tape.backward(loss);
      train::clip_grad_norm(params, config.grad_clip);
      optimizer.step();
      rec.loss.cls[0] += value;
      ++batches;
    }
    rec.loss.cls[0] /= static_cast<double>(batches);
    rec.loss.total = rec.loss.cls[0];
    rec.val_auc = rec.val_auprc = rec.val_mae = std::numeric_limits<double>::quiet_NaN();
    if (val.size() > 0) {
      const auto vm = evaluate_baseline(result.model, val);
      if (vm.auc) rec.val_auc = *vm.auc;
      if (vm.auprc) rec.val_auprc = *vm.auprc;
      if (vm.mae) rec.val_mae = *vm.mae;
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const double score = std::isfinite(rec.val_auc) ? rec.val_auc : -rec.loss.total;
    if (score > best) {
      best = score;
      result.best_epoch = epoch;
      best_values.clear();
      for (const auto* p : params) best_values.push_back(p->value);
      stale = 0;
    } else if (++stale >= config.lr_patience) {
      optimizer.set_learning_rate(optimizer.learning_rate() * config.lr_decay);
      stale = 0;
    }
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  if (!best_values.empty()) {
    for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = best_values[i];
  }
  return result;
}

train::CvReport baseline_cross_validate(const ExperimentConfig& config, Method method, const Dataset& raw,
                                        const BaselineFoldCallback& on_fold) {
  config.validate();
  const Dataset masked = train::ensure_masked(raw, config.masking_ratio, config.seed);
  std::vector<int> labels;
  for (const auto& s : masked.samples) labels.push_back(s.label);
  const auto splits = train::make_folds(labels, config.folds, config.val_fraction, config.seed);
  std::vector<int> run = config.run_folds;
  if (run.empty()) {
    run.resize(static_cast<std::size_t>(config.folds));
    std::iota(run.begin(), run.end(), 0);
  }
  train::CvReport report;
  for (int k : run) {
    const auto fold = train::prepare_fold(masked, splits.at(static_cast<std::size_t>(k)), config);
    const BaselineResult br = baseline_gru_train(config, method, fold.train, fold.val);
    train::FoldReport fr;
    fr.fold = k;
    fr.test = evaluate_baseline(br.model, fold.test);
    fr.best_epoch = br.best_epoch;
    fr.history = br.history;
    if (on_fold) on_fold(k, br, fold, fr);
    report.folds.push_back(std::move(fr));
  }
  train::aggregate(report);
  return report;
}

void save_baseline(const std::filesystem::path& path, const BaselineGru& model,
                   const std::vector<std::string>& variables, const std::vector<VariableSpec>& normalization,
                   const ExperimentConfig& config) {
  Container c;
  for (const auto* p : model.parameters()) c.add_matrix(p->name, p->value);
  c.add_f64("baseline.means", {model.means.size()}, std::span<const double>(model.means.data(), model.means.size()));
  nlohmann::json meta;
  meta["kind"] = "baseline-checkpoint";
  meta["format_version"] = kContainerVersion;
  meta["method"] = to_string(model.method);
  meta["config"] = nlohmann::json::parse(to_json(config));
  meta["variables"] = variables;
  meta["normalization"] = nlohmann::json::parse(train::normalization_to_json(normalization));
  c.meta_json = meta.dump();
  c.write(path);
}

}  // namespace ugss::baseline
