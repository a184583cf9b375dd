#include "ugss/config.hpp"

#include "ugss/data_model.hpp"

#include <json.hpp>

#include <set>

namespace ugss {

namespace {

template <typename E>
struct EnumNames;

template <>
struct EnumNames<CellType> {
  static constexpr std::pair<CellType, const char*> values[] = {{CellType::gru_u, "gru_u"},
                                                                {CellType::vanilla_gru, "vanilla_gru"}};
};
template <>
struct EnumNames<WeightMode> {
  static constexpr std::pair<WeightMode, const char*> values[] = {{WeightMode::diagonal, "diagonal"},
                                                                  {WeightMode::full, "full"}};
};
template <>
struct EnumNames<AlphaInput> {
  static constexpr std::pair<AlphaInput, const char*> values[] = {{AlphaInput::concat, "concat"},
                                                                  {AlphaInput::multiply, "multiply"}};
};
template <>
struct EnumNames<Normalization> {
  static constexpr std::pair<Normalization, const char*> values[] = {{Normalization::layer, "layer"},
                                                                     {Normalization::none, "none"}};
};

template <typename E>
std::string name_of(E e) {
  for (const auto& [v, n] : EnumNames<E>::values)
    if (v == e) return n;
  return "?";
}

template <typename E>
E parse_enum(const nlohmann::json& j, const char* key) {
  const auto s = j.get<std::string>();
  for (const auto& [v, n] : EnumNames<E>::values)
    if (s == n) return v;
  throw ValidationError(std::string("config: invalid value '") + s + "' for " + key);
}

}  // namespace

std::string to_string(CellType c) { return name_of(c); }
std::string to_string(WeightMode m) { return name_of(m); }

void ExperimentConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ValidationError(std::string("config: ") + what);
  };
  require(latent_dim > 0 && hidden_dim > 0 && feature_x_dim > 0 && feature_z_dim > 0,
          "layer widths must be positive");
  require(!mlp_hidden.empty(), "mlp_hidden must list at least one width");
  for (int w : mlp_hidden) require(w > 0, "mlp_hidden widths must be positive");
  require(conv_channels > 0, "conv_channels must be positive");
  require(logvar_clamp > 0, "logvar_clamp must be positive");
  require(latent_samples >= 1, "latent_samples must be at least 1");
  require(lambda_vrnn >= 0 && lambda_cons >= 0 && lambda_imp >= 0, "loss weights must be nonnegative");
  require(focal_w1 >= 0 && focal_w2 >= 0, "focal parameters must be nonnegative");
  require(learning_rate > 0, "learning_rate must be positive");
  require(lr_decay > 0 && lr_decay <= 1, "lr_decay must lie in (0, 1]");
  require(lr_patience >= 1, "lr_patience must be at least 1");
  require(epochs >= 1 && batch_size >= 1, "epochs and batch_size must be positive");
  require(grad_clip >= 0, "grad_clip must be nonnegative");
  require(masking_ratio > 0 && masking_ratio < 1, "masking_ratio must lie in (0, 1)");
  require(folds >= 2, "folds must be at least 2");
  for (int f : run_folds) require(f >= 0 && f < folds, "run_folds entries must index a fold");
  require(val_fraction > 0 && val_fraction < 1, "val_fraction must lie in (0, 1)");
  require(winsor_low >= 0 && winsor_low < winsor_high && winsor_high <= 100,
          "winsor percentiles must satisfy 0 <= low < high <= 100");
}

#define UGSS_CONFIG_FIELDS(X)                                                          \
  X(latent_dim) X(mlp_hidden) X(hidden_dim) X(feature_x_dim) X(feature_z_dim)          \
  X(conv_channels) X(logvar_clamp) X(bidirectional) X(latent_samples) X(lambda_vrnn)   \
  X(lambda_cons) X(lambda_imp) X(focal_w1) X(focal_w2) X(imp_per_sample_norm)          \
  X(learning_rate) X(lr_decay) X(lr_patience) X(epochs) X(batch_size) X(grad_clip)     \
  X(masking_ratio) X(folds) X(run_folds) X(val_fraction) X(winsor_low) X(winsor_high)  \
  X(seed)

#define UGSS_CONFIG_ENUMS(X) \
  X(normalization, Normalization) X(cell, CellType) X(w_alpha, WeightMode) X(w_gamma, WeightMode) \
  X(alpha_input, AlphaInput)

ExperimentConfig parse_config(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("config: malformed JSON: ") + e.what());
  }
  if (!j.is_object()) throw ValidationError("config: top level must be an object");
  std::set<std::string> known;
#define KNOWN(f) known.insert(#f);
#define KNOWN_E(f, T) known.insert(#f);
  UGSS_CONFIG_FIELDS(KNOWN)
  UGSS_CONFIG_ENUMS(KNOWN_E)
#undef KNOWN
#undef KNOWN_E
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw ValidationError("config: unknown key '" + key + "'");
  }
  ExperimentConfig c;
  try {
#define READ(f) \
  if (j.contains(#f)) j.at(#f).get_to(c.f);
#define READ_E(f, T) \
  if (j.contains(#f)) c.f = parse_enum<T>(j.at(#f), #f);
    UGSS_CONFIG_FIELDS(READ)
    UGSS_CONFIG_ENUMS(READ_E)
#undef READ
#undef READ_E
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("config: wrong value type: ") + e.what());
  }
  c.validate();
  return c;
}

std::string to_json(const ExperimentConfig& c) {
  nlohmann::json j;
#define WRITE(f) j[#f] = c.f;
#define WRITE_E(f, T) j[#f] = name_of(c.f);
  UGSS_CONFIG_FIELDS(WRITE)
  UGSS_CONFIG_ENUMS(WRITE_E)
#undef WRITE
#undef WRITE_E
  return j.dump(2);
}

}  // namespace ugss
