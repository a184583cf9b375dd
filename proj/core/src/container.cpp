#include "ugss/container.hpp"

#include <json.hpp>

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace ugss {

static_assert(std::endian::native == std::endian::little,
              "container I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'U', 'G', 'S', 'S', 'C', 'T', 'R', '\0'};

std::size_t dtype_size(DType t) { return t == DType::u8 ? 1 : 8; }

const char* dtype_name(DType t) {
  switch (t) {
    case DType::f64: return "f64";
    case DType::i64: return "i64";
    case DType::u8: return "u8";
  }
  return "?";
}

DType parse_dtype(const std::string& s) {
  if (s == "f64") return DType::f64;
  if (s == "i64") return DType::i64;
  if (s == "u8") return DType::u8;
  throw std::runtime_error("container: unknown dtype '" + s + "'");
}

std::int64_t product(const std::vector<std::int64_t>& shape) {
  std::int64_t n = 1;
  for (auto s : shape) n *= s;
  return n;
}

std::size_t pad8(std::size_t n) { return (n + 7) / 8 * 8; }

template <typename T>
std::vector<std::byte> to_bytes(std::span<const T> data) {
  std::vector<std::byte> out(data.size_bytes());
  if (!data.empty()) std::memcpy(out.data(), data.data(), data.size_bytes());
  return out;
}

}  // namespace

std::int64_t Array::element_count() const { return product(shape); }

std::vector<double> Array::as_f64() const {
  const auto n = static_cast<std::size_t>(element_count());
  std::vector<double> out(n);
  switch (dtype) {
    case DType::f64: std::memcpy(out.data(), bytes.data(), n * 8); break;
    case DType::i64: {
      std::vector<std::int64_t> tmp(n);
      std::memcpy(tmp.data(), bytes.data(), n * 8);
      for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<double>(tmp[i]);
      break;
    }
    case DType::u8:
      for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<double>(std::to_integer<std::uint8_t>(bytes[i]));
      break;
  }
  return out;
}

std::vector<std::int64_t> Array::as_i64() const {
  const auto n = static_cast<std::size_t>(element_count());
  std::vector<std::int64_t> out(n);
  switch (dtype) {
    case DType::i64: std::memcpy(out.data(), bytes.data(), n * 8); break;
    case DType::f64: {
      auto f = as_f64();
      for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<std::int64_t>(f[i]);
      break;
    }
    case DType::u8:
      for (std::size_t i = 0; i < n; ++i) out[i] = std::to_integer<std::uint8_t>(bytes[i]);
      break;
  }
  return out;
}

void Container::add_f64(std::string name, std::vector<std::int64_t> shape,
                        std::span<const double> data) {
  if (static_cast<std::size_t>(product(shape)) != data.size()) {
    throw std::invalid_argument("container: shape does not match data for '" + name + "'");
  }
  arrays_.push_back({std::move(name), DType::f64, std::move(shape), to_bytes(data)});
}

void Container::add_i64(std::string name, std::vector<std::int64_t> shape,
                        std::span<const std::int64_t> data) {
  if (static_cast<std::size_t>(product(shape)) != data.size()) {
    throw std::invalid_argument("container: shape does not match data for '" + name + "'");
  }
  arrays_.push_back({std::move(name), DType::i64, std::move(shape), to_bytes(data)});
}

void Container::add_u8(std::string name, std::vector<std::int64_t> shape,
                       std::span<const std::uint8_t> data) {
  if (static_cast<std::size_t>(product(shape)) != data.size()) {
    throw std::invalid_argument("container: shape does not match data for '" + name + "'");
  }
  arrays_.push_back({std::move(name), DType::u8, std::move(shape), to_bytes(data)});
}

void Container::add_matrix(std::string name, const Matrix& m) {
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = m;
  add_f64(std::move(name), {m.rows(), m.cols()},
          std::span<const double>(rm.data(), static_cast<std::size_t>(rm.size())));
}

const Array* Container::find(const std::string& name) const {
  for (const auto& a : arrays_)
    if (a.name == name) return &a;
  return nullptr;
}

const Array& Container::get(const std::string& name) const {
  if (const auto* a = find(name)) return *a;
  throw std::runtime_error("container: no array named '" + name + "'");
}

Matrix Container::matrix(const std::string& name) const {
  const Array& a = get(name);
  if (a.shape.size() != 2) throw std::runtime_error("container: '" + name + "' is not 2-D");
  auto v = a.as_f64();
  Matrix m(a.shape[0], a.shape[1]);
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = v[static_cast<std::size_t>(i * m.cols() + j)];
  return m;
}

void Container::write(const std::filesystem::path& path) const {
  nlohmann::json header;
  header["arrays"] = nlohmann::json::array();
  std::size_t offset = 0;
  for (const auto& a : arrays_) {
    header["arrays"].push_back({{"name", a.name},
                                {"dtype", dtype_name(a.dtype)},
                                {"shape", a.shape},
                                {"offset", offset},
                                {"nbytes", a.bytes.size()}});
    offset = pad8(offset + a.bytes.size());
  }
  header["meta"] = nlohmann::json::parse(meta_json);
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("container: cannot open '" + path.string() + "' for writing");
  const std::uint32_t version = kContainerVersion, reserved = 0;
  const std::uint64_t len = text.size();
  out.write(kMagic, 8);
  out.write(reinterpret_cast<const char*>(&version), 4);
  out.write(reinterpret_cast<const char*>(&reserved), 4);
  out.write(reinterpret_cast<const char*>(&len), 8);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  const std::size_t head = 24 + text.size();
  const std::string zeros(8, '\0');
  out.write(zeros.data(), static_cast<std::streamsize>(pad8(head) - head));
  std::size_t written = 0;
  for (const auto& a : arrays_) {
    out.write(reinterpret_cast<const char*>(a.bytes.data()), static_cast<std::streamsize>(a.bytes.size()));
    written += a.bytes.size();
    out.write(zeros.data(), static_cast<std::streamsize>(pad8(written) - written));
    written = pad8(written);
  }
  if (!out) throw std::runtime_error("container: write failed for '" + path.string() + "'");
}

Container Container::read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("container: cannot open '" + path.string() + "'");
  char magic[8];
  std::uint32_t version = 0, reserved = 0;
  std::uint64_t len = 0;
  in.read(magic, 8);
  in.read(reinterpret_cast<char*>(&version), 4);
  in.read(reinterpret_cast<char*>(&reserved), 4);
  in.read(reinterpret_cast<char*>(&len), 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0) {
    throw std::runtime_error("container: '" + path.string() + "' is not a ugss container");
  }
  if (version != kContainerVersion) {
    throw std::runtime_error("container: unsupported version " + std::to_string(version));
  }
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  const auto header = nlohmann::json::parse(text);
  const std::size_t payload = pad8(24 + len);

  Container c;
  c.meta_json = header.value("meta", nlohmann::json::object()).dump();
  for (const auto& entry : header.at("arrays")) {
    Array a;
    a.name = entry.at("name").get<std::string>();
    a.dtype = parse_dtype(entry.at("dtype").get<std::string>());
    a.shape = entry.at("shape").get<std::vector<std::int64_t>>();
    const auto nbytes = entry.at("nbytes").get<std::size_t>();
    if (nbytes != static_cast<std::size_t>(a.element_count()) * dtype_size(a.dtype)) {
      throw std::runtime_error("container: size mismatch for array '" + a.name + "'");
    }
    a.bytes.resize(nbytes);
    in.seekg(static_cast<std::streamoff>(payload + entry.at("offset").get<std::size_t>()));
    in.read(reinterpret_cast<char*>(a.bytes.data()), static_cast<std::streamsize>(nbytes));
    if (!in) throw std::runtime_error("container: truncated array '" + a.name + "'");
    c.arrays_.push_back(std::move(a));
  }
  return c;
}

std::filesystem::path sidecar_path(const std::filesystem::path& path) {
  return std::filesystem::path(path.string() + ".json");
}

void save_dataset(const Dataset& data, const std::filesystem::path& path) {
  const auto N = static_cast<std::int64_t>(data.size());
  const auto T = static_cast<std::int64_t>(data.max_steps());
  const auto D = static_cast<std::int64_t>(data.dims());
  const auto cells = static_cast<std::size_t>(N * T * D);
  std::vector<double> x(cells, 0.0), delta(cells, 1.0), truth(cells, 0.0), full(cells, 0.0);
  std::vector<std::uint8_t> mask(cells, 0), imp(cells, 0), label(static_cast<std::size_t>(N));
  std::vector<double> stamps(static_cast<std::size_t>(N * T), 0.0);
  std::vector<std::int64_t> lengths(static_cast<std::size_t>(N)), ids(static_cast<std::size_t>(N));
  bool has_full = N > 0;
  for (std::int64_t n = 0; n < N; ++n) {
    const auto& s = data.samples[static_cast<std::size_t>(n)];
    if (s.dims() != D) throw ValidationError("save_dataset: inconsistent variable count");
    has_full = has_full && s.x_full.size() != 0;
    lengths[n] = s.steps();
    ids[n] = s.record_id;
    label[n] = static_cast<std::uint8_t>(s.label);
    for (std::int64_t t = 0; t < s.steps(); ++t) {
      stamps[n * T + t] = s.timestamps(t);
      for (std::int64_t d = 0; d < D; ++d) {
        const auto k = static_cast<std::size_t>((n * T + t) * D + d);
        x[k] = s.x_tilde(t, d);
        mask[k] = static_cast<std::uint8_t>(s.mask(t, d));
        delta[k] = s.delta(t, d);
        if (s.imp_mask.size() != 0) {
          imp[k] = static_cast<std::uint8_t>(s.imp_mask(t, d));
          truth[k] = s.x_truth(t, d);
        }
        if (s.x_full.size() != 0) full[k] = s.x_full(t, d);
      }
    }
  }
  Container c;
  c.add_f64("x_tilde", {N, T, D}, x);
  c.add_u8("mask", {N, T, D}, mask);
  c.add_f64("delta", {N, T, D}, delta);
  c.add_f64("timestamps", {N, T}, stamps);
  c.add_i64("length", {N}, lengths);
  c.add_u8("label", {N}, label);
  c.add_u8("imp_mask", {N, T, D}, imp);
  c.add_f64("x_truth", {N, T, D}, truth);
  c.add_i64("record_id", {N}, ids);
  if (has_full) c.add_f64("x_full", {N, T, D}, full);
  c.meta_json = nlohmann::json{{"kind", "dataset"}}.dump();
  c.write(path);

  nlohmann::json side;
  side["format"] = "ugss-dataset";
  side["version"] = kContainerVersion;
  side["n_samples"] = N;
  side["steps"] = T;
  side["variables"] = data.variable_names;
  side["normalization"] = nlohmann::json::array();
  for (const auto& v : data.normalization) {
    side["normalization"].push_back({{"name", v.name},
                                     {"winsor_low", v.winsor_low},
                                     {"winsor_high", v.winsor_high},
                                     {"mean", v.mean},
                                     {"std", v.std}});
  }
  std::ofstream js(sidecar_path(path));
  js << side.dump(2) << "\n";
}

Dataset load_dataset(const std::filesystem::path& path) {
  const Container c = Container::read(path);
  const Array& xa = c.get("x_tilde");
  if (xa.shape.size() != 3) throw ValidationError("load_dataset: x_tilde must be 3-D");
  const std::int64_t N = xa.shape[0], T = xa.shape[1], D = xa.shape[2];
  auto check = [&](const char* name, std::vector<std::int64_t> shape) {
    if (c.get(name).shape != shape) {
      throw ValidationError("load_dataset: '" + path.string() + "': array '" + name +
                            "' has unexpected shape");
    }
  };
  check("mask", {N, T, D});
  check("delta", {N, T, D});
  check("timestamps", {N, T});
  check("length", {N});
  check("label", {N});
  check("imp_mask", {N, T, D});
  check("x_truth", {N, T, D});
  check("record_id", {N});
  const auto x = xa.as_f64(), mask = c.get("mask").as_f64(), delta = c.get("delta").as_f64(),
             stamps = c.get("timestamps").as_f64(), imp = c.get("imp_mask").as_f64(),
             truth = c.get("x_truth").as_f64();
  const auto lengths = c.get("length").as_i64(), labels = c.get("label").as_i64(),
             ids = c.get("record_id").as_i64();
  std::vector<double> full;
  if (const Array* fa = c.find("x_full")) {
    if (fa->shape != std::vector<std::int64_t>{N, T, D}) throw ValidationError("load_dataset: bad x_full");
    full = fa->as_f64();
  }

  Dataset data;
  for (std::int64_t n = 0; n < N; ++n) {
    const auto L = lengths[static_cast<std::size_t>(n)];
    if (L < 0 || L > T) throw ValidationError("load_dataset: bad length for sample " + std::to_string(n));
    TimeSeriesSample s;
    s.x_tilde.resize(L, D);
    s.mask.resize(L, D);
    s.delta.resize(L, D);
    s.imp_mask.resize(L, D);
    s.x_truth.resize(L, D);
    if (!full.empty()) s.x_full.resize(L, D);
    s.timestamps.resize(L);
    for (std::int64_t t = 0; t < L; ++t) {
      s.timestamps(t) = stamps[static_cast<std::size_t>(n * T + t)];
      for (std::int64_t d = 0; d < D; ++d) {
        const auto k = static_cast<std::size_t>((n * T + t) * D + d);
        s.x_tilde(t, d) = x[k];
        s.mask(t, d) = mask[k];
        s.delta(t, d) = delta[k];
        s.imp_mask(t, d) = imp[k];
        s.x_truth(t, d) = truth[k];
        if (!full.empty()) s.x_full(t, d) = full[k];
      }
    }
    s.label = static_cast<int>(labels[static_cast<std::size_t>(n)]);
    s.record_id = ids[static_cast<std::size_t>(n)];
    validate(s);
    data.samples.push_back(std::move(s));
  }

  std::ifstream js(sidecar_path(path));
  if (js) {
    const auto side = nlohmann::json::parse(js);
    data.variable_names = side.at("variables").get<std::vector<std::string>>();
    for (const auto& v : side.value("normalization", nlohmann::json::array())) {
      data.normalization.push_back({v.at("name").get<std::string>(), v.at("winsor_low").get<double>(),
                                    v.at("winsor_high").get<double>(), v.at("mean").get<double>(),
                                    v.at("std").get<double>()});
    }
  } else {
    for (std::int64_t d = 0; d < D; ++d) data.variable_names.push_back("v" + std::to_string(d));
  }
  if (static_cast<std::int64_t>(data.variable_names.size()) != D) {
    throw ValidationError("load_dataset: sidecar lists " + std::to_string(data.variable_names.size()) +
                          " variables but arrays have " + std::to_string(D));
  }
  return data;
}

}  // namespace ugss
