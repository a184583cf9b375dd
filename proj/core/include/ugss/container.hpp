#pragma once

// Named-array container file used for datasets and checkpoints.
//
// Layout (all integers little-endian):
//
//   offset 0   8 bytes   magic "UGSSCTR\0"
//   offset 8   u32       format version (currently 1)
//   offset 12  u32       reserved, 0
//   offset 16  u64       header length L in bytes
//   offset 24  L bytes   UTF-8 JSON header
//   ...        zero padding up to the next multiple of 8
//   payload    raw array data
//
// The header is {"arrays": [{"name", "dtype", "shape", "offset", "nbytes"}...],
// "meta": {...}}. `offset` is relative to the payload start and is a multiple
// of 8. dtype is one of "f64", "i64", "u8"; arrays are stored in C (row-major)
// order.

#include "ugss/data_model.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ugss {

inline constexpr std::uint32_t kContainerVersion = 1;

enum class DType { f64, i64, u8 };

struct Array {
  std::string name;
  DType dtype = DType::f64;
  std::vector<std::int64_t> shape;
  std::vector<std::byte> bytes;

  std::int64_t element_count() const;
  std::vector<double> as_f64() const;
  std::vector<std::int64_t> as_i64() const;
};

class Container {
 public:
  void add_f64(std::string name, std::vector<std::int64_t> shape, std::span<const double> data);
  void add_i64(std::string name, std::vector<std::int64_t> shape, std::span<const std::int64_t> data);
  void add_u8(std::string name, std::vector<std::int64_t> shape, std::span<const std::uint8_t> data);
  /// Adds a 2-D Eigen matrix in row-major order.
  void add_matrix(std::string name, const Matrix& m);

  const Array& get(const std::string& name) const;
  const Array* find(const std::string& name) const;
  Matrix matrix(const std::string& name) const;
  const std::vector<Array>& arrays() const { return arrays_; }

  /// Free-form JSON object serialised as text.
  std::string meta_json = "{}";

  void write(const std::filesystem::path& path) const;
  static Container read(const std::filesystem::path& path);

 private:
  std::vector<Array> arrays_;
};

/// Writes `data` to `path` plus a JSON sidecar at `path` + ".json" holding
/// the variable names and normalisation statistics.
void save_dataset(const Dataset& data, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

std::filesystem::path sidecar_path(const std::filesystem::path& path);

}  // namespace ugss
