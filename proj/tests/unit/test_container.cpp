#include "helpers.hpp"

#include <ugss/container.hpp>

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

using namespace ugss;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "ugss_tests";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST(Container, ArraysAndMetaRoundTrip) {
  Container c;
  const std::vector<double> f{1.5, -2.0, 3.25, 0.0, 1e-300, 7.0};
  const std::vector<std::int64_t> i{1, -2, 3};
  const std::vector<std::uint8_t> u{0, 1, 1, 0, 1};
  c.add_f64("f", {2, 3}, f);
  c.add_i64("i", {3}, i);
  c.add_u8("u", {5}, u);
  c.meta_json = R"({"kind":"test"})";
  const auto path = temp_file("arrays.ugss");
  c.write(path);
  const Container r = Container::read(path);
  EXPECT_EQ(r.get("f").as_f64(), f);
  EXPECT_EQ(r.get("i").as_i64(), i);
  EXPECT_EQ(r.get("u").shape, std::vector<std::int64_t>{5});
  EXPECT_EQ(r.matrix("f")(1, 0), 0.0);
  EXPECT_EQ(r.matrix("f")(0, 2), 3.25);
  EXPECT_NE(r.meta_json.find("test"), std::string::npos);
  EXPECT_THROW(r.get("missing"), std::runtime_error);
}

TEST(Container, HeaderLayout) {
  Container c;
  const std::vector<double> f{1.0};
  c.add_f64("f", {1}, f);
  const auto path = temp_file("layout.ugss");
  c.write(path);
  std::ifstream in(path, std::ios::binary);
  char magic[8];
  in.read(magic, 8);
  EXPECT_EQ(std::string(magic, 7), "UGSSCTR");
  std::uint32_t version = 0;
  in.read(reinterpret_cast<char*>(&version), 4);
  EXPECT_EQ(version, kContainerVersion);
}

TEST(Container, RejectsForeignFile) {
  const auto path = temp_file("foreign.ugss");
  std::ofstream(path) << "not a container at all, just text";
  EXPECT_THROW(Container::read(path), std::runtime_error);
}

TEST(Container, RejectsShapeMismatch) {
  Container c;
  const std::vector<double> f{1.0, 2.0};
  EXPECT_THROW(c.add_f64("f", {3}, f), std::invalid_argument);
}

TEST(Container, DatasetRoundTripIsExact) {
  Rng rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    Dataset d;
    const auto D = 1 + static_cast<Eigen::Index>(rng.uniform_index(4));
    for (Eigen::Index k = 0; k < D; ++k) d.variable_names.push_back("v" + std::to_string(k));
    const auto n = 1 + rng.uniform_index(6);
    for (std::size_t i = 0; i < n; ++i) {
      auto s = support::random_sample(rng, 1 + static_cast<Eigen::Index>(rng.uniform_index(7)), D, 0.7,
                                      static_cast<int>(rng.uniform_index(2)));
      s.record_id = static_cast<std::int64_t>(1000 + i);
      if (s.observed_count() > 0 && rng.bernoulli(0.5)) s = apply_artificial_masking(s, 0.3, i);
      d.samples.push_back(s);
    }
    d.normalization = {VariableSpec{"v0", -1.0, 2.0, 0.5, 1.5}};
    d.normalization.resize(static_cast<std::size_t>(D), VariableSpec{"vx", 0.0, 1.0, 0.0, 1.0});
    const auto path = temp_file("data.ugss");
    save_dataset(d, path);
    const Dataset r = load_dataset(path);
    ASSERT_EQ(r.size(), d.size());
    EXPECT_EQ(r.variable_names, d.variable_names);
    EXPECT_EQ(r.normalization, d.normalization);
    for (std::size_t i = 0; i < d.size(); ++i) {
      const auto& a = d.samples[i];
      const auto& b = r.samples[i];
      EXPECT_EQ(a.x_tilde, b.x_tilde);
      EXPECT_EQ(a.mask, b.mask);
      EXPECT_EQ(a.delta, b.delta);
      EXPECT_EQ(a.timestamps, b.timestamps);
      EXPECT_EQ(a.label, b.label);
      EXPECT_EQ(a.record_id, b.record_id);
      EXPECT_EQ(a.held_out_count(), b.held_out_count());
      if (a.held_out_count() > 0) {
        EXPECT_EQ(a.imp_mask, b.imp_mask);
        EXPECT_EQ(a.x_truth, b.x_truth);
      }
    }
  }
}
