#include <ugss/config.hpp>
#include <ugss/data_model.hpp>

#include <gtest/gtest.h>

using namespace ugss;

TEST(Config, DefaultsAreValid) {
  const ExperimentConfig c;
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.cell, CellType::gru_u);
  EXPECT_DOUBLE_EQ(c.focal_w1, 0.25);
  EXPECT_DOUBLE_EQ(c.focal_w2, 5.0);
  EXPECT_DOUBLE_EQ(c.masking_ratio, 0.05);
}

TEST(Config, JsonRoundTrip) {
  ExperimentConfig c;
  c.cell = CellType::vanilla_gru;
  c.w_alpha = WeightMode::full;
  c.alpha_input = AlphaInput::multiply;
  c.mlp_hidden = {7};
  c.lambda_imp = 0.5;
  c.run_folds = {0, 2};
  c.seed = 12345678901ULL;
  const ExperimentConfig r = parse_config(to_json(c));
  EXPECT_EQ(to_json(r), to_json(c));
  EXPECT_EQ(r.cell, CellType::vanilla_gru);
  EXPECT_EQ(r.seed, c.seed);
}

TEST(Config, PartialObjectKeepsDefaults) {
  const auto c = parse_config(R"({"epochs": 3})");
  EXPECT_EQ(c.epochs, 3);
  EXPECT_EQ(c.hidden_dim, ExperimentConfig{}.hidden_dim);
}

TEST(Config, RejectsUnknownKey) {
  EXPECT_THROW(parse_config(R"({"epochz": 3})"), ValidationError);
}

TEST(Config, RejectsBadValues) {
  EXPECT_THROW(parse_config(R"({"masking_ratio": 1.5})"), ValidationError);
  EXPECT_THROW(parse_config(R"({"cell": "lstm"})"), ValidationError);
  EXPECT_THROW(parse_config(R"({"hidden_dim": "big"})"), ValidationError);
  EXPECT_THROW(parse_config(R"([1, 2])"), ValidationError);
  EXPECT_THROW(parse_config("{"), ValidationError);
}
