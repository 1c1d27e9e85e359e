#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "specfair/tabular_model.hpp"
#include "support.hpp"

using namespace specfair;
using specfair::testing::code_of;
using specfair::testing::random_categorical;
using specfair::testing::random_model;

TEST(TabularModel, KeyIsLeftPadded) {
  TabularSoftmaxModel m(5, 3);
  EXPECT_EQ(m.key(std::vector<Token>{}), (ContextKey{5, 5, 5}));
  EXPECT_EQ(m.key(std::vector<Token>{1}), (ContextKey{5, 5, 1}));
  EXPECT_EQ(m.key(std::vector<Token>{0, 1, 2, 3}), (ContextKey{1, 2, 3}));
}

TEST(TabularModel, OutOfVocabularyThrows) {
  TabularSoftmaxModel m(4, 1);
  EXPECT_EQ(code_of([&] { m.predict(std::vector<Token>{4}); }), ErrorCode::kInvalidArgument);
  EXPECT_EQ(code_of([&] { m.predict(std::vector<Token>{-1}); }), ErrorCode::kInvalidArgument);
}

TEST(TabularModel, MissingRowIsUniform) {
  TabularSoftmaxModel m(4, 2);
  EXPECT_EQ(m.predict(std::vector<Token>{1, 2}), Categorical::uniform(4));
}

TEST(TabularModel, PredictIsSoftmaxOfRow) {
  TabularSoftmaxModel m(2, 1);
  m.set_logits({0}, {std::log(3.0), 0.0});
  const auto d = m.predict(std::vector<Token>{0});
  EXPECT_NEAR(d[0], 0.75, 1e-15);
  m.add_to_logits({0}, std::vector<double>{-std::log(3.0), 0.0});
  EXPECT_NEAR(m.predict(std::vector<Token>{0})[0], 0.5, 1e-15);
}

TEST(TabularModel, CeGradientMatchesFiniteDifferences) {
  Rng rng = Rng::stream(11, StreamPurpose::kTest);
  const double h = 1e-5;
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t vocab = 2 + rng.below(8);
    TabularSoftmaxModel m = random_model(rng, vocab, 1);
    const Context ctx{static_cast<Token>(rng.below(vocab))};
    const Categorical target = random_categorical(rng, vocab);
    const auto analytic = m.ce_gradient(ctx, target);
    const ContextKey key = m.key(ctx);
    for (std::size_t x = 0; x < vocab; ++x) {
      auto plus = m;
      auto minus = m;
      std::vector<double> bump(vocab, 0.0);
      bump[x] = h;
      plus.add_to_logits(key, bump);
      minus.add_to_logits(key, bump, -1.0);
      const double numeric = (cross_entropy(target, plus.predict(ctx)) -
                              cross_entropy(target, minus.predict(ctx))) / (2.0 * h);
      EXPECT_NEAR(analytic[x], numeric, 1e-6 * std::max(1.0, std::abs(numeric)));
    }
  }
}

TEST(TabularModel, JsonRoundTripIsExact) {
  Rng rng = Rng::stream(12, StreamPurpose::kTest);
  TabularSoftmaxModel m = random_model(rng, 6, 2);
  m.set_role(ModelRole::kVerifier);
  const auto back = TabularSoftmaxModel::from_json(m.to_json());
  EXPECT_EQ(back, m);
  EXPECT_EQ(back.parameter_hash(), m.parameter_hash());

  const auto path = std::filesystem::temp_directory_path() / "specfair_model_roundtrip.json";
  m.save(path.string());
  EXPECT_EQ(TabularSoftmaxModel::load(path.string()), m);
  std::filesystem::remove(path);
}

TEST(TabularModel, FromJsonRejectsMalformed) {
  EXPECT_EQ(code_of([] { TabularSoftmaxModel::from_json("{"); }), ErrorCode::kInvalidArgument);
  EXPECT_EQ(code_of([] { TabularSoftmaxModel::from_json(R"({"order":1})"); }), ErrorCode::kInvalidArgument);
}

TEST(TabularModel, HashSeesEveryBit) {
  TabularSoftmaxModel m(3, 1);
  m.set_logits({0}, {0.0, 1.0, 2.0});
  const auto before = m.parameter_hash();
  m.add_to_logits({0}, std::vector<double>{0.0, 0.0, std::ldexp(1.0, -50)});
  EXPECT_NE(m.parameter_hash(), before);
}

TEST(TabularModel, RoleNames) {
  for (auto role : {ModelRole::kDrafter, ModelRole::kVerifier, ModelRole::kPosterior}) {
    EXPECT_EQ(parse_model_role(to_string(role)), role);
  }
}
