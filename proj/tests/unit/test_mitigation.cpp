#include <gtest/gtest.h>

#include <algorithm>
#include <sstream>

#include "specfair/mitigation.hpp"
#include "specfair/synthetic_family.hpp"
#include "support.hpp"

using namespace specfair;
using specfair::testing::code_of;
using specfair::testing::spearman;

namespace {

FamilySpec five_tasks() {
  FamilySpec spec;
  spec.vocab_size = 20;
  spec.tasks = {{"a", 4, 0.02, 0.05, 4.0},
                {"b", 4, 0.03, 0.12, 2.0},
                {"c", 4, 0.03, 0.2, 1.5},
                {"d", 4, 0.04, 0.3, 0.75},
                {"e", 4, 0.05, 0.4, 0.25}};
  return spec;
}

FamilySpec two_tasks() {
  FamilySpec spec;
  spec.vocab_size = 16;
  spec.posterior_scale = 0.5;
  spec.tasks = {{"hi", 4, 0.02, 0.08, 3.0}, {"lo", 4, 0.04, 0.5, 1.0}};
  return spec;
}

TrainerConfig short_run(std::size_t steps) {
  TrainerConfig t;
  t.steps = steps;
  t.seed = 7;
  return t;
}

}  // namespace

TEST(WeightedDirection, MatchesFormulaAndZeroesStar) {
  LogitGradient g0{{{0}, {1.0, -1.0}}};
  LogitGradient g1{{{1}, {0.5, -0.5}}};
  LogitGradient g2{{{2}, {2.0, -2.0}}, {{0}, {1.0, 1.0}}};
  const std::vector<double> d{1.5, 1.0, 2.0};
  const std::vector<LogitGradient> grads{g0, g1, g2};
  const auto dir = fairness_weighted_direction(d, grads);
  EXPECT_EQ(dir.star, 1u);
  EXPECT_EQ(dir.weights, (std::vector<double>{0.5, 0.0, 1.0}));
  EXPECT_EQ(dir.delta.count({1}), 0u);
  EXPECT_NEAR(dir.delta.at({0})[0], -(0.5 * 1.0 + 1.0 * 1.0) / 3.0, 1e-15);
  EXPECT_NEAR(dir.delta.at({0})[1], -(0.5 * -1.0 + 1.0 * 1.0) / 3.0, 1e-15);
  EXPECT_NEAR(dir.delta.at({2})[0], -2.0 / 3.0, 1e-15);
  EXPECT_EQ(code_of([&] { fairness_weighted_direction(std::vector<double>{1.0}, std::vector<LogitGradient>{g0}); }),
            ErrorCode::kDomain);
}

TEST(WeightedDirection, TiesGoToLowestIndex) {
  const std::vector<double> d{1.0, 1.0};
  const std::vector<LogitGradient> grads{{{{0}, {1.0, -1.0}}}, {{{1}, {1.0, -1.0}}}};
  const auto dir = fairness_weighted_direction(d, grads);
  EXPECT_EQ(dir.star, 0u);
  EXPECT_EQ(dir.weights, (std::vector<double>{0.0, 0.0}));
  EXPECT_TRUE(dir.delta.empty());
}

TEST(TaskEstimate, GradientMatchesFiniteDifferences) {
  const auto fam = make_synthetic_family(five_tasks(), 3);
  Rng rng = Rng::stream(3, StreamPurpose::kTest);
  const auto batch = sample_batch(fam.family[2], 6, rng);
  const auto est = estimate_task_ce(fam.drafter, fam.verifier, batch, true, nullptr);
  const double h = 1e-5;
  auto d_hat = [&](const TabularSoftmaxModel& q) {
    return estimate_task_ce(q, fam.verifier, batch, true, nullptr).d_hat;
  };
  for (const auto& [key, row] : est.gradient) {
    for (std::size_t x = 0; x < row.size(); ++x) {
      auto plus = fam.drafter;
      auto minus = fam.drafter;
      std::vector<double> bump(row.size(), 0.0);
      bump[x] = h;
      plus.add_to_logits(key, bump);
      minus.add_to_logits(key, bump, -1.0);
      const double numeric = (d_hat(plus) - d_hat(minus)) / (2.0 * h);
      EXPECT_NEAR(row[x], numeric, 1e-6 * std::max(1.0, std::abs(numeric)));
    }
  }
}

TEST(TaskEstimate, SampledTargetIsUnbiased) {
  const auto fam = make_synthetic_family(five_tasks(), 4);
  Rng rng = Rng::stream(4, StreamPurpose::kTest);
  const std::vector<Context> batch{fam.family[1].prefixes()[0].context};
  const auto exact = estimate_task_ce(fam.drafter, fam.verifier, batch, true, nullptr);
  const auto& key = exact.gradient.begin()->first;
  std::vector<double> mean(exact.gradient.begin()->second.size(), 0.0);
  const int n = 40000;
  for (int i = 0; i < n; ++i) {
    const auto est = estimate_task_ce(fam.drafter, fam.verifier, batch, false, &rng);
    for (std::size_t x = 0; x < mean.size(); ++x) mean[x] += est.gradient.at(key)[x] / n;
  }
  for (std::size_t x = 0; x < mean.size(); ++x) {
    EXPECT_NEAR(mean[x], exact.gradient.at(key)[x], 0.01);
  }
  EXPECT_EQ(code_of([&] { estimate_task_ce(fam.drafter, fam.verifier, batch, false, nullptr); }),
            ErrorCode::kInvalidArgument);
}

TEST(Scdf, StarWeightIsExactlyZeroAndVerifierUntouched) {
  const auto fam = make_synthetic_family(five_tasks(), 5);
  const auto hash = fam.verifier.parameter_hash();
  const auto result = run_scdf(fam.verifier, fam.drafter, fam.family, short_run(300));
  ASSERT_EQ(result.history.size(), 300u);
  for (const auto& step : result.history) {
    const auto pos = std::find(step.tasks.begin(), step.tasks.end(), step.star) - step.tasks.begin();
    ASSERT_LT(static_cast<std::size_t>(pos), step.tasks.size());
    EXPECT_EQ(step.weights[pos], 0.0);
    for (double w : step.weights) EXPECT_GE(w, 0.0);
  }
  EXPECT_EQ(result.verifier_hash_before, hash);
  EXPECT_EQ(result.verifier_hash_after, hash);
  EXPECT_EQ(fam.verifier.parameter_hash(), hash);
}

TEST(Scdf, ReducesUnfairness) {
  const auto fam = make_synthetic_family(five_tasks(), 6);
  const auto result = run_scdf(fam.verifier, fam.drafter, fam.family, short_run(500));
  EXPECT_LT(result.history.back().exact_u, result.initial_u);
}

TEST(Scdf, SmallStepsDescendMonotonically) {
  const auto fam = make_synthetic_family(five_tasks(), 7);
  TrainerConfig t = short_run(1000);
  t.step_size = 1e-3;
  const auto result = run_scdf(fam.verifier, fam.drafter, fam.family, t);
  std::vector<double> u{result.initial_u};
  for (const auto& s : result.history) u.push_back(s.exact_u);
  for (std::size_t i = 0; i + 100 < u.size(); ++i) {
    ASSERT_LE(u[i + 100], u[i]) << "window starting at step " << i;
  }
}

TEST(Scdf, OtherOptimizersAlsoReduceU) {
  const auto fam = make_synthetic_family(five_tasks(), 8);
  for (auto kind : {OptimizerKind::kMomentum, OptimizerKind::kAdam}) {
    TrainerConfig t = short_run(400);
    t.optimizer = kind;
    t.step_size = kind == OptimizerKind::kAdam ? 0.01 : 0.02;
    const auto result = run_scdf(fam.verifier, fam.drafter, fam.family, t);
    EXPECT_LT(result.history.back().exact_u, result.initial_u) << to_string(kind);
  }
}

TEST(Scdf, DeterministicForSeed) {
  const auto fam = make_synthetic_family(five_tasks(), 9);
  TrainerConfig t = short_run(50);
  t.tasks_per_step = 3;
  t.exact_x_expectation = false;
  const auto a = run_scdf(fam.verifier, fam.drafter, fam.family, t);
  const auto b = run_scdf(fam.verifier, fam.drafter, fam.family, t);
  EXPECT_EQ(a.drafter, b.drafter);
  ASSERT_EQ(a.log.size(), b.log.size());
  for (std::size_t i = 0; i < a.log.size(); ++i) {
    EXPECT_EQ(a.log[i].task, b.log[i].task);
    EXPECT_EQ(a.log[i].d_hat, b.log[i].d_hat);
    EXPECT_EQ(a.log[i].acceptance, b.log[i].acceptance);
  }
  for (const auto& s : a.history) EXPECT_EQ(s.tasks.size(), 3u);
}

TEST(Scdf, SingleTaskStepsLeaveDrafterAlone) {
  const auto fam = make_synthetic_family(five_tasks(), 10);
  TrainerConfig t = short_run(20);
  t.tasks_per_step = 1;
  const auto result = run_scdf(fam.verifier, fam.drafter, fam.family, t);
  EXPECT_EQ(result.drafter, fam.drafter);
}

TEST(Scdf, LogIsFlushedWithExactHeader) {
  const auto fam = make_synthetic_family(five_tasks(), 11);
  std::ostringstream log;
  const auto result = run_scdf(fam.verifier, fam.drafter, fam.family, short_run(3), kEpsilonFloor, &log);
  const std::string text = log.str();
  EXPECT_EQ(text.substr(0, text.find('\n')), "timestamp,step,star_task,task,d_hat,acceptance,tv_q,tv_p");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 1 + 3 * 5);
  EXPECT_EQ(result.log.size(), 15u);
}

TEST(Scdf, ConvergenceStopsEarly) {
  const auto fam = make_synthetic_family(five_tasks(), 12);
  TrainerConfig t = short_run(2000);
  t.convergence_tol = 1e-3;
  t.convergence_window = 20;
  const auto result = run_scdf(fam.verifier, fam.drafter, fam.family, t);
  EXPECT_TRUE(result.converged);
  EXPECT_LT(result.history.size(), 2000u);
}

TEST(Scdf, DivergenceAborts) {
  const auto fam = make_synthetic_family(five_tasks(), 13);
  TrainerConfig t = short_run(200);
  t.step_size = 1e4;
  t.divergence_factor = 1.5;
  EXPECT_EQ(code_of([&] { run_scdf(fam.verifier, fam.drafter, fam.family, t); }),
            ErrorCode::kTrainingDiverged);
}

TEST(Scdf, GradientClipBoundsTheUpdate) {
  TabularSoftmaxModel m(2, 1);
  TrainerConfig t;
  t.grad_clip = 0.5;
  t.step_size = 1.0;
  Optimizer opt(t);
  opt.apply(m, LogitGradient{{{0}, {3.0, 4.0}}});
  EXPECT_NEAR(m.logits({0})[0], 0.3, 1e-15);
  EXPECT_NEAR(m.logits({0})[1], 0.4, 1e-15);
}

TEST(Scdf, OptimizerNames) {
  EXPECT_EQ(parse_optimizer("adam"), OptimizerKind::kAdam);
  EXPECT_EQ(parse_optimizer(to_string(OptimizerKind::kMomentum)), OptimizerKind::kMomentum);
  EXPECT_EQ(code_of([] { parse_optimizer("lbfgs"); }), ErrorCode::kInvalidArgument);
}

TEST(AcceptanceProxy, BoundsAndPerfectDrafter) {
  const auto fam = make_synthetic_family(five_tasks(), 14);
  for (std::uint64_t step = 0; step < 50; ++step) {
    Rng rng = Rng::stream(14, StreamPurpose::kProxy, 0, step);
    const double a = acceptance_proxy(fam.verifier, fam.drafter, fam.family[4], 5, 8, rng);
    EXPECT_GE(a, 0.0);
    EXPECT_LE(a, 1.0);
  }
  Rng rng = Rng::stream(14, StreamPurpose::kProxy);
  EXPECT_EQ(acceptance_proxy(fam.verifier, fam.verifier, fam.family[0], 5, 8, rng), 1.0);
}

TEST(AcceptanceProxy, RankCorrelatesWithExactAlpha) {
  FamilySpec spec = five_tasks();
  spec.tasks.push_back({"f", 4, 0.02, 0.6, 1.0});
  spec.vocab_size = 24;
  const auto fam = make_synthetic_family(spec, 15);
  std::vector<double> proxy;
  std::vector<double> exact;
  for (std::size_t t = 0; t < fam.family.size(); ++t) {
    Rng rng = Rng::stream(15, StreamPurpose::kProxy, t);
    proxy.push_back(acceptance_proxy(fam.verifier, fam.drafter, fam.family[t], 5, 400, rng));
    exact.push_back(task_metrics(fam.verifier, fam.drafter, fam.family[t], {4, 0.1}).alpha);
  }
  EXPECT_GT(spearman(proxy, exact), 0.0);
}

TEST(TemperatureSweep, LimitsAndQuality) {
  const auto fam = make_synthetic_family(five_tasks(), 16);
  const std::vector<double> temps{1.0, 1e6};
  const std::map<std::string, double> quality{{"a", 0.5}};
  const auto rows = temperature_sweep(fam.verifier, fam.drafter, fam.family, temps, quality);
  ASSERT_EQ(rows.size(), 10u);
  for (std::size_t t = 0; t < fam.family.size(); ++t) {
    const auto base = task_metrics(fam.verifier, fam.drafter, fam.family[t], {4, 0.1});
    EXPECT_NEAR(rows[2 * t].alpha, base.alpha, 1e-12);
    EXPECT_GE(rows[2 * t + 1].alpha, 1.0 - 1e-3);
  }
  EXPECT_EQ(*rows[0].quality_adjusted, 0.5 * rows[0].alpha);
  EXPECT_FALSE(rows[2].quality_adjusted.has_value());
  EXPECT_EQ(code_of([&] {
              temperature_sweep(fam.verifier, fam.drafter, fam.family, std::vector<double>{-1.0}, quality);
            }),
            ErrorCode::kInvalidTemperature);
}

TEST(DataBalance, MoreLowResourceDataLowersU) {
  const auto fam = make_synthetic_family(two_tasks(), 17);
  const std::vector<double> grid{0.0, 0.5};
  const auto rows = data_balance_finetune(fam.verifier, fam.drafter, fam.family[0], fam.family[1],
                                          grid, short_run(300));
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_LT(rows[1].unfairness, rows[0].unfairness);
  EXPECT_LT(rows[1].d_b, rows[0].d_b);
  EXPECT_GT(rows[1].alpha_b, rows[0].alpha_b);
  EXPECT_EQ(code_of([&] {
              data_balance_finetune(fam.verifier, fam.drafter, fam.family[0], fam.family[1],
                                    std::vector<double>{1.5}, short_run(1));
            }),
            ErrorCode::kInvalidArgument);
}
