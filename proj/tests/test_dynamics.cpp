#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "obsrisk/dynamics.hpp"
#include "obsrisk/errors.hpp"
#include "test_support.hpp"

namespace obsrisk {
namespace {

TEST(Iterate, TableOneWitnessAlternates) {
  const ScenarioModel m = load_scenario("table1-witness");
  const DeploymentTrace tr = iterate_deployment(
      m, baseline_policy(m), 0.5, Comparator::kGreater, 50, BackendSpec::exact());
  ASSERT_EQ(tr.steps.size(), 50u);
  ASSERT_TRUE(tr.cycle.has_value());
  EXPECT_EQ(*tr.cycle, (Cycle{1, 2}));
  const int d_opt = optimal_rule(m, 0.0);
  EXPECT_EQ(d_opt, 1);
  EXPECT_NEAR(tr.steps[0].mean_outcome.value, 0.6, 1e-12);
  for (int t = 1; t < 50; ++t) {
    const auto& step = tr.steps[static_cast<std::size_t>(t)];
    EXPECT_EQ(step.t, t);
    ASSERT_TRUE(step.score.has_value());
    EXPECT_EQ(step.score->generation(), t);
    const int decision = step.policy.decide(0.0);
    if (t % 2 == 1) {
      EXPECT_EQ(decision, d_opt);
      EXPECT_NEAR(step.mean_outcome.value, 0.2, 1e-12);
    } else {
      EXPECT_EQ(decision, 1 - d_opt);
      EXPECT_NEAR(step.mean_outcome.value, 0.8, 1e-12);
    }
  }
}

TEST(Iterate, AlternationTheoremOnRandomStrata) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 40; ++trial) {
    // mu1 < theta < mu0 in the first stratum, baseline score above theta.
    const double theta = 0.2 + 0.6 * unit(rng);
    const double mu1 = theta * unit(rng) * 0.99;
    const double mu0 = theta + (1 - theta) * (0.01 + 0.99 * unit(rng));
    const double s0_min = (theta - mu0) / (mu1 - mu0);  // pi below this
    const double pi = s0_min * unit(rng) * 0.99;
    const std::string mu0e = "clamp(" + format_shortest(mu0) + " - x, 0, 1)";
    const std::string mu1e = format_shortest(mu1);
    const auto m = testing::discrete_model({{0.0, 0.5}, {0.5, 0.5}}, {}, mu0e,
                                           mu1e, format_shortest(pi));
    const int horizon = 2 + static_cast<int>(unit(rng) * 49);
    const DeploymentTrace tr = iterate_deployment(
        m, baseline_policy(m), theta,
        Comparator::kGreater, horizon, BackendSpec::exact());
    for (int t = 1; t < horizon; ++t) {
      EXPECT_EQ(tr.steps[static_cast<std::size_t>(t)].policy.decide(0.0),
                t % 2 == 1 ? 1 : 0)
          << trial << " t=" << t;
    }
  }
}

TEST(Iterate, FixedPointHasCycleZeroOne) {
  // s0 = mu1 = 0.6 > 0.5 so the induced threshold policy treats everyone,
  // which is what the baseline already does.
  const auto m = testing::discrete_model({{0.0, 1.0}}, {}, "0.8", "0.6", "1");
  const DeploymentTrace tr = iterate_deployment(
      m, baseline_policy(m), 0.5, Comparator::kGreater, 6, BackendSpec::exact());
  ASSERT_TRUE(tr.cycle.has_value());
  EXPECT_EQ(*tr.cycle, (Cycle{0, 1}));
  for (const auto& step : tr.steps) {
    EXPECT_NEAR(step.mean_outcome.value, 0.6, 1e-15);
  }
}

TEST(Iterate, ToyRecursionAtThirtyHundredths) {
  const ScenarioModel m = testing::toy();
  const DeploymentTrace tr =
      iterate_deployment(m, baseline_policy(m), 0.30, Comparator::kGreaterEqual, 3);
  ASSERT_EQ(tr.steps.size(), 3u);
  ASSERT_TRUE(tr.steps[1].treated.has_value());
  EXPECT_TRUE(tr.steps[1].treated->empty());
  // Nobody treated at t = 1, so s2 is mu0 = x and t = 2 treats {x >= 0.3}.
  for (double x : {0.0, 0.25, 0.5, 0.9}) {
    EXPECT_NEAR((*tr.steps[2].score)(x), x, 1e-15);
  }
  ASSERT_EQ(tr.steps[2].treated->intervals().size(), 1u);
  EXPECT_NEAR(tr.steps[2].treated->intervals()[0].lo, 0.3, 1e-11);
  EXPECT_EQ(tr.steps[2].treated->intervals()[0].hi, 1.0);
  EXPECT_FALSE(tr.cycle.has_value());
  EXPECT_NEAR(tr.steps[1].mean_outcome.value, 0.5, 1e-9);
  EXPECT_NEAR(tr.steps[2].mean_outcome.value,
              testing::toy_mu0_integral(0.0, 0.3) +
                  testing::toy_mu1_integral(0.3, 1.0),
              1e-9);
}

TEST(Iterate, ToyContinuousCycleDetected) {
  const ScenarioModel m = testing::toy();
  const DeploymentTrace tr =
      iterate_deployment(m, baseline_policy(m), 0.30, Comparator::kGreaterEqual, 6);
  ASSERT_TRUE(tr.cycle.has_value());
  EXPECT_EQ(*tr.cycle, (Cycle{1, 2}));
}

TEST(Iterate, HorizonValidation) {
  const ScenarioModel m = load_scenario("table1-witness");
  EXPECT_THROW(iterate_deployment(m, baseline_policy(m), 0.5,
                                  Comparator::kGreater, 0),
               DomainError);
  const DeploymentTrace one =
      iterate_deployment(m, baseline_policy(m), 0.5, Comparator::kGreater, 1);
  ASSERT_EQ(one.steps.size(), 1u);
  EXPECT_FALSE(one.steps[0].score.has_value());
}

TEST(Iterate, Deterministic) {
  const ScenarioModel m = testing::toy();
  const auto backend = BackendSpec::monte_carlo_with(20'000, 5);
  const DeploymentTrace a =
      iterate_deployment(m, baseline_policy(m), 0.2, Comparator::kGreaterEqual, 5, backend);
  const DeploymentTrace b =
      iterate_deployment(m, baseline_policy(m), 0.2, Comparator::kGreaterEqual, 5, backend);
  ASSERT_EQ(a.steps.size(), b.steps.size());
  for (std::size_t i = 0; i < a.steps.size(); ++i) {
    EXPECT_EQ(a.steps[i].mean_outcome, b.steps[i].mean_outcome);
    EXPECT_EQ(a.steps[i].treated, b.steps[i].treated);
  }
  EXPECT_EQ(a.cycle, b.cycle);
}

TEST(Expertise, WitnessInverts) {
  const ScenarioModel m = load_scenario("expertise-witness");
  const ExpertiseComparison c = expertise_experiment(
      m, m.pi0(), parse_expression(m.metadata().at("pi0_skilled")), 0.3,
      Comparator::kGreaterEqual, BackendSpec::exact());
  // Four strata-arm products by hand: u = 0 has mu = (0.9, 0.1), u = 1 has
  // mu = (0.1, 0.5).
  const double e0 = 0.5 * (0.5 * 0.1 + 0.5 * 0.9) + 0.5 * (0.5 * 0.5 + 0.5 * 0.1);
  const double e0s = 0.5 * (0.9 * 0.1 + 0.1 * 0.9) + 0.5 * (0.1 * 0.5 + 0.9 * 0.1);
  EXPECT_NEAR(c.e0.value, e0, 1e-12);
  EXPECT_NEAR(c.e0_star.value, e0s, 1e-12);
  EXPECT_NEAR(c.e0.value, 0.4, 1e-12);
  EXPECT_NEAR(c.e0_star.value, 0.16, 1e-12);
  EXPECT_NEAR(c.e1.value, 0.5 * 0.1 + 0.5 * 0.5, 1e-12);
  EXPECT_NEAR(c.e1_star.value, 0.5 * 0.9 + 0.5 * 0.1, 1e-12);
  EXPECT_TRUE(c.inversion);
  EXPECT_TRUE(c.base_scenario.same_counterfactuals(c.skilled_scenario));
  ASSERT_TRUE(c.skill_base && c.skill_skilled);
  EXPECT_GT(*c.skill_skilled, *c.skill_base);
}

TEST(Expertise, NoSkillGapIsRejected) {
  const ScenarioModel m = load_scenario("expertise-witness");
  EXPECT_THROW(expertise_experiment(m, m.pi0(), m.pi0(), 0.3), DomainError);
  // Skilled system treats the helped stratum less often.
  EXPECT_THROW(expertise_experiment(m, m.pi0(), parse_expression("0.1 + 0.8 * u"),
                                    0.3),
               DomainError);
}

TEST(Expertise, IrrelevantTreatmentNeverInverts) {
  const auto m = testing::discrete_model({{0.0, 1.0}}, {{0.0, 0.5}, {1.0, 0.5}},
                                         "0.3 + 0.2 * u", "0.3 + 0.2 * u", "0.5");
  const ExpertiseComparison c = expertise_experiment(
      m, m.pi0(), parse_expression("0.9 - 0.8 * u"), 0.3);
  EXPECT_FALSE(c.inversion);
  EXPECT_NEAR(c.e0.value, c.e1.value, 1e-15);
  EXPECT_NEAR(c.e0.value, c.e0_star.value, 1e-15);
  EXPECT_NEAR(c.e1.value, c.e1_star.value, 1e-15);
  EXPECT_FALSE(c.notes.empty());
}

TEST(Expertise, SkillLowersBaselineRiskOnWitnessFamily) {
  // mu1 < mu0 exactly on {d_opt = 1}; pi unchanged off that set.
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 30; ++trial) {
    const double a = 0.5 + 0.5 * unit(rng), b = 0.5 * unit(rng);
    const double p = 0.1 + 0.4 * unit(rng), q = p + (0.99 - p) * unit(rng);
    const std::string mu0 = format_shortest(a) + " * (1 - u) + 0.1 * u";
    const std::string mu1 = format_shortest(b) + " * (1 - u) + 0.6 * u";
    const auto m = testing::discrete_model({{0.0, 1.0}}, {{0.0, 0.5}, {1.0, 0.5}},
                                           mu0, mu1, format_shortest(p));
    const std::string skilled = format_shortest(q) + " * (1 - u) + " +
                                format_shortest(p) + " * u";
    const ExpertiseComparison c =
        expertise_experiment(m, m.pi0(), parse_expression(skilled), 0.3,
                             Comparator::kGreaterEqual, BackendSpec::exact());
    EXPECT_LT(c.e0_star.value, c.e0.value);
  }
}

}  // namespace
}  // namespace obsrisk
