#include "obsrisk/dynamics.hpp"

#include <cmath>
#include <variant>

#include "obsrisk/errors.hpp"

namespace obsrisk {

namespace {

constexpr double kCycleTolerance = 10 * kRootTolerance;

// What a step's decisions look like for cycle detection: per-cell
// propensities on discrete X, the treated set of a threshold rule on
// continuous X, or nothing comparable.
using Signature = std::variant<std::monostate, std::vector<double>, TreatedSet>;

Signature signature(const ScenarioModel& model, const DeploymentStep& step) {
  if (model.x_law().is_discrete()) {
    std::vector<double> cells;
    for (const auto& p : model.x_law().points()) {
      for (const auto& lvl : model.marginal_levels()) {
        cells.push_back(step.policy.propensity(p.value, lvl.value));
      }
    }
    return cells;
  }
  if (step.treated) return *step.treated;
  return std::monostate{};
}

bool same_signature(const Signature& a, const Signature& b) {
  if (a.index() != b.index()) return false;
  if (std::holds_alternative<std::monostate>(a)) return false;
  if (const auto* cells = std::get_if<std::vector<double>>(&a)) {
    return *cells == std::get<std::vector<double>>(b);
  }
  return std::get<TreatedSet>(a).approx_equal(std::get<TreatedSet>(b),
                                              kCycleTolerance);
}

// Treated set of a stochastic policy on discrete X when its propensity is
// {0,1}-valued and does not vary with u.
std::optional<TreatedSet> deterministic_points(const ScenarioModel& model,
                                               const Policy& policy) {
  if (!model.x_law().is_discrete()) return std::nullopt;
  std::vector<double> treated;
  for (const auto& p : model.x_law().points()) {
    std::optional<double> common;
    for (const auto& lvl : model.marginal_levels()) {
      const double v = policy.propensity(p.value, lvl.value);
      if (v != 0.0 && v != 1.0) return std::nullopt;
      if (common && *common != v) return std::nullopt;
      common = v;
    }
    if (*common == 1.0) treated.push_back(p.value);
  }
  return TreatedSet::from_points(std::move(treated));
}

}  // namespace

DeploymentTrace iterate_deployment(const ScenarioModel& model,
                                   const Policy& baseline, double theta,
                                   Comparator comparator, int horizon,
                                   const BackendSpec& backend) {
  if (horizon < 1) throw DomainError("deployment horizon must be >= 1");
  validate_policy(model, baseline);

  DeploymentTrace trace;
  std::vector<Signature> seen;
  for (int t = 0; t < horizon; ++t) {
    std::optional<RiskScore> score;
    std::optional<TreatedSet> treated;
    std::optional<Policy> policy;
    if (t == 0) {
      policy = baseline;
      treated = baseline.is_threshold() ? treated_set(model, baseline)
                                        : deterministic_points(model, baseline);
    } else {
      score = score_from(model, trace.steps.back().policy);
      policy = Policy::threshold(*score, theta, comparator);
      treated = treated_set(model, *policy);
    }
    DeploymentStep step{t, score, *policy, mean_outcome(model, *policy, backend),
                        treated};
    Signature sig = signature(model, step);
    trace.steps.push_back(std::move(step));
    if (!trace.cycle) {
      for (int i = 0; i < t; ++i) {
        if (same_signature(seen[static_cast<std::size_t>(i)], sig)) {
          trace.cycle = Cycle{i, t - i};
          break;
        }
      }
    }
    seen.push_back(std::move(sig));
  }
  return trace;
}

ExpertiseComparison expertise_experiment(const ScenarioModel& model,
                                         const Expression& pi0_base,
                                         const Expression& pi0_skilled,
                                         double theta, Comparator comparator,
                                         const BackendSpec& backend) {
  ScenarioModel base = model.with_pi0(pi0_base);
  ScenarioModel skilled = model.with_pi0(pi0_skilled);

  // P(A = 1, d_opt = 1) in each system and P(d_opt = 1).
  const auto cuts = optimal_breakpoints(model);
  const auto joint = expectation(
      model,
      [&](double x, std::span<double> out) {
        out[0] = out[1] = out[2] = 0.0;
        for (const auto& lvl : model.marginal_levels()) {
          const double u = lvl.value;
          if (!(model.mu1().evaluate(x, u) < model.mu0().evaluate(x, u))) {
            continue;
          }
          out[0] += lvl.weight * pi0_base.evaluate(x, u);
          out[1] += lvl.weight * pi0_skilled.evaluate(x, u);
          out[2] += lvl.weight;
        }
      },
      3, backend, cuts);

  std::vector<std::string> notes;
  std::optional<double> skill_base;
  std::optional<double> skill_skilled;
  const double mass = joint[2].value;
  if (mass > joint[2].error_bound + 1e-12) {
    skill_base = joint[0].value / mass;
    skill_skilled = joint[1].value / mass;
    const double tol =
        (joint[0].error_bound + joint[1].error_bound) / mass + 1e-12;
    if (!(*skill_skilled - *skill_base > tol)) {
      throw DomainError(
          "skill precondition violated: P*(A=1 | d_opt=1) = " +
          std::to_string(*skill_skilled) + " is not above P(A=1 | d_opt=1) = " +
          std::to_string(*skill_base));
    }
  } else {
    bool differs = false;
    for (double x : model.x_law().validation_grid()) {
      for (const auto& lvl : model.marginal_levels()) {
        differs = differs || pi0_base.evaluate(x, lvl.value) !=
                                 pi0_skilled.evaluate(x, lvl.value);
      }
    }
    if (!differs) {
      throw DomainError(
          "skill precondition violated: the two baseline propensities are "
          "identical");
    }
    notes.push_back(
        "P(d_opt = 1) = 0: treatment never helps, so the skill comparison is "
        "vacuous; only a difference in pi0 was required");
  }

  const Policy base_policy = baseline_policy(base);
  const Policy skilled_policy = baseline_policy(skilled);
  const Estimate e0 = mean_outcome(base, base_policy, backend);
  const Estimate e0_star = mean_outcome(skilled, skilled_policy, backend);
  const Estimate e1 = mean_outcome(
      base, Policy::threshold(score_from(base, base_policy), theta, comparator),
      backend);
  const Estimate e1_star = mean_outcome(
      skilled,
      Policy::threshold(score_from(skilled, skilled_policy), theta, comparator),
      backend);

  const bool better_at_0 =
      e0_star.value + e0_star.error_bound + e0.error_bound < e0.value;
  const bool worse_at_1 =
      e1_star.value - e1_star.error_bound - e1.error_bound > e1.value;

  return ExpertiseComparison{std::move(base),
                             std::move(skilled),
                             e0,
                             e0_star,
                             e1,
                             e1_star,
                             skill_base,
                             skill_skilled,
                             better_at_0 && worse_at_1,
                             std::move(notes)};
}

}  // namespace obsrisk
