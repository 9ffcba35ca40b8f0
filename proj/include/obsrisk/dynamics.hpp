#ifndef OBSRISK_DYNAMICS_HPP
#define OBSRISK_DYNAMICS_HPP

#include <optional>
#include <string>
#include <vector>

#include "obsrisk/evaluation.hpp"

namespace obsrisk {

struct DeploymentStep {
  int t = 0;
  /// Score deployed at this step; absent at t = 0.
  std::optional<RiskScore> score;
  Policy policy;
  Estimate mean_outcome;
  /// Where the step's policy treats; absent when its propensity is not
  /// {0,1}-valued (or not comparable, for a stochastic rule on continuous X).
  std::optional<TreatedSet> treated;
};

struct Cycle {
  int start = 0;
  int period = 0;

  friend bool operator==(const Cycle&, const Cycle&) = default;
};

struct DeploymentTrace {
  std::vector<DeploymentStep> steps;
  std::optional<Cycle> cycle;
};

/// Retrain-redeploy loop. Step 0 runs `baseline`; step t >= 1 deploys
/// threshold(score_from(model, policy_{t-1}), theta, comparator). `horizon`
/// is the number of steps including step 0.
///
/// A cycle (start, period) is reported at the first step t whose decisions
/// repeat those of step start = t - period: exact per-cell comparison on
/// discrete X, interval boundaries within 10 * kRootTolerance otherwise.
DeploymentTrace iterate_deployment(const ScenarioModel& model,
                                   const Policy& baseline, double theta,
                                   Comparator comparator, int horizon,
                                   const BackendSpec& backend = {});

struct ExpertiseComparison {
  ScenarioModel base_scenario;
  ScenarioModel skilled_scenario;
  Estimate e0;
  Estimate e0_star;
  Estimate e1;
  Estimate e1_star;
  /// P(A = 1 | d_opt = 1) at t = 0 in each system; absent when
  /// P(d_opt = 1) = 0.
  std::optional<double> skill_base;
  std::optional<double> skill_skilled;
  bool inversion = false;
  std::vector<std::string> notes;
};

/// Compares two systems that differ only in pi0, before (t = 0) and after
/// (t = 1) deploying their own observable-outcome score at `theta`.
/// DomainError unless the skilled system treats the d_opt = 1 group with
/// strictly higher probability (or, when that group is null, unless the two
/// propensities differ somewhere on the support).
ExpertiseComparison expertise_experiment(
    const ScenarioModel& model, const Expression& pi0_base,
    const Expression& pi0_skilled, double theta,
    Comparator comparator = Comparator::kGreaterEqual,
    const BackendSpec& backend = {});

}  // namespace obsrisk

#endif  // OBSRISK_DYNAMICS_HPP
