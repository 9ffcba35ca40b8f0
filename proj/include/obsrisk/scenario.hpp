#ifndef OBSRISK_SCENARIO_HPP
#define OBSRISK_SCENARIO_HPP

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "obsrisk/expression.hpp"
#include "obsrisk/law.hpp"

namespace obsrisk {

/// Tolerance for "evaluates inside [0, 1]".
inline constexpr double kRangeTolerance = 1e-9;

enum class Comparator { kGreaterEqual, kGreater };

std::string to_string(Comparator c);

enum class Arm { kControl = 0, kTreated = 1 };

/// The time-invariant counterfactual primitives: laws of X and U, the outcome
/// regressions mu0(x,u) = E[Y^0|x,u], mu1(x,u) = E[Y^1|x,u], and the baseline
/// treatment propensity pi0(x,u). U is independent of X.
///
/// Construction validates that u is not referenced when U is absent and that
/// mu0, mu1 and pi0 lie in [0, 1] (and are finite) on the validation grid.
class ScenarioModel {
 public:
  ScenarioModel(std::string name, CovariateLaw x_law, ConfounderLaw u_law,
                Expression mu0, Expression mu1, Expression pi0,
                std::map<std::string, std::string> metadata = {});

  const std::string& name() const { return name_; }
  const CovariateLaw& x_law() const { return x_law_; }
  const ConfounderLaw& u_law() const { return u_law_; }
  const Expression& mu0() const { return mu0_; }
  const Expression& mu1() const { return mu1_; }
  const Expression& mu(Arm arm) const {
    return arm == Arm::kTreated ? mu1_ : mu0_;
  }
  const Expression& pi0() const { return pi0_; }
  const std::map<std::string, std::string>& metadata() const {
    return metadata_;
  }

  /// U levels for marginalization; a single unit-weight level at u = 0 when
  /// U is absent.
  const std::vector<WeightedPoint>& marginal_levels() const { return levels_; }

  /// Same laws and outcome regressions with a different baseline propensity.
  ScenarioModel with_pi0(Expression pi0) const;

  /// True when both models share x_law, u_law, mu0 and mu1.
  bool same_counterfactuals(const ScenarioModel& other) const;

 private:
  std::string name_;
  CovariateLaw x_law_;
  ConfounderLaw u_law_;
  Expression mu0_;
  Expression mu1_;
  Expression pi0_;
  std::map<std::string, std::string> metadata_;
  std::vector<WeightedPoint> levels_;
};

class Policy;

/// s(x) = E_t[Y | X = x] under the policy it was fit to. Cheap to copy;
/// immutable.
class RiskScore {
 public:
  double operator()(double x) const;

  /// Time index at which the score is deployed (source policy's + 1).
  int generation() const;
  const ScenarioModel& model() const;
  const Policy& source_policy() const;

 private:
  struct Impl;
  explicit RiskScore(std::shared_ptr<const Impl> impl);
  friend RiskScore score_from(const ScenarioModel&, const Policy&);

  std::shared_ptr<const Impl> impl_;
};

/// A treatment rule: a stochastic propensity over (x, u), or the
/// deterministic rule 1{s(x) >= theta} (or > theta) which reads x only.
class Policy {
 public:
  enum class Kind { kStochastic, kThreshold };

  static Policy stochastic(Expression propensity, int generation = 0);
  static Policy threshold(RiskScore score, double theta,
                          Comparator comparator = Comparator::kGreaterEqual);

  Kind kind() const { return kind_; }
  bool is_threshold() const { return kind_ == Kind::kThreshold; }
  int generation() const { return generation_; }

  const Expression& propensity_expression() const { return propensity_; }
  const RiskScore& score() const;
  double theta() const { return theta_; }
  Comparator comparator() const { return comparator_; }

  /// Threshold decision at x. Only valid for threshold policies.
  int decide(double x) const;

  /// P(A = 1 | x, u), unchecked.
  double propensity(double x, double u) const;

 private:
  Policy() = default;

  Kind kind_ = Kind::kStochastic;
  Expression propensity_;
  std::optional<RiskScore> score_;
  double theta_ = 0.0;
  Comparator comparator_ = Comparator::kGreaterEqual;
  int generation_ = 0;
};

/// The model's own pi0 as a generation-0 policy.
Policy baseline_policy(const ScenarioModel& model);
Policy treat_none_policy();
Policy treat_all_policy();

/// The policy with propensity exactly 1{mu1 < mu0} on every support cell.
/// Discrete X only (built as clamp(k * (mu0 - mu1), 0, 1)).
Policy pointwise_optimal_policy(const ScenarioModel& model);

/// Checks the policy against the model: u usage, [0, 1] range on the
/// validation grid, theta in [0, 1], score fitted to the same counterfactuals.
void validate_policy(const ScenarioModel& model, const Policy& policy);

/// mu^arm(x, u). `u` must be given iff the model has a confounder.
double potential_mean(const ScenarioModel& model, Arm arm, double x,
                      std::optional<double> u = std::nullopt);

/// 1{mu1(x,u) < mu0(x,u)}; ties give 0.
int optimal_rule(const ScenarioModel& model, double x,
                 std::optional<double> u = std::nullopt);

/// Oracle observable-outcome score
/// s(x) = sum_u w(u) [pi(x,u) mu1(x,u) + (1 - pi(x,u)) mu0(x,u)].
RiskScore score_from(const ScenarioModel& model, const Policy& policy);

/// Checked propensity of `policy` at (x, u).
double propensity_at(const ScenarioModel& model, const Policy& policy,
                     double x, std::optional<double> u = std::nullopt);

}  // namespace obsrisk

#endif  // OBSRISK_SCENARIO_HPP
