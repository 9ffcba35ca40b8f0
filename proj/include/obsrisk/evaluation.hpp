#ifndef OBSRISK_EVALUATION_HPP
#define OBSRISK_EVALUATION_HPP

#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "obsrisk/numerics.hpp"
#include "obsrisk/scenario.hpp"

namespace obsrisk {

using numerics::Estimate;
using numerics::Method;

/// Bracket width used when locating treated-set and optimal-set boundaries.
inline constexpr double kRootTolerance = 1e-12;

/// Which numeric route computes expectations over X. U is always summed
/// exactly. Discrete X laws are enumerated exactly under kQuadrature too.
struct BackendSpec {
  Method method = Method::kQuadrature;
  numerics::QuadratureSpec quadrature;
  numerics::MonteCarloSpec monte_carlo;

  static BackendSpec quad(double abs_tol = 1e-9) {
    BackendSpec b;
    b.quadrature.abs_tol = abs_tol;
    return b;
  }
  static BackendSpec monte_carlo_with(std::int64_t n, std::uint64_t seed) {
    BackendSpec b;
    b.method = Method::kMonteCarlo;
    b.monte_carlo.n_samples = n;
    b.monte_carlo.seed = seed;
    return b;
  }
  static BackendSpec exact() {
    BackendSpec b;
    b.method = Method::kExactEnumeration;
    return b;
  }
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  friend bool operator==(const Interval&, const Interval&) = default;
};

/// A subset of the X support: disjoint ascending closed intervals for a
/// continuous law, or a set of support points for a discrete law.
class TreatedSet {
 public:
  static TreatedSet from_intervals(std::vector<Interval> intervals);
  static TreatedSet from_points(std::vector<double> points);

  bool is_discrete() const { return discrete_; }
  const std::vector<Interval>& intervals() const { return intervals_; }
  const std::vector<double>& points() const { return points_; }
  bool empty() const { return intervals_.empty() && points_.empty(); }

  double mass(const CovariateLaw& law) const;
  bool contains(double x) const;

  /// Set difference; pieces shorter than kSliverWidth are dropped.
  TreatedSet minus(const TreatedSet& other) const;

  /// Same kind and same boundaries within `tol` (exact for points).
  bool approx_equal(const TreatedSet& other, double tol) const;

  friend bool operator==(const TreatedSet&, const TreatedSet&) = default;

  static constexpr double kSliverWidth = 10 * kRootTolerance;

 private:
  bool discrete_ = false;
  std::vector<Interval> intervals_;
  std::vector<double> points_;
};

/// A measurable cell of (X, U): x in [x_lo, x_hi) (or [x_lo, x_hi]) and u in
/// `u_values` (all levels when empty).
struct Stratum {
  std::string label;
  double x_lo = -std::numeric_limits<double>::infinity();
  double x_hi = std::numeric_limits<double>::infinity();
  bool hi_inclusive = true;
  std::vector<double> u_values;

  bool contains_x(double x) const {
    return x >= x_lo && (hi_inclusive ? x <= x_hi : x < x_hi);
  }
  bool contains_u(double u) const;

  /// P((X, U) in stratum).
  double mass(const ScenarioModel& model) const;

  static Stratum everything();
  static Stratum x_below(double c);
  static Stratum x_at_least(double c);
  static Stratum x_range(double lo, double hi, bool hi_inclusive);
};

/// Support points for discrete X, ten equal-width bins otherwise.
std::vector<Stratum> default_strata(const ScenarioModel& model);

struct StratumValue {
  std::string label;
  Estimate conditional_mean;
};

struct EvaluationReport {
  Estimate mean_outcome;
  Estimate optimal_value;
  double regret = 0.0;
  std::vector<StratumValue> strata;
};

struct SweepRow {
  double theta = 0.0;
  Estimate delta;
  Estimate mean_outcome_t1;
  double treated_mass = 0.0;
};

struct PositivityWitness {
  double x = 0.0;
  std::optional<double> u;
  double propensity = 0.0;
};

struct AssumptionReport {
  bool positivity_t0 = true;
  std::vector<PositivityWitness> witnesses;
  /// Frechet-Hoeffding lower bound on P(Y^1 < Y^0): E[max(0, mu0 - mu1)].
  double frechet_lower_treatment_helps = 0.0;
  /// Frechet-Hoeffding lower bound on P(Y^0 < Y^1): E[max(0, mu1 - mu0)].
  double frechet_lower_treatment_hurts = 0.0;
  std::vector<std::string> notes;
};

struct RegionReport {
  std::optional<double> u;
  TreatedSet optimal;
  TreatedSet treated;
  TreatedSet under_treated;
  TreatedSet over_treated;
};

/// Component-wise E over X of an integrand that already sums over U, routed
/// through `backend`. Uniform-law quadrature is split at `breakpoints`.
std::vector<Estimate> expectation(const ScenarioModel& model,
                                  const numerics::VectorFn& f,
                                  std::size_t components,
                                  const BackendSpec& backend,
                                  std::span<const double> breakpoints = {});

/// Roots of mu1 - mu0 in X across all U levels (uniform laws only).
std::vector<double> optimal_breakpoints(const ScenarioModel& model);

/// E[Y] under `policy`: E{pi mu1 + (1 - pi) mu0}.
Estimate mean_outcome(const ScenarioModel& model, const Policy& policy,
                      const BackendSpec& backend = {});

/// E_1[Y] - E_0[Y] = E{(pi1 - pi0)(mu1 - mu0)}. Both forms are computed;
/// InconsistencyError if they disagree beyond the combined error bounds.
Estimate delta(const ScenarioModel& model, const Policy& policy0,
               const Policy& policy1, const BackendSpec& backend = {});

/// E{(pi1 - pi0)(mu1 - mu0) | stratum}. DomainError if P(stratum) < 1e-9.
Estimate conditional_delta(const ScenarioModel& model, const Policy& policy0,
                           const Policy& policy1, const Stratum& stratum,
                           const BackendSpec& backend = {});

/// E[Y^{d_opt}] = E[min(mu0, mu1)].
Estimate optimal_value(const ScenarioModel& model,
                       const BackendSpec& backend = {});

EvaluationReport evaluate(const ScenarioModel& model, const Policy& policy,
                          const BackendSpec& backend = {},
                          std::span<const Stratum> strata = {});

/// Where a threshold policy treats. DomainError for stochastic policies.
TreatedSet treated_set(const ScenarioModel& model, const Policy& policy);

/// {x : mu1(x, u) < mu0(x, u)} at one level of U (u ignored when U absent).
TreatedSet optimal_set(const ScenarioModel& model, double u = 0.0);

/// Optimal, treated, under-treated and over-treated regions per U level.
std::vector<RegionReport> regions(const ScenarioModel& model,
                                  const Policy& threshold_policy);

/// Points in X where the policy's propensity may jump.
std::vector<double> policy_breakpoints(const ScenarioModel& model,
                                       const Policy& policy);

/// Deploys threshold(score_from(model, policy0), theta) for each theta.
/// `thetas` must be ascending within [0, 1].
std::vector<SweepRow> sweep_theta(
    const ScenarioModel& model, const Policy& policy0,
    std::span<const double> thetas,
    Comparator comparator = Comparator::kGreaterEqual,
    const BackendSpec& backend = {});

AssumptionReport check_assumptions(const ScenarioModel& model,
                                   const Policy& policy0,
                                   const BackendSpec& backend = {});

}  // namespace obsrisk

#endif  // OBSRISK_EVALUATION_HPP
