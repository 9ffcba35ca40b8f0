#include "obsrisk/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "obsrisk/errors.hpp"

namespace obsrisk {

namespace {

constexpr double kMinStratumMass = 1e-9;
constexpr std::size_t kMaxWitnesses = 5;

// Slack for comparing two expectations computed by the same backend.
double backend_slack(const BackendSpec& backend) {
  switch (backend.method) {
    case Method::kQuadrature:
      return 3.0 * backend.quadrature.abs_tol + 1e-12;
    case Method::kMonteCarlo:
    case Method::kExactEnumeration:
      return 1e-12;
  }
  return 1e-12;
}

std::string format_number(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

void append(std::vector<double>& dst, const std::vector<double>& src) {
  dst.insert(dst.end(), src.begin(), src.end());
}

// Difference of ascending disjoint interval lists.
std::vector<Interval> subtract(const std::vector<Interval>& a,
                               const std::vector<Interval>& b) {
  std::vector<Interval> out;
  for (const Interval& piece : a) {
    double lo = piece.lo;
    const double hi = piece.hi;
    for (const Interval& cut : b) {
      if (cut.hi <= lo || cut.lo >= hi) continue;
      if (cut.lo > lo && cut.lo - lo > TreatedSet::kSliverWidth) {
        out.push_back({lo, cut.lo});
      }
      lo = std::max(lo, cut.hi);
      if (lo >= hi) break;
    }
    if (hi - lo > TreatedSet::kSliverWidth) out.push_back({lo, hi});
  }
  return out;
}

// Pieces of [lo, hi] between consecutive cut points on which `member` holds
// at the midpoint, merged when adjacent.
std::vector<Interval> member_intervals(const std::vector<double>& roots,
                                       double lo, double hi,
                                       const numerics::RealFn& member) {
  std::vector<double> cuts = {lo};
  for (double r : roots) {
    if (r > lo && r < hi) cuts.push_back(r);
  }
  cuts.push_back(hi);
  std::vector<Interval> out;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double a = cuts[i];
    const double b = cuts[i + 1];
    if (!(b > a)) continue;
    if (member(0.5 * (a + b)) == 0.0) continue;
    if (!out.empty() && out.back().hi == a) {
      out.back().hi = b;
    } else {
      out.push_back({a, b});
    }
  }
  return out;
}

struct DeltaParts {
  Estimate eq2;
  Estimate mean1;
  Estimate mean0;
};

double conditional_outcome(const ScenarioModel& model, const Policy& policy,
                           double x) {
  double s = 0.0;
  if (policy.is_threshold()) {
    const double p = policy.decide(x);
    for (const auto& lvl : model.marginal_levels()) {
      s += lvl.weight * (p * model.mu1().evaluate(x, lvl.value) +
                         (1.0 - p) * model.mu0().evaluate(x, lvl.value));
    }
    return s;
  }
  for (const auto& lvl : model.marginal_levels()) {
    const double p = policy.propensity_expression().evaluate(x, lvl.value);
    s += lvl.weight * (p * model.mu1().evaluate(x, lvl.value) +
                       (1.0 - p) * model.mu0().evaluate(x, lvl.value));
  }
  return s;
}

DeltaParts delta_parts(const ScenarioModel& model, const Policy& p0,
                       const Policy& p1, const BackendSpec& backend) {
  validate_policy(model, p0);
  validate_policy(model, p1);
  std::vector<double> cuts = policy_breakpoints(model, p0);
  append(cuts, policy_breakpoints(model, p1));

  const auto f = [&](double x, std::span<double> out) {
    const int d0 = p0.is_threshold() ? p0.decide(x) : -1;
    const int d1 = p1.is_threshold() ? p1.decide(x) : -1;
    double eq2 = 0.0;
    double m1 = 0.0;
    double m0 = 0.0;
    for (const auto& lvl : model.marginal_levels()) {
      const double u = lvl.value;
      const double pi0 =
          d0 >= 0 ? d0 : p0.propensity_expression().evaluate(x, u);
      const double pi1 =
          d1 >= 0 ? d1 : p1.propensity_expression().evaluate(x, u);
      const double mu1 = model.mu1().evaluate(x, u);
      const double mu0 = model.mu0().evaluate(x, u);
      eq2 += lvl.weight * (pi1 - pi0) * (mu1 - mu0);
      m1 += lvl.weight * (pi1 * mu1 + (1.0 - pi1) * mu0);
      m0 += lvl.weight * (pi0 * mu1 + (1.0 - pi0) * mu0);
    }
    out[0] = eq2;
    out[1] = m1;
    out[2] = m0;
  };
  const auto est = expectation(model, f, 3, backend, cuts);
  DeltaParts parts{est[0], est[1], est[2]};

  const double diff = parts.mean1.value - parts.mean0.value;
  const double tol = parts.eq2.error_bound + parts.mean1.error_bound +
                     parts.mean0.error_bound + backend_slack(backend);
  if (std::fabs(parts.eq2.value - diff) > tol) {
    throw InconsistencyError(
        "delta: E{(pi1-pi0)(mu1-mu0)} = " + format_number(parts.eq2.value) +
        " but E1[Y]-E0[Y] = " + format_number(diff));
  }
  return parts;
}

}  // namespace

// ---------------------------------------------------------------------------
// TreatedSet

TreatedSet TreatedSet::from_intervals(std::vector<Interval> intervals) {
  for (std::size_t i = 0; i < intervals.size(); ++i) {
    if (!(intervals[i].lo <= intervals[i].hi) ||
        (i > 0 && !(intervals[i - 1].hi <= intervals[i].lo))) {
      throw DomainError("intervals must be ascending and disjoint");
    }
  }
  TreatedSet s;
  s.intervals_ = std::move(intervals);
  return s;
}

TreatedSet TreatedSet::from_points(std::vector<double> points) {
  std::sort(points.begin(), points.end());
  points.erase(std::unique(points.begin(), points.end()), points.end());
  TreatedSet s;
  s.discrete_ = true;
  s.points_ = std::move(points);
  return s;
}

double TreatedSet::mass(const CovariateLaw& law) const {
  double m = 0.0;
  if (discrete_) {
    for (const auto& p : law.points()) {
      if (contains(p.value)) m += p.weight;
    }
    return m;
  }
  for (const auto& iv : intervals_) m += law.mass(iv.lo, iv.hi);
  return m;
}

bool TreatedSet::contains(double x) const {
  if (discrete_) return std::binary_search(points_.begin(), points_.end(), x);
  return std::any_of(intervals_.begin(), intervals_.end(),
                     [x](const Interval& iv) { return x >= iv.lo && x <= iv.hi; });
}

TreatedSet TreatedSet::minus(const TreatedSet& other) const {
  if (discrete_ != other.discrete_) {
    throw DomainError("cannot subtract point and interval sets");
  }
  if (discrete_) {
    std::vector<double> out;
    std::set_difference(points_.begin(), points_.end(), other.points_.begin(),
                        other.points_.end(), std::back_inserter(out));
    return from_points(std::move(out));
  }
  return from_intervals(subtract(intervals_, other.intervals_));
}

bool TreatedSet::approx_equal(const TreatedSet& other, double tol) const {
  if (discrete_ != other.discrete_) return false;
  if (discrete_) return points_ == other.points_;
  if (intervals_.size() != other.intervals_.size()) return false;
  for (std::size_t i = 0; i < intervals_.size(); ++i) {
    if (std::fabs(intervals_[i].lo - other.intervals_[i].lo) > tol ||
        std::fabs(intervals_[i].hi - other.intervals_[i].hi) > tol) {
      return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// Stratum

bool Stratum::contains_u(double u) const {
  return u_values.empty() ||
         std::find(u_values.begin(), u_values.end(), u) != u_values.end();
}

double Stratum::mass(const ScenarioModel& model) const {
  double u_mass = 0.0;
  for (const auto& lvl : model.marginal_levels()) {
    if (model.u_law().empty() || contains_u(lvl.value)) u_mass += lvl.weight;
  }
  const CovariateLaw& law = model.x_law();
  double x_mass = 0.0;
  if (law.is_discrete()) {
    for (const auto& p : law.points()) {
      if (contains_x(p.value)) x_mass += p.weight;
    }
  } else {
    x_mass = law.mass(x_lo, x_hi);
  }
  return x_mass * u_mass;
}

Stratum Stratum::everything() {
  Stratum s;
  s.label = "all";
  return s;
}

Stratum Stratum::x_below(double c) {
  Stratum s;
  s.label = "x<" + format_shortest(c);
  s.x_hi = c;
  s.hi_inclusive = false;
  return s;
}

Stratum Stratum::x_at_least(double c) {
  Stratum s;
  s.label = "x>=" + format_shortest(c);
  s.x_lo = c;
  return s;
}

Stratum Stratum::x_range(double lo, double hi, bool hi_inclusive) {
  Stratum s;
  s.label = "x in [" + format_shortest(lo) + ", " + format_shortest(hi) +
            (hi_inclusive ? "]" : ")");
  s.x_lo = lo;
  s.x_hi = hi;
  s.hi_inclusive = hi_inclusive;
  return s;
}

std::vector<Stratum> default_strata(const ScenarioModel& model) {
  std::vector<Stratum> out;
  const CovariateLaw& law = model.x_law();
  if (law.is_discrete()) {
    for (const auto& p : law.points()) {
      Stratum s = Stratum::x_range(p.value, p.value, true);
      s.label = "x=" + format_shortest(p.value);
      out.push_back(std::move(s));
    }
    return out;
  }
  constexpr int kBins = 10;
  for (int i = 0; i < kBins; ++i) {
    const double a = law.lo() + (law.hi() - law.lo()) * i / kBins;
    const double b =
        i == kBins - 1 ? law.hi() : law.lo() + (law.hi() - law.lo()) * (i + 1) / kBins;
    out.push_back(Stratum::x_range(a, b, i == kBins - 1));
  }
  return out;
}

// ---------------------------------------------------------------------------

std::vector<Estimate> expectation(const ScenarioModel& model,
                                  const numerics::VectorFn& f, std::size_t k,
                                  const BackendSpec& backend,
                                  std::span<const double> breakpoints) {
  switch (backend.method) {
    case Method::kMonteCarlo:
      return numerics::mc_means(f, k, model.x_law(), backend.monte_carlo);
    case Method::kExactEnumeration:
      if (!model.x_law().is_discrete()) {
        throw DomainError(
            "exact enumeration requires a discrete covariate law");
      }
      [[fallthrough]];
    case Method::kQuadrature:
      return numerics::integrate_many(f, k, model.x_law(), backend.quadrature,
                                      breakpoints);
  }
  return {};
}

std::vector<double> optimal_breakpoints(const ScenarioModel& model) {
  std::vector<double> cuts;
  if (model.x_law().is_discrete()) return cuts;
  for (const auto& lvl : model.marginal_levels()) {
    const double u = lvl.value;
    append(cuts, numerics::find_roots(
                     [&](double x) {
                       return model.mu1().evaluate(x, u) -
                              model.mu0().evaluate(x, u);
                     },
                     model.x_law().lo(), model.x_law().hi(), kRootTolerance));
  }
  return cuts;
}

std::vector<double> policy_breakpoints(const ScenarioModel& model,
                                       const Policy& policy) {
  if (!policy.is_threshold() || model.x_law().is_discrete()) return {};
  const RiskScore& s = policy.score();
  const double theta = policy.theta();
  return numerics::find_roots([&](double x) { return s(x) - theta; },
                              model.x_law().lo(), model.x_law().hi(),
                              kRootTolerance);
}

Estimate mean_outcome(const ScenarioModel& model, const Policy& policy,
                      const BackendSpec& backend) {
  validate_policy(model, policy);
  const auto cuts = policy_breakpoints(model, policy);
  return expectation(
             model,
             [&](double x, std::span<double> out) {
               out[0] = conditional_outcome(model, policy, x);
             },
             1, backend, cuts)
      .front();
}

Estimate delta(const ScenarioModel& model, const Policy& policy0,
               const Policy& policy1, const BackendSpec& backend) {
  return delta_parts(model, policy0, policy1, backend).eq2;
}

Estimate conditional_delta(const ScenarioModel& model, const Policy& policy0,
                           const Policy& policy1, const Stratum& stratum,
                           const BackendSpec& backend) {
  validate_policy(model, policy0);
  validate_policy(model, policy1);
  const double mass = stratum.mass(model);
  if (!(mass >= kMinStratumMass)) {
    throw DomainError("stratum '" + stratum.label + "' has probability " +
                      format_number(mass) + " (< 1e-9)");
  }
  std::vector<double> cuts = policy_breakpoints(model, policy0);
  append(cuts, policy_breakpoints(model, policy1));
  for (double c : {stratum.x_lo, stratum.x_hi}) {
    if (std::isfinite(c)) cuts.push_back(c);
  }
  const bool has_u = !model.u_law().empty();
  const auto f = [&](double x, std::span<double> out) {
    out[0] = 0.0;
    if (!stratum.contains_x(x)) return;
    const int d0 = policy0.is_threshold() ? policy0.decide(x) : -1;
    const int d1 = policy1.is_threshold() ? policy1.decide(x) : -1;
    for (const auto& lvl : model.marginal_levels()) {
      const double u = lvl.value;
      if (has_u && !stratum.contains_u(u)) continue;
      const double pi0 =
          d0 >= 0 ? d0 : policy0.propensity_expression().evaluate(x, u);
      const double pi1 =
          d1 >= 0 ? d1 : policy1.propensity_expression().evaluate(x, u);
      out[0] += lvl.weight * (pi1 - pi0) *
                (model.mu1().evaluate(x, u) - model.mu0().evaluate(x, u));
    }
  };
  const Estimate joint = expectation(model, f, 1, backend, cuts).front();
  return {joint.value / mass, joint.error_bound / mass, joint.backend};
}

Estimate optimal_value(const ScenarioModel& model, const BackendSpec& backend) {
  const auto cuts = optimal_breakpoints(model);
  return expectation(
             model,
             [&](double x, std::span<double> out) {
               double v = 0.0;
               for (const auto& lvl : model.marginal_levels()) {
                 v += lvl.weight * std::fmin(model.mu0().evaluate(x, lvl.value),
                                             model.mu1().evaluate(x, lvl.value));
               }
               out[0] = v;
             },
             1, backend, cuts)
      .front();
}

EvaluationReport evaluate(const ScenarioModel& model, const Policy& policy,
                          const BackendSpec& backend,
                          std::span<const Stratum> strata) {
  validate_policy(model, policy);
  std::vector<double> masses;
  for (const auto& s : strata) {
    const double m = s.mass(model);
    if (!(m >= kMinStratumMass)) {
      throw DomainError("stratum '" + s.label + "' has probability " +
                        format_number(m) + " (< 1e-9)");
    }
    masses.push_back(m);
  }
  std::vector<double> cuts = policy_breakpoints(model, policy);
  append(cuts, optimal_breakpoints(model));
  for (const auto& s : strata) {
    for (double c : {s.x_lo, s.x_hi}) {
      if (std::isfinite(c)) cuts.push_back(c);
    }
  }
  const bool has_u = !model.u_law().empty();
  const auto f = [&](double x, std::span<double> out) {
    const int d = policy.is_threshold() ? policy.decide(x) : -1;
    double mean = 0.0;
    double opt = 0.0;
    for (std::size_t j = 0; j < strata.size(); ++j) out[2 + j] = 0.0;
    for (const auto& lvl : model.marginal_levels()) {
      const double u = lvl.value;
      const double p =
          d >= 0 ? d : policy.propensity_expression().evaluate(x, u);
      const double m1 = model.mu1().evaluate(x, u);
      const double m0 = model.mu0().evaluate(x, u);
      const double y = p * m1 + (1.0 - p) * m0;
      mean += lvl.weight * y;
      opt += lvl.weight * std::fmin(m0, m1);
      for (std::size_t j = 0; j < strata.size(); ++j) {
        const Stratum& s = strata[j];
        if (s.contains_x(x) && (!has_u || s.contains_u(u))) {
          out[2 + j] += lvl.weight * y;
        }
      }
    }
    out[0] = mean;
    out[1] = opt;
  };
  const auto est = expectation(model, f, 2 + strata.size(), backend, cuts);
  EvaluationReport report;
  report.mean_outcome = est[0];
  report.optimal_value = est[1];
  report.regret = est[0].value - est[1].value;
  for (std::size_t j = 0; j < strata.size(); ++j) {
    const Estimate& e = est[2 + j];
    report.strata.push_back(
        {strata[j].label,
         {e.value / masses[j], e.error_bound / masses[j], e.backend}});
  }
  return report;
}

TreatedSet treated_set(const ScenarioModel& model, const Policy& policy) {
  if (!policy.is_threshold()) {
    throw DomainError("treated_set requires a threshold policy");
  }
  validate_policy(model, policy);
  const CovariateLaw& law = model.x_law();
  if (law.is_discrete()) {
    std::vector<double> pts;
    for (const auto& p : law.points()) {
      if (policy.decide(p.value) == 1) pts.push_back(p.value);
    }
    return TreatedSet::from_points(std::move(pts));
  }
  return TreatedSet::from_intervals(
      member_intervals(policy_breakpoints(model, policy), law.lo(), law.hi(),
                       [&](double x) { return double(policy.decide(x)); }));
}

TreatedSet optimal_set(const ScenarioModel& model, double u) {
  const CovariateLaw& law = model.x_law();
  const auto better = [&](double x) {
    return model.mu1().evaluate(x, u) < model.mu0().evaluate(x, u) ? 1.0 : 0.0;
  };
  if (law.is_discrete()) {
    std::vector<double> pts;
    for (const auto& p : law.points()) {
      if (better(p.value) == 1.0) pts.push_back(p.value);
    }
    return TreatedSet::from_points(std::move(pts));
  }
  const auto roots = numerics::find_roots(
      [&](double x) {
        return model.mu1().evaluate(x, u) - model.mu0().evaluate(x, u);
      },
      law.lo(), law.hi(), kRootTolerance);
  return TreatedSet::from_intervals(
      member_intervals(roots, law.lo(), law.hi(), better));
}

std::vector<RegionReport> regions(const ScenarioModel& model,
                                  const Policy& threshold_policy) {
  const TreatedSet treated = treated_set(model, threshold_policy);
  std::vector<RegionReport> out;
  for (const auto& lvl : model.marginal_levels()) {
    RegionReport r;
    if (!model.u_law().empty()) r.u = lvl.value;
    r.optimal = optimal_set(model, lvl.value);
    r.treated = treated;
    r.under_treated = r.optimal.minus(treated);
    r.over_treated = treated.minus(r.optimal);
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<SweepRow> sweep_theta(const ScenarioModel& model,
                                  const Policy& policy0,
                                  std::span<const double> thetas,
                                  Comparator comparator,
                                  const BackendSpec& backend) {
  for (std::size_t i = 0; i < thetas.size(); ++i) {
    if (!(thetas[i] >= 0.0 && thetas[i] <= 1.0)) {
      throw DomainError("sweep thetas must lie in [0, 1]");
    }
    if (i > 0 && !(thetas[i - 1] < thetas[i])) {
      throw DomainError("sweep thetas must be strictly ascending");
    }
  }
  const RiskScore score = score_from(model, policy0);
  std::vector<SweepRow> rows;
  rows.reserve(thetas.size());
  for (double theta : thetas) {
    const Policy p1 = Policy::threshold(score, theta, comparator);
    const DeltaParts parts = delta_parts(model, policy0, p1, backend);
    rows.push_back({theta, parts.eq2, parts.mean1,
                    treated_set(model, p1).mass(model.x_law())});
  }
  return rows;
}

AssumptionReport check_assumptions(const ScenarioModel& model,
                                   const Policy& policy0,
                                   const BackendSpec& backend) {
  validate_policy(model, policy0);
  AssumptionReport report;
  const Expression& pi =
      policy0.is_threshold() ? model.pi0() : policy0.propensity_expression();
  if (policy0.is_threshold()) {
    report.notes.push_back(
        "policy at t=" + std::to_string(policy0.generation()) +
        " is a threshold rule with deterministic propensity in {0,1}, so "
        "positivity does not hold for t >= 1; positivity checked on the "
        "baseline pi0");
  }

  std::vector<double> grid = model.x_law().validation_grid();
  if (!model.x_law().is_discrete()) {
    grid.erase(grid.begin());
    grid.pop_back();
  }
  std::size_t violations = 0;
  for (double x : grid) {
    for (const auto& lvl : model.marginal_levels()) {
      const double p = pi.evaluate(x, lvl.value);
      if (p > 0.0 && p < 1.0) continue;
      ++violations;
      if (report.witnesses.size() < kMaxWitnesses) {
        report.witnesses.push_back(
            {x,
             model.u_law().empty() ? std::nullopt
                                   : std::optional<double>(lvl.value),
             p});
      }
    }
  }
  report.positivity_t0 = violations == 0;
  if (violations > 0) {
    report.notes.push_back("positivity fails at " + std::to_string(violations) +
                           " interior grid cell(s)");
  }

  const auto cuts = optimal_breakpoints(model);
  const auto est = expectation(
      model,
      [&](double x, std::span<double> out) {
        out[0] = 0.0;
        out[1] = 0.0;
        for (const auto& lvl : model.marginal_levels()) {
          const double g = model.mu0().evaluate(x, lvl.value) -
                           model.mu1().evaluate(x, lvl.value);
          out[0] += lvl.weight * std::fmax(0.0, g);
          out[1] += lvl.weight * std::fmax(0.0, -g);
        }
      },
      2, backend, cuts);
  report.frechet_lower_treatment_helps = std::clamp(est[0].value, 0.0, 1.0);
  report.frechet_lower_treatment_hurts = std::clamp(est[1].value, 0.0, 1.0);
  const bool helps = est[0].value > est[0].error_bound;
  const bool hurts = est[1].value > est[1].error_bound;
  if (helps && hurts) {
    report.notes.push_back(
        "treatment sometimes helps and sometimes hurts: both Frechet lower "
        "bounds are positive");
  } else {
    report.notes.push_back(
        "treatment-helps-and-hurts condition not certified: a Frechet lower "
        "bound is zero (the bounds are sufficient, not necessary)");
  }
  return report;
}

}  // namespace obsrisk
