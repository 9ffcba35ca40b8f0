#include "obsrisk/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "obsrisk/errors.hpp"

namespace obsrisk {

std::string to_string(Comparator c) {
  return c == Comparator::kGreaterEqual ? "ge" : "gt";
}

namespace {

std::string describe_point(double x, std::optional<double> u) {
  std::ostringstream os;
  os.precision(17);
  os << "(x=" << x;
  if (u) os << ", u=" << *u;
  os << ')';
  return os.str();
}

bool in_unit_range(double v) {
  return v >= -kRangeTolerance && v <= 1.0 + kRangeTolerance;
}

// Grid check shared by model construction and policy validation.
void check_on_grid(const std::string& what, const Expression& e,
                   const CovariateLaw& x_law, const ConfounderLaw& u_law,
                   const std::vector<WeightedPoint>& levels) {
  if (u_law.empty() && e.references(Variable::kU)) {
    throw ValidationError(what + " references u but u_law is empty");
  }
  for (double x : x_law.validation_grid()) {
    for (const auto& lvl : levels) {
      const double v = e.evaluate(x, lvl.value);
      std::optional<double> u;
      if (!u_law.empty()) u = lvl.value;
      if (!std::isfinite(v)) {
        throw ValidationError(what + " is not finite at " +
                              describe_point(x, u) +
                              " (division by zero or overflow)");
      }
      if (!in_unit_range(v)) {
        std::ostringstream os;
        os.precision(12);
        os << what << " evaluates to " << v << " at " << describe_point(x, u)
           << ", outside [0, 1]";
        throw RangeError(os.str());
      }
    }
  }
}

void check_point(const ScenarioModel& model, double x,
                 std::optional<double> u) {
  if (!model.x_law().contains(x)) {
    throw DomainError("x=" + describe_point(x, std::nullopt) +
                      " is outside the support of X");
  }
  if (model.u_law().empty()) {
    if (u) throw DomainError("u given but the model has no confounder");
  } else {
    if (!u) throw DomainError("u required: the model has a confounder");
    if (!model.u_law().contains(*u)) {
      throw DomainError("u=" + std::to_string(*u) + " is not a level of U");
    }
  }
}

double checked_value(const std::string& what, double v, double x,
                     std::optional<double> u) {
  if (!std::isfinite(v) || !in_unit_range(v)) {
    std::ostringstream os;
    os.precision(12);
    os << what << " evaluates to " << v << " at " << describe_point(x, u)
       << ", outside [0, 1]";
    throw RangeError(os.str());
  }
  return v;
}

}  // namespace

ScenarioModel::ScenarioModel(std::string name, CovariateLaw x_law,
                             ConfounderLaw u_law, Expression mu0,
                             Expression mu1, Expression pi0,
                             std::map<std::string, std::string> metadata)
    : name_(std::move(name)),
      x_law_(std::move(x_law)),
      u_law_(std::move(u_law)),
      mu0_(std::move(mu0)),
      mu1_(std::move(mu1)),
      pi0_(std::move(pi0)),
      metadata_(std::move(metadata)) {
  levels_ = u_law_.empty() ? std::vector<WeightedPoint>{{0.0, 1.0}}
                           : u_law_.levels();
  check_on_grid("mu0", mu0_, x_law_, u_law_, levels_);
  check_on_grid("mu1", mu1_, x_law_, u_law_, levels_);
  check_on_grid("pi0", pi0_, x_law_, u_law_, levels_);
}

ScenarioModel ScenarioModel::with_pi0(Expression pi0) const {
  return ScenarioModel(name_, x_law_, u_law_, mu0_, mu1_, std::move(pi0),
                       metadata_);
}

bool ScenarioModel::same_counterfactuals(const ScenarioModel& other) const {
  return x_law_ == other.x_law_ && u_law_ == other.u_law_ &&
         mu0_ == other.mu0_ && mu1_ == other.mu1_;
}

// ---------------------------------------------------------------------------

struct RiskScore::Impl {
  ScenarioModel model;
  Policy policy;
  int generation = 0;
  // Discrete X: s at each support point, in support order.
  std::vector<double> support;
  std::vector<double> table;

  double compute(double x) const {
    double s = 0.0;
    if (policy.is_threshold()) {
      const double p = policy.decide(x);
      for (const auto& lvl : model.marginal_levels()) {
        const double m1 = model.mu1().evaluate(x, lvl.value);
        const double m0 = model.mu0().evaluate(x, lvl.value);
        s += lvl.weight * (p * m1 + (1.0 - p) * m0);
      }
      return s;
    }
    for (const auto& lvl : model.marginal_levels()) {
      const double p = policy.propensity_expression().evaluate(x, lvl.value);
      const double m1 = model.mu1().evaluate(x, lvl.value);
      const double m0 = model.mu0().evaluate(x, lvl.value);
      s += lvl.weight * (p * m1 + (1.0 - p) * m0);
    }
    return s;
  }
};

RiskScore::RiskScore(std::shared_ptr<const Impl> impl)
    : impl_(std::move(impl)) {}

double RiskScore::operator()(double x) const {
  if (!impl_->support.empty()) {
    const auto it =
        std::lower_bound(impl_->support.begin(), impl_->support.end(), x);
    if (it != impl_->support.end() && *it == x) {
      return impl_->table[static_cast<std::size_t>(it - impl_->support.begin())];
    }
  }
  return impl_->compute(x);
}

int RiskScore::generation() const { return impl_->generation; }
const ScenarioModel& RiskScore::model() const { return impl_->model; }
const Policy& RiskScore::source_policy() const { return impl_->policy; }

// ---------------------------------------------------------------------------

Policy Policy::stochastic(Expression propensity, int generation) {
  Policy p;
  p.kind_ = Kind::kStochastic;
  p.propensity_ = std::move(propensity);
  p.generation_ = generation;
  return p;
}

Policy Policy::threshold(RiskScore score, double theta, Comparator comparator) {
  if (!std::isfinite(theta) || theta < 0.0 || theta > 1.0) {
    throw DomainError("threshold theta must lie in [0, 1]");
  }
  Policy p;
  p.kind_ = Kind::kThreshold;
  p.generation_ = score.generation();
  p.score_ = std::move(score);
  p.theta_ = theta;
  p.comparator_ = comparator;
  return p;
}

const RiskScore& Policy::score() const {
  if (!score_) throw DomainError("stochastic policy has no risk score");
  return *score_;
}

int Policy::decide(double x) const {
  const double s = score()(x);
  return comparator_ == Comparator::kGreaterEqual ? (s >= theta_ ? 1 : 0)
                                                  : (s > theta_ ? 1 : 0);
}

double Policy::propensity(double x, double u) const {
  if (kind_ == Kind::kThreshold) return decide(x);
  return propensity_.evaluate(x, u);
}

Policy baseline_policy(const ScenarioModel& model) {
  return Policy::stochastic(model.pi0(), 0);
}

Policy treat_none_policy() {
  return Policy::stochastic(Expression::literal(0.0));
}

Policy treat_all_policy() {
  return Policy::stochastic(Expression::literal(1.0));
}

Policy pointwise_optimal_policy(const ScenarioModel& model) {
  if (!model.x_law().is_discrete()) {
    throw DomainError(
        "pointwise optimal policy is only expressible for discrete X");
  }
  double min_gap = std::numeric_limits<double>::infinity();
  for (const auto& p : model.x_law().points()) {
    for (const auto& lvl : model.marginal_levels()) {
      const double gap = model.mu0().evaluate(p.value, lvl.value) -
                         model.mu1().evaluate(p.value, lvl.value);
      if (gap > 0.0) min_gap = std::min(min_gap, gap);
    }
  }
  if (!std::isfinite(min_gap)) return treat_none_policy();
  const double scale = 2.0 / min_gap;
  const Expression gap =
      Expression::binary(BinaryOp::kSub, model.mu0(), model.mu1());
  return Policy::stochastic(Expression::call(
      Function::kClamp,
      {Expression::binary(BinaryOp::kMul, Expression::literal(scale), gap),
       Expression::literal(0.0), Expression::literal(1.0)}));
}

void validate_policy(const ScenarioModel& model, const Policy& policy) {
  if (policy.is_threshold()) {
    if (!policy.score().model().same_counterfactuals(model)) {
      throw ValidationError(
          "threshold policy's score was fit to a different scenario");
    }
    return;
  }
  check_on_grid("policy propensity", policy.propensity_expression(),
                model.x_law(), model.u_law(), model.marginal_levels());
}

double potential_mean(const ScenarioModel& model, Arm arm, double x,
                      std::optional<double> u) {
  check_point(model, x, u);
  const double v = model.mu(arm).evaluate(x, u.value_or(0.0));
  return checked_value(arm == Arm::kTreated ? "mu1" : "mu0", v, x, u);
}

int optimal_rule(const ScenarioModel& model, double x,
                 std::optional<double> u) {
  const double m1 = potential_mean(model, Arm::kTreated, x, u);
  const double m0 = potential_mean(model, Arm::kControl, x, u);
  return m1 < m0 ? 1 : 0;
}

RiskScore score_from(const ScenarioModel& model, const Policy& policy) {
  validate_policy(model, policy);
  auto impl = std::make_shared<RiskScore::Impl>(
      RiskScore::Impl{model, policy, policy.generation() + 1, {}, {}});
  if (model.x_law().is_discrete()) {
    for (const auto& p : model.x_law().points()) {
      impl->support.push_back(p.value);
      impl->table.push_back(impl->compute(p.value));
    }
  }
  return RiskScore(std::move(impl));
}

double propensity_at(const ScenarioModel& model, const Policy& policy,
                     double x, std::optional<double> u) {
  check_point(model, x, u);
  if (policy.is_threshold()) return policy.decide(x);
  const double v = policy.propensity(x, u.value_or(0.0));
  return checked_value("policy propensity", v, x, u);
}

}  // namespace obsrisk
