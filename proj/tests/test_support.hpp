#ifndef OBSRISK_TEST_SUPPORT_HPP
#define OBSRISK_TEST_SUPPORT_HPP

// Shared fixtures for the unit and acceptance suites: closed forms of the
// toy scenario, a generator of random discrete scenarios and policies, a
// random expression generator, and a brute-force enumerator that recomputes
// population means without going through the evaluation module.

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "obsrisk/evaluation.hpp"
#include "obsrisk/expression.hpp"
#include "obsrisk/scenario.hpp"
#include "obsrisk/scenario_io.hpp"

namespace obsrisk::testing {

// Toy scenario closed forms.
inline double toy_mu0(double x) { return x; }
inline double toy_mu1(double x) { return (0.7 - x) * (0.7 - x); }
inline double toy_score(double x) {
  return x * ((0.7 - x) * (0.7 - x)) + (1 - x) * x;
}
inline double toy_score_poly(double x) {
  return x * x * x - 2.4 * x * x + 1.49 * x;
}
// Root of (0.7 - x)^2 = x in (0, 1).
inline double toy_optimal_boundary() { return (2.4 - std::sqrt(3.8)) / 2.0; }
inline double toy_score_argmax() { return (4.8 - std::sqrt(5.16)) / 6.0; }
// E[min(mu0, mu1)] via antiderivatives of x and (0.7 - x)^2.
inline double toy_optimal_value() {
  const double c = toy_optimal_boundary();
  const auto cube = [](double v) { return v * v * v; };
  return c * c / 2.0 + (cube(0.7 - c) - cube(0.7 - 1.0)) / 3.0;
}
// Antiderivative of the score cubic.
inline double toy_score_integral(double a, double b) {
  const auto F = [](double x) {
    return x * x * x * x / 4.0 - 0.8 * x * x * x + 0.745 * x * x;
  };
  return F(b) - F(a);
}
// Antiderivative of (0.7 - x)^2 and of x.
inline double toy_mu1_integral(double a, double b) {
  return (std::pow(0.7 - a, 3) - std::pow(0.7 - b, 3)) / 3.0;
}
inline double toy_mu0_integral(double a, double b) {
  return (b * b - a * a) / 2.0;
}

// Roots of s(x) = level on [0, 1] located by a dense sign scan followed by
// bisection, independent of numerics::find_roots.
inline std::vector<double> dense_scan_roots(double (*f)(double), double level,
                                            int cells = 1'000'000) {
  std::vector<double> roots;
  double prev_x = 0.0;
  double prev = f(0.0) - level;
  for (int i = 1; i <= cells; ++i) {
    const double x = static_cast<double>(i) / cells;
    const double v = f(x) - level;
    if ((prev < 0) != (v < 0)) {
      double a = prev_x;
      double b = x;
      for (int k = 0; k < 200 && b - a > 1e-15; ++k) {
        const double m = 0.5 * (a + b);
        if (((f(m) - level) < 0) == (prev < 0)) {
          a = m;
        } else {
          b = m;
        }
      }
      roots.push_back(0.5 * (a + b));
    }
    prev = v;
    prev_x = x;
  }
  return roots;
}

inline ScenarioModel toy() { return load_scenario("toy"); }

inline ScenarioModel discrete_model(std::vector<WeightedPoint> xs,
                                    std::vector<WeightedPoint> us,
                                    const std::string& mu0,
                                    const std::string& mu1,
                                    const std::string& pi0) {
  return ScenarioModel("test", CovariateLaw::discrete(std::move(xs)),
                       ConfounderLaw(std::move(us)), parse_expression(mu0),
                       parse_expression(mu1), parse_expression(pi0));
}

// Weights that are positive and sum to 1 within 1e-12.
inline std::vector<double> random_weights(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> w(0.1, 1.0);
  std::vector<double> out(static_cast<std::size_t>(n));
  double total = 0.0;
  for (auto& v : out) total += (v = w(rng));
  double used = 0.0;
  for (std::size_t i = 0; i + 1 < out.size(); ++i) used += (out[i] /= total);
  out.back() = 1.0 - used;
  return out;
}

inline std::string random_unit_expression(std::mt19937_64& rng, bool with_u) {
  std::uniform_real_distribution<double> coef(-1.0, 1.0);
  std::uniform_real_distribution<double> base(0.0, 1.0);
  std::string e = "clamp(" + format_shortest(base(rng));
  const auto term = [&](const std::string& factor) {
    const double c = coef(rng);
    e += (c < 0 ? " - " : " + ") + format_shortest(std::fabs(c)) + " * " +
         factor;
  };
  term("x");
  term("x^2");
  if (with_u) {
    term("u");
    term("x * u");
  }
  return e + ", 0, 1)";
}

// Discrete X with 1-6 points, U empty or 2-3 levels, random clamped
// polynomial mu0, mu1 and pi0.
inline ScenarioModel random_discrete_scenario(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> nx(1, 6);
  std::uniform_int_distribution<int> nu(0, 3);
  std::uniform_real_distribution<double> step(0.05, 0.3);
  const int kx = nx(rng);
  int ku = nu(rng);
  if (ku == 1) ku = 0;
  std::vector<WeightedPoint> xs;
  double x = 0.0;
  const auto wx = random_weights(rng, kx);
  for (int i = 0; i < kx; ++i) {
    x += step(rng);
    xs.push_back({x, wx[static_cast<std::size_t>(i)]});
  }
  std::vector<WeightedPoint> us;
  if (ku > 0) {
    const auto wu = random_weights(rng, ku);
    for (int i = 0; i < ku; ++i) {
      us.push_back({static_cast<double>(i), wu[static_cast<std::size_t>(i)]});
    }
  }
  return ScenarioModel("random", CovariateLaw::discrete(std::move(xs)),
                       ConfounderLaw(std::move(us)),
                       parse_expression(random_unit_expression(rng, ku > 0)),
                       parse_expression(random_unit_expression(rng, ku > 0)),
                       parse_expression(random_unit_expression(rng, ku > 0)));
}

// Stochastic, constant, threshold-on-baseline or chained threshold policy.
inline Policy random_policy(std::mt19937_64& rng, const ScenarioModel& model) {
  std::uniform_int_distribution<int> kind(0, 4);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const bool with_u = !model.u_law().empty();
  switch (kind(rng)) {
    case 0:
      return Policy::stochastic(
          parse_expression(format_shortest(unit(rng))));
    case 1:
    case 2:
      return Policy::stochastic(
          parse_expression(random_unit_expression(rng, with_u)));
    case 3:
      return Policy::threshold(score_from(model, baseline_policy(model)),
                               unit(rng),
                               unit(rng) < 0.5 ? Comparator::kGreaterEqual
                                               : Comparator::kGreater);
    default: {
      const Policy first = Policy::threshold(
          score_from(model, baseline_policy(model)), unit(rng));
      return Policy::threshold(score_from(model, first), unit(rng));
    }
  }
}

// Brute-force enumeration of a discrete scenario. Threshold policies are
// resolved by recomputing the score from the policy they were fit under.
inline double enum_propensity(const ScenarioModel& m, const Policy& p, double x,
                              double u);

inline double enum_score(const ScenarioModel& m, const Policy& p, double x) {
  double s = 0.0;
  for (const auto& lvl : m.marginal_levels()) {
    const double pi = enum_propensity(m, p, x, lvl.value);
    s += lvl.weight * (pi * m.mu1().evaluate(x, lvl.value) +
                       (1 - pi) * m.mu0().evaluate(x, lvl.value));
  }
  return s;
}

inline double enum_propensity(const ScenarioModel& m, const Policy& p, double x,
                              double u) {
  if (!p.is_threshold()) return p.propensity_expression().evaluate(x, u);
  const double s = enum_score(m, p.score().source_policy(), x);
  return p.comparator() == Comparator::kGreater ? (s > p.theta() ? 1.0 : 0.0)
                                                : (s >= p.theta() ? 1.0 : 0.0);
}

template <class F>
double enum_expect(const ScenarioModel& m, F&& f) {
  double total = 0.0;
  for (const auto& px : m.x_law().points()) {
    for (const auto& lvl : m.marginal_levels()) {
      total += px.weight * lvl.weight * f(px.value, lvl.value);
    }
  }
  return total;
}

inline double enum_mean_outcome(const ScenarioModel& m, const Policy& p) {
  return enum_expect(m, [&](double x, double u) {
    const double pi = enum_propensity(m, p, x, u);
    return pi * m.mu1().evaluate(x, u) + (1 - pi) * m.mu0().evaluate(x, u);
  });
}

inline double enum_optimal_value(const ScenarioModel& m) {
  return enum_expect(m, [&](double x, double u) {
    return std::min(m.mu0().evaluate(x, u), m.mu1().evaluate(x, u));
  });
}

// Random expression trees for round-trip checks.
class ExpressionFuzzer {
 public:
  explicit ExpressionFuzzer(std::uint64_t seed) : rng_(seed) {}

  Expression next(int depth = 5) { return build(depth); }

 private:
  Expression leaf() {
    std::uniform_int_distribution<int> pick(0, 5);
    switch (pick(rng_)) {
      case 0:
        return Expression::variable(Variable::kX);
      case 1:
        return Expression::variable(Variable::kU);
      case 2: {
        std::uniform_int_distribution<int> small(0, 9);
        return Expression::literal(small(rng_));
      }
      case 3: {
        std::uniform_real_distribution<double> wide(-12.0, 12.0);
        return Expression::literal(std::pow(10.0, wide(rng_)));
      }
      default: {
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        return Expression::literal(unit(rng_));
      }
    }
  }

  Expression build(int depth) {
    std::uniform_int_distribution<int> pick(0, 9);
    if (depth <= 0) return leaf();
    const int k = pick(rng_);
    if (k <= 1) return leaf();
    if (k == 2) return Expression::negate(build(depth - 1));
    if (k <= 6) {
      std::uniform_int_distribution<int> op(0, 4);
      const auto bop = static_cast<BinaryOp>(op(rng_));
      if (bop == BinaryOp::kPow) {
        std::uniform_int_distribution<int> e(0, 5);
        return Expression::binary(bop, build(depth - 1),
                                  Expression::literal(e(rng_)));
      }
      return Expression::binary(bop, build(depth - 1), build(depth - 1));
    }
    std::uniform_int_distribution<int> fn(0, 4);
    const auto f = static_cast<Function>(fn(rng_));
    switch (f) {
      case Function::kMin:
      case Function::kMax:
        return Expression::call(f, {build(depth - 1), build(depth - 1)});
      case Function::kClamp:
        return Expression::call(
            f, {build(depth - 1), build(depth - 1), build(depth - 1)});
      default:
        return Expression::call(f, {build(depth - 1)});
    }
  }

  std::mt19937_64 rng_;
};

}  // namespace obsrisk::testing

#endif  // OBSRISK_TEST_SUPPORT_HPP
