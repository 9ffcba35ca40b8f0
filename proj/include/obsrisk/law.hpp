#ifndef OBSRISK_LAW_HPP
#define OBSRISK_LAW_HPP

#include <optional>
#include <vector>

namespace obsrisk {

struct WeightedPoint {
  double value = 0.0;
  double weight = 0.0;

  friend bool operator==(const WeightedPoint&, const WeightedPoint&) = default;
};

/// Law of the observed covariate X: Unif(lo, hi) or a finite discrete law.
class CovariateLaw {
 public:
  enum class Kind { kUniform, kDiscrete };

  /// Requires lo < hi, both finite.
  static CovariateLaw uniform(double lo, double hi);
  /// Requires strictly increasing values, strictly positive weights summing
  /// to 1 within 1e-12.
  static CovariateLaw discrete(std::vector<WeightedPoint> points);

  Kind kind() const { return kind_; }
  bool is_discrete() const { return kind_ == Kind::kDiscrete; }

  double lo() const { return lo_; }
  double hi() const { return hi_; }
  const std::vector<WeightedPoint>& points() const { return points_; }

  bool contains(double x) const;

  /// Probability mass of the closed interval [a, b].
  double mass(double a, double b) const;

  /// Quantile function on (0, 1); used for Monte Carlo sampling.
  double quantile(double p) const;

  /// Points at which model functions are validated: 1001 equispaced points
  /// for the uniform law, the support points for a discrete law.
  std::vector<double> validation_grid() const;

  friend bool operator==(const CovariateLaw&, const CovariateLaw&) = default;

 private:
  CovariateLaw() = default;

  Kind kind_ = Kind::kUniform;
  double lo_ = 0.0;
  double hi_ = 1.0;
  std::vector<WeightedPoint> points_;
  std::vector<double> cumulative_;
};

/// Discrete law of the unobserved confounder U, independent of X. An empty
/// level list means U is absent.
class ConfounderLaw {
 public:
  ConfounderLaw() = default;
  explicit ConfounderLaw(std::vector<WeightedPoint> levels);

  bool empty() const { return levels_.empty(); }
  const std::vector<WeightedPoint>& levels() const { return levels_; }
  bool contains(double u) const;

  friend bool operator==(const ConfounderLaw&, const ConfounderLaw&) = default;

 private:
  std::vector<WeightedPoint> levels_;
};

inline constexpr int kValidationGridPoints = 1001;
inline constexpr double kWeightSumTolerance = 1e-12;

}  // namespace obsrisk

#endif  // OBSRISK_LAW_HPP
