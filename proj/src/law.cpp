#include "obsrisk/law.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "obsrisk/errors.hpp"

namespace obsrisk {

namespace {

void check_weights(const std::vector<WeightedPoint>& pts, const char* what) {
  double sum = 0.0;
  for (const auto& p : pts) {
    if (!std::isfinite(p.value)) {
      throw ValidationError(std::string(what) + ": values must be finite");
    }
    if (!(p.weight > 0.0) || !std::isfinite(p.weight)) {
      throw ValidationError(std::string(what) +
                            ": weights must be strictly positive");
    }
    sum += p.weight;
  }
  if (std::fabs(sum - 1.0) > kWeightSumTolerance) {
    throw ValidationError(std::string(what) + ": weights sum to " +
                          std::to_string(sum) + ", expected 1");
  }
}

}  // namespace

CovariateLaw CovariateLaw::uniform(double lo, double hi) {
  if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi)) {
    throw ValidationError("x_law: uniform law requires finite lo < hi");
  }
  CovariateLaw law;
  law.kind_ = Kind::kUniform;
  law.lo_ = lo;
  law.hi_ = hi;
  return law;
}

CovariateLaw CovariateLaw::discrete(std::vector<WeightedPoint> points) {
  if (points.empty()) {
    throw ValidationError("x_law: discrete law needs at least one point");
  }
  check_weights(points, "x_law");
  for (std::size_t i = 1; i < points.size(); ++i) {
    if (!(points[i - 1].value < points[i].value)) {
      throw ValidationError("x_law: point values must be strictly increasing");
    }
  }
  CovariateLaw law;
  law.kind_ = Kind::kDiscrete;
  law.lo_ = points.front().value;
  law.hi_ = points.back().value;
  double c = 0.0;
  for (const auto& p : points) {
    c += p.weight;
    law.cumulative_.push_back(c);
  }
  law.points_ = std::move(points);
  return law;
}

bool CovariateLaw::contains(double x) const {
  if (kind_ == Kind::kUniform) return x >= lo_ && x <= hi_;
  return std::any_of(points_.begin(), points_.end(),
                     [x](const WeightedPoint& p) { return p.value == x; });
}

double CovariateLaw::mass(double a, double b) const {
  if (b < a) return 0.0;
  if (kind_ == Kind::kUniform) {
    const double l = std::max(a, lo_);
    const double h = std::min(b, hi_);
    return h > l ? (h - l) / (hi_ - lo_) : 0.0;
  }
  double m = 0.0;
  for (const auto& p : points_) {
    if (p.value >= a && p.value <= b) m += p.weight;
  }
  return m;
}

double CovariateLaw::quantile(double p) const {
  if (kind_ == Kind::kUniform) return lo_ + (hi_ - lo_) * p;
  const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), p);
  const auto idx = std::min<std::size_t>(
      static_cast<std::size_t>(it - cumulative_.begin()), points_.size() - 1);
  return points_[idx].value;
}

std::vector<double> CovariateLaw::validation_grid() const {
  std::vector<double> grid;
  if (kind_ == Kind::kDiscrete) {
    for (const auto& p : points_) grid.push_back(p.value);
    return grid;
  }
  grid.reserve(kValidationGridPoints);
  const double step = (hi_ - lo_) / (kValidationGridPoints - 1);
  for (int i = 0; i < kValidationGridPoints; ++i) {
    grid.push_back(i == kValidationGridPoints - 1 ? hi_ : lo_ + step * i);
  }
  return grid;
}

ConfounderLaw::ConfounderLaw(std::vector<WeightedPoint> levels)
    : levels_(std::move(levels)) {
  if (!levels_.empty()) check_weights(levels_, "u_law");
}

bool ConfounderLaw::contains(double u) const {
  return std::any_of(levels_.begin(), levels_.end(),
                     [u](const WeightedPoint& p) { return p.value == u; });
}

}  // namespace obsrisk
