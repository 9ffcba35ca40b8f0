#ifndef OBSRISK_NUMERICS_HPP
#define OBSRISK_NUMERICS_HPP

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "obsrisk/errors.hpp"
#include "obsrisk/law.hpp"

namespace obsrisk::numerics {

enum class Method { kQuadrature, kMonteCarlo, kExactEnumeration };

std::string to_string(Method m);

struct Estimate {
  double value = 0.0;
  /// Quadrature: residual estimate. Monte Carlo: standard error.
  double error_bound = 0.0;
  Method backend = Method::kQuadrature;

  friend bool operator==(const Estimate&, const Estimate&) = default;
};

struct QuadratureSpec {
  double abs_tol = 1e-9;
  int max_subdivisions = 10'000;

  void validate() const;
};

struct MonteCarloSpec {
  std::int64_t n_samples = 1'000'000;
  std::uint64_t seed = 0;
  /// 0 selects std::thread::hardware_concurrency(). Results do not depend on
  /// this value.
  unsigned threads = 1;

  void validate() const;
};

/// Raised when adaptive quadrature exhausts its subdivision budget.
class NumericFailure : public Error {
 public:
  NumericFailure(const std::string& message, Estimate best)
      : Error(ErrorKind::kNumericFailure, message), best_(best) {}

  const Estimate& best_estimate() const noexcept { return best_; }

 private:
  Estimate best_;
};

using RealFn = std::function<double(double)>;
/// Writes one value per component into `out`.
using VectorFn = std::function<void(double x, std::span<double> out)>;

/// E[f(X)]. Uniform laws use adaptive Gauss-Kronrod (7/15) with the support
/// pre-split at `breakpoints`; discrete laws are summed exactly.
Estimate integrate(const RealFn& f, const CovariateLaw& law,
                   const QuadratureSpec& spec = {},
                   std::span<const double> breakpoints = {});

/// Component-wise E[f(X)] for a vector integrand.
std::vector<Estimate> integrate_many(const VectorFn& f, std::size_t components,
                                     const CovariateLaw& law,
                                     const QuadratureSpec& spec = {},
                                     std::span<const double> breakpoints = {});

/// Sample mean of f over n draws of X with its standard error.
Estimate mc_mean(const RealFn& f, const CovariateLaw& law,
                 const MonteCarloSpec& spec);

/// Vector form: every component sees the same draws.
std::vector<Estimate> mc_means(const VectorFn& f, std::size_t components,
                               const CovariateLaw& law,
                               const MonteCarloSpec& spec);

/// The index-th uniform variate in [0, 1) of the stream keyed by seed.
/// Pure function of (seed, index).
double uniform_variate(std::uint64_t seed, std::uint64_t index);

inline constexpr int kDefaultScanCells = 2048;

/// Ascending roots of f on [lo, hi]: sign changes on a scan grid refined by
/// bisection to bracket width <= tol, plus grid points where f is exactly 0.
std::vector<double> find_roots(const RealFn& f, double lo, double hi,
                               double tol, int scan_cells = kDefaultScanCells);

struct Maximum {
  double argmax = 0.0;
  double value = 0.0;
};

/// Grid scan followed by golden-section refinement around the best cell.
Maximum maximize_1d(const RealFn& f, double lo, double hi, double tol,
                    int scan_cells = kDefaultScanCells);

}  // namespace obsrisk::numerics

#endif  // OBSRISK_NUMERICS_HPP
