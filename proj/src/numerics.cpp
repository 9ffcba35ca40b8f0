#include "obsrisk/numerics.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <queue>
#include <thread>

namespace obsrisk::numerics {

std::string to_string(Method m) {
  switch (m) {
    case Method::kQuadrature:
      return "quadrature";
    case Method::kMonteCarlo:
      return "monte-carlo";
    case Method::kExactEnumeration:
      return "exact-enumeration";
  }
  return "unknown";
}

void QuadratureSpec::validate() const {
  if (!(abs_tol > 0.0)) throw DomainError("quadrature abs_tol must be > 0");
  if (max_subdivisions < 1) {
    throw DomainError("quadrature max_subdivisions must be >= 1");
  }
}

void MonteCarloSpec::validate() const {
  if (n_samples < 1) throw DomainError("monte carlo n_samples must be >= 1");
}

namespace {

// Kronrod 15-point abscissae (positive half, descending) and weights; the
// odd-indexed abscissae are the 7-point Gauss nodes.
constexpr std::array<double, 8> kXgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0};
constexpr std::array<double, 8> kWgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr std::array<double, 4> kWg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Segment {
  double a = 0.0;
  double b = 0.0;
  std::vector<double> result;
  std::vector<double> error;
  double worst = 0.0;
};

Segment gauss_kronrod(const VectorFn& f, std::size_t k, double a, double b) {
  Segment s{a, b, std::vector<double>(k, 0.0), std::vector<double>(k, 0.0)};
  const double center = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  std::vector<double> kron(k, 0.0);
  std::vector<double> gauss(k, 0.0);
  std::vector<double> lo(k), hi(k);
  for (std::size_t i = 0; i < kXgk.size(); ++i) {
    const double dx = half * kXgk[i];
    if (i == kXgk.size() - 1) {
      f(center, lo);
      for (std::size_t j = 0; j < k; ++j) {
        kron[j] += kWgk[i] * lo[j];
        gauss[j] += kWg[3] * lo[j];
      }
      continue;
    }
    f(center - dx, lo);
    f(center + dx, hi);
    for (std::size_t j = 0; j < k; ++j) {
      const double pair = lo[j] + hi[j];
      kron[j] += kWgk[i] * pair;
      if (i % 2 == 1) gauss[j] += kWg[i / 2] * pair;
    }
  }
  for (std::size_t j = 0; j < k; ++j) {
    s.result[j] = kron[j] * half;
    s.error[j] = std::fabs((kron[j] - gauss[j]) * half);
    s.worst = std::max(s.worst, s.error[j]);
  }
  return s;
}

struct WorstFirst {
  bool operator()(const Segment& x, const Segment& y) const {
    if (x.worst != y.worst) return x.worst < y.worst;
    return x.a > y.a;
  }
};

}  // namespace

std::vector<Estimate> integrate_many(const VectorFn& f, std::size_t components,
                                     const CovariateLaw& law,
                                     const QuadratureSpec& spec,
                                     std::span<const double> breakpoints) {
  spec.validate();
  std::vector<Estimate> out(components);
  std::vector<double> buf(components);

  if (law.is_discrete()) {
    std::vector<double> acc(components, 0.0);
    for (const auto& p : law.points()) {
      f(p.value, buf);
      for (std::size_t j = 0; j < components; ++j) acc[j] += p.weight * buf[j];
    }
    for (std::size_t j = 0; j < components; ++j) {
      out[j] = {acc[j], 0.0, Method::kExactEnumeration};
    }
    return out;
  }

  const double width = law.hi() - law.lo();
  std::vector<double> cuts = {law.lo()};
  for (double c : breakpoints) {
    if (c > law.lo() && c < law.hi()) cuts.push_back(c);
  }
  cuts.push_back(law.hi());
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  std::priority_queue<Segment, std::vector<Segment>, WorstFirst> queue;
  std::vector<double> total_err(components, 0.0);
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    Segment s = gauss_kronrod(f, components, cuts[i], cuts[i + 1]);
    for (std::size_t j = 0; j < components; ++j) total_err[j] += s.error[j];
    queue.push(std::move(s));
  }

  const double target = spec.abs_tol * width;
  auto converged = [&] {
    return std::all_of(total_err.begin(), total_err.end(),
                       [&](double e) { return e <= target; });
  };

  int subdivisions = 0;
  bool failed = false;
  while (!converged()) {
    if (subdivisions >= spec.max_subdivisions) {
      failed = true;
      break;
    }
    Segment worst = queue.top();
    queue.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    Segment left = gauss_kronrod(f, components, worst.a, mid);
    Segment right = gauss_kronrod(f, components, mid, worst.b);
    for (std::size_t j = 0; j < components; ++j) {
      total_err[j] += left.error[j] + right.error[j] - worst.error[j];
    }
    queue.push(std::move(left));
    queue.push(std::move(right));
    ++subdivisions;
  }

  std::vector<Segment> segments;
  segments.reserve(queue.size());
  while (!queue.empty()) {
    segments.push_back(queue.top());
    queue.pop();
  }
  std::sort(segments.begin(), segments.end(),
            [](const Segment& x, const Segment& y) { return x.a < y.a; });
  for (std::size_t j = 0; j < components; ++j) {
    double value = 0.0;
    double err = 0.0;
    for (const auto& s : segments) {
      value += s.result[j];
      err += s.error[j];
    }
    out[j] = {value / width, err / width, Method::kQuadrature};
  }
  if (failed) {
    throw NumericFailure(
        "quadrature did not reach abs_tol within " +
            std::to_string(spec.max_subdivisions) + " subdivisions",
        out.front());
  }
  return out;
}

Estimate integrate(const RealFn& f, const CovariateLaw& law,
                   const QuadratureSpec& spec,
                   std::span<const double> breakpoints) {
  return integrate_many([&f](double x, std::span<double> o) { o[0] = f(x); },
                        1, law, spec, breakpoints)
      .front();
}

double uniform_variate(std::uint64_t seed, std::uint64_t index) {
  auto mix = [](std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  };
  const std::uint64_t key = mix(seed + 0x9E3779B97F4A7C15ULL);
  const std::uint64_t z = mix(key + (index + 1) * 0x9E3779B97F4A7C15ULL);
  return static_cast<double>(z >> 11) * 0x1.0p-53;
}

namespace {

constexpr std::int64_t kBlockSize = 4096;

// Running moments of one component (Welford within a block, Chan across).
struct Moments {
  double count = 0.0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double v) {
    count += 1.0;
    const double d = v - mean;
    mean += d / count;
    m2 += d * (v - mean);
  }

  void merge(const Moments& o) {
    if (o.count == 0.0) return;
    const double n = count + o.count;
    const double d = o.mean - mean;
    mean += d * (o.count / n);
    m2 += o.m2 + d * d * (count * o.count / n);
    count = n;
  }
};

}  // namespace

std::vector<Estimate> mc_means(const VectorFn& f, std::size_t components,
                               const CovariateLaw& law,
                               const MonteCarloSpec& spec) {
  spec.validate();
  const std::int64_t n = spec.n_samples;
  const std::int64_t blocks = (n + kBlockSize - 1) / kBlockSize;
  std::vector<Moments> per_block(static_cast<std::size_t>(blocks) * components);

  auto run_block = [&](std::int64_t b, std::vector<double>& buf) {
    const std::int64_t begin = b * kBlockSize;
    const std::int64_t end = std::min(n, begin + kBlockSize);
    Moments* m = &per_block[static_cast<std::size_t>(b) * components];
    for (std::int64_t i = begin; i < end; ++i) {
      const double x = law.quantile(
          uniform_variate(spec.seed, static_cast<std::uint64_t>(i)));
      f(x, buf);
      for (std::size_t j = 0; j < components; ++j) m[j].add(buf[j]);
    }
  };

  unsigned threads = spec.threads == 0 ? std::thread::hardware_concurrency()
                                       : spec.threads;
  threads = std::max(1u, std::min<unsigned>(
                             threads, static_cast<unsigned>(blocks)));
  if (threads == 1) {
    std::vector<double> buf(components);
    for (std::int64_t b = 0; b < blocks; ++b) run_block(b, buf);
  } else {
    std::atomic<std::int64_t> next{0};
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        std::vector<double> buf(components);
        for (std::int64_t b = next++; b < blocks; b = next++) run_block(b, buf);
      });
    }
  }

  std::vector<Estimate> out(components);
  for (std::size_t j = 0; j < components; ++j) {
    Moments total;
    for (std::int64_t b = 0; b < blocks; ++b) {
      total.merge(per_block[static_cast<std::size_t>(b) * components + j]);
    }
    const double se =
        n > 1 ? std::sqrt(total.m2 / static_cast<double>(n - 1) /
                          static_cast<double>(n))
              : 0.0;
    out[j] = {total.mean, se, Method::kMonteCarlo};
  }
  return out;
}

Estimate mc_mean(const RealFn& f, const CovariateLaw& law,
                 const MonteCarloSpec& spec) {
  return mc_means([&f](double x, std::span<double> o) { o[0] = f(x); }, 1, law,
                  spec)
      .front();
}

std::vector<double> find_roots(const RealFn& f, double lo, double hi,
                               double tol, int scan_cells) {
  if (!(hi > lo)) throw DomainError("find_roots requires lo < hi");
  if (!(tol > 0.0)) throw DomainError("find_roots requires tol > 0");
  if (scan_cells < 1) throw DomainError("find_roots requires scan_cells >= 1");

  auto grid = [&](int i) {
    return i == scan_cells ? hi : lo + (hi - lo) * i / scan_cells;
  };
  std::vector<double> fx(static_cast<std::size_t>(scan_cells) + 1);
  for (int i = 0; i <= scan_cells; ++i) fx[i] = f(grid(i));

  std::vector<double> roots;
  for (int i = 0; i <= scan_cells; ++i) {
    if (fx[i] == 0.0) {
      roots.push_back(grid(i));
      continue;
    }
    if (i == scan_cells) break;
    const double fa = fx[i];
    const double fb = fx[i + 1];
    if (fb == 0.0 || std::isnan(fa) || std::isnan(fb)) continue;
    if (std::signbit(fa) == std::signbit(fb)) continue;
    double a = grid(i);
    double b = grid(i + 1);
    double fa_cur = fa;
    while (b - a > tol) {
      const double m = 0.5 * (a + b);
      if (m <= a || m >= b) break;
      const double fm = f(m);
      if (fm == 0.0) {
        a = b = m;
        break;
      }
      if (std::signbit(fm) == std::signbit(fa_cur)) {
        a = m;
        fa_cur = fm;
      } else {
        b = m;
      }
    }
    roots.push_back(0.5 * (a + b));
  }

  std::sort(roots.begin(), roots.end());
  std::vector<double> unique;
  for (double r : roots) {
    if (unique.empty() || r - unique.back() >= tol) unique.push_back(r);
  }
  return unique;
}

Maximum maximize_1d(const RealFn& f, double lo, double hi, double tol,
                    int scan_cells) {
  if (!(hi > lo)) throw DomainError("maximize_1d requires lo < hi");
  if (!(tol > 0.0)) throw DomainError("maximize_1d requires tol > 0");
  if (scan_cells < 1) throw DomainError("maximize_1d requires scan_cells >= 1");

  auto grid = [&](int i) {
    return i == scan_cells ? hi : lo + (hi - lo) * i / scan_cells;
  };
  int best = 0;
  double best_val = f(grid(0));
  for (int i = 1; i <= scan_cells; ++i) {
    const double v = f(grid(i));
    if (v > best_val) {
      best_val = v;
      best = i;
    }
  }

  double a = grid(std::max(best - 1, 0));
  double b = grid(std::min(best + 1, scan_cells));
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c);
  double fd = f(d);
  while (b - a > tol) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
    if (c >= d) break;
  }
  const double x = 0.5 * (a + b);
  const double fx = f(x);
  if (fx > best_val) return {x, fx};
  return {grid(best), best_val};
}

}  // namespace obsrisk::numerics
