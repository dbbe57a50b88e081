#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <queue>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace logcorr {

struct QuadratureSettings {
  double abs_tol = 1e-9;
  double rel_tol = 1e-8;
  int max_subdivisions = 4000;
  double diagonal_split = 1e-3;

  void validate() const {
    if (!(abs_tol > 0.0) || !(rel_tol > 0.0))
      throw std::invalid_argument("quadrature tolerances must be positive");
    if (max_subdivisions < 1)
      throw std::invalid_argument("max_subdivisions must be >= 1");
  }
};

struct QuadResult {
  double value = 0.0;
  double error = 0.0;
  long evals = 0;
  bool converged = true;
};

class QuadratureError : public std::runtime_error {
 public:
  QuadratureError(const std::string& what, double achieved)
      : std::runtime_error(what + " (achieved error " + std::to_string(achieved) + ")"),
        achieved_(achieved) {}
  double achieved() const { return achieved_; }

 private:
  double achieved_;
};

namespace detail {

// Kronrod 15-point nodes on [0,1] half of [-1,1]; odd indices are the embedded Gauss 7 nodes.
inline constexpr std::array<double, 8> kK15x = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kK15w = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> kG7w = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Panel {
  double a, b, value, error;
  bool operator<(const Panel& o) const { return error < o.error; }
};

template <class F>
Panel gk15(F& f, double a, double b, long& evals) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  const double fc = f(c);
  double k = fc * kK15w[7];
  double g = fc * kG7w[3];
  for (int i = 0; i < 7; ++i) {
    const double dx = h * kK15x[i];
    const double s = f(c - dx) + f(c + dx);
    k += kK15w[i] * s;
    if (i % 2 == 1) g += kG7w[i / 2] * s;
  }
  evals += 15;
  const double err = std::abs((k - g) * h);
  return {a, b, k * h, err};
}

}  // namespace detail

// Adaptive Gauss-Kronrod (7/15) on [a,b]. Interior break points start as panel edges.
// The returned sum is formed in left-to-right panel order, so results do not depend on
// heap tie-breaking.
template <class F>
QuadResult integrate(F&& f, double a, double b, const QuadratureSettings& s,
                     std::span<const double> breaks = {}) {
  QuadResult res;
  if (a == b) return res;
  double sign = 1.0;
  if (a > b) {
    std::swap(a, b);
    sign = -1.0;
  }
  std::vector<double> edges{a};
  for (double x : breaks)
    if (x > a && x < b) edges.push_back(x);
  edges.push_back(b);
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

  std::priority_queue<detail::Panel> heap;
  double total = 0.0, err = 0.0;
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
    auto p = detail::gk15(f, edges[i], edges[i + 1], res.evals);
    total += p.value;
    err += p.error;
    heap.push(p);
  }
  int splits = 0;
  while (err > std::max(s.abs_tol, s.rel_tol * std::abs(total))) {
    if (splits >= s.max_subdivisions) {
      res.converged = false;
      break;
    }
    auto p = heap.top();
    const double m = 0.5 * (p.a + p.b);
    if (!(m > p.a && m < p.b)) {
      res.converged = false;
      break;
    }
    heap.pop();
    auto l = detail::gk15(f, p.a, m, res.evals);
    auto r = detail::gk15(f, m, p.b, res.evals);
    total += l.value + r.value - p.value;
    err += l.error + r.error - p.error;
    heap.push(l);
    heap.push(r);
    ++splits;
  }
  std::vector<detail::Panel> panels;
  panels.reserve(heap.size());
  while (!heap.empty()) {
    panels.push_back(heap.top());
    heap.pop();
  }
  std::sort(panels.begin(), panels.end(),
            [](const detail::Panel& x, const detail::Panel& y) { return x.a < y.a; });
  double v = 0.0, e = 0.0;
  for (const auto& p : panels) {
    v += p.value;
    e += p.error;
  }
  res.value = sign * v;
  res.error = e;
  return res;
}

// Same as integrate() but throws when the tolerance was not reached.
template <class F>
double integrate_or_throw(F&& f, double a, double b, const QuadratureSettings& s,
                          std::span<const double> breaks = {}) {
  auto r = integrate(std::forward<F>(f), a, b, s, breaks);
  if (!r.converged) {
    // Accept near misses; a hard failure is reserved for clearly unresolved integrals.
    if (r.error > 100.0 * std::max(s.abs_tol, s.rel_tol * std::abs(r.value)))
      throw QuadratureError("adaptive quadrature did not converge", r.error);
  }
  return r.value;
}

// Gauss-Legendre nodes and weights on [-1,1].
struct GaussRule {
  std::vector<double> x, w;
};

inline GaussRule gauss_legendre(int n) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: n must be >= 1");
  GaussRule g;
  g.x.resize(n);
  g.w.resize(n);
  const int m = (n + 1) / 2;
  for (int i = 0; i < m; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p1 = 1.0, p2 = 0.0;
      for (int j = 1; j <= n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = ((2.0 * j - 1.0) * z * p2 - (j - 1.0) * p3) / j;
      }
      pp = n * (z * p1 - p2) / (z * z - 1.0);
      const double z1 = z;
      z = z1 - p1 / pp;
      if (std::abs(z - z1) < 1e-15) break;
    }
    g.x[i] = -z;
    g.x[n - 1 - i] = z;
    g.w[i] = g.w[n - 1 - i] = 2.0 / ((1.0 - z * z) * pp * pp);
  }
  return g;
}

// ---------------------------------------------------------------------------
// Exponential integral

inline constexpr double kEulerGamma = std::numbers::egamma;

// Ein(x) = int_0^x (1 - e^{-u})/u du = E1(x) + ln x + gamma.  Entire, Ein(0) = 0.
inline double ein(double x);

inline double exp_integral_e1(double x) {
  if (!(x > 0.0)) throw std::domain_error("exp_integral_e1: x must be > 0");
  if (x <= 1.0) return -kEulerGamma - std::log(x) + ein(x);
  if (x > 745.0) return 0.0;
  // Modified Lentz evaluation of the continued fraction.
  constexpr double tiny = 1e-300;
  double b = x + 1.0;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 10000; ++i) {
    const double an = -static_cast<double>(i) * i;
    b += 2.0;
    d = 1.0 / (an * d + b);
    c = b + an / c;
    const double del = c * d;
    h *= del;
    if (std::abs(del - 1.0) < 1e-16) break;
  }
  return h * std::exp(-x);
}

inline double ein(double x) {
  if (x < 0.0) throw std::domain_error("ein: x must be >= 0");
  if (x == 0.0) return 0.0;
  if (x <= 1.0) {
    double term = 1.0, sum = 0.0;
    for (int k = 1; k < 60; ++k) {
      term *= -x / k;  // (-x)^k / k!
      const double t = -term / k;
      sum += t;
      if (std::abs(t) < 1e-17 * std::abs(sum)) break;
    }
    return sum;
  }
  return exp_integral_e1(x) + std::log(x) + kEulerGamma;
}

// int_{x1}^{x2} e^{-u}/u du for 0 < x1 <= x2.
inline double e1_difference(double x1, double x2) {
  if (!(x1 > 0.0) || !(x2 > 0.0)) throw std::domain_error("e1_difference: arguments must be > 0");
  if (x1 == x2) return 0.0;
  if (x1 > 1.0) return exp_integral_e1(x1) - exp_integral_e1(x2);
  return std::log(x2 / x1) - (ein(x2) - ein(x1));
}

// int_0^T (e^{-a r} - e^{-b r}) / r dr for a, b >= 0, T in [0, inf].
inline double frullani_truncated(double a, double b, double T) {
  if (a < 0.0 || b < 0.0 || std::isnan(a) || std::isnan(b))
    throw std::domain_error("frullani_truncated: rates must be >= 0");
  if (T < 0.0 || std::isnan(T)) throw std::domain_error("frullani_truncated: T must be >= 0");
  if (a == b || T == 0.0) return 0.0;
  if (std::isinf(T)) {
    if (a == 0.0) return std::numeric_limits<double>::infinity();
    if (b == 0.0) return -std::numeric_limits<double>::infinity();
    return std::log(b / a);
  }
  const double lo = std::min(a, b) * T;
  if (lo > 1.0)
    return std::log(b / a) + exp_integral_e1(b * T) - exp_integral_e1(a * T);
  return ein(b * T) - ein(a * T);
}

// int_{r1}^{r2} (e^{-a r} - e^{-b r}) / r dr, 0 <= r1 <= r2 <= inf, 0 <= a <= b.
inline double frullani_band(double a, double b, double r1, double r2) {
  if (r2 <= r1 || a == b) return 0.0;
  if (r1 == 0.0) return frullani_truncated(a, b, r2);
  if (a * r1 > 1.0) {
    const double ta = std::isinf(r2) ? 0.0 : exp_integral_e1(a * r2);
    const double tb = std::isinf(r2) ? 0.0 : exp_integral_e1(b * r2);
    return exp_integral_e1(a * r1) - ta - exp_integral_e1(b * r1) + tb;
  }
  if (a == 0.0) {
    if (std::isinf(r2)) return std::numeric_limits<double>::infinity();
    return ein(b * r2) - ein(b * r1);
  }
  return frullani_truncated(a, b, r2) - frullani_truncated(a, b, r1);
}

// Covariance of the truncated field: int_0^{1/eps} (e^{-2r|t-s|} - e^{-2r(t+s)})/r dr.
inline double truncated_cov(double s, double t, double eps) {
  if (s < 0.0 || t < 0.0) throw std::domain_error("truncated_cov: times must be >= 0");
  if (!(eps > 0.0)) throw std::domain_error("truncated_cov: eps must be > 0");
  return frullani_truncated(2.0 * std::abs(t - s), 2.0 * (t + s), 1.0 / eps);
}

}  // namespace logcorr
