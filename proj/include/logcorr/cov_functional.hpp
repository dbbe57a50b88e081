#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "logcorr/kernels.hpp"
#include "logcorr/metric_space.hpp"
#include "logcorr/quadrature.hpp"
#include "logcorr/test_function.hpp"

namespace logcorr {

struct Domain {
  double lo = 0.0, hi = 0.0;
  std::vector<double> breaks;
};

namespace detail {

inline void add_decades(std::vector<double>& br, double lo, double hi) {
  for (double x = 10.0; x < hi; x *= 10.0)
    if (x > lo) br.push_back(x);
  for (double x = -10.0; x > lo; x *= 10.0)
    if (x < hi) br.push_back(x);
}

struct ErrorTracker {
  double worst = 0.0;
  bool failed = false;
  void note(const QuadResult& r, const QuadratureSettings& s) {
    if (!r.converged && r.error > 100.0 * std::max(s.abs_tol, s.rel_tol * std::abs(r.value))) {
      failed = true;
      worst = std::max(worst, r.error);
    }
  }
};

}  // namespace detail

// int int fo(s) gi(t) kern(s, t, |t-s|) dt ds where kern may carry a logarithmic (or weaker)
// singularity on s = t.  The inner integral is split at t = s and mapped by t = s +- v^2 so
// the separation |t-s| = v^2 reaches the kernel without cancellation.
template <class FO, class GI, class Kern>
double diag_double_integral(FO&& fo, GI&& gi, Kern&& kern, const Domain& dF, const Domain& dG,
                            const QuadratureSettings& s) {
  if (!(dF.hi > dF.lo) || !(dG.hi > dG.lo)) return 0.0;
  QuadratureSettings si = s;
  si.abs_tol = std::max(1e-15, s.abs_tol * 1e-2);
  si.rel_tol = std::max(1e-14, s.rel_tol * 1e-2);
  detail::ErrorTracker track;

  auto inner = [&](double x) {
    double total = 0.0;
    std::vector<double> vb;
    // t > x
    if (dG.hi > x) {
      const double t0 = std::max(dG.lo, x);
      const double v0 = std::sqrt(t0 - x), v1 = std::sqrt(dG.hi - x);
      vb.clear();
      for (double b : dG.breaks)
        if (b > t0 && b < dG.hi) vb.push_back(std::sqrt(b - x));
      for (double e = 1e-4; e < v1; e *= 10.0) vb.push_back(e);
      auto h = [&](double v) {
        const double sep = v * v;
        return 2.0 * v * gi(x + sep) * kern(x, x + sep, sep);
      };
      auto r = integrate(h, v0, v1, si, vb);
      track.note(r, si);
      total += r.value;
    }
    // t < x
    if (dG.lo < x) {
      const double t1 = std::min(dG.hi, x);
      const double v0 = std::sqrt(x - t1), v1 = std::sqrt(x - dG.lo);
      vb.clear();
      for (double b : dG.breaks)
        if (b > dG.lo && b < t1) vb.push_back(std::sqrt(x - b));
      for (double e = 1e-4; e < v1; e *= 10.0) vb.push_back(e);
      auto h = [&](double v) {
        const double sep = v * v;
        return 2.0 * v * gi(x - sep) * kern(x, x - sep, sep);
      };
      auto r = integrate(h, v0, v1, si, vb);
      track.note(r, si);
      total += r.value;
    }
    return total;
  };

  std::vector<double> ob = dF.breaks;
  ob.insert(ob.end(), dG.breaks.begin(), dG.breaks.end());
  auto outer = integrate([&](double x) {
    const double fx = fo(x);
    return fx == 0.0 ? 0.0 : fx * inner(x);
  }, dF.lo, dF.hi, s, ob);
  track.note(outer, s);
  if (track.failed)
    throw QuadratureError("covariance quadrature did not converge",
                          std::max(track.worst, outer.error));
  return outer.value;
}

// Integration domain for f on a line space, truncated by the tail certificate.
inline Domain line_domain(const Space& sp, const TestFunction& f, double tol) {
  Domain d;
  d.lo = f.tail_lo(tol);
  d.hi = f.tail_hi(tol);
  if (sp.kind == SpaceKind::HalfLine) d.lo = std::max(d.lo, 0.0);
  if (!(d.hi > d.lo)) return {0.0, 0.0, {}};
  for (double b : f.breakpoints())
    if (b > d.lo && b < d.hi) d.breaks.push_back(b);
  if (d.lo < 0.0 && d.hi > 0.0) d.breaks.push_back(0.0);
  detail::add_decades(d.breaks, d.lo, d.hi);
  std::sort(d.breaks.begin(), d.breaks.end());
  return d;
}

// Radial domain [0, T] for a profile f(|x|) or f(theta).
inline Domain radial_domain(const TestFunction& f, double tol, double cap) {
  Domain d;
  d.lo = std::max(0.0, f.tail_lo(tol));
  d.hi = std::min(cap, f.tail_hi(tol));
  if (!(d.hi > d.lo)) return {0.0, 0.0, {}};
  for (double b : f.breakpoints())
    if (b > d.lo && b < d.hi) d.breaks.push_back(b);
  detail::add_decades(d.breaks, d.lo, d.hi);
  std::sort(d.breaks.begin(), d.breaks.end());
  return d;
}

inline void require_certified(const TestFunction& f) {
  if (!f.certified())
    throw std::invalid_argument("test function '" + f.label() +
                                "' has no decay certificate; covariance functionals need one");
}

// int int f(s) g(t) k(d(s,t), mu(A_s), mu(A_t)) ds dt on a line space, k given in scalar form.
template <class Kern>
double line_kernel_functional(const Space& sp, const TestFunction& f, const TestFunction& g,
                              Kern&& k, const QuadratureSettings& s = {}) {
  if (!sp.is_line()) throw std::domain_error("line_kernel_functional needs a line space");
  require_certified(f);
  require_certified(g);
  s.validate();
  if (f.is_zero() || g.is_zero()) return 0.0;
  const double tol = s.abs_tol * 1e-2;
  const Domain dF = line_domain(sp, f, tol), dG = line_domain(sp, g, tol);
  return diag_double_integral(f, g, [&](double x, double y, double sep) {
    return k(sep, std::abs(x), std::abs(y));
  }, dF, dG, s);
}

namespace detail {

// Average of log|x-y| over independent uniform directions, |x| = a, |y| = b, in R^n.
inline double radial_log_average(int n, double a, double b, double sep) {
  const double hi = std::max(a, b), lo = std::min(a, b);
  if (hi == 0.0) return -std::numeric_limits<double>::infinity();
  switch (n) {
    case 1: return 0.5 * (std::log(sep) + std::log(a + b));
    case 2: return std::log(hi);
    case 3: {
      const double r = lo / hi;
      if (r < 1e-5) return std::log(hi) + r * r / 6.0;
      // (1/(8r)) [(1+r)^2 (2 log(1+r) - 1) - (1-r)^2 (2 log(1-r) - 1)] relative to hi = 1
      const double om = sep / hi;  // 1 - r without cancellation
      const double p = (1 + r) * (1 + r) * (2 * std::log1p(r) - 1);
      const double m = om > 0.0 ? om * om * (2 * std::log(om) - 1) : 0.0;
      return std::log(hi) + (p - m) / (8 * r);
    }
    default: {
      // Angle psi between the directions has density proportional to sin^{n-2} psi.
      QuadratureSettings q;
      q.abs_tol = 1e-13;
      q.rel_tol = 1e-12;
      const double ra = lo / hi;
      auto w = [&](double psi) { return std::pow(std::sin(psi), n - 2); };
      auto h = [&](double psi) {
        const double hs = 2.0 * std::sin(0.5 * psi);
        // 1 + r^2 - 2 r cos psi = (1-r)^2 + r hs^2
        const double v = (1 - ra) * (1 - ra) + ra * hs * hs;
        return 0.5 * std::log(v) * w(psi);
      };
      const double norm = std::sqrt(std::numbers::pi) * std::tgamma(0.5 * (n - 1)) /
                          std::tgamma(0.5 * n);
      const double brk[] = {1e-6, 1e-4, 1e-2, 0.1};
      return std::log(hi) + integrate(h, 0.0, std::numbers::pi, q, brk).value / norm;
    }
  }
}

// Circle average over the relative azimuth of log(geodesic) on S^2 for polar angles t1, t2.
inline double sphere2_log_geodesic_average(double t1, double t2) {
  static const GaussRule gl = gauss_legendre(24);
  const double c1 = std::cos(t1), c2 = std::cos(t2), s1 = std::sin(t1), s2 = std::sin(t2);
  const double A = 2.0 - 2.0 * c1 * c2;
  const double B = 2.0 * s1 * s2;
  const double root = 4.0 * std::abs(std::sin(0.5 * (t1 - t2)) * std::sin(0.5 * (t1 + t2)));
  // <log chord> = (1/2) log((A + sqrt(A^2 - B^2)) / 2)
  const double chord_part = 0.5 * std::log(0.5 * (A + root));
  double corr = 0.0;
  for (std::size_t i = 0; i < gl.x.size(); ++i) {
    const double psi = 0.5 * std::numbers::pi * (gl.x[i] + 1.0);
    const double c2h = A - B * std::cos(psi);
    const double chord = std::sqrt(std::max(c2h, 0.0));
    double ratio = 1.0;
    if (chord > 1e-8) ratio = 2.0 * std::asin(std::min(1.0, 0.5 * chord)) / chord;
    corr += gl.w[i] * std::log(ratio);
  }
  return chord_part + 0.5 * corr;
}

}  // namespace detail

// Cov(G(f), G(g)) = int int f g Gamma dlambda dlambda.
//  lines:  f, g functions of the coordinate;
//  R^n:    f, g radial profiles of |x|, Lebesgue measure;
//  S^1:    profiles of the angle |phi| to the pinned origin, lambda = dphi / 2;
//  S^2:    profiles of the polar angle, lambda = (1/4) sin theta dtheta dphi (total mass pi).
inline double cov_functional(const Space& sp, double H, const TestFunction& f, const TestFunction& g,
                             const QuadratureSettings& s = {}) {
  KernelParams::check_H(H);
  require_certified(f);
  require_certified(g);
  s.validate();
  if (f.is_zero() || g.is_zero()) return 0.0;
  const double tol = s.abs_tol * 1e-2;
  const double twoH = 2.0 * H;
  switch (sp.kind) {
    case SpaceKind::HalfLine:
    case SpaceKind::FullLine:
      return line_kernel_functional(sp, f, g, [&](double d, double mx, double my) {
        return std::log(pow_pos(mx, twoH) + pow_pos(my, twoH)) - twoH * std::log(d);
      }, s);
    case SpaceKind::Euclidean: {
      const int n = sp.dim;
      const double w = unit_sphere_area(n);
      const Domain dF = radial_domain(f, tol, std::numeric_limits<double>::infinity());
      const Domain dG = radial_domain(g, tol, std::numeric_limits<double>::infinity());
      auto fo = [&](double r) { return w * std::pow(r, n - 1) * f(r); };
      auto gi = [&](double r) { return w * std::pow(r, n - 1) * g(r); };
      return diag_double_integral(fo, gi, [&](double a, double b, double sep) {
        return std::log(pow_pos(a, twoH) + pow_pos(b, twoH)) -
               twoH * detail::radial_log_average(n, a, b, sep);
      }, dF, dG, s);
    }
    case SpaceKind::Sphere: {
      const bool rot = sp.mode == SphereMode::RotationInvariant;
      const double pi = std::numbers::pi;
      if (sp.dim == 1) {
        const double a = std::min(pi, f.tail_hi(tol)), b = std::min(pi, g.tail_hi(tol));
        auto mk = [](const TestFunction& h, double cap) {
          Domain d{-cap, cap, {0.0}};
          for (double x : h.breakpoints())
            if (x > 0.0 && x < cap) {
              d.breaks.push_back(x);
              d.breaks.push_back(-x);
            }
          std::sort(d.breaks.begin(), d.breaks.end());
          return d;
        };
        auto fo = [&](double p) { return 0.5 * f(std::abs(p)); };
        auto gi = [&](double p) { return 0.5 * g(std::abs(p)); };
        return diag_double_integral(fo, gi, [&](double x, double y, double sep) {
          const double d = std::min(sep, 2.0 * pi - sep);
          const double mx = rot ? 0.5 * pi : std::abs(x), my = rot ? 0.5 * pi : std::abs(y);
          return std::log(pow_pos(mx, twoH) + pow_pos(my, twoH)) - twoH * std::log(d);
        }, mk(f, a), mk(g, b), s);
      }
      if (sp.dim == 2) {
        // Integrate in polar angle with the sin(theta) weight; the azimuth average is analytic
        // up to a smooth Gauss-Legendre correction.
        const Domain dF = radial_domain(f, tol, pi), dG = radial_domain(g, tol, pi);
        auto fo = [&](double t) { return 0.25 * 2.0 * pi * std::sin(t) * f(t); };
        auto gi = [&](double t) { return 0.25 * 2.0 * pi * std::sin(t) * g(t); };
        return diag_double_integral(fo, gi, [&](double x, double y, double) {
          const double mx = rot ? 0.5 * pi : x, my = rot ? 0.5 * pi : y;
          return std::log(pow_pos(mx, twoH) + pow_pos(my, twoH)) -
                 twoH * detail::sphere2_log_geodesic_average(x, y);
        }, dF, dG, s);
      }
      throw std::domain_error("cov_functional supports S^1 and S^2 only");
    }
  }
  return 0.0;
}

// Covariance of the truncated field against test functions on a line:
// int int f g [int_0^{1/eps} 4 Gamma_r / r dr].
inline double truncated_cov_functional(const Space& sp, double H, const TestFunction& f,
                                       const TestFunction& g, double eps,
                                       const QuadratureSettings& s = {}) {
  KernelParams::check_H(H);
  if (!(eps > 0.0)) throw std::domain_error("eps must be > 0");
  const double beta = 2.0 * H;
  return line_kernel_functional(sp, f, g, [&](double d, double mx, double my) {
    return gamma_band_from(beta, 0.0, 1.0 / eps, d, mx, my);
  }, s);
}

// int int f g [int_{r1}^{r2} 4 Gamma_r / r dr] on a line space.
inline double band_cov_functional(const Space& sp, double H, const TestFunction& f,
                                  const TestFunction& g, double r1, double r2,
                                  const QuadratureSettings& s = {}) {
  KernelParams::check_H(H);
  const double beta = 2.0 * H;
  return line_kernel_functional(sp, f, g, [&](double d, double mx, double my) {
    return gamma_band_from(beta, r1, r2, d, mx, my);
  }, s);
}

// Fubini route: int_0^inf (4/r) [int int f g Gamma_r] dr, by quadrature in u = log r with the
// inner double integral recomputed at every r.  Independent of the closed-form log kernel.
inline double cov_functional_via_gamma_r(const Space& sp, double H, const TestFunction& f,
                                         const TestFunction& g, double r_lo = 1e-12,
                                         double r_hi = 1e12, const QuadratureSettings& s = {}) {
  KernelParams::check_H(H);
  const double beta = 2.0 * H;
  QuadratureSettings inner = s;
  inner.abs_tol = 1e-12;
  inner.rel_tol = 1e-10;
  auto h = [&](double u) {
    const double r = std::exp(u);
    return 4.0 * line_kernel_functional(sp, f, g, [&](double d, double mx, double my) {
      return gamma_r_from(beta, r, d, mx, my);
    }, inner);
  };
  std::vector<double> br;
  for (double u = std::ceil(std::log(r_lo)); u < std::log(r_hi); u += 2.0) br.push_back(u);
  QuadratureSettings outer = s;
  outer.abs_tol = std::min(s.abs_tol, 1e-9);
  outer.rel_tol = std::min(s.rel_tol, 1e-9);
  return integrate_or_throw(h, std::log(r_lo), std::log(r_hi), outer, br);
}

}  // namespace logcorr
