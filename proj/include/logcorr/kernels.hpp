#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "logcorr/metric_space.hpp"
#include "logcorr/quadrature.hpp"

namespace logcorr {

struct KernelParams {
  double H = 0.5;
  double K = 1.0;

  double beta() const { return 2.0 * H; }

  static void check_H(double H) {
    if (!(H > 0.0 && H <= 0.5))
      throw std::domain_error("H = " + std::to_string(H) + " outside (0,1/2]");
  }
  static void check_K(double K) {
    if (!(K > 0.0 && K <= 1.0))
      throw std::domain_error("K = " + std::to_string(K) + " outside (0,1]");
  }
  void validate() const {
    check_H(H);
    check_K(K);
  }
};

// Value that may be +infinity (only on the diagonal).
struct KernelValue {
  double value = 0.0;
  bool infinite = false;

  static KernelValue inf() { return {std::numeric_limits<double>::infinity(), true}; }
  explicit operator double() const { return value; }
};

// x^p for x >= 0, p > 0 through exp/log so all real exponents follow one code path.
inline double pow_pos(double x, double p) {
  if (x <= 0.0) return 0.0;
  return std::exp(p * std::log(x));
}

// Kernels in terms of the scalar data (d, mu_x, mu_y) --------------------------------

inline double bifbm_cov_from(double H, double K, double d, double mx, double my) {
  const double a = pow_pos(mx, 2 * H) + pow_pos(my, 2 * H);
  return std::exp(-K * std::numbers::ln2) * (pow_pos(a, K) - pow_pos(d, 2 * H * K));
}

inline KernelValue gamma_kernel_from(double H, double d, double mx, double my) {
  if (d <= 0.0) return KernelValue::inf();
  return {std::log(pow_pos(mx, 2 * H) + pow_pos(my, 2 * H)) - 2 * H * std::log(d), false};
}

// (1/4)(e^{-(2d)^beta r} - e^{-((2mx)^beta + (2my)^beta) r})
inline double gamma_r_from(double beta, double r, double d, double mx, double my) {
  const double a = pow_pos(2 * d, beta) * r;
  const double b = (pow_pos(2 * mx, beta) + pow_pos(2 * my, beta)) * r;
  return -0.25 * std::exp(-a) * std::expm1(a - b);
}

// int_{r1}^{r2} 4 Gamma_r / r dr, bounded for r1 > 0 or r2 < inf.
inline double gamma_band_from(double beta, double r1, double r2, double d, double mx, double my) {
  const double a = pow_pos(2 * d, beta);
  const double b = pow_pos(2 * mx, beta) + pow_pos(2 * my, beta);
  if (b <= a) return 0.0;
  return frullani_band(a, b, r1, r2);
}

// Point-based API ------------------------------------------------------------------

inline double bifbm_cov(const Space& sp, const KernelParams& p, const SpacePoint& x,
                        const SpacePoint& y) {
  p.validate();
  return bifbm_cov_from(p.H, p.K, distance(sp, x, y), mu_A(sp, x), mu_A(sp, y));
}

inline KernelValue gamma_kernel(const Space& sp, double H, const SpacePoint& x,
                                const SpacePoint& y) {
  KernelParams::check_H(H);
  return gamma_kernel_from(H, distance(sp, x, y), mu_A(sp, x), mu_A(sp, y));
}

inline double gamma_r_kernel(const Space& sp, double beta, double r, const SpacePoint& x,
                             const SpacePoint& y) {
  if (!(beta > 0.0 && beta <= 1.0)) throw std::domain_error("beta outside (0,1]");
  if (!(r > 0.0)) throw std::domain_error("r must be > 0");
  return gamma_r_from(beta, r, distance(sp, x, y), mu_A(sp, x), mu_A(sp, y));
}

// Reconstructs Gamma(x,y) from int_0^inf 4 Gamma_r / r dr by adaptive quadrature in log r.
inline QuadResult gamma_from_gamma_r_quadrature(const Space& sp, double beta, const SpacePoint& x,
                                                const SpacePoint& y,
                                                const QuadratureSettings& qs = {}) {
  const double d = distance(sp, x, y), mx = mu_A(sp, x), my = mu_A(sp, y);
  const double a = pow_pos(2 * d, beta);
  const double b = pow_pos(2 * mx, beta) + pow_pos(2 * my, beta);
  if (!(a > 0.0)) return {std::numeric_limits<double>::infinity(), 0.0, 0, false};
  // Integrand in u = log r is 4 Gamma_r(e^u); it decays like e^u near -inf and e^{-a e^u} at +inf.
  const double lo = std::log(1e-18 / b), hi = std::log(60.0 / a);
  auto f = [&](double u) { return 4.0 * gamma_r_from(beta, std::exp(u), d, mx, my); };
  std::vector<double> br;
  for (double v = std::floor(lo); v < hi; v += 1.0) br.push_back(v);
  QuadratureSettings s = qs;
  s.abs_tol = std::min(qs.abs_tol, 1e-11);
  s.rel_tol = std::min(qs.rel_tol, 1e-11);
  // Mass below r0 = e^lo is at most b r0 = 1e-18; mass above e^hi is below E1(60).
  return integrate(f, lo, hi, s, br);
}

// K^{-1} bifbm_cov - Gamma, formed without cancellation in the difference of powers.
inline double limit_scaling_check(const Space& sp, double H, double K, const SpacePoint& x,
                                  const SpacePoint& y) {
  KernelParams::check_H(H);
  KernelParams::check_K(K);
  const double d = distance(sp, x, y);
  if (d <= 0.0) throw std::domain_error("limit_scaling_check: diagonal has an infinite limit");
  const double mx = mu_A(sp, x), my = mu_A(sp, y);
  const double la = std::log(pow_pos(mx, 2 * H) + pow_pos(my, 2 * H));
  const double lb = 2 * H * std::log(d);
  // 2^{-K}(a^K - b^K)/K = 2^{-K} b^K expm1(K log(a/b)) / K
  const double scaled = std::exp(-K * std::numbers::ln2 + K * lb) * std::expm1(K * (la - lb)) / K;
  return scaled - (la - lb);
}

// Covariance of the shift part W^H: (1/2)(s^{2H} + t^{2H} - (s+t)^{2H}).
inline double lei_nualart_shift_cov(double H, double s, double t) {
  KernelParams::check_H(H);
  if (s < 0.0 || t < 0.0) throw std::domain_error("shift covariance needs s,t >= 0");
  return 0.5 * (pow_pos(s, 2 * H) + pow_pos(t, 2 * H) - pow_pos(s + t, 2 * H));
}

// (2^{(2H-1)K}/4)((s^{2H} + t^{2H})^K - |t-s|^{2HK}).
inline double subordinated_bifbm_cov(double H, double K, double s, double t) {
  KernelParams::check_H(H);
  if (!(K > 0.0 && K < 1.0)) throw std::domain_error("subordinated bi-fBm needs K in (0,1)");
  if (s < 0.0 || t < 0.0) throw std::domain_error("subordinated bi-fBm needs s,t >= 0");
  if (s > t) std::swap(s, t);
  const double c = std::exp((2 * H - 1) * K * std::numbers::ln2) / 4.0;
  return c * (pow_pos(pow_pos(s, 2 * H) + pow_pos(t, 2 * H), K) - pow_pos(t - s, 2 * H * K));
}

// e^{-lambda} lambda^j / j!
inline double poisson_pmf(int j, double lambda) {
  if (lambda <= 0.0) return j == 0 ? 1.0 : 0.0;
  return std::exp(-lambda + j * std::log(lambda) - std::lgamma(j + 1.0));
}

// int_0^inf [pois(j;rs) e^{-r(t-s)} - pois(j;rs) pois(j;rt)] dr / r, for 0 < s <= t.
inline QuadResult occupancy_cov_quad(int j, double s, double t, const QuadratureSettings& qs = {}) {
  if (j < 1) throw std::domain_error("occupancy_cov: j must be >= 1");
  if (!(s > 0.0) || !(t > 0.0)) throw std::domain_error("occupancy_cov: s,t must be > 0");
  if (s > t) std::swap(s, t);
  // Integrate over u = log r: the integrand picks up a factor r and becomes O(r^j) at 0.
  auto g = [&](double u) {
    const double r = std::exp(u);
    const double ps = poisson_pmf(j, r * s);
    return ps * (std::exp(-r * (t - s)) - poisson_pmf(j, r * t));
  };
  const double lo = std::log(1e-14 / t);
  const double hi = std::log((j + 60.0 + 12.0 * std::sqrt(j)) / s);
  std::vector<double> br;
  for (double v = std::ceil(lo); v < hi; v += 1.0) br.push_back(v);
  QuadratureSettings q = qs;
  q.abs_tol = std::min(qs.abs_tol, 1e-12);
  q.rel_tol = std::min(qs.rel_tol, 1e-10);
  return integrate(g, lo, hi, q, br);
}

inline double occupancy_cov(int j, double s, double t, const QuadratureSettings& qs = {}) {
  auto r = occupancy_cov_quad(j, s, t, qs);
  if (!r.converged) throw QuadratureError("occupancy_cov did not converge", r.error);
  return r.value;
}

}  // namespace logcorr
