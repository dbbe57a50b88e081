#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "logcorr/cov_functional.hpp"
#include "logcorr/parallel.hpp"
#include "logcorr/parity.hpp"
#include "logcorr/quadrature.hpp"
#include "logcorr/rng.hpp"
#include "logcorr/stats.hpp"
#include "logcorr/test_function.hpp"

namespace logcorr {

// Cell integrals f_{n,j} = int_{(j-1)/n}^{j/n} f, j = 1..J, with prefix sums and a
// run-length view (maximal runs of equal weights).
struct CellWeights {
  struct Run {
    std::size_t first = 1, last = 0;  // 1-based, inclusive
    double value = 0.0;
  };
  int n = 1;
  std::vector<double> w;
  std::vector<double> prefix{0.0};  // prefix[j] = w_1 + ... + w_j
  std::vector<Run> runs;

  std::size_t size() const { return w.size(); }
  double total() const { return prefix.back(); }
  double l1() const {
    double s = 0.0;
    for (double v : w) s += std::abs(v);
    return s;
  }
};

inline CellWeights make_cell_weights(std::vector<double> w, int n) {
  CellWeights c;
  c.n = n;
  c.w = std::move(w);
  c.prefix.assign(c.w.size() + 1, 0.0);
  for (std::size_t j = 0; j < c.w.size(); ++j) {
    c.prefix[j + 1] = c.prefix[j] + c.w[j];
    if (c.runs.empty() || c.runs.back().value != c.w[j])
      c.runs.push_back({j + 1, j + 1, c.w[j]});
    else
      c.runs.back().last = j + 1;
  }
  return c;
}

// Same weights extended with zeros to length J.
inline CellWeights padded(const CellWeights& c, std::size_t J) {
  if (c.size() >= J) return c;
  auto w = c.w;
  w.resize(J, 0.0);
  return make_cell_weights(std::move(w), c.n);
}

inline CellWeights f_cell_weights(const TestFunction& f, int n) {
  if (n < 1) throw std::domain_error("f_cell_weights: n must be >= 1");
  require_certified(f);
  if (f.is_zero()) return make_cell_weights({}, n);
  const double T = f.tail_hi(1e-12);
  if (!(T > 0.0)) return make_cell_weights({}, n);
  const double cells = std::ceil(T * n - 1e-9);
  if (cells > 2e8) throw std::length_error("f_cell_weights: support too long for n");
  const auto J = static_cast<std::size_t>(cells);
  std::vector<double> w(J);
  const double dn = n;
  for (std::size_t j = 0; j < J; ++j)
    w[j] = f.integral(static_cast<double>(j) / dn, static_cast<double>(j + 1) / dn);
  while (!w.empty() && w.back() == 0.0) w.pop_back();
  return make_cell_weights(std::move(w), n);
}

namespace detail {

// log|1 - 2r| for r in (0, 1], accurate near both ends.
inline double log_abs_rho(double r) {
  if (r < 0.5) return std::log1p(-2.0 * r);
  if (r == 0.5) return -std::numeric_limits<double>::infinity();
  return std::log1p(-2.0 * (1.0 - r));
}

// rho^k with rho = 1 - 2r.
inline double rho_pow(double r, double lr, std::size_t k) {
  if (k == 0) return 1.0;
  if (r == 0.5) return 0.0;
  const double v = std::exp(static_cast<double>(k) * lr);
  return (r > 0.5 && (k & 1)) ? -v : v;
}

// sum_{j=a}^{a+L-1} rho^j.
inline double rho_block_sum(double r, double lr, std::size_t a, std::size_t L) {
  if (L == 0 || r == 0.5) return 0.0;
  if (r < 0.5) return std::exp(static_cast<double>(a) * lr) * -std::expm1(static_cast<double>(L) * lr) / (2.0 * r);
  return rho_pow(r, lr, a) * (1.0 - rho_pow(r, lr, L)) / (2.0 * r);
}

}  // namespace detail

// E psi_{n,r}(f) psi_{n,r}(g), psi = 2 sum_j (1{tau_j odd} - p_j(r)) f_{n,j}:
// sum_j (1 - rho^{2j}) [f_j g_j + f_j S^g_j + g_j S^f_j],  S_j = sum_{j'>j} w_{j'} rho^{j'-j}.
inline double exact_psi_cross_moment(const CellWeights& f, const CellWeights& g, double r) {
  if (!(r > 0.0 && r <= 1.0)) throw std::domain_error("exact_psi_second_moment: r must lie in (0,1]");
  const std::size_t J = std::max(f.size(), g.size());
  const double rho = 1.0 - 2.0 * r;
  const double lr = detail::log_abs_rho(r);
  double sf = 0.0, sg = 0.0, sum = 0.0;
  for (std::size_t j = J; j >= 1; --j) {
    const double fj = j <= f.size() ? f.w[j - 1] : 0.0;
    const double gj = j <= g.size() ? g.w[j - 1] : 0.0;
    const double om = r == 0.5 ? 1.0 : -std::expm1(2.0 * static_cast<double>(j) * lr);
    sum += om * (fj * gj + fj * sg + gj * sf);
    sf = rho * (fj + sf);
    sg = rho * (gj + sg);
  }
  return sum;
}

inline double exact_psi_second_moment(const CellWeights& f, double r) {
  return exact_psi_cross_moment(f, f, r);
}

inline double exact_psi_second_moment(const TestFunction& f, int n, double r) {
  return exact_psi_second_moment(f_cell_weights(f, n), r);
}

// int_{q_lo}^1 E[psi(f) psi(g)] / q dq: [q_lo, 1/2] in log q, [1/2, 1] in log(1 - q).
inline double psi_moment_integral(const CellWeights& f, const CellWeights& g, double q_lo) {
  QuadratureSettings s;
  s.abs_tol = 1e-13;
  s.rel_tol = 1e-11;
  s.max_subdivisions = 20000;
  double total = 0.0;
  if (q_lo < 0.5) {
    const double u0 = std::log(q_lo), u1 = std::log(0.5);
    std::vector<double> br;
    for (double u = std::ceil(u0); u < u1; u += 1.0) br.push_back(u);
    total += integrate_or_throw([&](double u) { return exact_psi_cross_moment(f, g, std::exp(u)); },
                                u0, u1, s, br);
  }
  // Near q = 1 the integrand is bounded, so 1e-16 in 1 - q loses nothing.
  const double v0 = std::log(1e-16), v1 = std::log(1.0 - std::max(q_lo, 0.5));
  if (v1 > v0) {
    std::vector<double> br;
    for (double v = std::ceil(v0); v < v1; v += 1.0) br.push_back(v);
    total += integrate_or_throw([&](double v) {
      const double e = std::exp(v), q = 1.0 - e;
      return exact_psi_cross_moment(f, g, q) * e / q;
    }, v0, v1, s, br);
  }
  return total;
}

// Var G_n(f) for alpha = 2: int_0^1 E psi_{n,r}(f)^2 dr / r.  The integrand is O(J r) at 0,
// so starting at r = 1e-15 / J drops less than 1e-14 ||f||_1^2.
inline double exact_variance_G_n(const CellWeights& f) {
  if (f.size() == 0) return 0.0;
  return psi_moment_integral(f, f, 1e-15 / static_cast<double>(f.size()));
}

inline double exact_variance_G_n(const TestFunction& f, int n) {
  return exact_variance_G_n(f_cell_weights(f, n));
}

// Per-layer statistic of the layered Bernoulli model for several weight vectors sharing one
// Bernoulli sequence.
class LayeredPsi {
 public:
  explicit LayeredPsi(const std::vector<CellWeights>& ws) {
    for (const auto& w : ws) J_ = std::max(J_, w.size());
    for (const auto& w : ws) w_.push_back(padded(w, J_));
  }

  std::size_t cells() const { return J_; }
  std::size_t count() const { return w_.size(); }
  const std::vector<CellWeights>& weights() const { return w_; }

  // Writes psi_k for one layer with success probability q into out[k].
  void draw(RngStream& s, double q, std::vector<double>& out) {
    out.assign(w_.size(), 0.0);
    if (J_ == 0) return;
    events_.clear();
    const double lq = std::log1p(-q);
    double pos = 0.0;
    const double Jd = static_cast<double>(J_);
    for (;;) {
      const double gap = lq == -std::numeric_limits<double>::infinity()
                             ? 0.0
                             : std::floor(std::log(s.uniform_open()) / lq);
      pos += 1.0 + gap;
      if (pos > Jd) break;
      events_.push_back(static_cast<std::size_t>(pos));
    }
    const double lr = detail::log_abs_rho(q);
    for (std::size_t k = 0; k < w_.size(); ++k) {
      const auto& c = w_[k];
      double par = 0.0;
      std::size_t i = 0;
      for (; i + 1 < events_.size(); i += 2) par += c.prefix[events_[i + 1] - 1] - c.prefix[events_[i] - 1];
      if (i < events_.size()) par += c.prefix[J_] - c.prefix[events_[i] - 1];
      out[k] = 2.0 * (par - 0.5 * (c.total() - geometric_sum(c, q, lr)));
    }
  }

 private:
  // sum_j rho^j w_j.
  static double geometric_sum(const CellWeights& c, double q, double lr) {
    if (c.runs.size() <= 64) {
      double g = 0.0;
      for (const auto& run : c.runs)
        if (run.value != 0.0) g += run.value * detail::rho_block_sum(q, lr, run.first, run.last - run.first + 1);
      return g;
    }
    const double rho = 1.0 - 2.0 * q;
    double g = 0.0;
    for (std::size_t j = c.size(); j >= 1; --j) g = rho * (c.w[j - 1] + g);
    return g;
  }

  std::size_t J_ = 0;
  std::vector<CellWeights> w_;
  std::vector<std::size_t> events_;
};

enum class Normalization { LimitMatched, Literal };

inline std::string to_string(Normalization n) {
  return n == Normalization::LimitMatched ? "limit_matched" : "literal";
}

struct AggregatedPlan {
  int n = 1024;
  std::uint64_t m = 65536;
  double alpha = 2.0;
  Space space = Space::half_line();
  std::vector<TestFunction> fs;
  std::vector<double> thetas{0.25, 0.5, 1.0, 2.0};
  std::uint64_t reps = 1000;
  std::uint64_t seed = 1;
  // Layers with n q >= r_star enter through their exact conditional second moment (alpha = 2).
  double r_star = 64.0;
  Normalization norm = Normalization::LimitMatched;
  int ring_nodes = 32;  // Gauss-Legendre nodes per polar-angle panel on S^2
  int threads = 1;

  bool uses_closure() const { return alpha == 2.0 && r_star < static_cast<double>(n); }
  double q_star() const { return uses_closure() ? r_star / n : 1.0; }

  void validate() const {
    if (n < 1) throw std::invalid_argument("plan: n must be >= 1");
    if (m < 1) throw std::invalid_argument("plan: m must be >= 1");
    if (!(alpha > 0.0 && alpha <= 2.0)) throw std::invalid_argument("plan: alpha outside (0,2]");
    if (reps < 2) throw std::invalid_argument("plan: need at least 2 replicates");
    if (fs.empty()) throw std::invalid_argument("plan: at least one test function required");
    if (!(r_star > 0.0)) throw std::invalid_argument("plan: r_star must be > 0");
    if (ring_nodes < 2) throw std::invalid_argument("plan: ring_nodes must be >= 2");
    for (const auto& f : fs) require_certified(f);
  }

  std::vector<std::string> warnings() const {
    std::vector<std::string> w;
    if (static_cast<double>(m) < 10.0 * n)
      w.push_back("m/n = " + std::to_string(static_cast<double>(m) / n) +
                  " is below 10; outside the CLT regime");
    return w;
  }

  nlohmann::json to_json() const {
    nlohmann::json j{{"n", n}, {"m", m}, {"alpha", alpha}, {"space", space.name()},
                     {"reps", reps}, {"seed", seed}, {"r_star", r_star},
                     {"normalization", to_string(norm)}, {"thetas", thetas}};
    std::vector<std::string> labels;
    for (const auto& f : fs) labels.push_back(f.label());
    j["f"] = labels;
    if (space.kind == SpaceKind::Sphere) j["ring_nodes"] = ring_nodes;
    return j;
  }
};

using AggregatedResult = RunResult;

namespace detail {

inline std::vector<std::string> labels_of(const std::vector<TestFunction>& fs) {
  std::vector<std::string> l;
  for (const auto& f : fs) l.push_back(f.label());
  return l;
}

inline nlohmann::json matrix_json(const Eigen::MatrixXd& m) {
  nlohmann::json j = nlohmann::json::array();
  for (int a = 0; a < m.rows(); ++a) {
    std::vector<double> row(m.cols());
    for (int b = 0; b < m.cols(); ++b) row[b] = m(a, b);
    j.push_back(row);
  }
  return j;
}

// Number of successes among m Bernoulli(p) trials by geometric skipping.
inline std::uint64_t binomial_by_skipping(RngStream& s, std::uint64_t m, double p) {
  if (p <= 0.0) return 0;
  if (p >= 1.0) return m;
  const double lp = std::log1p(-p);
  std::uint64_t count = 0;
  double pos = 0.0;
  const double md = static_cast<double>(m);
  for (;;) {
    pos += 1.0 + std::floor(std::log(s.uniform_open()) / lp);
    if (pos > md) return count;
    ++count;
  }
}

// Replicate driver shared by both models.  `layer(stream, q, psi)` fills the per-layer
// statistic; slow layers have q uniform on (0, q_star); the fast remainder is Gaussian with
// covariance (m - slow) * fast_cov (alpha = 2 only).
template <class Layer>
SampleMatrix run_layers(const AggregatedPlan& plan, std::size_t k, double mult_scale,
                        const Eigen::MatrixXd* fast_factor, std::uint64_t domain, Layer&& make_layer) {
  SampleMatrix out(plan.reps, k, labels_of(plan.fs));
  out.plan = plan.to_json();
  const double qs = plan.q_star();
  const double inv_alpha = 1.0 / plan.alpha;
  const double norm = std::exp(-inv_alpha * std::log(static_cast<double>(plan.m)));
  parallel_for(plan.reps, plan.threads, [&](std::size_t rep) {
    RngStream s(plan.seed, rep, domain);
    auto layer = make_layer();
    std::vector<double> acc(k, 0.0), psi;
    const std::uint64_t slow = fast_factor ? binomial_by_skipping(s, plan.m, qs) : plan.m;
    for (std::uint64_t i = 0; i < slow; ++i) {
      const double q = qs * s.uniform_open();
      layer(s, q, psi);
      const double x = sample_sas(s, plan.alpha);
      const double c = mult_scale * x * std::exp(-inv_alpha * std::log(q));
      for (std::size_t a = 0; a < k; ++a) acc[a] += c * psi[a];
    }
    if (fast_factor) {
      const double nf = static_cast<double>(plan.m - slow);
      Eigen::VectorXd z(fast_factor->cols());
      for (int a = 0; a < z.size(); ++a) z(a) = s.gaussian();
      const Eigen::VectorXd y = std::sqrt(nf) * (*fast_factor) * z;
      for (std::size_t a = 0; a < k; ++a) acc[a] += y(a);
    }
    for (std::size_t a = 0; a < k; ++a) out(rep, a) = norm * acc[a];
  });
  return out;
}

}  // namespace detail

// Layered Bernoulli model on the half-line: G_n(f) = m^{-1/alpha} sum_i X_i psi_i(f) / q_i^{1/alpha}
// with X_i standard normal for alpha = 2 and standard SaS otherwise.
inline AggregatedResult simulate_G_n(const AggregatedPlan& plan) {
  plan.validate();
  if (plan.space.kind != SpaceKind::HalfLine)
    throw std::invalid_argument("simulate_G_n runs on the half-line; use simulate_general_G_n");
  AggregatedResult res;
  res.warnings = plan.warnings();
  std::vector<CellWeights> ws;
  for (const auto& f : plan.fs) ws.push_back(f_cell_weights(f, plan.n));
  const std::size_t k = ws.size();
  const LayeredPsi proto(ws);

  Eigen::MatrixXd factor;
  const Eigen::MatrixXd* fp = nullptr;
  const double qs = plan.q_star();
  if (plan.uses_closure()) {
    Eigen::MatrixXd V(k, k);
    for (std::size_t a = 0; a < k; ++a)
      for (std::size_t b = a; b < k; ++b)
        V(a, b) = V(b, a) = psi_moment_integral(ws[a], ws[b], qs) / (1.0 - qs);
    factor = psd_factor(V);
    fp = &factor;
    double l1 = 0.0;
    for (const auto& w : ws) l1 = std::max(l1, w.l1());
    // Var of the fast layers' conditional variance: <= (4 ||f||_1^2 / q*) E[V] / m; the ch.f.
    // error of the Gaussian closure is at most theta^4 Var / 8.
    nlohmann::json bound = nlohmann::json::array();
    for (double th : plan.thetas) {
      const double var_bound = 4.0 * l1 * l1 / qs * V.diagonal().maxCoeff() / static_cast<double>(plan.m);
      bound.push_back(std::pow(th, 4) * var_bound / 8.0);
    }
    res.diagnostics["closure"] = {{"q_star", qs},
                                  {"expected_slow_layers", qs * static_cast<double>(plan.m)},
                                  {"fast_cov", detail::matrix_json(V)},
                                  {"chf_error_bound", bound}};
  }
  // X_i ~ N(0,1): sample_sas(2) is sqrt(2) N(0,1), so rescale by 1/sqrt(2) for alpha = 2.
  const double mult = plan.alpha == 2.0 ? std::numbers::sqrt2 / 2.0 : 1.0;
  res.samples = detail::run_layers(plan, k, mult, fp, 0x3A11, [&] {
    return [lp = proto](RngStream& s, double q, std::vector<double>& psi) mutable {
      lp.draw(s, q, psi);
    };
  });
  if (plan.alpha == 2.0) {
    std::vector<double> ev;
    for (const auto& w : ws) ev.push_back(exact_variance_G_n(w));
    res.diagnostics["exact_variance"] = ev;
  }
  return res;
}

struct FiniteMCorrection {
  double theta = 0.0, D = 0.0, se = 0.0;
};

// Finite-m correction D(theta) = log c_m(theta) + theta^2 Var_n / 2 for the alpha = 2 layered
// model, where c_m = (E exp(-theta^2 psi^2 / (2 m q)))^m is the exact ch.f. at finite m.
// m E[x - 1 + e^{-x}], x = theta^2 psi^2 / (2 m q), is estimated with q log-uniform on
// [1e-10, 1] (stratified); the O(1/m) remainder m (log(1 - Eg) + Eg) is added exactly.
inline std::vector<FiniteMCorrection> finite_m_chf_correction(const CellWeights& w, std::uint64_t m,
                                                              double var_n,
                                                              const std::vector<double>& thetas,
                                                              std::uint64_t samples,
                                                              std::uint64_t seed) {
  if (samples < 2) throw std::invalid_argument("finite_m_chf_correction: need >= 2 samples");
  LayeredPsi lp({w});
  const double u0 = std::log(1e-10), span = -u0;
  const double md = static_cast<double>(m);
  std::vector<std::vector<double>> vals(thetas.size(), std::vector<double>(samples));
  RngStream s(seed, 0, 0xF1);
  std::vector<double> psi;
  for (std::uint64_t i = 0; i < samples; ++i) {
    const double u = u0 + span * (static_cast<double>(i) + s.uniform()) / static_cast<double>(samples);
    const double q = std::exp(u);
    lp.draw(s, q, psi);
    for (std::size_t t = 0; t < thetas.size(); ++t) {
      const double x = thetas[t] * thetas[t] * psi[0] * psi[0] / (2.0 * md * q);
      const double d = x < 1e-4 ? x * x * (0.5 - x / 6.0) : x - 1.0 + std::exp(-x);
      vals[t][i] = span * q * d;
    }
  }
  std::vector<FiniteMCorrection> out;
  for (std::size_t t = 0; t < thetas.size(); ++t) {
    const auto e = mean_se(vals[t]);
    const double Ex = thetas[t] * thetas[t] * var_n / (2.0 * md);
    const double Eg = Ex - e.mean;
    const double D = md * e.mean + md * (std::log1p(-Eg) + Eg);
    out.push_back({thetas[t], D, md * e.se});
  }
  return out;
}

// Quadrature rings on S^2: Gauss-Legendre nodes in cos(theta) on panels split at the profile
// breakpoints; weight = (1/4) dt, the lambda-mass per unit azimuth.
struct RingRule {
  std::vector<double> theta, cos_t, sin_t, weight;
};

inline RingRule ring_rule(const std::vector<TestFunction>& fs, int nodes) {
  const double pi = std::numbers::pi;
  double cap = 0.0;
  std::vector<double> cuts{0.0};
  for (const auto& f : fs) {
    cap = std::max(cap, std::min(pi, f.tail_hi(1e-12)));
    for (double b : f.breakpoints()) cuts.push_back(b);
  }
  cuts.push_back(cap);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::remove_if(cuts.begin(), cuts.end(), [&](double c) { return c < 0.0 || c > cap; }),
             cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  const GaussRule gl = gauss_legendre(nodes);
  RingRule rr;
  for (std::size_t p = 0; p + 1 < cuts.size(); ++p) {
    const double t_hi = std::cos(cuts[p]), t_lo = std::cos(cuts[p + 1]);
    const double half = 0.5 * (t_hi - t_lo), mid = 0.5 * (t_hi + t_lo);
    for (std::size_t i = 0; i < gl.x.size(); ++i) {
      const double t = mid + half * gl.x[i];
      rr.theta.push_back(std::acos(t));
      rr.cos_t.push_back(t);
      rr.sin_t.push_back(std::sqrt(std::max(0.0, 1.0 - t * t)));
      rr.weight.push_back(0.25 * half * gl.w[i]);
    }
  }
  return rr;
}

namespace detail {

// 4 pi int_0^pi k(d(psi)) dpsi for rings a, b: the double azimuth integral of a kernel that
// depends on the geodesic distance only.
template <class Kern>
double ring_pair_integral(const RingRule& rr, std::size_t a, std::size_t b, Kern&& k) {
  const double ss = rr.sin_t[a] * rr.sin_t[b], cc = rr.cos_t[a] * rr.cos_t[b];
  auto h = [&](double psi) {
    const double c = std::clamp(ss * std::cos(psi) + cc, -1.0, 1.0);
    // Same ring: sin(d/2) = sin(theta) sin(psi/2) avoids the acos cancellation near psi = 0.
    const double d = a == b ? 2.0 * std::asin(rr.sin_t[a] * std::sin(0.5 * psi)) : std::acos(c);
    return k(d);
  };
  QuadratureSettings s;
  s.abs_tol = 1e-12;
  s.rel_tol = 1e-10;
  s.max_subdivisions = 8000;
  std::vector<double> br{1e-10, 1e-8, 1e-6, 1e-4, 1e-3, 1e-2, 1e-1, 1.0};
  return 4.0 * std::numbers::pi * integrate(h, 0.0, std::numbers::pi, s, br).value;
}

}  // namespace detail

// Layer statistic of the point-process model on the half-line: PPP of rate n q, A_x = [0, x].
class HalfLinePointLayer {
 public:
  HalfLinePointLayer(const std::vector<TestFunction>& fs, int n) : fs_(fs), n_(n) {
    T_ = 0.0;
    for (const auto& f : fs_) T_ = std::max(T_, f.tail_hi(1e-12));
    for (const auto& f : fs_) mass_.push_back(f.integral(0.0, T_));
  }
  void operator()(RngStream& s, double q, std::vector<double>& out) {
    out.assign(fs_.size(), 0.0);
    poisson_arrivals(s, n_ * q, T_, arr_);
    for (std::size_t k = 0; k < fs_.size(); ++k) {
      const auto& f = fs_[k];
      const double par = odd_run_integral(arr_, T_, [&](double x) { return f.antiderivative(x); });
      out[k] = par - 0.5 * (mass_[k] - f.laplace(2.0 * n_ * q));
    }
  }

 private:
  std::vector<TestFunction> fs_;
  int n_;
  double T_;
  std::vector<double> mass_, arr_;
};

// Layer statistic on S^2 with hemispheres H_x (rotation-invariant) or H_x delta H_o (pinned);
// the lambda-integral runs over rings, each with its exact odd-arc measure.
class SphereRingLayer {
 public:
  SphereRingLayer(const std::vector<TestFunction>& fs, const RingRule& rr, int n, SphereMode mode)
      : rr_(rr), n_(n), mode_(mode), F_(fs.size(), std::vector<double>(rr.theta.size())) {
    for (std::size_t k = 0; k < fs.size(); ++k)
      for (std::size_t a = 0; a < rr.theta.size(); ++a) F_[k][a] = rr.weight[a] * fs[k](rr.theta[a]);
    for (std::size_t a = 0; a < rr.theta.size(); ++a)
      mu_.push_back(mode == SphereMode::RotationInvariant ? 0.5 * std::numbers::pi : rr.theta[a]);
  }
  void operator()(RngStream& s, double q, std::vector<double>& out) {
    const double pi = std::numbers::pi;
    out.assign(F_.size(), 0.0);
    const auto N = sample_poisson(s, n_ * q * pi);
    z_.resize(N);
    sp_.resize(N);
    ph_.resize(N);
    int north = 0;
    for (std::uint64_t i = 0; i < N; ++i) {
      z_[i] = 2.0 * s.uniform() - 1.0;
      ph_[i] = 2.0 * pi * s.uniform();
      sp_[i] = std::sqrt(std::max(0.0, 1.0 - z_[i] * z_[i]));
      north ^= z_[i] > 0.0;
    }
    for (std::size_t a = 0; a < rr_.theta.size(); ++a) {
      cp_.reset(mode_ == SphereMode::Pinned ? north : 0);
      for (std::uint64_t i = 0; i < N; ++i) {
        const double A = rr_.sin_t[a] * sp_[i], B = rr_.cos_t[a] * z_[i];
        if (A <= 1e-300) {
          if (B > 0.0) cp_.flip_all();
          continue;
        }
        const double c = -B / A;
        if (c < -1.0)
          cp_.flip_all();
        else if (c < 1.0)
          cp_.add_arc(ph_[i], std::acos(c));
      }
      const double odd = cp_.odd_measure();
      const double centre = 2.0 * pi * poisson_odd_probability(n_ * q * mu_[a]);
      for (std::size_t k = 0; k < F_.size(); ++k) out[k] += F_[k][a] * (odd - centre);
    }
  }

  const std::vector<std::vector<double>>& ring_weights() const { return F_; }
  const std::vector<double>& mu() const { return mu_; }

 private:
  RingRule rr_;
  int n_;
  SphereMode mode_;
  std::vector<std::vector<double>> F_;
  std::vector<double> mu_, z_, sp_, ph_;
  CircleParity cp_;
};

// Point-process model on a general space: G_n(f) = m^{-1/alpha} sum_i c X_i psi_i(f) / q_i^{1/alpha},
// X_i standard SaS, psi_i(f) = int (1{N_i(A_x) odd} - p(x)) f(x) lambda(dx), N_i a PPP of
// intensity n q_i.  c = 2^{1/alpha} under LimitMatched (variance -> cov_functional), 1 under Literal.
inline AggregatedResult simulate_general_G_n(const AggregatedPlan& plan) {
  plan.validate();
  const Space& sp = plan.space;
  const bool sphere = sp.kind == SpaceKind::Sphere;
  if (!(sp.kind == SpaceKind::HalfLine || (sphere && sp.dim == 2)))
    throw std::invalid_argument("simulate_general_G_n supports half-line and sphere2");
  AggregatedResult res;
  res.warnings = plan.warnings();
  const std::size_t k = plan.fs.size();
  const double scale = plan.norm == Normalization::LimitMatched ? std::exp(std::numbers::ln2 / plan.alpha) : 1.0;
  const double qs = plan.q_star();
  // E[(scale X psi)^2 / q | q >= q*] = scale^2 * 2 / (1 - q*) * (1/4) int int f g band(n q*, n).
  const double moment_c = scale * scale * 2.0 / (1.0 - qs) * 0.25;

  Eigen::MatrixXd factor;
  const Eigen::MatrixXd* fp = nullptr;
  RingRule rr;
  if (sphere) rr = ring_rule(plan.fs, plan.ring_nodes);
  std::vector<std::vector<double>> F;
  std::vector<double> mu;
  if (sphere) {
    SphereRingLayer tmp(plan.fs, rr, plan.n, sp.mode);
    F = tmp.ring_weights();
    mu = tmp.mu();
  }
  // int int f g kern over the ring rule.
  auto ring_quadratic = [&](auto&& kern) {
    const std::size_t R = rr.theta.size();
    Eigen::MatrixXd K(R, R);
    for (std::size_t a = 0; a < R; ++a)
      for (std::size_t b = a; b < R; ++b)
        K(a, b) = K(b, a) = detail::ring_pair_integral(rr, a, b, [&](double d) { return kern(d, mu[a], mu[b]); });
    Eigen::MatrixXd out(k, k);
    for (std::size_t x = 0; x < k; ++x)
      for (std::size_t y = 0; y < k; ++y) {
        double v = 0.0;
        for (std::size_t a = 0; a < R; ++a)
          for (std::size_t b = 0; b < R; ++b) v += F[x][a] * F[y][b] * K(a, b);
        out(x, y) = v;
      }
    return out;
  };

  if (plan.uses_closure()) {
    const double r1 = plan.n * qs, r2 = plan.n;
    Eigen::MatrixXd B(k, k);
    if (sphere) {
      B = ring_quadratic([&](double d, double ma, double mb) { return gamma_band_from(1.0, r1, r2, d, ma, mb); });
    } else {
      for (std::size_t a = 0; a < k; ++a)
        for (std::size_t b = a; b < k; ++b)
          B(a, b) = B(b, a) = band_cov_functional(sp, 0.5, plan.fs[a], plan.fs[b], r1, r2);
    }
    const Eigen::MatrixXd V = moment_c * B;
    factor = psd_factor(V);
    fp = &factor;
    res.diagnostics["closure"] = {{"q_star", qs},
                                  {"expected_slow_layers", qs * static_cast<double>(plan.m)},
                                  {"fast_cov", detail::matrix_json(V)}};
  }
  if (plan.alpha == 2.0) {
    // Variance at this n (frequencies r <= n) and, on S^2, the ring rule's continuum variance.
    Eigen::MatrixXd Vn(k, k);
    const double c2 = scale * scale * 2.0 * 0.25;
    if (sphere) {
      Vn = c2 * ring_quadratic([&](double d, double ma, double mb) { return gamma_band_from(1.0, 0.0, plan.n, d, ma, mb); });
      const Eigen::MatrixXd Vc = ring_quadratic([&](double d, double ma, double mb) {
        return std::log(ma + mb) - std::log(d);
      });
      res.diagnostics["ring_rule_cov"] = detail::matrix_json(Vc);
      res.diagnostics["rings"] = rr.theta.size();
    } else {
      for (std::size_t a = 0; a < k; ++a)
        for (std::size_t b = a; b < k; ++b)
          Vn(a, b) = Vn(b, a) = c2 * band_cov_functional(sp, 0.5, plan.fs[a], plan.fs[b], 0.0, plan.n);
    }
    res.diagnostics["finite_n_cov"] = detail::matrix_json(Vn);
  }
  if (sphere) {
    res.samples = detail::run_layers(plan, k, scale, fp, 0x5B22, [&] {
      return SphereRingLayer(plan.fs, rr, plan.n, sp.mode);
    });
  } else {
    res.samples = detail::run_layers(plan, k, scale, fp, 0x5B21, [&] {
      return HalfLinePointLayer(plan.fs, plan.n);
    });
  }
  return res;
}

}  // namespace logcorr
