#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "logcorr/cov_functional.hpp"
#include "logcorr/kernels.hpp"
#include "logcorr/parallel.hpp"
#include "logcorr/parity.hpp"
#include "logcorr/quadrature.hpp"
#include "logcorr/rng.hpp"
#include "logcorr/stats.hpp"
#include "logcorr/test_function.hpp"

namespace logcorr {

// Geometric bins over [r_min, r_max] with `paths` independent Poisson paths per bin.
struct DiscretizationGrid {
  double r_min = 1e-4, r_max = 1e4;
  int bins = 400;
  int paths = 8;
  double t_max = 0.0;     // 0: take the horizon from the test functions' tail certificates
  double r_split = 32.0;  // alpha = 2: bins above this use their exact conditional covariance

  void validate() const {
    if (!(r_min > 0.0)) throw std::invalid_argument("grid: r_min must be > 0");
    if (!(r_max >= r_min * (1.0 + 1e-9))) throw std::invalid_argument("grid: r_max must exceed r_min");
    if (bins < 1) throw std::invalid_argument("grid: bins must be >= 1");
    if (paths < 1) throw std::invalid_argument("grid: paths must be >= 1");
    if (t_max < 0.0) throw std::invalid_argument("grid: t_max must be >= 0");
  }
  double du() const { return std::log(r_max / r_min) / bins; }
  double edge(int b) const { return r_min * std::exp(b * du()); }
  double center(int b) const { return r_min * std::exp((b + 0.5) * du()); }
  // First bin whose lower edge is at or above r_split (bins if none).
  int split_bin() const {
    if (r_split >= r_max) return bins;
    const double x = std::ceil(std::log(std::max(r_split, r_min) / r_min) / du() - 1e-9);
    return std::clamp(static_cast<int>(x), 0, bins);
  }
  nlohmann::json to_json() const {
    return {{"r_min", r_min}, {"r_max", r_max}, {"bins", bins}, {"paths", paths},
            {"t_max", t_max}, {"r_split", r_split}};
  }
};

// ---------------------------------------------------------------------------------------------
// Truncated field

enum class FieldMethod { Exact, Representation };

inline Eigen::MatrixXd truncated_cov_matrix(const std::vector<double>& times, double eps) {
  const auto m = static_cast<int>(times.size());
  Eigen::MatrixXd C(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = i; j < m; ++j) C(i, j) = C(j, i) = truncated_cov(times[i], times[j], eps);
  return C;
}

namespace detail {

inline std::vector<std::string> time_labels(const std::vector<double>& times) {
  std::vector<std::string> l;
  for (double t : times) {
    char buf[64];
    auto r = std::to_chars(buf, buf + sizeof buf, t);
    l.push_back("t=" + std::string(buf, r.ptr));
  }
  return l;
}

inline std::vector<std::size_t> sort_order(const std::vector<double>& v) {
  std::vector<std::size_t> o(v.size());
  std::iota(o.begin(), o.end(), 0);
  std::stable_sort(o.begin(), o.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  return o;
}

}  // namespace detail

// Gaussian vectors (G^(eps)(t_1), ..., G^(eps)(t_m)).  Exact: a symmetric factor of C_eps.
// Representation: cells over r in [grid.r_min, 1/eps] carrying 1{N(r t) odd} - (1 - e^{-2rt})/2.
inline RunResult sample_truncated_field(std::uint64_t seed, const std::vector<double>& times, double eps,
                                        std::uint64_t reps, FieldMethod method = FieldMethod::Exact,
                                        DiscretizationGrid grid = {}, int threads = 1) {
  if (!(eps > 0.0)) throw std::domain_error("sample_truncated_field: eps must be > 0");
  for (double t : times)
    if (!(t >= 0.0)) throw std::domain_error("sample_truncated_field: times must be >= 0");
  if (reps < 1) throw std::invalid_argument("sample_truncated_field: reps must be >= 1");
  RunResult res;
  const std::size_t m = times.size();
  res.samples = SampleMatrix(reps, m, detail::time_labels(times));
  res.samples.plan = {{"op", "gep"}, {"eps", eps}, {"reps", reps}, {"seed", seed},
                      {"method", method == FieldMethod::Exact ? "exact" : "representation"}};
  if (method == FieldMethod::Exact) {
    const Eigen::MatrixXd L = psd_factor(truncated_cov_matrix(times, eps), 1e-8);
    parallel_for(reps, threads, [&](std::size_t rep) {
      RngStream s(seed, rep, 0x6E01);
      Eigen::VectorXd z(m);
      for (std::size_t i = 0; i < m; ++i) z(i) = s.gaussian();
      const Eigen::VectorXd y = L * z;
      for (std::size_t i = 0; i < m; ++i) res.samples(rep, i) = y(i);
    });
    return res;
  }
  grid.r_max = 1.0 / eps;
  grid.validate();
  res.samples.plan["grid"] = grid.to_json();
  const auto order = detail::sort_order(times);
  std::vector<double> st;
  for (auto i : order) st.push_back(times[i]);
  const double du = grid.du();
  const double mult = std::sqrt(4.0 * du / grid.paths);
  parallel_for(reps, threads, [&](std::size_t rep) {
    RngStream s(seed, rep, 0x6E02);
    std::vector<double> acc(m, 0.0);
    std::vector<int> par;
    for (int b = 0; b < grid.bins; ++b) {
      const double r = grid.center(b);
      for (int j = 0; j < grid.paths; ++j) {
        poisson_parities(s, r, st, par);
        const double g = mult * s.gaussian();
        for (std::size_t k = 0; k < m; ++k)
          acc[k] += g * (par[k] - poisson_odd_probability(r * st[k]));
      }
    }
    for (std::size_t k = 0; k < m; ++k) res.samples(rep, order[k]) = acc[k];
  });
  return res;
}

// ---------------------------------------------------------------------------------------------
// Test-function functionals on the line

namespace detail {

// Everything one cell needs to evaluate h_f(r, omega') for a list of functions on a line.
class LineCellModel {
 public:
  LineCellModel(const Space& sp, double beta, const std::vector<TestFunction>& fs, double t_max)
      : sp_(sp), beta_(beta), fs_(fs) {
    if (!sp.is_line()) throw std::domain_error("cell sampler supports half-line and full-line");
    for (const auto& f : fs_) require_certified(f);
    for (const auto& f : fs_) {
      T_pos_ = std::max(T_pos_, std::max(0.0, f.tail_hi(1e-10)));
      if (sp.kind == SpaceKind::FullLine) T_neg_ = std::max(T_neg_, std::max(0.0, -f.tail_lo(1e-10)));
    }
    if (t_max > 0.0) {
      T_pos_ = std::min(T_pos_, t_max);
      T_neg_ = std::min(T_neg_, t_max);
    }
    for (const auto& f : fs_) {
      mass_pos_.push_back(f.integral(0.0, T_pos_));
      mass_neg_.push_back(f.integral(-T_neg_, 0.0));
    }
  }

  std::size_t size() const { return fs_.size(); }
  double horizon() const { return std::max(T_pos_, T_neg_); }

  // int p(r, t) f(t) dt with p = (1 - e^{-r (2|t|)^beta}) / 2, for each f.
  std::vector<double> centering(double r) const {
    std::vector<double> c(fs_.size(), 0.0);
    for (std::size_t k = 0; k < fs_.size(); ++k) {
      const auto& f = fs_[k];
      auto side = [&](double sign, double T) {
        if (T <= 0.0) return 0.0;
        auto h = [&](double t) { return f(sign * t) * 0.5 * -std::expm1(-r * pow_pos(2.0 * t, beta_)); };
        std::vector<double> br;
        for (double b : f.breakpoints())
          if (sign * b > 0.0 && sign * b < T) br.push_back(sign * b);
        for (double x : {0.01, 0.1, 1.0, 10.0}) {
          const double tb = 0.5 * std::pow(x / r, 1.0 / beta_);
          if (tb < T) br.push_back(tb);
        }
        std::sort(br.begin(), br.end());
        QuadratureSettings q;
        q.abs_tol = 1e-12;
        q.rel_tol = 1e-10;
        return integrate(h, 0.0, T, q, br).value;
      };
      // beta = 1 on t > 0 is a Laplace transform, closed form for indicator and exp terms.
      c[k] = (beta_ == 1.0 ? 0.5 * (mass_pos_[k] - f.laplace(2.0 * r)) : side(1.0, T_pos_)) +
             side(-1.0, T_neg_);
    }
    return c;
  }

  // int 1{N(S |t|) odd} f(t) dt for each f, with independent unit-rate paths on each side of
  // 0 run at the common rate S.  Dense paths (S T > dense_limit) use the mean (1/2) int f.
  void parity_integrals(RngStream& s, double S, std::vector<double>& out, std::size_t& dense) {
    out.assign(fs_.size(), 0.0);
    auto side = [&](double T, bool neg) {
      if (T <= 0.0) return;
      if (S * T > kDenseLimit) {
        ++dense;
        for (std::size_t k = 0; k < fs_.size(); ++k) out[k] += 0.5 * (neg ? mass_neg_[k] : mass_pos_[k]);
        return;
      }
      poisson_arrivals(s, S, T, arr_);
      for (std::size_t k = 0; k < fs_.size(); ++k) {
        const auto& f = fs_[k];
        if (neg)
          out[k] += odd_run_integral(arr_, T, [&](double x) { return -f.antiderivative(-x); });
        else
          out[k] += odd_run_integral(arr_, T, [&](double x) { return f.antiderivative(x); });
      }
    };
    side(T_pos_, false);
    side(T_neg_, true);
  }

  static constexpr double kDenseLimit = 1e6;

 private:
  Space sp_;
  double beta_;
  std::vector<TestFunction> fs_;
  double T_pos_ = 0.0, T_neg_ = 0.0;
  std::vector<double> mass_pos_, mass_neg_, arr_;
};

inline std::vector<std::string> function_labels(const std::vector<TestFunction>& fs) {
  std::vector<std::string> l;
  for (const auto& f : fs) l.push_back(f.label());
  return l;
}

// Shared cell scheme for G(f) (alpha = 2) and G_alpha(f): sum over bins b and paths j of
// h_f(r_b, omega'_{b,j}) (2 du / J)^{1/alpha} X_{b,j}, X standard SaS.  For alpha = 2 the bins
// above grid.r_split are replaced by a Gaussian with their exact covariance.
inline RunResult cell_functional(std::uint64_t seed, std::uint64_t domain, const Space& sp,
                                 double alpha, double beta, const std::vector<TestFunction>& fs,
                                 const DiscretizationGrid& grid, std::uint64_t reps, int threads) {
  grid.validate();
  if (!(alpha > 0.0 && alpha <= 2.0)) throw std::domain_error("alpha outside (0,2]");
  if (!(beta > 0.0 && beta <= 1.0)) throw std::domain_error("beta outside (0,1]");
  if (fs.empty()) throw std::invalid_argument("at least one test function required");
  if (reps < 1) throw std::invalid_argument("reps must be >= 1");
  RunResult res;
  const std::size_t k = fs.size();
  res.samples = SampleMatrix(reps, k, function_labels(fs));
  res.samples.plan = {{"space", sp.name()}, {"alpha", alpha}, {"beta", beta}, {"grid", grid.to_json()},
                      {"reps", reps}, {"seed", seed}};
  LineCellModel model(sp, beta, fs, grid.t_max);
  const bool closure = alpha == 2.0;
  const int nb = closure ? grid.split_bin() : grid.bins;
  std::vector<std::vector<double>> centers(nb);
  for (int b = 0; b < nb; ++b) centers[b] = model.centering(grid.center(b));

  Eigen::MatrixXd factor;
  if (closure && nb < grid.bins) {
    const double r1 = grid.edge(nb), r2 = grid.r_max;
    const double H = 0.5 * beta;
    Eigen::MatrixXd V(k, k);
    for (std::size_t a = 0; a < k; ++a)
      for (std::size_t b = a; b < k; ++b) V(a, b) = V(b, a) = band_cov_functional(sp, H, fs[a], fs[b], r1, r2);
    factor = psd_factor(V);
    res.diagnostics["closure"] = {{"r_from", r1}, {"r_to", r2}, {"cov", V(0, 0)}};
  }
  res.samples.plan["exact_bins"] = nb;
  const double du = grid.du();
  const double mult = std::exp(std::log(2.0 * du / grid.paths) / alpha);
  std::vector<std::size_t> dense(reps, 0);
  parallel_for(reps, threads, [&](std::size_t rep) {
    RngStream s(seed, rep, domain);
    LineCellModel m = model;
    std::vector<double> acc(k, 0.0), par;
    for (int b = 0; b < nb; ++b) {
      const double r = grid.center(b);
      for (int j = 0; j < grid.paths; ++j) {
        const double S = sample_subordinator(s, beta, r);
        m.parity_integrals(s, S, par, dense[rep]);
        const double x = mult * sample_sas(s, alpha);
        for (std::size_t a = 0; a < k; ++a) acc[a] += x * (par[a] - centers[b][a]);
      }
    }
    if (factor.size() > 0) {
      Eigen::VectorXd z(k);
      for (std::size_t a = 0; a < k; ++a) z(a) = s.gaussian();
      const Eigen::VectorXd y = factor * z;
      for (std::size_t a = 0; a < k; ++a) acc[a] += y(a);
    }
    for (std::size_t a = 0; a < k; ++a) res.samples(rep, a) = acc[a];
  });
  std::size_t nd = 0;
  for (auto d : dense) nd += d;
  res.diagnostics["dense_cells"] = nd;
  if (nd > 0) res.warnings.push_back(std::to_string(nd) + " cells exceeded the path-length limit and used the mean parity");
  return res;
}

}  // namespace detail

// G(f) = int h_f(r, omega') M_2(dr, domega'), control measure 2 r^{-1} dr dP' for SaS(2) noise
// (equivalently variance 4 r^{-1} dr per unit Gaussian mass).
inline RunResult mc_gaussian_functional(std::uint64_t seed, const Space& sp, double H,
                                        const std::vector<TestFunction>& fs,
                                        const DiscretizationGrid& grid, std::uint64_t reps,
                                        int threads = 1) {
  KernelParams::check_H(H);
  auto r = detail::cell_functional(seed, 0x7A01, sp, 2.0, 2.0 * H, fs, grid, reps, threads);
  r.samples.plan["op"] = "gfun";
  r.samples.plan["H"] = H;
  return r;
}

inline RunResult mc_stable_functional(std::uint64_t seed, const Space& sp, double alpha, double beta,
                                      const std::vector<TestFunction>& fs,
                                      const DiscretizationGrid& grid, std::uint64_t reps,
                                      int threads = 1) {
  auto r = detail::cell_functional(seed, 0x7A02, sp, alpha, beta, fs, grid, reps, threads);
  r.samples.plan["op"] = "stable";
  return r;
}

struct ExponentEstimate {
  double value = 0.0, se = 0.0;
};

// Nested Monte Carlo for I = int_{r_min}^{r_max} E'|h_f(r)|^alpha dr / r: `nodes` midpoints in
// log r, `inner` independent paths per node.  The log ch.f. of G_alpha(f) is -2 |theta|^alpha I.
inline ExponentEstimate stable_exponent_nested(std::uint64_t seed, const Space& sp, double alpha,
                                               double beta, const TestFunction& f,
                                               const DiscretizationGrid& grid, int nodes,
                                               std::uint64_t inner, int threads = 1) {
  grid.validate();
  if (nodes < 1 || inner < 2) throw std::invalid_argument("nested exponent needs nodes >= 1, inner >= 2");
  detail::LineCellModel model(sp, beta, {f}, grid.t_max);
  const double span = std::log(grid.r_max / grid.r_min);
  const double du = span / nodes;
  std::vector<double> mean(nodes), var(nodes);
  parallel_for(static_cast<std::size_t>(nodes), threads, [&](std::size_t i) {
    const double r = grid.r_min * std::exp((static_cast<double>(i) + 0.5) * du);
    const double c = model.centering(r)[0];
    detail::LineCellModel m = model;
    RngStream s(seed, i, 0x7A03);
    std::vector<double> v(inner), par;
    std::size_t dense = 0;
    for (std::uint64_t j = 0; j < inner; ++j) {
      m.parity_integrals(s, sample_subordinator(s, beta, r), par, dense);
      v[j] = std::pow(std::abs(par[0] - c), alpha);
    }
    const auto e = mean_se(v);
    mean[i] = e.mean;
    var[i] = e.se * e.se;
  });
  ExponentEstimate out;
  double v2 = 0.0;
  for (int i = 0; i < nodes; ++i) {
    out.value += du * mean[i];
    v2 += du * du * var[i];
  }
  out.se = std::sqrt(v2);
  return out;
}

// ---------------------------------------------------------------------------------------------
// Subordinated bi-fBm

// C_K with C_K int_0^inf r^{-K-1} Gamma_r dr = subordinated_bifbm_cov: K 2^{-K} / Gamma(1-K).
inline double subordinated_control_constant(double K) {
  return K * std::exp(-K * std::numbers::ln2) / std::tgamma(1.0 - K);
}

// Covariance left out by restricting r to [r_min, r_max]:
// (C_K / 4) (int_0^{r_min} + int_{r_max}^inf) r^{-K-1} (e^{-a r} - e^{-b r}) dr.
inline double subordinated_truncation_budget(double H, double K, double s, double t, double r_min,
                                             double r_max) {
  const double C = subordinated_control_constant(K);
  const double a = pow_pos(2.0 * std::abs(t - s), 2.0 * H);
  const double b = pow_pos(2.0 * s, 2.0 * H) + pow_pos(2.0 * t, 2.0 * H);
  auto g = [&](double u) {
    const double r = std::exp(u);
    return std::exp(-K * u) * -std::exp(-a * r) * std::expm1((a - b) * r);
  };
  QuadratureSettings q;
  q.abs_tol = 1e-14;
  q.rel_tol = 1e-10;
  const double lo0 = std::log(r_min) - 80.0 / std::max(1.0 - K, 1e-3);
  std::vector<double> br1, br2;
  for (double u = std::ceil(lo0); u < std::log(r_min); u += 2.0) br1.push_back(u);
  const double hi1 = std::log(r_max) + (a > 0.0 ? std::max(0.0, std::log(60.0 / (a * r_max))) + 2.0 : 80.0 / K);
  for (double u = std::ceil(std::log(r_max)); u < hi1; u += 2.0) br2.push_back(u);
  const double lower = integrate(g, lo0, std::log(r_min), q, br1).value;
  const double upper = hi1 > std::log(r_max) ? integrate(g, std::log(r_max), hi1, q, br2).value : 0.0;
  return 0.25 * C * (lower + upper);
}

// Cell scheme over C_K r^{-K-1} dr dP' with Gaussian noise: each cell draws r from the
// normalized r^{-K-1} density on its bin, S' = S_{2H, r}, and carries
// 1{N'(S' t) odd} - (1 - e^{-(2t)^{2H} r}) / 2 with weight sqrt(mass_b / J) g.
inline RunResult sample_subordinated_bifbm(std::uint64_t seed, double H, double K,
                                           const std::vector<double>& times, std::uint64_t reps,
                                           DiscretizationGrid grid = {1e-10, 1e4, 320, 4, 0.0, 1e300},
                                           int threads = 1) {
  KernelParams::check_H(H);
  if (!(K > 0.0 && K < 1.0)) throw std::domain_error("subordinated bi-fBm needs K in (0,1)");
  for (double t : times)
    if (!(t >= 0.0)) throw std::domain_error("times must be >= 0");
  grid.validate();
  RunResult res;
  const std::size_t m = times.size();
  res.samples = SampleMatrix(reps, m, detail::time_labels(times));
  res.samples.plan = {{"op", "subord"}, {"H", H}, {"K", K}, {"grid", grid.to_json()}, {"reps", reps},
                      {"seed", seed}};
  const double C = subordinated_control_constant(K);
  const double beta = 2.0 * H;
  std::vector<double> lo_pow(grid.bins), hi_pow(grid.bins), sd(grid.bins);
  for (int b = 0; b < grid.bins; ++b) {
    lo_pow[b] = std::exp(-K * std::log(grid.edge(b)));
    hi_pow[b] = std::exp(-K * std::log(grid.edge(b + 1)));
    sd[b] = std::sqrt(C * (lo_pow[b] - hi_pow[b]) / K / grid.paths);
  }
  const auto order = detail::sort_order(times);
  std::vector<double> st, tb;
  for (auto i : order) {
    st.push_back(times[i]);
    tb.push_back(pow_pos(2.0 * times[i], beta));
  }
  parallel_for(reps, threads, [&](std::size_t rep) {
    RngStream s(seed, rep, 0x5C01);
    std::vector<double> acc(m, 0.0);
    std::vector<int> par;
    for (int b = 0; b < grid.bins; ++b) {
      for (int j = 0; j < grid.paths; ++j) {
        const double rp = lo_pow[b] - s.uniform() * (lo_pow[b] - hi_pow[b]);
        const double r = std::exp(-std::log(rp) / K);
        const double S = sample_subordinator(s, beta, r);
        poisson_parities(s, S, st, par);
        const double g = sd[b] * s.gaussian();
        for (std::size_t k = 0; k < m; ++k) acc[k] += g * (par[k] + 0.5 * std::expm1(-tb[k] * r));
      }
    }
    for (std::size_t k = 0; k < m; ++k) res.samples(rep, order[k]) = acc[k];
  });
  Eigen::MatrixXd budget(m, m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j)
      budget(i, j) = subordinated_truncation_budget(H, K, times[i], times[j], grid.r_min, grid.r_max);
  nlohmann::json bj = nlohmann::json::array();
  for (std::size_t i = 0; i < m; ++i) {
    std::vector<double> row(m);
    for (std::size_t j = 0; j < m; ++j) row[j] = budget(i, j);
    bj.push_back(row);
  }
  res.diagnostics["truncation_budget"] = bj;
  return res;
}

// ---------------------------------------------------------------------------------------------
// Occupancy identity

struct OccupancyMc {
  double estimate = 0.0, se = 0.0;
  std::uint64_t paths = 0;
};

// Monte Carlo of int_0^inf Cov(1{N(rs) = j}, 1{N(rt) = j}) dr / r, stratified in u = log r.
// Each path pairs 1{N(rs)=j} 1{N(rt)=j} with 1{N(rs)=j} 1{N'(rt)=j} from an independent copy,
// an unbiased estimate of the covariance with no closed-form input.
inline OccupancyMc occupancy_mc(int j, double s, double t, int strata, std::uint64_t paths_per_stratum,
                                std::uint64_t seed, int threads = 1) {
  if (j < 1) throw std::domain_error("occupancy_mc: j must be >= 1");
  if (!(s > 0.0) || !(t > 0.0)) throw std::domain_error("occupancy_mc: s,t must be > 0");
  if (strata < 1 || paths_per_stratum < 2) throw std::invalid_argument("occupancy_mc: bad sizes");
  if (s > t) std::swap(s, t);
  const double u0 = std::log(1e-8 / t), u1 = std::log((j + 80.0) / s);
  const double du = (u1 - u0) / strata;
  std::vector<double> mean(strata), var(strata);
  parallel_for(static_cast<std::size_t>(strata), threads, [&](std::size_t k) {
    RngStream rs(seed, k, 0x0CC1);
    std::vector<double> v(paths_per_stratum);
    const auto ju = static_cast<std::uint64_t>(j);
    for (std::uint64_t p = 0; p < paths_per_stratum; ++p) {
      const double r = std::exp(u0 + (static_cast<double>(k) + rs.uniform()) * du);
      const auto ns = sample_poisson(rs, r * s);
      const auto nt = ns + sample_poisson(rs, r * (t - s));
      const auto nt2 = sample_poisson(rs, r * t);
      v[p] = ns == ju ? static_cast<double>(nt == ju) - static_cast<double>(nt2 == ju) : 0.0;
    }
    const auto e = mean_se(v);
    mean[k] = e.mean;
    var[k] = e.se * e.se;
  });
  OccupancyMc out;
  double v2 = 0.0;
  for (int k = 0; k < strata; ++k) {
    out.estimate += du * mean[k];
    v2 += du * du * var[k];
  }
  out.se = std::sqrt(v2);
  out.paths = paths_per_stratum * static_cast<std::uint64_t>(strata);
  return out;
}

}  // namespace logcorr
