#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include <boost/math/quadrature/tanh_sinh.hpp>

#include "json.hpp"
#include "logcorr/aggregated.hpp"
#include "logcorr/cov_functional.hpp"
#include "logcorr/kernels.hpp"
#include "logcorr/sampler.hpp"
#include "logcorr/stats.hpp"

namespace logcorr::acceptance {

struct Options {
  int threads = 1;
  double reps_scale = 1.0;  // < 1 only for smoke runs; acceptance uses 1
};

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string summary;
  nlohmann::json detail = nlohmann::json::object();
};

// Tolerances and sizes, fixed before any run.
namespace tol {
inline constexpr double frullani_inf = 1e-10;
inline constexpr double frullani_trunc = 1e-9;
inline constexpr double kernel_limit = 1e-3;
inline constexpr double halving_band = 0.2;
inline constexpr double gamma_r_floor = -1e-14;
inline constexpr double gamma_reconstruct = 1e-7;
inline constexpr double cov_2ln2 = 1e-6;
inline constexpr double cov_cross = 1e-8;
inline constexpr double gram_psd = -1e-8;
inline constexpr double z_band = 4.0;
inline constexpr double gfun_rel = 0.03;
inline constexpr double refine_z = 3.0;
inline constexpr double enumeration = 1e-12;
inline constexpr double variance_limit = 1e-3;
inline constexpr double stable_rel = 0.05;
}  // namespace tol

inline std::uint64_t seed_for(int id) { return 0x1C0FFEEull + static_cast<std::uint64_t>(id); }

inline std::uint64_t scaled(std::uint64_t reps, const Options& o) {
  return std::max<std::uint64_t>(16, static_cast<std::uint64_t>(std::llround(reps * o.reps_scale)));
}

namespace detail {

inline std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

inline double log_uniform(RngStream& s, double lo, double hi) {
  return std::exp(std::log(lo) + s.uniform() * (std::log(hi) - std::log(lo)));
}

// Random point of `sp` for property sweeps.
inline SpacePoint random_point(RngStream& s, const Space& sp) {
  switch (sp.kind) {
    case SpaceKind::HalfLine: return SpacePoint::on_half_line(10.0 * s.uniform());
    case SpaceKind::FullLine: return SpacePoint::on_full_line(20.0 * s.uniform() - 10.0);
    case SpaceKind::Euclidean: {
      std::vector<double> v(sp.dim);
      for (auto& c : v) c = 3.0 * s.gaussian();
      return SpacePoint::in_rn(v);
    }
    case SpaceKind::Sphere: {
      std::vector<double> v(sp.dim + 1);
      double nn = 0.0;
      for (auto& c : v) {
        c = s.gaussian();
        nn += c * c;
      }
      for (auto& c : v) c /= std::sqrt(nn);
      return SpacePoint::on_sphere(v, sp.mode);
    }
  }
  return {};
}

inline std::vector<Space> sweep_spaces() {
  return {Space::half_line(),
          Space::full_line(),
          Space::euclidean(2),
          Space::euclidean(3),
          Space::sphere(1, SphereMode::Pinned),
          Space::sphere(1, SphereMode::RotationInvariant),
          Space::sphere(2, SphereMode::Pinned),
          Space::sphere(2, SphereMode::RotationInvariant)};
}

}  // namespace detail

// 1. Frullani / E1.
inline CriterionResult frullani(const Options&) {
  CriterionResult r;
  r.id = 1;
  r.name = "frullani";
  RngStream s(seed_for(1));
  double worst_inf = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double a = detail::log_uniform(s, 1e-3, 1e3), b = detail::log_uniform(s, 1e-3, 1e3);
    const double lb = std::log(b / a);
    // T = inf, and a finite T far enough out (E1(50) ~ 4e-24) that goes through the E1 branch.
    worst_inf = std::max(worst_inf, std::abs(frullani_truncated(a, b, INFINITY) - lb));
    worst_inf = std::max(worst_inf, std::abs(frullani_truncated(a, b, 50.0 / std::min(a, b)) - lb));
  }
  boost::math::quadrature::tanh_sinh<double> ts;
  double worst_trunc = 0.0;
  for (int i = 0; i < 200; ++i) {
    const double a = detail::log_uniform(s, 1e-3, 1e3), b = detail::log_uniform(s, 1e-3, 1e3);
    const double T = detail::log_uniform(s, 1e-2, 1e2);
    // Integrate in u = log r from far below the scale 1/max(a,b), where the integrand is r(b-a).
    const double ulo = std::log(1e-14 / std::max(a, b)), uhi = std::log(T);
    const double head = (b - a) * std::exp(ulo);
    const double q = ts.integrate([&](double u) {
      const double rr = std::exp(u);
      const double d = -std::exp(-std::min(a, b) * rr) * std::expm1(-std::abs(b - a) * rr);
      return a < b ? d : -d;
    }, ulo, uhi);
    worst_trunc = std::max(worst_trunc, std::abs(frullani_truncated(a, b, T) - (q + head)));
  }
  r.pass = worst_inf <= tol::frullani_inf && worst_trunc <= tol::frullani_trunc;
  r.detail = {{"max_err_infinite", worst_inf}, {"max_err_truncated", worst_trunc},
              {"tol_infinite", tol::frullani_inf}, {"tol_truncated", tol::frullani_trunc}};
  r.summary = "max|F(a,b,inf)-log(b/a)|=" + detail::fmt(worst_inf) + " max|F_T - quad|=" + detail::fmt(worst_trunc);
  return r;
}

// 2. K^{-1} bifbm_cov -> Gamma as K -> 0.
inline CriterionResult kernel_limit(const Options&) {
  CriterionResult r;
  r.id = 2;
  r.name = "kernel_limit";
  RngStream s(seed_for(2));
  const Space sp = Space::half_line();
  const double K = 1e-4;
  double e1 = 0.0, e2 = 0.0;
  for (int i = 0; i < 100; ++i) {
    double x, y;
    do {
      x = 0.5 + 3.5 * s.uniform();
      y = 0.5 + 3.5 * s.uniform();
    } while (std::abs(x - y) < 0.05);
    const double H = 0.1 + 0.4 * s.uniform();
    const auto px = SpacePoint::on_half_line(x), py = SpacePoint::on_half_line(y);
    const double g = gamma_kernel(sp, H, px, py).value;
    e1 = std::max(e1, std::abs(bifbm_cov(sp, {H, K}, px, py) / K - g));
    e2 = std::max(e2, std::abs(bifbm_cov(sp, {H, K / 2}, px, py) / (K / 2) - g));
  }
  const double ratio = e1 / e2;
  r.pass = e1 < tol::kernel_limit && std::abs(ratio - 2.0) <= 2.0 * tol::halving_band;
  r.detail = {{"sup_err_K", e1}, {"sup_err_K_half", e2}, {"ratio", ratio}, {"K", K}};
  r.summary = "sup err=" + detail::fmt(e1) + " halving ratio=" + detail::fmt(ratio);
  return r;
}

// 3. sigma-positivity of Gamma_r and the reconstruction int 4 Gamma_r / r dr = Gamma.
inline CriterionResult sigma_positivity(const Options&) {
  CriterionResult r;
  r.id = 3;
  r.name = "sigma_positivity";
  RngStream s(seed_for(3));
  const auto spaces = detail::sweep_spaces();
  double min_g = INFINITY;
  for (int i = 0; i < 10000; ++i) {
    const Space& sp = spaces[i % spaces.size()];
    const double beta = 1.0 - s.uniform();
    const double rr = detail::log_uniform(s, 1e-3, 1e3);
    const auto x = detail::random_point(s, sp), y = detail::random_point(s, sp);
    min_g = std::min(min_g, gamma_r_kernel(sp, beta, rr, x, y));
  }
  double worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    const Space& sp = spaces[i % spaces.size()];
    const double beta = 0.2 + 0.8 * s.uniform();
    SpacePoint x, y;
    do {
      x = detail::random_point(s, sp);
      y = detail::random_point(s, sp);
    } while (distance(sp, x, y) < 1e-2 || mu_A(sp, x) + mu_A(sp, y) <= 0.0);
    const auto q = gamma_from_gamma_r_quadrature(sp, beta, x, y);
    worst = std::max(worst, std::abs(q.value - gamma_kernel(sp, 0.5 * beta, x, y).value));
  }
  r.pass = min_g >= tol::gamma_r_floor && worst <= tol::gamma_reconstruct;
  r.detail = {{"min_gamma_r", min_g}, {"max_reconstruction_err", worst}};
  r.summary = "min Gamma_r=" + detail::fmt(min_g) + " max|int 4Gamma_r/r - Gamma|=" + detail::fmt(worst);
  return r;
}

// 4. Covariance functional values and Gram PSD.
inline CriterionResult covariance_functional(const Options&) {
  CriterionResult r;
  r.id = 4;
  r.name = "cov_functional";
  const auto ind = TestFunction::indicator(0.0, 1.0);
  const double v = cov_functional(Space::half_line(), 0.5, ind, ind);
  const double target = 2.0 * std::numbers::ln2;
  // Brute-force 2-D tanh-sinh quadrature of log(x+y) - log|x-y| on the unit square, inner
  // integral split at the diagonal.
  boost::math::quadrature::tanh_sinh<double> ts;
  const double brute = ts.integrate([&](double x) {
    // The second argument is the signed distance to the nearest endpoint, so |x - y| keeps
    // full precision next to the diagonal.
    auto below = [&](double y, double yc) { return std::log(x + y) - std::log(yc > 0.0 ? yc : x - y); };
    auto above = [&](double y, double yc) { return std::log(x + y) - std::log(yc < 0.0 ? -yc : y - x); };
    return ts.integrate(below, 0.0, x) + ts.integrate(above, x, 1.0);
  }, 1e-14, 1.0 - 1e-14);  // the inner integral is bounded, so the trimmed ends cost < 1e-13
  const double cross = cov_functional(Space::full_line(), 0.5, TestFunction::indicator(-1.0, 0.0), ind);
  const std::vector<TestFunction> fs{ind, TestFunction::exponential(1.0), TestFunction::gaussian(1.0, 0.5),
                                     TestFunction::polydecay(3.0), TestFunction::indicator(0.5, 2.0)};
  Eigen::MatrixXd G(5, 5);
  for (int a = 0; a < 5; ++a)
    for (int b = a; b < 5; ++b) G(a, b) = G(b, a) = cov_functional(Space::half_line(), 0.5, fs[a], fs[b]);
  const auto psd = psd_check(G, -tol::gram_psd);
  r.pass = std::abs(v - target) <= tol::cov_2ln2 && std::abs(brute - target) <= tol::cov_2ln2 &&
           std::abs(cross) <= tol::cov_cross && psd.pass;
  r.detail = {{"cov", v}, {"target", target}, {"brute_force", brute}, {"cross_support", cross},
              {"gram_min_eig", psd.min_eigenvalue}};
  r.summary = "cov=" + detail::fmt(v) + " brute=" + detail::fmt(brute) + " cross=" + detail::fmt(cross) +
              " gram min eig=" + detail::fmt(psd.min_eigenvalue);
  return r;
}

// 5. Truncated-field sampler covariance.
inline CriterionResult truncated_field(const Options& o) {
  CriterionResult r;
  r.id = 5;
  r.name = "truncated_field";
  const std::vector<double> t{0.5, 1.0, 2.0, 3.0};
  const double eps = 1e-2;
  const auto res = sample_truncated_field(seed_for(5), t, eps, scaled(100000, o), FieldMethod::Exact, {}, o.threads);
  const auto c = empirical_cov(res.samples);
  double zmax = 0.0;
  nlohmann::json entries = nlohmann::json::array();
  for (int i = 0; i < 4; ++i)
    for (int j = i; j < 4; ++j) {
      const double target = truncated_cov(t[i], t[j], eps);
      const double z = (c.cov(i, j) - target) / c.se(i, j);
      zmax = std::max(zmax, std::abs(z));
      entries.push_back({{"i", i}, {"j", j}, {"estimate", c.cov(i, j)}, {"se", c.se(i, j)}, {"target", target}, {"z", z}});
    }
  r.pass = zmax <= tol::z_band;
  r.detail = {{"entries", entries}, {"reps", res.samples.rows}, {"seed", seed_for(5)}};
  r.summary = "max|z|=" + detail::fmt(zmax) + " over 10 entries";
  return r;
}

inline DiscretizationGrid default_grid() { return DiscretizationGrid{}; }

struct GfunRun {
  MeanEstimate var, var_refined;
  nlohmann::json diag;
};

inline RunResult gfun_base(const Options& o) {
  return mc_gaussian_functional(seed_for(6), Space::half_line(), 0.5, {TestFunction::indicator(0.0, 1.0)},
                                default_grid(), scaled(100000, o), o.threads);
}

inline GfunRun gfun_run(const Options& o) {
  const auto ind = TestFunction::indicator(0.0, 1.0);
  DiscretizationGrid g = default_grid();
  const auto a = gfun_base(o);
  g.bins *= 2;
  const auto b = mc_gaussian_functional(seed_for(6) + 100, Space::half_line(), 0.5, {ind}, g, scaled(100000, o), o.threads);
  return {variance_se(a.samples.column(0)), variance_se(b.samples.column(0)),
          {{"base", a.diagnostics}, {"refined", b.diagnostics}}};
}

// 6. Representation consistency of the cell scheme.
inline CriterionResult gaussian_functional(const Options& o) {
  CriterionResult r;
  r.id = 6;
  r.name = "gaussian_functional";
  const auto g = gfun_run(o);
  const double target = 2.0 * std::numbers::ln2;
  const double rel = std::abs(g.var.mean - target) / target;
  const double zref = (g.var_refined.mean - g.var.mean) / std::hypot(g.var.se, g.var_refined.se);
  r.pass = rel <= tol::gfun_rel && std::abs(zref) < tol::refine_z;
  r.detail = {{"variance", g.var.mean}, {"se", g.var.se}, {"target", target}, {"rel_err", rel},
              {"variance_2B", g.var_refined.mean}, {"se_2B", g.var_refined.se}, {"refine_z", zref},
              {"grid", default_grid().to_json()}, {"diagnostics", g.diag}};
  r.summary = "var=" + detail::fmt(g.var.mean) + "+-" + detail::fmt(g.var.se) + " rel err=" + detail::fmt(rel) +
              " 2B shift z=" + detail::fmt(zref);
  return r;
}

// 7. Subordinated bi-fBm covariances.
inline CriterionResult subordinated(const Options& o) {
  CriterionResult r;
  r.id = 7;
  r.name = "subordinated_bifbm";
  const double H = 0.25, K = 0.5;
  const auto res = sample_subordinated_bifbm(seed_for(7), H, K, {1.0, 2.0, 3.0}, scaled(100000, o),
                                             {1e-10, 1e4, 320, 4, 0.0, 1e300}, o.threads);
  const auto c = empirical_cov(res.samples);
  bool ok = true;
  nlohmann::json pairs = nlohmann::json::array();
  std::string sum;
  for (int j : {1, 2}) {
    const double target = subordinated_bifbm_cov(H, K, 1.0, j + 1.0);
    const double budget = res.diagnostics["truncation_budget"][0][j].get<double>();
    const double dev = std::abs(c.cov(0, j) - target);
    const bool p = dev <= tol::z_band * c.se(0, j) + budget;
    ok = ok && p;
    pairs.push_back({{"s", 1.0}, {"t", j + 1.0}, {"estimate", c.cov(0, j)}, {"se", c.se(0, j)}, {"target", target},
                     {"budget", budget}, {"pass", p}});
    sum += "cov(1," + std::to_string(j + 1) + ")=" + detail::fmt(c.cov(0, j)) + " target " + detail::fmt(target) +
           " z=" + detail::fmt((c.cov(0, j) - target) / c.se(0, j)) + " ";
  }
  r.pass = ok;
  r.detail = {{"pairs", pairs}, {"reps", res.samples.rows}};
  r.summary = sum;
  return r;
}

// Brute-force E psi^2 over all 2^J Bernoulli(r) outcomes.
inline double enumerate_psi_second_moment(const std::vector<double>& w, double r) {
  const std::size_t J = w.size();
  const double rho = 1.0 - 2.0 * r;
  double total = 0.0;
  for (std::uint64_t mask = 0; mask < (1ull << J); ++mask) {
    double p = 1.0, psi = 0.0, rj = 1.0;
    int tau = 0;
    for (std::size_t j = 0; j < J; ++j) {
      const bool e = (mask >> j) & 1;
      p *= e ? r : 1.0 - r;
      tau += e;
      rj *= rho;
      psi += 2.0 * ((tau & 1) - 0.5 * (1.0 - rj)) * w[j];
    }
    total += p * psi * psi;
  }
  return total;
}

// 8. Exact second moment vs enumeration.
inline CriterionResult second_moment(const Options&) {
  CriterionResult r;
  r.id = 8;
  r.name = "exact_second_moment";
  RngStream s(seed_for(8));
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const std::size_t J = 1 + static_cast<std::size_t>(s.uniform() * 12);
    std::vector<double> w(J);
    for (auto& v : w) v = s.gaussian();
    const double q = 0.001 + 0.998 * s.uniform();
    const double a = exact_psi_second_moment(make_cell_weights(w, 1), q);
    worst = std::max(worst, std::abs(a - enumerate_psi_second_moment(w, q)));
  }
  r.pass = worst <= tol::enumeration;
  r.detail = {{"max_abs_err", worst}};
  r.summary = "max|exact - enumeration|=" + detail::fmt(worst);
  return r;
}

// Continuum limit of E psi_{n,r/n}^2 for the indicator of [0,1]:
// int int (e^{-2r|t-s|} - e^{-2r(t+s)}) ds dt in closed form.
inline double indicator_psi_limit(double r) {
  const double c = 2.0 * r;
  const double diag = 2.0 * (1.0 / c + std::expm1(-c) / (c * c));
  const double prod = -std::expm1(-c) / c;
  return diag - prod * prod;
}

// 9. Variance convergence in n.
inline CriterionResult variance_convergence(const Options&) {
  CriterionResult r;
  r.id = 9;
  r.name = "variance_convergence";
  const int n = 1 << 14;
  const auto w = f_cell_weights(TestFunction::indicator(0.0, 1.0), n);
  double worst = 0.0;
  nlohmann::json rows = nlohmann::json::array();
  for (double rr : {0.5, 1.0, 2.0, 5.0}) {
    const double a = exact_psi_second_moment(w, rr / n), b = indicator_psi_limit(rr);
    worst = std::max(worst, std::abs(a - b));
    rows.push_back({{"r", rr}, {"exact", a}, {"limit", b}});
  }
  r.pass = worst <= tol::variance_limit;
  r.detail = {{"rows", rows}, {"n", n}};
  r.summary = "max|E psi^2 - limit|=" + detail::fmt(worst);
  return r;
}

inline nlohmann::json chf_json(const std::vector<ChfPoint>& pts, const std::vector<double>& targets,
                               bool& ok, double& zmax) {
  nlohmann::json j = nlohmann::json::array();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto& p = pts[i];
    const double zr = (p.re - targets[i]) / p.se_re, zi = p.im / p.se_im;
    ok = ok && std::abs(zr) <= tol::z_band && std::abs(zi) <= tol::z_band;
    zmax = std::max({zmax, std::abs(zr), std::abs(zi)});
    j.push_back({{"theta", p.theta}, {"re", p.re}, {"im", p.im}, {"se_re", p.se_re}, {"se_im", p.se_im},
                 {"target_re", targets[i]}, {"z_re", zr}, {"z_im", zi}});
  }
  return j;
}

inline AggregatedPlan clt_plan(const Options& o) {
  AggregatedPlan p;
  p.n = 1024;
  p.m = 65536;
  p.fs = {TestFunction::indicator(0.0, 1.0)};
  p.thetas = {0.25, 0.5, 1.0};
  p.reps = scaled(20000, o);
  p.seed = seed_for(10);
  p.threads = o.threads;
  return p;
}

// 10. CLT for the layered model.
inline CriterionResult clt(const Options& o) {
  CriterionResult r;
  r.id = 10;
  r.name = "clt";
  const auto plan = clt_plan(o);
  const auto res = simulate_G_n(plan);
  const auto pts = empirical_chf(res.samples.column(0), plan.thetas);
  const double v = 2.0 * std::numbers::ln2;
  std::vector<double> targets;
  for (double th : plan.thetas) targets.push_back(std::exp(-th * th * v / 2.0));
  bool ok = true;
  double zmax = 0.0;
  auto j = chf_json(pts, targets, ok, zmax);
  // Diagnostics: the exact finite-(n, m) ch.f. the simulation estimates.
  const auto w = f_cell_weights(plan.fs[0], plan.n);
  const double vn = exact_variance_G_n(w);
  const auto corr = finite_m_chf_correction(w, plan.m, vn, plan.thetas, 200000, seed_for(10) + 1);
  for (std::size_t i = 0; i < corr.size(); ++i) {
    j[i]["finite_nm_target"] = std::exp(-plan.thetas[i] * plan.thetas[i] * vn / 2.0 + corr[i].D);
    j[i]["finite_m_log_correction"] = corr[i].D;
    j[i]["finite_m_log_correction_se"] = corr[i].se;
  }
  r.pass = ok;
  r.detail = {{"chf", j}, {"exact_variance_n", vn}, {"plan", plan.to_json()}, {"diagnostics", res.diagnostics}};
  r.summary = "max|z| over re/im at theta {0.25,0.5,1}=" + detail::fmt(zmax);
  for (std::size_t i = 0; i < pts.size(); ++i)
    r.summary += " re(" + detail::fmt(plan.thetas[i]) + ")=" + detail::fmt(pts[i].re) + "/" + detail::fmt(targets[i]);
  return r;
}

inline AggregatedPlan general_halfline_plan(const Options& o) {
  AggregatedPlan p;
  p.n = 1024;
  p.m = 32768;
  p.fs = {TestFunction::indicator(0.0, 1.0)};
  p.thetas = {1.0};
  p.reps = scaled(40000, o);
  p.seed = seed_for(11);
  p.threads = o.threads;
  return p;
}

inline AggregatedPlan general_sphere_plan(const Options& o) {
  AggregatedPlan p;
  p.n = 64;
  p.m = 65536;
  p.r_star = 2.0;
  p.space = Space::sphere(2, SphereMode::RotationInvariant);
  p.fs = {TestFunction::indicator(0.0, 1.0)};
  p.thetas = {1.0};
  p.reps = scaled(20000, o);
  p.seed = seed_for(11) + 1;
  p.ring_nodes = 32;
  p.threads = o.threads;
  return p;
}

// 11. Point-process CLT on the half-line and on S^2.
inline CriterionResult general_clt(const Options& o) {
  CriterionResult r;
  r.id = 11;
  r.name = "general_clt";
  const auto hp = general_halfline_plan(o);
  const auto hres = simulate_general_G_n(hp);
  const auto v = variance_se(hres.samples.column(0));
  const double cov = cov_functional(hp.space, 0.5, hp.fs[0], hp.fs[0]);
  const double zh = (v.mean - cov) / v.se;
  const auto sp = general_sphere_plan(o);
  const auto sres = simulate_general_G_n(sp);
  const double scov = cov_functional(sp.space, 0.5, sp.fs[0], sp.fs[0]);
  const auto pts = empirical_chf(sres.samples.column(0), sp.thetas);
  bool ok = std::abs(zh) <= tol::z_band;
  double zmax = 0.0;
  auto j = chf_json(pts, {std::exp(-scov / 2.0)}, ok, zmax);
  r.pass = ok;
  r.detail = {{"half_line", {{"variance", v.mean}, {"se", v.se}, {"target", cov}, {"z", zh},
                             {"plan", hp.to_json()}, {"diagnostics", hres.diagnostics}}},
              {"sphere", {{"chf", j}, {"cov", scov}, {"plan", sp.to_json()}, {"diagnostics", sres.diagnostics}}}};
  r.summary = "half-line var=" + detail::fmt(v.mean) + " target " + detail::fmt(cov) + " z=" + detail::fmt(zh) +
              "; S2 re c(1)=" + detail::fmt(pts[0].re) + " target " + detail::fmt(std::exp(-scov / 2.0)) +
              " z=" + detail::fmt(j[0]["z_re"].get<double>());
  return r;
}

// 12. Stable extension.
inline CriterionResult stable(const Options& o) {
  CriterionResult r;
  r.id = 12;
  r.name = "stable";
  const auto ind = TestFunction::indicator(0.0, 1.0);
  // alpha = 2 path on the default grid, independent streams from criterion 6.
  const auto s2 = mc_stable_functional(seed_for(12), Space::half_line(), 2.0, 1.0, {ind}, default_grid(),
                                       scaled(100000, o), o.threads);
  const auto v2 = variance_se(s2.samples.column(0));
  const auto g6 = variance_se(gfun_base(o).samples.column(0));
  const double z2 = (v2.mean - g6.mean) / std::hypot(v2.se, g6.se);
  bool ok = std::abs(z2) <= tol::z_band;

  const double alpha = 1.5;
  const auto f = TestFunction::exponential(1.0);
  const DiscretizationGrid g{1e-3, 1e2, 200, 8, 14.0, 1e300};
  const auto sa = mc_stable_functional(seed_for(12) + 1, Space::half_line(), alpha, 1.0, {f}, g,
                                       scaled(20000, o), o.threads);
  const auto ex = stable_exponent_nested(seed_for(12) + 2, Space::half_line(), alpha, 1.0, f, g, 400, 2000, o.threads);
  const auto pts = empirical_chf(sa.samples.column(0), {0.5, 1.0});
  nlohmann::json rows = nlohmann::json::array();
  std::string sum = "alpha=2 var " + detail::fmt(v2.mean) + " vs " + detail::fmt(g6.mean) + " z=" + detail::fmt(z2) + ";";
  for (const auto& p : pts) {
    const double mod = std::hypot(p.re, p.im);
    const double lhs = std::log(mod);
    const double se_lhs = std::hypot(p.se_re, p.se_im) / mod;
    const double rhs = -2.0 * std::pow(p.theta, alpha) * ex.value;
    const double se_rhs = 2.0 * std::pow(p.theta, alpha) * ex.se;
    const double rel = std::abs(lhs - rhs) / std::abs(rhs);
    ok = ok && rel <= tol::stable_rel;
    rows.push_back({{"theta", p.theta}, {"log_abs_chf", lhs}, {"se", se_lhs}, {"exponent_target", rhs},
                    {"target_se", se_rhs}, {"rel_err", rel}});
    sum += " theta=" + detail::fmt(p.theta) + " log|c|=" + detail::fmt(lhs) + "+-" + detail::fmt(se_lhs) +
           " target " + detail::fmt(rhs) + "+-" + detail::fmt(se_rhs) + " rel=" + detail::fmt(rel);
  }
  r.pass = ok;
  r.detail = {{"alpha2", {{"variance", v2.mean}, {"se", v2.se}, {"gaussian_variance", g6.mean},
                          {"gaussian_se", g6.se}, {"z", z2}}},
              {"alpha15", rows}, {"exponent_integral", ex.value}, {"exponent_se", ex.se}, {"grid", g.to_json()}};
  r.summary = sum;
  return r;
}

// 13. Occupancy identity.
inline CriterionResult occupancy(const Options& o) {
  CriterionResult r;
  r.id = 13;
  r.name = "occupancy";
  bool ok = true;
  nlohmann::json rows = nlohmann::json::array();
  std::string sum;
  for (double t : {1.0, 2.0, 4.0}) {
    const auto mc = occupancy_mc(1, 1.0, t, 64, scaled(100000, o), seed_for(13) + static_cast<std::uint64_t>(t), o.threads);
    const double q = occupancy_cov(1, 1.0, t);
    const double z = (mc.estimate - q) / mc.se;
    ok = ok && std::abs(z) <= tol::z_band;
    rows.push_back({{"t", t}, {"mc", mc.estimate}, {"se", mc.se}, {"quadrature", q}, {"z", z}});
    sum += "t=" + detail::fmt(t) + " z=" + detail::fmt(z) + " ";
  }
  r.pass = ok;
  r.detail = {{"rows", rows}};
  r.summary = sum;
  return r;
}

// 14. Thread-count invariance of reports.
inline CriterionResult determinism(const Options& o) {
  CriterionResult r;
  r.id = 14;
  r.name = "determinism";
  auto run = [&](int threads) {
    Options a = o;
    a.threads = threads;
    Options small = a;
    small.reps_scale = 0.02 * o.reps_scale;
    nlohmann::json j;
    j["5"] = truncated_field(a).detail;
    j["13"] = occupancy(small).detail;
    j["10"] = clt(small).detail;
    auto sp = general_sphere_plan(small);
    j["11s"] = simulate_general_G_n(sp).samples.data;
    return j.dump();
  };
  const std::string a = run(1), b = run(4);
  r.pass = a == b;
  r.detail = {{"bytes", a.size()}, {"identical", a == b}};
  r.summary = std::string(a == b ? "identical" : "DIFFERENT") + " reports for threads 1 and 4 (" +
              std::to_string(a.size()) + " bytes)";
  return r;
}

inline const std::vector<std::pair<std::string, std::function<CriterionResult(const Options&)>>>& registry() {
  static const std::vector<std::pair<std::string, std::function<CriterionResult(const Options&)>>> r{
      {"frullani", frullani},
      {"kernel-limit", kernel_limit},
      {"sigma-positivity", sigma_positivity},
      {"cov-functional", covariance_functional},
      {"truncated-field", truncated_field},
      {"gaussian-functional", gaussian_functional},
      {"subordinated", subordinated},
      {"second-moment", second_moment},
      {"variance-convergence", variance_convergence},
      {"clt", clt},
      {"general-clt", general_clt},
      {"stable", stable},
      {"occupancy", occupancy},
      {"determinism", determinism}};
  return r;
}

// Criterion number from "7" or a registry name; 0 if unknown.
inline int criterion_id(const std::string& key) {
  const auto& reg = registry();
  for (std::size_t i = 0; i < reg.size(); ++i)
    if (reg[i].first == key || std::to_string(i + 1) == key) return static_cast<int>(i + 1);
  return 0;
}

inline CriterionResult run_criterion(int id, const Options& o) {
  const auto& reg = registry();
  if (id < 1 || id > static_cast<int>(reg.size())) throw std::out_of_range("no criterion " + std::to_string(id));
  auto r = reg[id - 1].second(o);
  r.id = id;
  return r;
}

inline nlohmann::json to_json(const CriterionResult& r) {
  return {{"id", r.id}, {"name", r.name}, {"pass", r.pass}, {"summary", r.summary}, {"detail", r.detail}};
}

inline std::string line(const CriterionResult& r) {
  return std::string(r.pass ? "PASS" : "FAIL") + " criterion " + std::to_string(r.id) + " [" + r.name + "] " + r.summary;
}

}  // namespace logcorr::acceptance
