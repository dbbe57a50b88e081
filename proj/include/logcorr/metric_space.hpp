#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace logcorr {

enum class SpaceKind { HalfLine, FullLine, Euclidean, Sphere };
enum class SphereMode { Pinned, RotationInvariant };

// dim is the intrinsic dimension: 1 for the lines, n for R^n, n for S^n (embedded in R^{n+1}).
struct Space {
  SpaceKind kind = SpaceKind::HalfLine;
  int dim = 1;
  SphereMode mode = SphereMode::Pinned;

  static Space half_line() { return {SpaceKind::HalfLine, 1, SphereMode::Pinned}; }
  static Space full_line() { return {SpaceKind::FullLine, 1, SphereMode::Pinned}; }
  static Space euclidean(int n) {
    if (n < 1) throw std::invalid_argument("euclidean dimension must be >= 1");
    return {SpaceKind::Euclidean, n, SphereMode::Pinned};
  }
  static Space sphere(int n, SphereMode m) {
    if (n < 1) throw std::invalid_argument("sphere dimension must be >= 1");
    return {SpaceKind::Sphere, n, m};
  }

  bool is_line() const { return kind == SpaceKind::HalfLine || kind == SpaceKind::FullLine; }
  int ambient_dim() const { return kind == SpaceKind::Sphere ? dim + 1 : dim; }

  // Total mass of the base measure; infinite except on spheres where it is pi.
  double total_mass() const {
    return kind == SpaceKind::Sphere ? std::numbers::pi : std::numeric_limits<double>::infinity();
  }

  bool operator==(const Space&) const = default;

  std::string name() const {
    switch (kind) {
      case SpaceKind::HalfLine: return "half-line";
      case SpaceKind::FullLine: return "full-line";
      case SpaceKind::Euclidean: return "rn:" + std::to_string(dim);
      case SpaceKind::Sphere:
        return "sphere" + std::to_string(dim) +
               (mode == SphereMode::Pinned ? "@pinned" : "@rotinv");
    }
    return "?";
  }
};

// Surface area of the unit sphere S^{n-1} in R^n.
inline double unit_sphere_area(int n) {
  return 2.0 * std::pow(std::numbers::pi, 0.5 * n) / std::tgamma(0.5 * n);
}

struct SpacePoint {
  Space space;
  std::vector<double> x;

  static SpacePoint on_half_line(double t) {
    if (!(t >= 0.0)) throw std::domain_error("half-line coordinate must be >= 0");
    return {Space::half_line(), {t}};
  }
  static SpacePoint on_full_line(double t) { return {Space::full_line(), {t}}; }
  static SpacePoint in_rn(std::vector<double> v) {
    const int n = static_cast<int>(v.size());
    return {Space::euclidean(n), std::move(v)};
  }
  static SpacePoint on_sphere(std::vector<double> u, SphereMode m) {
    double nn = 0.0;
    for (double c : u) nn += c * c;
    if (u.size() < 2 || std::abs(std::sqrt(nn) - 1.0) > 1e-12)
      throw std::domain_error("sphere point must be a unit vector in R^{n+1}, n >= 1");
    const int n = static_cast<int>(u.size()) - 1;
    return {Space::sphere(n, m), std::move(u)};
  }
  // S^2 by polar angle theta (from the north pole, the pinned origin) and azimuth phi.
  static SpacePoint on_sphere2(double theta, double phi, SphereMode m) {
    std::vector<double> u{std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi),
                          std::cos(theta)};
    const double nn = std::sqrt(u[0] * u[0] + u[1] * u[1] + u[2] * u[2]);
    for (double& c : u) c /= nn;
    return on_sphere(std::move(u), m);
  }
  // S^1 by angle phi; the pinned origin is phi = 0.
  static SpacePoint on_sphere1(double phi, SphereMode m) {
    return on_sphere({std::cos(phi), std::sin(phi)}, m);
  }
};

// Origin o used by the pinned constructions: 0 on the lines and R^n, last basis vector on S^n.
inline SpacePoint origin(const Space& sp) {
  SpacePoint o{sp, std::vector<double>(sp.ambient_dim(), 0.0)};
  if (sp.kind == SpaceKind::Sphere) o.x.back() = 1.0;
  return o;
}

inline void require_same_space(const SpacePoint& a, const SpacePoint& b) {
  if (!(a.space == b.space) || a.x.size() != b.x.size())
    throw std::domain_error("points belong to different spaces: " + a.space.name() + " vs " +
                            b.space.name());
}

// 2 asin(|u - v| / 2): keeps relative precision for nearby points, unlike acos(<u, v>).
inline double sphere_geodesic(const std::vector<double>& u, const std::vector<double>& v) {
  double c = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) c += (u[i] - v[i]) * (u[i] - v[i]);
  return 2.0 * std::asin(std::min(1.0, 0.5 * std::sqrt(c)));
}

inline double distance(const Space& sp, const SpacePoint& a, const SpacePoint& b) {
  require_same_space(a, b);
  if (!(a.space == sp)) throw std::domain_error("point is not in space " + sp.name());
  switch (sp.kind) {
    case SpaceKind::HalfLine:
    case SpaceKind::FullLine: return std::abs(a.x[0] - b.x[0]);
    case SpaceKind::Euclidean: {
      double s = 0.0;
      for (std::size_t i = 0; i < a.x.size(); ++i) s += (a.x[i] - b.x[i]) * (a.x[i] - b.x[i]);
      return std::sqrt(s);
    }
    case SpaceKind::Sphere: return sphere_geodesic(a.x, b.x);
  }
  return 0.0;
}

inline double distance(const SpacePoint& a, const SpacePoint& b) { return distance(a.space, a, b); }

// mu(A_x): |x| on the lines, ||x|| on R^n, d(o,x) on the pinned sphere, pi/2 when rotation-invariant.
inline double mu_A(const Space& sp, const SpacePoint& p) {
  if (!(p.space == sp)) throw std::domain_error("point is not in space " + sp.name());
  switch (sp.kind) {
    case SpaceKind::HalfLine:
    case SpaceKind::FullLine: return std::abs(p.x[0]);
    case SpaceKind::Euclidean: {
      double s = 0.0;
      for (double c : p.x) s += c * c;
      return std::sqrt(s);
    }
    case SpaceKind::Sphere:
      if (sp.mode == SphereMode::RotationInvariant) return 0.5 * std::numbers::pi;
      return sphere_geodesic(origin(sp).x, p.x);
  }
  return 0.0;
}

inline double mu_A(const SpacePoint& p) { return mu_A(p.space, p); }

// ---------------------------------------------------------------------------
// Literals: half-line:1.5, full-line:-2, rn:1,2,2, sphere2:theta,phi@pinned, sphere1:phi@rotinv.

namespace detail {

inline std::vector<double> parse_number_list(std::string_view s, std::string_view what) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    auto comma = s.find(',', pos);
    if (comma == std::string_view::npos) comma = s.size();
    auto tok = s.substr(pos, comma - pos);
    while (!tok.empty() && tok.front() == ' ') tok.remove_prefix(1);
    while (!tok.empty() && tok.back() == ' ') tok.remove_suffix(1);
    if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (tok.empty() || ec != std::errc{} || ptr != tok.data() + tok.size())
      throw std::invalid_argument("malformed number '" + std::string(tok) + "' in " +
                                  std::string(what));
    out.push_back(v);
    pos = comma + 1;
  }
  return out;
}

inline SphereMode parse_sphere_mode(std::string_view m, std::string_view lit) {
  if (m.empty() || m == "pinned") return SphereMode::Pinned;
  if (m == "rotinv" || m == "rotation-invariant") return SphereMode::RotationInvariant;
  throw std::invalid_argument("unknown sphere mode '" + std::string(m) + "' in " + std::string(lit));
}

}  // namespace detail

// Space names: half-line, full-line, rn:N, sphere1@pinned, sphere2@rotinv, ...
inline Space parse_space(std::string_view s) {
  if (s == "half-line") return Space::half_line();
  if (s == "full-line") return Space::full_line();
  if (s.starts_with("rn:")) {
    auto v = detail::parse_number_list(s.substr(3), s);
    if (v.size() != 1 || v[0] != std::floor(v[0]) || v[0] < 1)
      throw std::invalid_argument("rn:N expects a positive integer dimension");
    return Space::euclidean(static_cast<int>(v[0]));
  }
  if (s.starts_with("sphere")) {
    auto rest = s.substr(6);
    auto at = rest.find('@');
    auto mode = at == std::string_view::npos ? std::string_view{} : rest.substr(at + 1);
    auto nstr = rest.substr(0, at);
    int n = 0;
    auto [p, ec] = std::from_chars(nstr.data(), nstr.data() + nstr.size(), n);
    if (ec != std::errc{} || p != nstr.data() + nstr.size() || n < 1)
      throw std::invalid_argument("malformed sphere space '" + std::string(s) + "'");
    return Space::sphere(n, detail::parse_sphere_mode(mode, s));
  }
  throw std::invalid_argument("unknown space '" + std::string(s) +
                              "' (expected half-line, full-line, rn:N, sphereN@pinned|rotinv)");
}

inline SpacePoint parse_point(std::string_view s) {
  auto colon = s.find(':');
  if (colon == std::string_view::npos)
    throw std::invalid_argument("point literal needs 'kind:coords': '" + std::string(s) + "'");
  auto kind = s.substr(0, colon);
  auto body = s.substr(colon + 1);
  if (kind == "half-line") {
    auto v = detail::parse_number_list(body, s);
    if (v.size() != 1) throw std::invalid_argument("half-line point takes one coordinate");
    return SpacePoint::on_half_line(v[0]);
  }
  if (kind == "full-line") {
    auto v = detail::parse_number_list(body, s);
    if (v.size() != 1) throw std::invalid_argument("full-line point takes one coordinate");
    return SpacePoint::on_full_line(v[0]);
  }
  if (kind == "rn") return SpacePoint::in_rn(detail::parse_number_list(body, s));
  if (kind == "sphere1" || kind == "sphere2") {
    auto at = body.find('@');
    auto mode = detail::parse_sphere_mode(
        at == std::string_view::npos ? std::string_view{} : body.substr(at + 1), s);
    auto v = detail::parse_number_list(body.substr(0, at), s);
    if (kind == "sphere1") {
      if (v.size() != 1) throw std::invalid_argument("sphere1 point takes one angle");
      return SpacePoint::on_sphere1(v[0], mode);
    }
    if (v.size() != 2) throw std::invalid_argument("sphere2 point takes theta,phi");
    return SpacePoint::on_sphere2(v[0], v[1], mode);
  }
  throw std::invalid_argument("unknown point kind '" + std::string(kind) + "'");
}

}  // namespace logcorr
