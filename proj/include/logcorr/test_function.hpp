#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "logcorr/metric_space.hpp"
#include "logcorr/quadrature.hpp"

namespace logcorr {

// An integrable weight f with the data needed to certify membership in the decay classes:
// decay exponent delta, a sup-norm bound, support bounds and break points.  On R^n and on
// spheres the same object is read as a radial profile (of |x|, or of the polar angle).
//
// A function is a finite sum of primitive terms:
//   indicator:a,b    1 on [a,b]
//   exp:rate         e^{-rate s} for s >= 0
//   gauss:c,w        e^{-(s-c)^2 / (2 w^2)}
//   polydecay:p      (1+s)^{-p} for s >= 0, p > 1
//   zero
// Callables are allowed but uncertified; covariance routines reject them.
class TestFunction {
 public:
  enum class Kind { Indicator, Exp, Gauss, PolyDecay, Callable };

  struct Term {
    Kind kind;
    double coef;
    double p1 = 0.0, p2 = 0.0;
    std::function<double(double)> fn{};
    double lo = 0.0, hi = 0.0;  // support of a callable term
  };

  TestFunction() : label_("zero") {}

  static TestFunction zero() { return {}; }
  static TestFunction indicator(double a, double b) {
    if (!(a < b)) throw std::invalid_argument("indicator:a,b needs a < b");
    return single({Kind::Indicator, 1.0, a, b}, "indicator:" + num(a) + "," + num(b));
  }
  static TestFunction exponential(double rate) {
    if (!(rate > 0.0)) throw std::invalid_argument("exp:rate needs rate > 0");
    return single({Kind::Exp, 1.0, rate}, "exp:" + num(rate));
  }
  static TestFunction gaussian(double c, double w) {
    if (!(w > 0.0)) throw std::invalid_argument("gauss:c,w needs w > 0");
    return single({Kind::Gauss, 1.0, c, w}, "gauss:" + num(c) + "," + num(w));
  }
  static TestFunction polydecay(double p) {
    if (!(p > 1.0)) throw std::invalid_argument("polydecay:p needs p > 1");
    return single({Kind::PolyDecay, 1.0, p}, "polydecay:" + num(p));
  }
  // Uncertified: evaluation works, covariance functionals refuse it.
  static TestFunction from_callable(std::function<double(double)> fn, double lo, double hi,
                                    std::string label) {
    Term t{Kind::Callable, 1.0};
    t.fn = std::move(fn);
    t.lo = lo;
    t.hi = hi;
    return single(std::move(t), std::move(label));
  }

  const std::string& label() const { return label_; }
  bool certified() const {
    return std::none_of(terms_.begin(), terms_.end(),
                        [](const Term& t) { return t.kind == Kind::Callable; });
  }
  bool is_zero() const { return terms_.empty(); }
  const std::vector<Term>& terms() const { return terms_; }

  double operator()(double s) const {
    double v = 0.0;
    for (const auto& t : terms_) v += t.coef * eval(t, s);
    return v;
  }

  TestFunction scaled(double c) const {
    if (c == 0.0) return zero();
    TestFunction r = *this;
    for (auto& t : r.terms_) t.coef *= c;
    r.label_ = num(c) + "*" + (terms_.size() > 1 ? "(" + label_ + ")" : label_);
    if (terms_.empty()) r.label_ = "zero";
    return r;
  }

  friend TestFunction operator+(const TestFunction& a, const TestFunction& b) {
    if (a.is_zero()) return b;
    if (b.is_zero()) return a;
    TestFunction r = a;
    r.terms_.insert(r.terms_.end(), b.terms_.begin(), b.terms_.end());
    r.label_ = a.label_ + "+" + b.label_;
    return r;
  }

  // Decay certificate: int_1^inf s^delta |f(s)| ds < inf.  Infinite for compact or
  // exponentially decaying terms; p - 1 - 0.05 (floored at 0) for polydecay.
  double delta() const {
    double d = std::numeric_limits<double>::infinity();
    for (const auto& t : terms_)
      if (t.kind == Kind::PolyDecay) d = std::min(d, std::max(0.0, t.p1 - 1.0 - 0.05));
    return d;
  }

  double sup_norm() const {
    double s = 0.0;
    for (const auto& t : terms_) {
      if (t.kind == Kind::Callable) return std::numeric_limits<double>::infinity();
      s += std::abs(t.coef);
    }
    return s;
  }

  // Support bounds (hi may be +inf, lo may be -inf).
  double support_lo() const {
    double v = std::numeric_limits<double>::infinity();
    for (const auto& t : terms_) v = std::min(v, term_lo(t));
    return terms_.empty() ? 0.0 : v;
  }
  double support_hi() const {
    double v = -std::numeric_limits<double>::infinity();
    for (const auto& t : terms_) v = std::max(v, term_hi(t));
    return terms_.empty() ? 0.0 : v;
  }
  bool compact() const { return std::isfinite(support_lo()) && std::isfinite(support_hi()); }

  std::vector<double> breakpoints() const {
    std::vector<double> b;
    for (const auto& t : terms_) {
      switch (t.kind) {
        case Kind::Indicator: b.push_back(t.p1); b.push_back(t.p2); break;
        case Kind::Exp:
        case Kind::PolyDecay: b.push_back(0.0); break;
        case Kind::Gauss: b.push_back(t.p1); break;
        case Kind::Callable: b.push_back(t.lo); b.push_back(t.hi); break;
      }
    }
    std::sort(b.begin(), b.end());
    b.erase(std::unique(b.begin(), b.end()), b.end());
    return b;
  }

  // Upper truncation point T with int_T^inf |f(s)| (1 + log(1+s)) ds <= tol.
  double tail_hi(double tol) const {
    double T = -std::numeric_limits<double>::infinity();
    const double per = tol / std::max<std::size_t>(1, terms_.size());
    for (const auto& t : terms_) T = std::max(T, term_tail_hi(t, per));
    return terms_.empty() ? 0.0 : T;
  }
  // Lower truncation point, same criterion on (-inf, T].
  double tail_lo(double tol) const {
    double T = std::numeric_limits<double>::infinity();
    const double per = tol / std::max<std::size_t>(1, terms_.size());
    for (const auto& t : terms_) {
      if (t.kind == Kind::Gauss) {
        T = std::min(T, t.p1 - gauss_halfwidth(t, per));
      } else {
        T = std::min(T, term_lo(t));
      }
    }
    return terms_.empty() ? 0.0 : T;
  }

  // int_0^x f(s) ds (signed for x < 0).
  double antiderivative(double x) const {
    double v = 0.0;
    for (const auto& t : terms_) v += t.coef * (term_primitive(t, x) - term_primitive(t, 0.0));
    return v;
  }

  // int_lo^hi f(s) ds.
  double integral(double lo, double hi) const {
    double v = 0.0;
    for (const auto& t : terms_) v += t.coef * (term_primitive(t, hi) - term_primitive(t, lo));
    return v;
  }

  // int_0^inf f(s) e^{-z s} ds for z >= 0.
  double laplace(double z) const {
    double v = 0.0;
    for (const auto& t : terms_) v += t.coef * term_laplace(t, z);
    return v;
  }

  // Upper bound on int |f| over [lo_clip, inf).
  double l1_bound(double lo_clip = -std::numeric_limits<double>::infinity()) const {
    double v = 0.0;
    for (const auto& t : terms_) {
      const double lo = std::max(lo_clip, term_lo(t));
      const double hi = term_hi(t);
      if (hi <= lo) continue;
      if (t.kind == Kind::Callable) return std::numeric_limits<double>::infinity();
      v += std::abs(t.coef) * (term_primitive(t, hi) - term_primitive(t, lo));
    }
    return v;
  }

 private:
  std::vector<Term> terms_;
  std::string label_;

  static TestFunction single(Term t, std::string label) {
    TestFunction f;
    f.terms_.push_back(std::move(t));
    f.label_ = std::move(label);
    return f;
  }

  static std::string num(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
  }

  static double eval(const Term& t, double s) {
    switch (t.kind) {
      case Kind::Indicator: return (s >= t.p1 && s <= t.p2) ? 1.0 : 0.0;
      case Kind::Exp: return s >= 0.0 ? std::exp(-t.p1 * s) : 0.0;
      case Kind::Gauss: {
        const double z = (s - t.p1) / t.p2;
        return std::exp(-0.5 * z * z);
      }
      case Kind::PolyDecay: return s >= 0.0 ? std::exp(-t.p1 * std::log1p(s)) : 0.0;
      case Kind::Callable: return (s >= t.lo && s <= t.hi) ? t.fn(s) : 0.0;
    }
    return 0.0;
  }

  static double term_lo(const Term& t) {
    switch (t.kind) {
      case Kind::Indicator: return t.p1;
      case Kind::Exp:
      case Kind::PolyDecay: return 0.0;
      case Kind::Gauss: return -std::numeric_limits<double>::infinity();
      case Kind::Callable: return t.lo;
    }
    return 0.0;
  }
  static double term_hi(const Term& t) {
    switch (t.kind) {
      case Kind::Indicator: return t.p2;
      case Kind::Exp:
      case Kind::PolyDecay:
      case Kind::Gauss: return std::numeric_limits<double>::infinity();
      case Kind::Callable: return t.hi;
    }
    return 0.0;
  }

  static double gauss_halfwidth(const Term& t, double tol) {
    // int_{c+x}^inf e^{-(s-c)^2/2w^2} (1 + log(1+|s|)) ds <= w sqrt(pi/2) erfc(x/(sqrt2 w)) (2 + log(1+|c|+x+...))
    const double a = std::abs(t.coef);
    double x = t.p2;
    for (int i = 0; i < 200; ++i) {
      const double bound = a * t.p2 * std::sqrt(0.5 * std::numbers::pi) *
                           std::erfc(x / (std::numbers::sqrt2 * t.p2)) *
                           (2.0 + std::log1p(std::abs(t.p1) + x)) * 2.0;
      if (bound <= tol) break;
      x *= 1.1;
    }
    return x;
  }

  static double term_tail_hi(const Term& t, double tol) {
    const double a = std::abs(t.coef);
    switch (t.kind) {
      case Kind::Indicator: return t.p2;
      case Kind::Callable: return t.hi;
      case Kind::Gauss: return t.p1 + gauss_halfwidth(t, tol);
      case Kind::Exp: {
        // int_T^inf e^{-k s}(1 + log(1+s)) ds <= e^{-kT}(1 + log(1+T) + 1/k)/k
        const double k = t.p1;
        double T = 1.0 / k;
        for (int i = 0; i < 100; ++i) {
          const double Tn = std::log(a * (1.0 + std::log1p(T) + 1.0 / k) / (k * tol)) / k;
          if (!(Tn > 0.0)) return 0.0;
          if (std::abs(Tn - T) < 1e-9 * T) {
            T = Tn;
            break;
          }
          T = Tn;
        }
        return T;
      }
      case Kind::PolyDecay: {
        // (1+T)^{1-p} [(1 + log(1+T))/(p-1) + 1/(p-1)^2]
        const double p = t.p1;
        auto bound = [&](double T) {
          const double l = std::log1p(T);
          return a * std::exp((1.0 - p) * l) * ((1.0 + l) / (p - 1.0) + 1.0 / ((p - 1.0) * (p - 1.0)));
        };
        double lo = 0.0, hi = 1.0;
        if (bound(0.0) <= tol) return 0.0;
        while (bound(hi) > tol && hi < 1e300) hi *= 2.0;
        for (int i = 0; i < 200; ++i) {
          const double mid = 0.5 * (lo + hi);
          (bound(mid) > tol ? lo : hi) = mid;
        }
        return hi;
      }
    }
    return 0.0;
  }

  static double term_primitive(const Term& t, double x) {
    switch (t.kind) {
      case Kind::Indicator: return std::clamp(x, t.p1, t.p2) - t.p1;
      case Kind::Exp: return x <= 0.0 ? 0.0 : -std::expm1(-t.p1 * x) / t.p1;
      case Kind::PolyDecay:
        return x <= 0.0 ? 0.0 : -std::expm1((1.0 - t.p1) * std::log1p(x)) / (t.p1 - 1.0);
      case Kind::Gauss:
        return t.p2 * std::sqrt(0.5 * std::numbers::pi) *
               std::erf((x - t.p1) / (std::numbers::sqrt2 * t.p2));
      case Kind::Callable: {
        const double lo = t.lo, hi = std::clamp(x, t.lo, t.hi);
        if (hi <= lo) return 0.0;
        QuadratureSettings q;
        q.abs_tol = 1e-13;
        q.rel_tol = 1e-12;
        return integrate(t.fn, lo, hi, q).value;
      }
    }
    return 0.0;
  }

  static double term_laplace(const Term& t, double z) {
    switch (t.kind) {
      case Kind::Indicator: {
        const double a = std::max(t.p1, 0.0), b = std::max(t.p2, 0.0);
        if (b <= a) return 0.0;
        if (z == 0.0) return b - a;
        return std::exp(-z * a) * (-std::expm1(-z * (b - a))) / z;
      }
      case Kind::Exp: return 1.0 / (t.p1 + z);
      default: break;
    }
    // Smooth terms without a convenient closed form: adaptive quadrature on [0, T].
    const double lo = std::max(0.0, term_lo(t));
    double hi = term_tail_hi(t, 1e-14);
    if (z > 0.0) hi = std::min(hi, lo + 40.0 / z);
    if (hi <= lo) return 0.0;
    std::vector<double> br;
    for (double x = 1e-3; x < hi; x *= 10.0) br.push_back(lo + x);
    if (t.kind == Kind::Gauss) br.push_back(t.p1);
    QuadratureSettings q;
    q.abs_tol = 1e-14;
    q.rel_tol = 1e-12;
    return integrate([&](double s) { return eval(t, s) * std::exp(-z * s); }, lo, hi, q, br).value;
  }
};

// Parses "indicator:a,b", "exp:r", "gauss:c,w", "polydecay:p", "zero", with an optional "c*" prefix.
inline TestFunction parse_test_function(std::string_view s) {
  const std::string lit(s);
  double scale = 1.0;
  if (auto star = s.find('*'); star != std::string_view::npos) {
    auto v = detail::parse_number_list(s.substr(0, star), lit);
    if (v.size() != 1) throw std::invalid_argument("malformed scale in '" + lit + "'");
    scale = v[0];
    s = s.substr(star + 1);
  }
  TestFunction f;
  if (s == "zero") {
    f = TestFunction::zero();
  } else {
    auto colon = s.find(':');
    if (colon == std::string_view::npos)
      throw std::invalid_argument("malformed function spec '" + lit + "'");
    auto kind = s.substr(0, colon);
    auto args = detail::parse_number_list(s.substr(colon + 1), lit);
    auto need = [&](std::size_t n) {
      if (args.size() != n)
        throw std::invalid_argument("function spec '" + lit + "' expects " + std::to_string(n) +
                                    " parameter(s)");
    };
    if (kind == "indicator") {
      need(2);
      f = TestFunction::indicator(args[0], args[1]);
    } else if (kind == "exp") {
      need(1);
      f = TestFunction::exponential(args[0]);
    } else if (kind == "gauss") {
      need(2);
      f = TestFunction::gaussian(args[0], args[1]);
    } else if (kind == "polydecay") {
      need(1);
      f = TestFunction::polydecay(args[0]);
    } else {
      throw std::invalid_argument("unknown function kind '" + std::string(kind) + "' in '" + lit + "'");
    }
  }
  return scale == 1.0 ? f : f.scaled(scale);
}

}  // namespace logcorr
