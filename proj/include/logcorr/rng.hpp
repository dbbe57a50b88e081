#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "logcorr/metric_space.hpp"

namespace logcorr {

// Philox4x32-10 block function (Salmon et al., "Parallel random numbers: as easy as 1, 2, 3").
struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static constexpr std::uint32_t kM0 = 0xD2511F53u, kM1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kW0 = 0x9E3779B9u, kW1 = 0xBB67AE85u;

  static constexpr Counter round(const Counter& c, const Key& k) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * c[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * c[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
    return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
  }

  static constexpr Counter block(Counter c, Key k) {
    for (int i = 0; i < 10; ++i) {
      c = round(c, k);
      k[0] += kW0;
      k[1] += kW1;
    }
    return c;
  }
};

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Counter-based stream addressed by (seed, replicate, substream).  Two streams with different
// addresses never share a Philox input block: the address sits in the counter, and the key is
// a hash of the full address on top of that.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t replicate = 0, std::uint64_t substream = 0)
      : seed_(seed), rep_(replicate), sub_(substream) {
    const std::uint64_t h = splitmix64(seed ^ splitmix64(replicate ^ splitmix64(substream)));
    key_ = {static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t replicate() const { return rep_; }
  std::uint64_t substream() const { return sub_; }

  // Independent stream for a nested work unit.
  RngStream child(std::uint64_t id) const {
    return RngStream(splitmix64(seed_ ^ 0xA5A5A5A5DEADBEEFull) ^ rep_,
                     splitmix64(sub_ + 0x632BE59BD9B4E019ull) ^ id, id);
  }

  std::uint32_t next_u32() {
    if (pos_ == 4) refill();
    return buf_[pos_++];
  }

  std::uint64_t next_u64() {
    const std::uint64_t hi = next_u32();
    return (hi << 32) | next_u32();
  }

  // Uniform on [0,1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform on (0,1): exact zeros are rejected.
  double uniform_open() {
    for (;;) {
      const double u = uniform();
      if (u > 0.0) return u;
    }
  }

  double exponential() { return -std::log(uniform_open()); }

  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform_open(), u2 = uniform();
    const double rad = std::sqrt(-2.0 * std::log(u1));
    const double ang = 2.0 * std::numbers::pi * u2;
    spare_ = rad * std::sin(ang);
    has_spare_ = true;
    return rad * std::cos(ang);
  }

  bool bernoulli(double p) { return uniform() < p; }

 private:
  void refill() {
    Philox4x32::Counter c{static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32),
                          static_cast<std::uint32_t>(rep_ ^ (rep_ >> 32)),
                          static_cast<std::uint32_t>(sub_ ^ (sub_ >> 32))};
    buf_ = Philox4x32::block(c, key_);
    ++block_;
    pos_ = 0;
  }

  std::uint64_t seed_, rep_, sub_;
  Philox4x32::Key key_{};
  std::uint64_t block_ = 0;
  Philox4x32::Counter buf_{};
  int pos_ = 4;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

inline double sample_gaussian(RngStream& s) { return s.gaussian(); }

// Symmetric alpha-stable with E exp(i theta X) = exp(-|theta|^alpha) (Chambers-Mallows-Stuck).
inline double sample_sas(RngStream& s, double alpha) {
  if (!(alpha > 0.0 && alpha <= 2.0)) throw std::domain_error("alpha outside (0,2]");
  if (alpha == 2.0) return std::numbers::sqrt2 * s.gaussian();
  const double V = std::numbers::pi * (s.uniform_open() - 0.5);
  if (alpha == 1.0) return std::tan(V);
  const double W = s.exponential();
  return std::sin(alpha * V) / std::pow(std::cos(V), 1.0 / alpha) *
         std::pow(std::cos((1.0 - alpha) * V) / W, (1.0 - alpha) / alpha);
}

// Positive beta-stable S with E exp(-theta S) = exp(-r theta^beta) (Kanter's representation).
inline double sample_subordinator(RngStream& s, double beta, double r) {
  if (!(beta > 0.0 && beta <= 1.0)) throw std::domain_error("beta outside (0,1]");
  if (!(r > 0.0)) throw std::domain_error("subordinator scale r must be > 0");
  if (beta == 1.0) return r;
  const double U = std::numbers::pi * s.uniform_open();
  const double W = s.exponential();
  const double S = std::sin(beta * U) / std::pow(std::sin(U), 1.0 / beta) *
                   std::pow(std::sin((1.0 - beta) * U) / W, (1.0 - beta) / beta);
  return std::pow(r, 1.0 / beta) * S;
}

// Poisson(lambda): inversion for small means, PTRS (Hormann 1993) otherwise.
inline std::uint64_t sample_poisson(RngStream& s, double lambda) {
  if (!(lambda >= 0.0)) throw std::domain_error("Poisson mean must be >= 0");
  if (lambda == 0.0) return 0;
  if (lambda < 10.0) {
    const double u = s.uniform();
    double p = std::exp(-lambda), cdf = p;
    std::uint64_t k = 0;
    while (u >= cdf && k < 1000) {
      ++k;
      p *= lambda / static_cast<double>(k);
      cdf += p;
    }
    return k;
  }
  const double slam = std::sqrt(lambda), loglam = std::log(lambda);
  const double b = 0.931 + 2.53 * slam;
  const double a = -0.059 + 0.02483 * b;
  const double invalpha = 1.1239 + 1.1328 / (b - 3.4);
  const double vr = 0.9277 - 3.6224 / (b - 2.0);
  for (;;) {
    const double U = s.uniform() - 0.5;
    const double V = s.uniform();
    const double us = 0.5 - std::abs(U);
    const double k = std::floor((2.0 * a / us + b) * U + lambda + 0.43);
    if (us >= 0.07 && V <= vr) return static_cast<std::uint64_t>(k);
    if (k < 0.0 || (us < 0.013 && V > us)) continue;
    if (std::log(V) + std::log(invalpha) - std::log(a / (us * us) + b) <=
        -lambda + k * loglam - std::lgamma(k + 1.0))
      return static_cast<std::uint64_t>(k);
  }
}

// P(Poisson(lambda) is odd) = (1 - e^{-2 lambda}) / 2.
inline double poisson_odd_probability(double lambda) { return -0.5 * std::expm1(-2.0 * lambda); }

// Arrival times of a rate-`rate` Poisson process on [0, horizon].
inline std::vector<double> sample_poisson_path(RngStream& s, double rate, double horizon) {
  if (!(rate >= 0.0) || !(horizon > 0.0))
    throw std::domain_error("Poisson path needs rate >= 0 and horizon > 0");
  std::vector<double> t;
  if (rate == 0.0) return t;
  double x = 0.0;
  for (;;) {
    x += s.exponential() / rate;
    if (x > horizon) break;
    t.push_back(x);
  }
  return t;
}

// Poisson point process on S^n with intensity `intensity` against lambda (total mass pi):
// Poisson(intensity * pi) uniform points.
inline std::vector<std::vector<double>> sample_sphere_ppp(RngStream& s, const Space& sp,
                                                          double intensity) {
  if (sp.kind != SpaceKind::Sphere) throw std::domain_error("sample_sphere_ppp needs a sphere");
  if (!(intensity >= 0.0)) throw std::domain_error("intensity must be >= 0");
  const auto n = sample_poisson(s, intensity * sp.total_mass());
  std::vector<std::vector<double>> pts;
  pts.reserve(n);
  const int D = sp.ambient_dim();
  for (std::uint64_t i = 0; i < n; ++i) {
    std::vector<double> u(D);
    if (D == 3) {
      const double z = 2.0 * s.uniform() - 1.0;
      const double phi = 2.0 * std::numbers::pi * s.uniform();
      const double rxy = std::sqrt(std::max(0.0, 1.0 - z * z));
      u = {rxy * std::cos(phi), rxy * std::sin(phi), z};
    } else {
      double nn = 0.0;
      do {
        nn = 0.0;
        for (auto& c : u) {
          c = s.gaussian();
          nn += c * c;
        }
      } while (nn == 0.0);
      nn = std::sqrt(nn);
      for (auto& c : u) c /= nn;
    }
    pts.push_back(std::move(u));
  }
  return pts;
}

}  // namespace logcorr
