#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "logcorr/rng.hpp"

namespace logcorr {

// int_0^T 1{N(t) odd} f(t) dt for sorted arrivals of N, given F = int_0^. f.
template <class Prim>
double odd_run_integral(const std::vector<double>& arrivals, double T, Prim&& F) {
  double v = 0.0;
  std::size_t i = 0;
  for (; i + 1 < arrivals.size(); i += 2) v += F(arrivals[i + 1]) - F(arrivals[i]);
  if (i < arrivals.size() && arrivals[i] < T) v += F(T) - F(arrivals[i]);
  return v;
}

// Arrivals of a rate-`rate` Poisson process on [0, T], appended to `out` (cleared first).
inline void poisson_arrivals(RngStream& s, double rate, double T, std::vector<double>& out) {
  out.clear();
  if (!(rate > 0.0) || !(T > 0.0)) return;
  double x = 0.0;
  for (;;) {
    x += s.exponential() / rate;
    if (x > T) return;
    out.push_back(x);
  }
}

// Parities of N(lambda_k * t_k) for increasing t_k, N a unit Poisson process: each
// increment's parity is Bernoulli((1 - e^{-2 dt}) / 2), so no path is materialized.
inline void poisson_parities(RngStream& s, double rate, const std::vector<double>& sorted_times,
                             std::vector<int>& out) {
  out.resize(sorted_times.size());
  int par = 0;
  double prev = 0.0;
  for (std::size_t k = 0; k < sorted_times.size(); ++k) {
    const double dt = (sorted_times[k] - prev) * rate;
    if (dt > 0.0 && s.uniform() < poisson_odd_probability(dt)) par ^= 1;
    out[k] = par;
    prev = sorted_times[k];
  }
}

// Measure of {phi in [0, 2 pi) : parity odd} where the parity is `base` XOR the indicators of
// the arcs [c_i - w_i, c_i + w_i] (centers in [0, 2 pi), half-widths in (0, pi)).
class CircleParity {
 public:
  void reset(int base) {
    base_ = base & 1;
    cuts_.clear();
  }
  void flip_all() { base_ ^= 1; }
  void add_arc(double c, double w) {
    constexpr double tau = 2.0 * std::numbers::pi;
    double a = c - w, b = c + w;
    if (a < 0.0) {
      base_ ^= 1;
      cuts_.push_back(b);
      cuts_.push_back(a + tau);
    } else if (b > tau) {
      base_ ^= 1;
      cuts_.push_back(b - tau);
      cuts_.push_back(a);
    } else {
      cuts_.push_back(a);
      cuts_.push_back(b);
    }
  }
  double odd_measure() {
    constexpr double tau = 2.0 * std::numbers::pi;
    std::sort(cuts_.begin(), cuts_.end());
    int par = base_;
    double prev = 0.0, odd = 0.0;
    for (double x : cuts_) {
      if (par) odd += x - prev;
      par ^= 1;
      prev = x;
    }
    if (par) odd += tau - prev;
    return odd;
  }

 private:
  int base_ = 0;
  std::vector<double> cuts_;
};

}  // namespace logcorr
