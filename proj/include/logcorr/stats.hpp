#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace logcorr {

// Replicate-by-coordinate samples, row-major.
struct SampleMatrix {
  std::size_t rows = 0, cols = 0;
  std::vector<double> data;
  std::vector<std::string> labels;
  nlohmann::json plan = nlohmann::json::object();

  SampleMatrix() = default;
  SampleMatrix(std::size_t r, std::size_t c, std::vector<std::string> lab = {})
      : rows(r), cols(c), data(r * c, 0.0), labels(std::move(lab)) {
    if (labels.empty())
      for (std::size_t j = 0; j < c; ++j) labels.push_back("c" + std::to_string(j));
    if (labels.size() != c) throw std::invalid_argument("label count does not match columns");
  }

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  std::vector<double> column(std::size_t j) const {
    std::vector<double> v(rows);
    for (std::size_t i = 0; i < rows; ++i) v[i] = (*this)(i, j);
    return v;
  }
};

// Samples plus machine-readable diagnostics and non-fatal warnings from one simulation run.
struct RunResult {
  SampleMatrix samples;
  nlohmann::json diagnostics = nlohmann::json::object();
  std::vector<std::string> warnings;
};

struct EstimateReport {
  std::string name;
  double estimate = 0.0;
  double se = 0.0;
  std::uint64_t n = 0;
  std::optional<double> target;
  std::optional<double> z;
  std::uint64_t seed = 0;
  nlohmann::json plan = nlohmann::json::object();

  void set_target(double t) {
    target = t;
    if (se > 0.0) z = (estimate - t) / se;
  }
};

inline void to_json(nlohmann::json& j, const EstimateReport& r) {
  j = nlohmann::json{{"name", r.name}, {"estimate", r.estimate}, {"se", r.se}, {"n", r.n},
                     {"seed", r.seed}, {"plan", r.plan}};
  j["target"] = r.target ? nlohmann::json(*r.target) : nlohmann::json(nullptr);
  j["z"] = r.z ? nlohmann::json(*r.z) : nlohmann::json(nullptr);
}

inline void from_json(const nlohmann::json& j, EstimateReport& r) {
  r.name = j.at("name").get<std::string>();
  r.estimate = j.at("estimate").get<double>();
  r.se = j.at("se").get<double>();
  r.n = j.at("n").get<std::uint64_t>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.plan = j.value("plan", nlohmann::json::object());
  r.target = j.at("target").is_null() ? std::nullopt : std::optional<double>(j.at("target").get<double>());
  r.z = j.at("z").is_null() ? std::nullopt : std::optional<double>(j.at("z").get<double>());
}

struct MeanEstimate {
  double mean = 0.0, se = 0.0;
};

inline MeanEstimate mean_se(const std::vector<double>& x) {
  if (x.size() < 2) throw std::invalid_argument("need at least 2 samples");
  const double n = static_cast<double>(x.size());
  double s = 0.0;
  for (double v : x) s += v;
  const double m = s / n;
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return {m, std::sqrt(ss / (n - 1.0) / n)};
}

// Unbiased variance with a standard error from the sample fourth central moment,
// SE^2 = (m4 - s^4 (n-3)/(n-1)) / n; it does not assume Gaussian data.
inline MeanEstimate variance_se(const std::vector<double>& x) {
  if (x.size() < 4) throw std::invalid_argument("need at least 4 samples");
  const double n = static_cast<double>(x.size());
  double s = 0.0;
  for (double v : x) s += v;
  const double m = s / n;
  double m2 = 0.0, m4 = 0.0;
  for (double v : x) {
    const double d = (v - m) * (v - m);
    m2 += d;
    m4 += d * d;
  }
  const double var = m2 / (n - 1.0);
  m4 /= n;
  const double se2 = std::max(0.0, (m4 - var * var * (n - 3.0) / (n - 1.0)) / n);
  return {var, std::sqrt(se2)};
}

struct CovEstimate {
  Eigen::MatrixXd cov;
  Eigen::MatrixXd se;  // Wick approximation sqrt((C_ii C_jj + C_ij^2) / N)
  std::size_t n = 0;
};

inline CovEstimate empirical_cov(const SampleMatrix& s) {
  if (s.rows < 2) throw std::invalid_argument("empirical_cov needs at least 2 replicates");
  const std::size_t k = s.cols;
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(k);
  for (std::size_t i = 0; i < s.rows; ++i)
    for (std::size_t j = 0; j < k; ++j) mean(j) += s(i, j);
  mean /= static_cast<double>(s.rows);
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(k, k);
  Eigen::VectorXd d(k);
  for (std::size_t i = 0; i < s.rows; ++i) {
    for (std::size_t j = 0; j < k; ++j) d(j) = s(i, j) - mean(j);
    c.noalias() += d * d.transpose();
  }
  c /= static_cast<double>(s.rows - 1);
  CovEstimate out{c, Eigen::MatrixXd(k, k), s.rows};
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = 0; b < k; ++b)
      out.se(a, b) = std::sqrt((c(a, a) * c(b, b) + c(a, b) * c(a, b)) / static_cast<double>(s.rows));
  return out;
}

struct ChfPoint {
  double theta = 0.0, re = 1.0, im = 0.0, se_re = 0.0, se_im = 0.0;
};

inline std::vector<ChfPoint> empirical_chf(const std::vector<double>& x,
                                           const std::vector<double>& thetas) {
  if (x.size() < 2) throw std::invalid_argument("empirical_chf needs at least 2 replicates");
  std::vector<ChfPoint> out;
  for (double th : thetas) {
    ChfPoint p;
    p.theta = th;
    if (th == 0.0) {
      out.push_back(p);
      continue;
    }
    std::vector<double> c(x.size()), s(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      c[i] = std::cos(th * x[i]);
      s[i] = std::sin(th * x[i]);
    }
    auto mc = mean_se(c), ms = mean_se(s);
    p.re = mc.mean;
    p.se_re = mc.se;
    p.im = ms.mean;
    p.se_im = ms.se;
    out.push_back(p);
  }
  return out;
}

struct PsdReport {
  double min_eigenvalue = 0.0;
  bool pass = false;
};

inline PsdReport psd_check(const Eigen::MatrixXd& m, double tolerance) {
  if (m.rows() != m.cols()) throw std::invalid_argument("psd_check needs a square matrix");
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
    throw std::invalid_argument("psd_check needs a symmetric matrix");
  if (m.rows() == 0) return {0.0, true};
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()),
                                                    Eigen::EigenvaluesOnly);
  const double mn = es.eigenvalues().minCoeff();
  return {mn, mn >= -tolerance};
}

// Symmetric square root factor L with L L^T = C after clipping eigenvalues in [-clip_error, 0)
// to zero; eigenvalues below -clip_error mean the matrix is not a covariance.
inline Eigen::MatrixXd psd_factor(const Eigen::MatrixXd& c, double clip_error = 1e-8) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (c + c.transpose()));
  Eigen::VectorXd ev = es.eigenvalues();
  if (ev.size() > 0 && ev.minCoeff() < -clip_error)
    throw std::runtime_error("covariance matrix is not positive semidefinite (min eigenvalue " +
                             std::to_string(ev.minCoeff()) + ")");
  for (int i = 0; i < ev.size(); ++i) ev(i) = ev(i) > 0.0 ? std::sqrt(ev(i)) : 0.0;
  return es.eigenvectors() * ev.asDiagonal();
}

}  // namespace logcorr
