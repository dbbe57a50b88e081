#pragma once

#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "logcorr/acceptance.hpp"
#include "logcorr/aggregated.hpp"
#include "logcorr/cov_functional.hpp"
#include "logcorr/kernels.hpp"
#include "logcorr/metric_space.hpp"
#include "logcorr/parallel.hpp"
#include "logcorr/sampler.hpp"
#include "logcorr/stats.hpp"
#include "logcorr/test_function.hpp"

namespace logcorr::cli {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string command;  // kernel | cov | simulate | clt | verify | export
  std::string target;   // simulate kind, verify criterion, export kind

  std::string space = "half-line";
  double H = 0.5;
  std::optional<double> K;
  std::string x, y;
  std::string kind = "gamma";
  double r = 1.0;
  int j = 1;

  std::vector<std::string> f;
  std::string g;
  std::optional<double> eps;

  std::uint64_t reps = 1000;
  std::uint64_t seed = 1;
  int threads = 1;
  std::string out, csv;

  int n = 1024;
  std::uint64_t m = 65536;
  double alpha = 2.0;
  double beta = 1.0;
  std::string theta = "0.25,0.5,1,2";
  double r_star = 64.0;
  std::string norm = "limit-matched";
  std::string model = "auto";  // cells | points | auto
  int ring_nodes = 32;

  std::string times = "0.5,1,2,3";
  std::string method = "exact";
  DiscretizationGrid grid;
  double reps_scale = 1.0;

  // Parsed forms, filled by validate().
  std::vector<TestFunction> functions() const;
  Space parsed_space() const { return parse_space(space); }
};

namespace detail {

inline std::string trim(std::string s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

// Function specs may be repeated or joined by ';'.
inline std::vector<std::string> split_specs(const std::vector<std::string>& in) {
  std::vector<std::string> out;
  for (const auto& s : in) {
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ';'))
      if (!trim(tok).empty()) out.push_back(trim(tok));
  }
  return out;
}

inline std::vector<double> number_list(const std::string& s, const std::string& key) {
  try {
    return logcorr::detail::parse_number_list(s, key);
  } catch (const std::exception& e) {
    throw ConfigError(key + ": " + e.what());
  }
}

// Point literal; a bare coordinate list is read in the configured space.
inline SpacePoint point_in(const Space& sp, const std::string& s, const std::string& key) {
  std::string lit = s;
  if (s.find(':') == std::string::npos) {
    switch (sp.kind) {
      case SpaceKind::HalfLine: lit = "half-line:" + s; break;
      case SpaceKind::FullLine: lit = "full-line:" + s; break;
      case SpaceKind::Euclidean: lit = "rn:" + s; break;
      case SpaceKind::Sphere:
        lit = "sphere" + std::to_string(sp.dim) + ":" + s +
              (sp.mode == SphereMode::Pinned ? "@pinned" : "@rotinv");
        break;
    }
  }
  SpacePoint p;
  try {
    p = parse_point(lit);
  } catch (const std::exception& e) {
    throw ConfigError(key + ": " + e.what());
  }
  if (!(p.space == sp)) throw ConfigError(key + ": point " + lit + " is not in space " + sp.name());
  return p;
}

inline std::map<std::string, std::pair<std::string, int>> read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  std::map<std::string, std::pair<std::string, int>> kv;
  std::string line;
  int no = 0;
  while (std::getline(in, line)) {
    ++no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config " + path + ":" + std::to_string(no) + ": expected key = value");
    std::string k = trim(line.substr(0, eq)), v = trim(line.substr(eq + 1));
    if (v.size() >= 2 && v.front() == '"' && v.back() == '"') v = v.substr(1, v.size() - 2);
    for (auto& c : k)
      if (c == '_') c = '-';
    if (k.empty()) throw ConfigError("config " + path + ":" + std::to_string(no) + ": empty key");
    kv[k] = {v, no};
  }
  return kv;
}

}  // namespace detail

inline std::vector<TestFunction> RunConfig::functions() const {
  std::vector<TestFunction> fs;
  for (const auto& s : detail::split_specs(f)) {
    try {
      fs.push_back(parse_test_function(s));
    } catch (const std::exception& e) {
      throw ConfigError("f: " + std::string(e.what()));
    }
  }
  return fs;
}

inline std::string format_double(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

inline void validate(const RunConfig& c) {
  static const std::vector<std::string> commands{"kernel", "cov", "simulate", "clt", "verify", "export"};
  if (std::find(commands.begin(), commands.end(), c.command) == commands.end())
    throw ConfigError("command: unknown subcommand '" + c.command + "'");
  Space sp;
  try {
    sp = parse_space(c.space);
  } catch (const std::exception& e) {
    throw ConfigError("space: " + std::string(e.what()));
  }
  if (!(c.H > 0.0 && c.H <= 0.5)) throw ConfigError("H: value " + format_double(c.H) + " outside (0,1/2]");
  if (c.K && !(*c.K > 0.0 && *c.K <= 1.0)) throw ConfigError("K: value " + format_double(*c.K) + " outside (0,1]");
  if (!(c.alpha > 0.0 && c.alpha <= 2.0)) throw ConfigError("alpha: value outside (0,2]");
  if (!(c.beta > 0.0 && c.beta <= 1.0)) throw ConfigError("beta: value outside (0,1]");
  if (c.eps && !(*c.eps > 0.0)) throw ConfigError("eps: must be > 0");
  if (c.reps < 2) throw ConfigError("reps: must be >= 2");
  if (c.threads < 1) throw ConfigError("threads: must be >= 1");
  if (c.n < 1) throw ConfigError("n: must be >= 1");
  if (c.m < 1) throw ConfigError("m: must be >= 1");
  if (!(c.r > 0.0)) throw ConfigError("r: must be > 0");
  if (c.j < 1) throw ConfigError("j: must be >= 1");
  if (!(c.r_star > 0.0)) throw ConfigError("r-star: must be > 0");
  if (c.ring_nodes < 2) throw ConfigError("ring-nodes: must be >= 2");
  if (!(c.reps_scale > 0.0 && c.reps_scale <= 1.0)) throw ConfigError("reps-scale: outside (0,1]");
  if (c.norm != "limit-matched" && c.norm != "literal") throw ConfigError("norm: expected limit-matched|literal");
  if (c.model != "auto" && c.model != "cells" && c.model != "points")
    throw ConfigError("model: expected auto|cells|points");
  if (c.method != "exact" && c.method != "representation") throw ConfigError("method: expected exact|representation");
  try {
    c.grid.validate();
  } catch (const std::exception& e) {
    throw ConfigError("grid: " + std::string(e.what()));
  }
  const auto fs = c.functions();
  detail::number_list(c.theta, "theta");
  for (double t : detail::number_list(c.times, "times"))
    if (!(t >= 0.0)) throw ConfigError("times: entries must be >= 0");

  if (c.command == "kernel") {
    static const std::vector<std::string> kinds{"gamma", "bifbm", "gamma-r", "shift", "subordinated", "occupancy"};
    if (std::find(kinds.begin(), kinds.end(), c.kind) == kinds.end()) throw ConfigError("kind: unknown kernel '" + c.kind + "'");
    if (c.x.empty() || c.y.empty()) throw ConfigError("x/y: kernel needs --x and --y");
    const auto px = detail::point_in(sp, c.x, "x");
    detail::point_in(sp, c.y, "y");
    if ((c.kind == "bifbm" || c.kind == "subordinated") && !c.K) throw ConfigError("K: required for kind " + c.kind);
    if (c.kind == "subordinated" && !(*c.K < 1.0)) throw ConfigError("K: subordinated needs K in (0,1)");
    if ((c.kind == "shift" || c.kind == "subordinated" || c.kind == "occupancy") && sp.kind != SpaceKind::HalfLine)
      throw ConfigError("space: kind " + c.kind + " is defined on half-line");
  } else if (c.command == "cov") {
    if (fs.size() != 1 || c.g.empty()) throw ConfigError("f/g: cov needs exactly one --f and one --g");
    try {
      parse_test_function(c.g);
    } catch (const std::exception& e) {
      throw ConfigError("g: " + std::string(e.what()));
    }
  } else if (c.command == "simulate") {
    if (c.target != "gep" && c.target != "gfun" && c.target != "stable" && c.target != "subord")
      throw ConfigError("simulate: expected gep|gfun|stable|subord, got '" + c.target + "'");
    if ((c.target == "gfun" || c.target == "stable") && fs.empty()) throw ConfigError("f: simulate " + c.target + " needs --f");
    if ((c.target == "gfun" || c.target == "stable") && !sp.is_line())
      throw ConfigError("space: the cell sampler covers half-line and full-line");
    if (c.target == "subord" && (!c.K || !(*c.K < 1.0))) throw ConfigError("K: subord needs K in (0,1)");
  } else if (c.command == "clt") {
    if (fs.empty()) throw ConfigError("f: clt needs --f");
    const bool sphere2 = sp.kind == SpaceKind::Sphere && sp.dim == 2;
    if (sp.kind != SpaceKind::HalfLine && !sphere2) throw ConfigError("space: clt supports half-line and sphere2");
    if (c.model == "cells" && sp.kind != SpaceKind::HalfLine) throw ConfigError("model: cells model lives on half-line");
  } else if (c.command == "verify") {
    if (c.target != "all" && acceptance::criterion_id(c.target) == 0)
      throw ConfigError("verify: unknown criterion '" + c.target + "'");
  } else if (c.command == "export") {
    if (c.target != "kernel" && c.target != "gram") throw ConfigError("export: expected kernel|gram");
    if (c.target == "gram" && fs.empty()) throw ConfigError("f: export gram needs --f");
  }
}

// argv-style tokens (without the program name).  Config file entries come first so that
// flags given on the command line win.
inline RunConfig parse_config(const std::vector<std::string>& args) {
  RunConfig c;
  c.threads = default_thread_count();
  CLI::App app{"logcorr"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  std::vector<std::string> positional;
  std::string config_path;
  double K = 0.0, eps = 0.0;
  app.add_option("command", positional);
  app.add_option("--config", config_path);
  app.add_option("--space", c.space);
  app.add_option("--H", c.H);
  auto* k_opt = app.add_option("--K", K);
  app.add_option("--x", c.x);
  app.add_option("--y", c.y);
  app.add_option("--kind", c.kind);
  app.add_option("--r", c.r);
  app.add_option("--j", c.j);
  app.add_option("--f", c.f)->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  app.add_option("--g", c.g);
  auto* eps_opt = app.add_option("--eps", eps);
  app.add_option("--reps", c.reps);
  app.add_option("--seed", c.seed);
  app.add_option("--threads", c.threads);
  app.add_option("--out", c.out);
  app.add_option("--csv", c.csv);
  app.add_option("--n", c.n);
  app.add_option("--m", c.m);
  app.add_option("--alpha", c.alpha);
  app.add_option("--beta", c.beta);
  app.add_option("--theta", c.theta);
  app.add_option("--r-star", c.r_star);
  app.add_option("--norm", c.norm);
  app.add_option("--model", c.model);
  app.add_option("--ring-nodes", c.ring_nodes);
  app.add_option("--times", c.times);
  app.add_option("--method", c.method);
  app.add_option("--bins", c.grid.bins);
  app.add_option("--paths", c.grid.paths);
  app.add_option("--r-min", c.grid.r_min);
  app.add_option("--r-max", c.grid.r_max);
  app.add_option("--r-split", c.grid.r_split);
  app.add_option("--t-max", c.grid.t_max);
  app.add_option("--reps-scale", c.reps_scale);

  // Locate --config before the full parse.
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) config_path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) config_path = args[i].substr(9);
  }
  std::vector<std::string> tokens;
  if (!config_path.empty()) {
    const auto kv = detail::read_config_file(config_path);
    std::vector<std::string> from_file;
    for (const auto& [key, val] : kv) {
      if (key == "config" || key == "command" || !app.get_option_no_throw("--" + key))
        throw ConfigError("config " + config_path + ":" + std::to_string(val.second) + ": unknown key '" + key + "'");
      if (key == "f") {
        // Repeated --f on the command line replaces the file's list rather than extending it.
        if (std::find(args.begin(), args.end(), "--f") != args.end()) continue;
      }
      tokens.push_back("--" + key);
      tokens.push_back(val.first);
    }
  }
  tokens.insert(tokens.end(), args.begin(), args.end());
  // CLI11 parses a reversed argv vector.
  std::vector<std::string> rev(tokens.rbegin(), tokens.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    throw ConfigError(e.what());
  }
  if (positional.empty()) throw ConfigError("command: missing subcommand");
  if (positional.size() > 2) throw ConfigError("command: unexpected argument '" + positional[2] + "'");
  c.command = positional[0];
  if (positional.size() > 1) c.target = positional[1];
  if (c.command == "verify" && c.target.empty()) c.target = "all";
  if (k_opt->count() > 0) c.K = K;
  if (eps_opt->count() > 0) c.eps = eps;
  validate(c);
  return c;
}

inline RunConfig parse_config(int argc, const char* const* argv) {
  std::vector<std::string> a;
  for (int i = 1; i < argc; ++i) a.emplace_back(argv[i]);
  return parse_config(a);
}

// ---------------------------------------------------------------------------------------------
// Output

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char ch : s) {
    if (ch == '"') q += '"';
    q += ch;
  }
  return q + "\"";
}

inline void write_csv(std::ostream& os, const SampleMatrix& m) {
  for (std::size_t j = 0; j < m.cols; ++j) os << (j ? "," : "") << csv_field(m.labels[j]);
  os << '\n';
  for (std::size_t i = 0; i < m.rows; ++i) {
    for (std::size_t j = 0; j < m.cols; ++j) os << (j ? "," : "") << format_double(m(i, j));
    os << '\n';
  }
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        out.back() += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        out.back() += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.emplace_back();
    } else {
      out.back() += ch;
    }
  }
  return out;
}

inline SampleMatrix read_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("empty CSV");
  const auto labels = split_csv_line(line);
  std::vector<double> data;
  std::size_t rows = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != labels.size()) throw std::runtime_error("CSV row " + std::to_string(rows + 1) + " has wrong width");
    for (const auto& s : f) {
      double v = 0.0;
      auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc{} || p != s.data() + s.size()) throw std::runtime_error("CSV: malformed number '" + s + "'");
      data.push_back(v);
    }
    ++rows;
  }
  SampleMatrix m(rows, labels.size(), labels);
  m.data = std::move(data);
  return m;
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream o(path, std::ios::binary);
  if (!o) throw std::runtime_error("cannot open " + path + " for writing");
  o << content;
  if (!o) throw std::runtime_error("write failed for " + path);
}

inline nlohmann::json config_json(const RunConfig& c) {
  nlohmann::json j{{"command", c.command}, {"target", c.target}, {"space", c.space}, {"H", c.H},
                   {"reps", c.reps}, {"seed", c.seed}};
  if (c.K) j["K"] = *c.K;
  if (c.eps) j["eps"] = *c.eps;
  if (!c.f.empty()) j["f"] = detail::split_specs(c.f);
  return j;
}

// ---------------------------------------------------------------------------------------------
// Commands

struct Outcome {
  int code = 0;
  std::string summary;
  nlohmann::json report = nlohmann::json::object();
  std::optional<SampleMatrix> samples;
  std::vector<std::string> warnings;
};

namespace detail {

inline EstimateReport estimate(std::string name, double est, double se, std::uint64_t n, std::uint64_t seed,
                               const nlohmann::json& plan) {
  EstimateReport r;
  r.name = std::move(name);
  r.estimate = est;
  r.se = se;
  r.n = n;
  r.seed = seed;
  r.plan = plan;
  return r;
}

inline nlohmann::json cov_reports(const RunResult& res, std::uint64_t seed,
                                  const std::function<std::optional<double>(std::size_t, std::size_t)>& target) {
  const auto c = empirical_cov(res.samples);
  nlohmann::json arr = nlohmann::json::array();
  for (std::size_t a = 0; a < res.samples.cols; ++a)
    for (std::size_t b = a; b < res.samples.cols; ++b) {
      auto r = estimate("cov[" + res.samples.labels[a] + "," + res.samples.labels[b] + "]", c.cov(a, b), c.se(a, b),
                        res.samples.rows, seed, res.samples.plan);
      if (auto t = target(a, b)) r.set_target(*t);
      arr.push_back(r);
    }
  return arr;
}

}  // namespace detail

inline Outcome run_kernel(const RunConfig& c) {
  const Space sp = c.parsed_space();
  const auto x = detail::point_in(sp, c.x, "x"), y = detail::point_in(sp, c.y, "y");
  Outcome o;
  nlohmann::json j{{"kind", c.kind}, {"space", sp.name()}, {"x", c.x}, {"y", c.y}, {"H", c.H}};
  double v = 0.0;
  if (c.kind == "gamma") {
    v = gamma_kernel(sp, c.H, x, y).value;
  } else if (c.kind == "bifbm") {
    v = bifbm_cov(sp, {c.H, *c.K}, x, y);
    j["K"] = *c.K;
  } else if (c.kind == "gamma-r") {
    const double beta = 2.0 * c.H;
    v = gamma_r_kernel(sp, beta, c.r, x, y);
    const auto q = gamma_from_gamma_r_quadrature(sp, beta, x, y);
    const double g = gamma_kernel(sp, c.H, x, y).value;
    j["r"] = c.r;
    j["reconstruction"] = q.value;
    j["reconstruction_error"] = std::isfinite(g) ? std::abs(q.value - g) : 0.0;
  } else if (c.kind == "shift") {
    v = lei_nualart_shift_cov(c.H, x.x[0], y.x[0]);
  } else if (c.kind == "subordinated") {
    v = subordinated_bifbm_cov(c.H, *c.K, x.x[0], y.x[0]);
    j["K"] = *c.K;
  } else {
    v = occupancy_cov(c.j, x.x[0], y.x[0]);
    j["j"] = c.j;
  }
  j["value"] = std::isfinite(v) ? nlohmann::json(v) : nlohmann::json("inf");
  o.report = j;
  o.summary = c.kind + "(" + c.x + ", " + c.y + ") = " + format_double(v);
  if (j.contains("reconstruction_error"))
    o.summary += "  reconstruction error " + format_double(j["reconstruction_error"].get<double>());
  return o;
}

inline Outcome run_cov(const RunConfig& c) {
  const Space sp = c.parsed_space();
  const auto f = c.functions()[0];
  const auto g = parse_test_function(c.g);
  const double v = c.eps ? truncated_cov_functional(sp, c.H, f, g, *c.eps) : cov_functional(sp, c.H, f, g);
  Outcome o;
  o.report = {{"space", sp.name()}, {"H", c.H}, {"f", f.label()}, {"g", g.label()}, {"value", v}};
  if (c.eps) o.report["eps"] = *c.eps;
  o.summary = "cov(" + f.label() + ", " + g.label() + ") = " + format_double(v);
  return o;
}

inline Outcome run_simulate(const RunConfig& c) {
  Outcome o;
  const Space sp = c.parsed_space();
  const auto fs = c.functions();
  const auto times = detail::number_list(c.times, "times");
  RunResult res;
  nlohmann::json reports;
  if (c.target == "gep") {
    const double eps = c.eps.value_or(1e-2);
    res = sample_truncated_field(c.seed, times, eps, c.reps,
                                 c.method == "exact" ? FieldMethod::Exact : FieldMethod::Representation, c.grid,
                                 c.threads);
    reports = detail::cov_reports(res, c.seed, [&](std::size_t a, std::size_t b) -> std::optional<double> {
      return truncated_cov(times[a], times[b], eps);
    });
  } else if (c.target == "subord") {
    res = sample_subordinated_bifbm(c.seed, c.H, *c.K, times, c.reps, {1e-10, 1e4, 320, 4, 0.0, 1e300}, c.threads);
    reports = detail::cov_reports(res, c.seed, [&](std::size_t a, std::size_t b) -> std::optional<double> {
      return subordinated_bifbm_cov(c.H, *c.K, times[a], times[b]);
    });
  } else if (c.target == "gfun" || (c.target == "stable" && c.alpha == 2.0)) {
    res = c.target == "gfun" ? mc_gaussian_functional(c.seed, sp, c.H, fs, c.grid, c.reps, c.threads)
                             : mc_stable_functional(c.seed, sp, 2.0, c.beta, fs, c.grid, c.reps, c.threads);
    const double Hc = c.target == "gfun" ? c.H : 0.5 * c.beta;
    reports = detail::cov_reports(res, c.seed, [&](std::size_t a, std::size_t b) -> std::optional<double> {
      return cov_functional(sp, Hc, fs[a], fs[b]);
    });
  } else {
    res = mc_stable_functional(c.seed, sp, c.alpha, c.beta, fs, c.grid, c.reps, c.threads);
    reports = nlohmann::json::array();
    const auto th = detail::number_list(c.theta, "theta");
    for (std::size_t k = 0; k < res.samples.cols; ++k)
      for (const auto& p : empirical_chf(res.samples.column(k), th)) {
        reports.push_back(detail::estimate("re_chf[" + res.samples.labels[k] + "](" + format_double(p.theta) + ")",
                                           p.re, p.se_re, res.samples.rows, c.seed, res.samples.plan));
        reports.push_back(detail::estimate("im_chf[" + res.samples.labels[k] + "](" + format_double(p.theta) + ")",
                                           p.im, p.se_im, res.samples.rows, c.seed, res.samples.plan));
      }
  }
  o.report = {{"reports", reports}, {"diagnostics", res.diagnostics}, {"warnings", res.warnings}};
  o.warnings = res.warnings;
  o.samples = res.samples;
  o.summary = "simulate " + c.target + ": " + std::to_string(res.samples.rows) + " replicates x " +
              std::to_string(res.samples.cols) + " coordinates";
  if (!reports.empty()) {
    const auto& r0 = reports[0];
    o.summary += "; " + r0["name"].get<std::string>() + " = " + format_double(r0["estimate"].get<double>()) +
                 " +- " + format_double(r0["se"].get<double>());
    if (!r0["target"].is_null()) o.summary += " (target " + format_double(r0["target"].get<double>()) + ")";
  }
  return o;
}

inline Outcome run_clt(const RunConfig& c) {
  Outcome o;
  AggregatedPlan p;
  p.n = c.n;
  p.m = c.m;
  p.alpha = c.alpha;
  p.space = c.parsed_space();
  p.fs = c.functions();
  p.thetas = detail::number_list(c.theta, "theta");
  p.reps = c.reps;
  p.seed = c.seed;
  p.r_star = c.r_star;
  p.norm = c.norm == "literal" ? Normalization::Literal : Normalization::LimitMatched;
  p.ring_nodes = c.ring_nodes;
  p.threads = c.threads;
  const bool cells = c.model == "cells" || (c.model == "auto" && p.space.kind == SpaceKind::HalfLine);
  const auto res = cells ? simulate_G_n(p) : simulate_general_G_n(p);
  o.warnings = res.warnings;
  for (const auto& w : p.warnings())
    if (std::find(o.warnings.begin(), o.warnings.end(), w) == o.warnings.end()) o.warnings.push_back(w);
  nlohmann::json per_f = nlohmann::json::array();
  double zmax = 0.0;
  for (std::size_t k = 0; k < p.fs.size(); ++k) {
    std::optional<double> var;
    if (p.alpha == 2.0) {
      var = cov_functional(p.space, 0.5, p.fs[k], p.fs[k]);
      if (p.norm == Normalization::Literal) *var *= 0.5;
    }
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& pt : empirical_chf(res.samples.column(k), p.thetas)) {
      nlohmann::json row{{"theta", pt.theta}, {"re", pt.re}, {"im", pt.im}, {"se_re", pt.se_re}, {"se_im", pt.se_im}};
      if (var) {
        const double t = std::exp(-pt.theta * pt.theta * *var / 2.0);
        row["target_re"] = t;
        const double z = pt.se_re > 0.0 ? (pt.re - t) / pt.se_re : 0.0;
        row["z_score"] = z;
        zmax = std::max(zmax, std::abs(z));
      } else {
        row["target_re"] = nullptr;
        row["z_score"] = nullptr;
      }
      rows.push_back(row);
    }
    nlohmann::json fj{{"f", p.fs[k].label()}, {"chf", rows}};
    if (var) fj["limit_variance"] = *var;
    if (p.alpha == 2.0) {
      if (cells)
        fj["exact_variance_n"] = exact_variance_G_n(f_cell_weights(p.fs[k], p.n)) *
                                 (p.norm == Normalization::Literal ? 0.5 : 1.0);
      const auto v = variance_se(res.samples.column(k));
      fj["sample_variance"] = v.mean;
      fj["sample_variance_se"] = v.se;
    }
    per_f.push_back(fj);
  }
  o.report = {{"plan", p.to_json()}, {"model", cells ? "cells" : "points"}, {"functions", per_f},
              {"diagnostics", res.diagnostics}, {"warnings", o.warnings}};
  o.samples = res.samples;
  o.summary = std::string("clt ") + (cells ? "cells" : "points") + " model on " + p.space.name() + ": " +
              std::to_string(p.reps) + " replicates";
  if (p.alpha == 2.0) o.summary += ", max |z| of Re c(theta) = " + format_double(zmax);
  return o;
}

inline Outcome run_verify(const RunConfig& c, std::ostream& out) {
  Outcome o;
  acceptance::Options opt{c.threads, c.reps_scale};
  std::vector<int> ids;
  if (c.target == "all")
    for (int i = 1; i <= static_cast<int>(acceptance::registry().size()); ++i) ids.push_back(i);
  else
    ids.push_back(acceptance::criterion_id(c.target));
  nlohmann::json arr = nlohmann::json::array();
  int failed = 0;
  for (int id : ids) {
    const auto r = acceptance::run_criterion(id, opt);
    if (ids.size() > 1) out << acceptance::line(r) << std::endl;
    arr.push_back(acceptance::to_json(r));
    if (!r.pass) ++failed;
    if (ids.size() == 1) o.summary = acceptance::line(r);
  }
  if (ids.size() > 1)
    o.summary = std::to_string(ids.size() - failed) + "/" + std::to_string(ids.size()) + " criteria passed";
  o.report = {{"criteria", arr}, {"passed", failed == 0}};
  o.code = failed == 0 ? 0 : 2;
  return o;
}

inline Outcome run_export(const RunConfig& c) {
  Outcome o;
  const Space sp = c.parsed_space();
  if (c.target == "gram") {
    const auto fs = c.functions();
    SampleMatrix m(fs.size(), fs.size(), logcorr::detail::labels_of(fs));
    for (std::size_t a = 0; a < fs.size(); ++a)
      for (std::size_t b = a; b < fs.size(); ++b)
        m(a, b) = m(b, a) = c.eps ? truncated_cov_functional(sp, c.H, fs[a], fs[b], *c.eps)
                                  : cov_functional(sp, c.H, fs[a], fs[b]);
    Eigen::MatrixXd G(fs.size(), fs.size());
    for (std::size_t a = 0; a < fs.size(); ++a)
      for (std::size_t b = 0; b < fs.size(); ++b) G(a, b) = m(a, b);
    const auto psd = psd_check(G, 1e-8);
    o.report = {{"gram_min_eigenvalue", psd.min_eigenvalue}, {"psd", psd.pass}};
    o.samples = m;
    o.summary = "gram matrix " + std::to_string(fs.size()) + "x" + std::to_string(fs.size()) +
                ", min eigenvalue " + format_double(psd.min_eigenvalue);
  } else {
    // Kernel matrix over the points in --times (line spaces) using --kind gamma or bifbm.
    if (!sp.is_line()) throw std::invalid_argument("export kernel uses --times and needs a line space");
    const auto t = detail::number_list(c.times, "times");
    SampleMatrix m(t.size(), t.size(), logcorr::detail::time_labels(t));
    for (std::size_t a = 0; a < t.size(); ++a)
      for (std::size_t b = 0; b < t.size(); ++b) {
        const auto x = detail::point_in(sp, format_double(t[a]), "times"), y = detail::point_in(sp, format_double(t[b]), "times");
        m(a, b) = c.K ? bifbm_cov(sp, {c.H, *c.K}, x, y) : gamma_kernel(sp, c.H, x, y).value;
      }
    o.samples = m;
    o.report = {{"points", t}};
    o.summary = std::string(c.K ? "bifbm" : "gamma") + " kernel matrix over " + std::to_string(t.size()) + " points";
  }
  return o;
}

// Executes a validated config: writes --out/--csv, prints the summary.  Returns the exit code.
inline int run(const RunConfig& c, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  try {
    Outcome o;
    if (c.command == "kernel") o = run_kernel(c);
    else if (c.command == "cov") o = run_cov(c);
    else if (c.command == "simulate") o = run_simulate(c);
    else if (c.command == "clt") o = run_clt(c);
    else if (c.command == "verify") o = run_verify(c, out);
    else o = run_export(c);
    for (const auto& w : o.warnings) err << "warning: " << w << '\n';
    nlohmann::json rep = o.report;
    rep["config"] = config_json(c);
    if (!c.out.empty()) write_file(c.out, rep.dump(2) + "\n");
    if (!c.csv.empty() && o.samples) {
      std::ostringstream ss;
      write_csv(ss, *o.samples);
      write_file(c.csv, ss.str());
    }
    out << o.summary << std::endl;
    return o.code;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

inline int main(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  RunConfig c;
  try {
    c = parse_config(argc, argv);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return run(c, out, err);
}

}  // namespace logcorr::cli
