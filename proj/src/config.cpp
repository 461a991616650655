#include "mixlab/config.hpp"

#include "mixlab/errors.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace mixlab {

ExperimentConfig::ExperimentConfig() {
  domain.h = 1.0 / 128.0;
  for (int e = 0; e <= 30; ++e) n_schedule.push_back(std::int64_t{1} << e);
}

void ExperimentConfig::validate() const {
  domain.validate();
  auto fail = [](const std::string& m) { throw ConfigError(m); };
  if (!(tolerances.linear > 0.0)) fail("tolerances.linear must be positive");
  if (!(tolerances.outer > 0.0)) fail("tolerances.outer must be positive");
  if (!(tolerances.eigen > 0.0)) fail("tolerances.eigen must be positive");
  if (!(tolerances.nehari > 0.0)) fail("tolerances.nehari must be positive");
  if (n_schedule.empty()) fail("schedule.n must not be empty");
  if (n_schedule.front() < 1) fail("schedule.n entries must be >= 1");
  for (std::size_t i = 1; i < n_schedule.size(); ++i)
    if (n_schedule[i] <= n_schedule[i - 1]) fail("schedule.n must be strictly increasing");
  if (quad_order < 2) fail("quad_order must be >= 2");
  if (!(q > 0.0)) fail("problem.q must be positive");
  if (!(p > 1.0 && p <= 6.0)) fail("problem.p must lie in (1,6]");
  if (lambda && !(*lambda > 0.0)) fail("problem.lambda must be positive");
  for (double f : lambda_factors)
    if (!(f > 0.0)) fail("problem.lambda_factors entries must be positive");
  if (seeds.empty()) fail("seeds must not be empty");
  for (double v : verify_q_singular)
    if (!(v > 0.0)) fail("verify.q_singular entries must be positive");
  for (double v : verify_q_sobolev)
    if (!(v > 0.0 && v < 1.0)) fail("verify.q_sobolev entries must lie in (0,1)");
}

std::string format_real(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// A real literal, optionally written as a fraction "x/y".
double parse_real(const std::string& text) {
  const std::string t = trim(text);
  const auto slash = t.find('/');
  if (slash != std::string::npos)
    return parse_real(t.substr(0, slash)) / parse_real(t.substr(slash + 1));
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(t, &used);
  } catch (const std::exception&) {
    throw ConfigError("not a number: '" + t + "'");
  }
  if (used != t.size() || !std::isfinite(v)) throw ConfigError("not a number: '" + t + "'");
  return v;
}

long long parse_integer(const std::string& text) {
  const std::string t = trim(text);
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(t, &used);
  } catch (const std::exception&) {
    throw ConfigError("not an integer: '" + t + "'");
  }
  if (used != t.size()) throw ConfigError("not an integer: '" + t + "'");
  return v;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) throw ConfigError("empty list entry in '" + text + "'");
    out.push_back(item);
  }
  if (out.empty()) throw ConfigError("empty list");
  return out;
}

std::vector<double> parse_reals(const std::string& text) {
  std::vector<double> out;
  for (const auto& s : split_list(text)) out.push_back(parse_real(s));
  return out;
}

using Setter = std::function<void(ExperimentConfig&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"domain.a", [](ExperimentConfig& c, const std::string& v) { c.domain.a = parse_real(v); }},
      {"domain.b", [](ExperimentConfig& c, const std::string& v) { c.domain.b = parse_real(v); }},
      {"domain.collar_width",
       [](ExperimentConfig& c, const std::string& v) { c.domain.collar_width = parse_real(v); }},
      {"domain.s", [](ExperimentConfig& c, const std::string& v) { c.domain.s = parse_real(v); }},
      {"domain.h", [](ExperimentConfig& c, const std::string& v) { c.domain.h = parse_real(v); }},
      {"domain.kernel_constant",
       [](ExperimentConfig& c, const std::string& v) { c.domain.kernel_constant = parse_real(v); }},
      {"problem.q", [](ExperimentConfig& c, const std::string& v) { c.q = parse_real(v); }},
      {"problem.p", [](ExperimentConfig& c, const std::string& v) { c.p = parse_real(v); }},
      {"problem.lambda", [](ExperimentConfig& c, const std::string& v) { c.lambda = parse_real(v); }},
      {"problem.lambda_factors",
       [](ExperimentConfig& c, const std::string& v) { c.lambda_factors = parse_reals(v); }},
      {"schedule.n",
       [](ExperimentConfig& c, const std::string& v) {
         c.n_schedule.clear();
         for (const auto& s : split_list(v)) c.n_schedule.push_back(parse_integer(s));
       }},
      {"schedule.max_exponent",
       [](ExperimentConfig& c, const std::string& v) {
         const long long e = parse_integer(v);
         if (e < 0 || e > 62) throw ConfigError("schedule.max_exponent must lie in [0,62]");
         c.n_schedule.clear();
         for (long long k = 0; k <= e; ++k) c.n_schedule.push_back(std::int64_t{1} << k);
       }},
      {"tolerances.linear",
       [](ExperimentConfig& c, const std::string& v) { c.tolerances.linear = parse_real(v); }},
      {"tolerances.outer",
       [](ExperimentConfig& c, const std::string& v) { c.tolerances.outer = parse_real(v); }},
      {"tolerances.eigen",
       [](ExperimentConfig& c, const std::string& v) { c.tolerances.eigen = parse_real(v); }},
      {"tolerances.nehari",
       [](ExperimentConfig& c, const std::string& v) { c.tolerances.nehari = parse_real(v); }},
      {"seeds",
       [](ExperimentConfig& c, const std::string& v) {
         c.seeds.clear();
         for (const auto& s : split_list(v)) {
           const long long k = parse_integer(s);
           if (k < 0) throw ConfigError("seeds must be nonnegative");
           c.seeds.push_back(static_cast<std::uint64_t>(k));
         }
       }},
      {"quad_order",
       [](ExperimentConfig& c, const std::string& v) {
         c.quad_order = static_cast<int>(parse_integer(v));
       }},
      {"output_dir", [](ExperimentConfig& c, const std::string& v) { c.output_dir = trim(v); }},
      {"linear_solver",
       [](ExperimentConfig& c, const std::string& v) {
         try {
           c.linear_solver = parse_solver_kind(trim(v));
         } catch (const std::exception& e) {
           throw ConfigError(e.what());
         }
       }},
      {"verify.q_singular",
       [](ExperimentConfig& c, const std::string& v) { c.verify_q_singular = parse_reals(v); }},
      {"verify.q_sobolev",
       [](ExperimentConfig& c, const std::string& v) { c.verify_q_sobolev = parse_reals(v); }},
  };
  return table;
}

template <class T>
std::string join(const std::vector<T>& v, std::function<std::string(const T&)> f) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + f(v[i]);
  return out;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig cfg;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = "config line " + std::to_string(lineno) + ": ";
    if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end()) throw ConfigError(where + "unknown key '" + key + "'");
    if (!seen.insert(key).second) throw ConfigError(where + "repeated key '" + key + "'");
    if (value.empty()) throw ConfigError(where + "empty value for '" + key + "'");
    try {
      it->second(cfg, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + key + ": " + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string canonical_config(const ExperimentConfig& c) {
  std::map<std::string, std::string> kv;
  kv["domain.a"] = format_real(c.domain.a);
  kv["domain.b"] = format_real(c.domain.b);
  kv["domain.collar_width"] = format_real(c.domain.collar_width);
  kv["domain.s"] = format_real(c.domain.s);
  kv["domain.h"] = format_real(c.domain.h);
  kv["domain.kernel_constant"] = format_real(c.domain.kernel_constant);
  kv["problem.q"] = format_real(c.q);
  kv["problem.p"] = format_real(c.p);
  if (c.lambda) kv["problem.lambda"] = format_real(*c.lambda);
  kv["problem.lambda_factors"] =
      join<double>(c.lambda_factors, [](const double& x) { return format_real(x); });
  kv["schedule.n"] =
      join<std::int64_t>(c.n_schedule, [](const std::int64_t& x) { return std::to_string(x); });
  kv["tolerances.linear"] = format_real(c.tolerances.linear);
  kv["tolerances.outer"] = format_real(c.tolerances.outer);
  kv["tolerances.eigen"] = format_real(c.tolerances.eigen);
  kv["tolerances.nehari"] = format_real(c.tolerances.nehari);
  kv["seeds"] =
      join<std::uint64_t>(c.seeds, [](const std::uint64_t& x) { return std::to_string(x); });
  kv["quad_order"] = std::to_string(c.quad_order);
  kv["linear_solver"] = solver_kind_name(c.linear_solver);
  kv["verify.q_singular"] =
      join<double>(c.verify_q_singular, [](const double& x) { return format_real(x); });
  kv["verify.q_sobolev"] =
      join<double>(c.verify_q_sobolev, [](const double& x) { return format_real(x); });
  std::string out;
  for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
  return out;
}

std::string config_hash(const ExperimentConfig& cfg) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : canonical_config(cfg)) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace mixlab
