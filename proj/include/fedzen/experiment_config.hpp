#pragma once

/**
 * @file experiment_config.hpp
 * @brief Flat `key = value` experiment configuration.
 *
 * One assignment per line; `#` starts a comment; blank lines are ignored.
 * Unknown keys are rejected with an error naming the key. Values are kept as
 * strings until validated, so command-line flags can override file entries
 * before anything is interpreted.
 */

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>

namespace fedzen {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  std::string problem = "quadratic";  ///< quadratic | cubic | logistic
  std::string dataset_path;
  std::int64_t d = 10;
  double mu = 1e-6;
  std::optional<std::int64_t> r;
  std::string r_policy = "fixed";     ///< fixed | adaptive
  std::optional<std::string> alpha;   ///< number or "opt"
  std::optional<double> lambda_min, lambda_max;
  std::uint64_t max_iters = 100;
  std::optional<std::uint64_t> budget;
  std::uint64_t seed = 1;
  std::uint64_t n_clients = 1;
  std::string partition = "iid";      ///< iid | contiguous
  std::string out_path;
  double cond = 10.0;
  double ridge = 0.1;
  double box_radius = 0.4;
  std::uint64_t samples = 200;
  std::optional<std::int64_t> r_max;
  double delta = 0.1;

  static const std::set<std::string>& keys() {
    static const std::set<std::string> k = {
        "problem", "dataset_path", "d",       "mu",         "r",         "r_policy", "alpha",
        "lambda_min", "lambda_max", "max_iters", "budget",  "seed",      "n_clients", "partition",
        "out_path", "cond",         "ridge",   "box_radius", "samples",  "r_max",    "delta"};
    return k;
  }

  void set(const std::string& key, const std::string& value);
  void validate() const;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double parse_real(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) throw ConfigError("config: '" + key + "' expects a number, got '" + v + "'");
  return out;
}

inline std::int64_t parse_int(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  long long out = 0;
  try {
    out = std::stoll(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) throw ConfigError("config: '" + key + "' expects an integer, got '" + v + "'");
  return out;
}

inline std::uint64_t parse_count(const std::string& key, const std::string& v) {
  const std::int64_t n = parse_int(key, v);
  if (n < 0) throw ConfigError("config: '" + key + "' must be non-negative");
  return static_cast<std::uint64_t>(n);
}

}  // namespace detail

inline void ExperimentConfig::set(const std::string& key, const std::string& value) {
  using detail::parse_count;
  using detail::parse_int;
  using detail::parse_real;
  if (!keys().count(key)) throw ConfigError("config: unknown key '" + key + "'");
  if (key == "problem") problem = value;
  else if (key == "dataset_path") dataset_path = value;
  else if (key == "d") d = parse_int(key, value);
  else if (key == "mu") mu = parse_real(key, value);
  else if (key == "r") r = parse_int(key, value);
  else if (key == "r_policy") r_policy = value;
  else if (key == "alpha") {
    if (value != "opt") parse_real(key, value);
    alpha = value;
  }
  else if (key == "lambda_min") lambda_min = parse_real(key, value);
  else if (key == "lambda_max") lambda_max = parse_real(key, value);
  else if (key == "max_iters") max_iters = parse_count(key, value);
  else if (key == "budget") budget = parse_count(key, value);
  else if (key == "seed") seed = parse_count(key, value);
  else if (key == "n_clients") n_clients = parse_count(key, value);
  else if (key == "partition") partition = value;
  else if (key == "out_path") out_path = value;
  else if (key == "cond") cond = parse_real(key, value);
  else if (key == "ridge") ridge = parse_real(key, value);
  else if (key == "box_radius") box_radius = parse_real(key, value);
  else if (key == "samples") samples = parse_count(key, value);
  else if (key == "r_max") r_max = parse_int(key, value);
  else if (key == "delta") delta = parse_real(key, value);
}

inline void ExperimentConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("config: " + what); };
  if (problem != "quadratic" && problem != "cubic" && problem != "logistic") {
    fail("problem must be quadratic, cubic or logistic, got '" + problem + "'");
  }
  if (d < 1) fail("d must be positive");
  if (!(mu > 0.0)) fail("mu must be positive");
  if (r && *r < 1) fail("r must be positive");
  if (r_policy != "fixed" && r_policy != "adaptive") fail("r_policy must be fixed or adaptive");
  if (alpha && *alpha != "opt" && !(std::stod(*alpha) > 0.0)) fail("alpha must be positive");
  if (lambda_min && !(*lambda_min > 0.0)) fail("lambda_min must be positive");
  if (lambda_max && !(*lambda_max > 0.0)) fail("lambda_max must be positive");
  if (lambda_min && lambda_max && *lambda_min > *lambda_max) fail("lambda_min exceeds lambda_max");
  if (max_iters < 1) fail("max_iters must be positive");
  if (budget && *budget < 1) fail("budget must be positive");
  if (n_clients < 1) fail("n_clients must be positive");
  if (partition != "iid" && partition != "contiguous") fail("partition must be iid or contiguous");
  if (!(cond >= 1.0)) fail("cond must be at least 1");
  if (!(ridge > 0.0)) fail("ridge must be positive");
  if (!(box_radius > 0.0)) fail("box_radius must be positive");
  if (samples < 1) fail("samples must be positive");
  if (r_max && *r_max < 1) fail("r_max must be positive");
  if (!(delta > 0.0 && delta < 1.0)) fail("delta must lie in (0, 1)");
}

/// Applies every assignment in `in` to `cfg`.
inline void parse_config(std::istream& in, ExperimentConfig& cfg) {
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config: line " + std::to_string(no) + ": expected key = value");
    }
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("config: line " + std::to_string(no) + ": empty key");
    cfg.set(key, value);
  }
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  ExperimentConfig cfg;
  parse_config(in, cfg);
  return cfg;
}

inline ExperimentConfig parse_config_string(const std::string& text) {
  std::istringstream in(text);
  ExperimentConfig cfg;
  parse_config(in, cfg);
  return cfg;
}

}  // namespace fedzen
