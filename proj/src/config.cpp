#include "pdkf/config.hpp"

#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "pdkf/errors.hpp"

namespace pdkf {
namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> tokens(const std::string& value) {
  std::string cleaned = value;
  for (char& c : cleaned)
    if (c == ',') c = ' ';
  std::istringstream is(cleaned);
  std::vector<std::string> out;
  for (std::string t; is >> t;) out.push_back(t);
  return out;
}

std::vector<std::string> groups(const std::string& value) {
  std::vector<std::string> out;
  std::string current;
  for (char c : value) {
    if (c == '|') {
      out.push_back(current);
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  out.push_back(current);
  return out;
}

double to_double(const std::string& key, const std::string& t) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(t.c_str(), &end);
  if (end == t.c_str() || *end != '\0' || errno == ERANGE || !std::isfinite(v))
    throw ConfigError(key + ": '" + t + "' is not a finite number");
  return v;
}

long to_long(const std::string& key, const std::string& t) {
  errno = 0;
  char* end = nullptr;
  const long v = std::strtol(t.c_str(), &end, 10);
  if (end == t.c_str() || *end != '\0' || errno == ERANGE)
    throw ConfigError(key + ": '" + t + "' is not an integer");
  return v;
}

class Entries {
 public:
  explicit Entries(std::map<std::string, std::string> raw) : raw_(std::move(raw)) {}

  bool has(const std::string& key) const { return raw_.count(key) != 0; }

  const std::string& get(const std::string& key) {
    used_.insert(key);
    return raw_.at(key);
  }

  std::string str(const std::string& key, const std::string& fallback) {
    return has(key) ? trim(get(key)) : fallback;
  }

  double number(const std::string& key, double fallback) {
    if (!has(key)) return fallback;
    const auto t = tokens(get(key));
    if (t.size() != 1) throw ConfigError(key + ": expected one number");
    return to_double(key, t[0]);
  }

  long integer(const std::string& key, long fallback) {
    if (!has(key)) return fallback;
    const auto t = tokens(get(key));
    if (t.size() != 1) throw ConfigError(key + ": expected one integer");
    return to_long(key, t[0]);
  }

  bool boolean(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const std::string v = trim(get(key));
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError(key + ": expected true or false, got '" + v + "'");
  }

  std::vector<double> numbers(const std::string& key) {
    std::vector<double> out;
    for (const auto& t : tokens(get(key))) out.push_back(to_double(key, t));
    return out;
  }

  std::vector<long> integers(const std::string& key) {
    std::vector<long> out;
    for (const auto& t : tokens(get(key))) out.push_back(to_long(key, t));
    return out;
  }

  std::vector<std::vector<long>> integer_groups(const std::string& key) {
    std::vector<std::vector<long>> out;
    for (const auto& g : groups(get(key))) {
      std::vector<long> row;
      for (const auto& t : tokens(g)) row.push_back(to_long(key, t));
      out.push_back(std::move(row));
    }
    return out;
  }

  Eigen::MatrixXd matrix(const std::string& key, Eigen::Index rows, Eigen::Index cols) {
    const auto v = numbers(key);
    if (static_cast<Eigen::Index>(v.size()) != rows * cols)
      throw ConfigError(key + ": expected " + std::to_string(rows * cols) + " entries (" + std::to_string(rows) +
                        "x" + std::to_string(cols) + " row-major), got " + std::to_string(v.size()));
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = v[r * cols + c];
    return m;
  }

  void reject_unused() const {
    for (const auto& [key, value] : raw_)
      if (!used_.count(key)) throw ConfigError("unknown configuration key '" + key + "'");
  }

 private:
  std::map<std::string, std::string> raw_;
  std::set<std::string> used_;
};

}  // namespace

StateSpaceModel ExperimentConfig::effective_model() const {
  StateSpaceModel m = model;
  m.F *= f_scale;
  return m;
}

ExperimentConfig parse_config(std::string_view text) {
  std::map<std::string, std::string> raw;
  std::istringstream is{std::string(text)};
  int line_no = 0;
  for (std::string line; std::getline(is, line);) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
    const std::string key = trim(std::string_view(stripped).substr(0, eq));
    const std::string value = trim(std::string_view(stripped).substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");
    if (raw.count(key)) throw ConfigError("line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    raw[key] = value;
  }

  ExperimentConfig c;
  c.raw = raw;
  Entries e(std::move(raw));

  c.preset = e.str("preset", c.preset);
  if (c.preset != "paper-sec4" && c.preset != "custom")
    throw ConfigError("preset: unknown preset '" + c.preset + "' (expected paper-sec4 or custom)");
  if (c.preset == "custom") c.sensor_rule = "explicit";

  Eigen::Index m = c.model.dim();
  if (e.has("model.M")) {
    m = e.integer("model.M", m);
    if (m < 1) throw ConfigError("model.M must be >= 1");
  } else if (c.preset == "custom") {
    throw ConfigError("model.M is required for preset custom");
  }
  if (m != c.model.dim()) {
    c.model.F = Eigen::MatrixXd::Identity(m, m);
    c.model.G = Eigen::MatrixXd::Identity(m, m);
    c.model.Q = Eigen::MatrixXd::Identity(m, m);
    c.model.Pi0 = Eigen::MatrixXd::Identity(m, m);
  }
  if (c.preset == "custom" && !e.has("model.F")) throw ConfigError("model.F is required for preset custom");
  if (e.has("model.F")) c.model.F = e.matrix("model.F", m, m);
  if (e.has("model.G")) c.model.G = e.matrix("model.G", m, m);
  if (e.has("model.Q")) c.model.Q = e.matrix("model.Q", m, m);
  if (e.has("model.Pi0")) c.model.Pi0 = e.matrix("model.Pi0", m, m);
  c.f_scale = e.number("model.F_scale", c.f_scale);
  if (e.has("model.x0")) c.initial_state = e.matrix("model.x0", m, 1).col(0);

  c.nodes = static_cast<int>(e.integer("network.nodes", c.nodes));
  c.avg_degree = e.number("network.avg_degree", c.avg_degree);
  c.require_connected = e.boolean("network.require_connected", c.require_connected);
  if (e.has("network.edges")) {
    std::vector<std::pair<int, int>> edges;
    const auto gs = e.integer_groups("network.edges");
    for (const auto& g : gs) {
      if (g.empty() && gs.size() == 1) break;
      if (g.size() != 2) throw ConfigError("network.edges: each group must be a pair 'l k'");
      edges.emplace_back(static_cast<int>(g[0]), static_cast<int>(g[1]));
    }
    c.edges = std::move(edges);
  }

  c.sensor_rule = e.str("sensors.rule", c.sensor_rule);
  c.noise_min = e.number("sensors.noise_min", c.noise_min);
  c.noise_max = e.number("sensors.noise_max", c.noise_max);
  if (c.sensor_rule == "explicit") {
    const long p = e.integer("sensors.obs_dim", 0);
    if (p < 1) throw ConfigError("sensors.obs_dim is required (>= 1) for explicit sensors");
    for (int k = 0; k < c.nodes; ++k) {
      const std::string hk = "sensors.H." + std::to_string(k);
      const std::string rk = "sensors.R." + std::to_string(k);
      if (!e.has(hk) || !e.has(rk)) throw ConfigError("explicit sensors: missing " + hk + " or " + rk);
      c.explicit_sensors.push_back({e.matrix(hk, p, m), e.matrix(rk, p, p)});
    }
  } else if (c.sensor_rule != "paper-sec4") {
    throw ConfigError("sensors.rule: unknown rule '" + c.sensor_rule + "'");
  }

  if (e.has("selection.schemes")) {
    c.schemes.clear();
    for (const auto& t : tokens(e.get("selection.schemes"))) c.schemes.push_back(parse_scheme(t));
  }
  if (e.has("selection.L")) {
    c.L_values.clear();
    for (long L : e.integers("selection.L")) c.L_values.push_back(static_cast<int>(L));
  }
  c.shared_masks = e.boolean("selection.shared", c.shared_masks);
  if (e.has("selection.partition")) {
    std::vector<std::vector<int>> subsets;
    for (const auto& g : e.integer_groups("selection.partition")) subsets.emplace_back(g.begin(), g.end());
    c.partition = std::move(subsets);
  }
  c.dkf_baseline = e.boolean("filters.dkf_baseline", c.dkf_baseline);

  c.runs = static_cast<int>(e.integer("mc.runs", c.runs));
  c.horizon = e.integer("mc.horizon", c.horizon);
  c.window = e.integer("mc.window", c.window);
  c.threads = static_cast<int>(e.integer("mc.threads", c.threads));
  if (e.has("seed")) {
    const auto t = tokens(e.get("seed"));
    if (t.size() != 1) throw ConfigError("seed: expected one integer");
    errno = 0;
    char* end = nullptr;
    c.seed = std::strtoull(t[0].c_str(), &end, 10);
    if (*end != '\0' || errno == ERANGE || t[0].front() == '-') throw ConfigError("seed: not a non-negative integer");
  }

  c.riccati_tol = e.number("analysis.riccati_tol", c.riccati_tol);
  c.riccati_max_iter = static_cast<int>(e.integer("analysis.riccati_max_iter", c.riccati_max_iter));

  e.reject_unused();
  return c;
}

void ExperimentConfig::validate() const {
  try {
    effective_model().validate();
  } catch (const ConfigError& err) {
    throw ConfigError(std::string("configuration: ") + err.what());
  }
  const int m = static_cast<int>(model.dim());
  if (!(f_scale > 0.0)) throw ConfigError("model.F_scale must be positive");
  if (initial_state && initial_state->size() != m) throw ConfigError("model.x0 has the wrong length");
  if (nodes < 1) throw ConfigError("network.nodes must be >= 1");
  if (!edges && (avg_degree < 0.0 || avg_degree > nodes - 1))
    throw ConfigError("network.avg_degree must lie in [0, nodes-1]");
  if (sensor_rule == "paper-sec4") {
    if (m != 4) throw ConfigError("sensors.rule paper-sec4 needs a 4-dimensional state");
    if (!(noise_min >= 0.0) || !(noise_max > noise_min))
      throw ConfigError("sensors.noise_min/noise_max must satisfy 0 <= min < max");
  } else {
    if (static_cast<int>(explicit_sensors.size()) != nodes) throw ConfigError("explicit sensors: one per node");
    for (std::size_t k = 0; k < explicit_sensors.size(); ++k) {
      try {
        explicit_sensors[k].validate();
      } catch (const ConfigError& err) {
        throw ConfigError("sensors." + std::to_string(k) + ": " + err.what());
      }
    }
  }
  for (int L : L_values)
    if (L < 0 || L > m) throw ConfigError("selection.L: " + std::to_string(L) + " outside [0, M]");
  if (partition) {
    for (int L : L_values)
      if (L != 0) explicit_partition(m, L, *partition);
  }
  if (runs < 1) throw ConfigError("mc.runs must be >= 1");
  if (window < 1) throw ConfigError("mc.window must be >= 1");
  if (horizon <= window) throw ConfigError("mc.horizon must exceed mc.window");
  if (threads < 0) throw ConfigError("mc.threads must be >= 0");
  if (!(riccati_tol > 0.0) || riccati_max_iter < 1) throw ConfigError("analysis.riccati_* must be positive");
}

void apply_seed_override(ExperimentConfig& config) {
  const char* env = std::getenv(kSeedEnvVar);
  if (env == nullptr || *env == '\0') return;
  errno = 0;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(env, &end, 10);
  if (*end != '\0' || errno == ERANGE || env[0] == '-')
    throw ConfigError(std::string(kSeedEnvVar) + ": '" + env + "' is not a non-negative integer");
  config.seed = v;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read configuration file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  ExperimentConfig c = parse_config(ss.str());
  apply_seed_override(c);
  c.validate();
  return c;
}

}  // namespace pdkf
