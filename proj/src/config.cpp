#include "drokit/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "drokit/textio.hpp"

namespace drokit {

KeyValueConfig KeyValueConfig::parse_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_string(buf.str(), path);
}

KeyValueConfig KeyValueConfig::parse_string(const std::string& text,
                                            const std::string& origin) {
  KeyValueConfig kv;
  kv.origin_ = origin;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ": line " + std::to_string(lineno) +
                        ": expected 'section.key = value'");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty() || key.find('.') == std::string::npos) {
      throw ConfigError(origin + ": line " + std::to_string(lineno) +
                        ": key must look like 'section.key'");
    }
    if (kv.values_.count(key)) {
      throw ConfigError(origin + ": line " + std::to_string(lineno) +
                        ": duplicate key '" + key + "'");
    }
    kv.values_[key] = value;
  }
  return kv;
}

bool KeyValueConfig::has(const std::string& key) const {
  return values_.count(key) > 0;
}

std::string KeyValueConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) {
    throw ConfigError(origin_ + ": missing required key '" + key + "'");
  }
  return it->second;
}

std::string KeyValueConfig::get_or(const std::string& key,
                                   const std::string& fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double KeyValueConfig::get_double(const std::string& key) const {
  const std::string v = get(key);
  try {
    std::size_t pos = 0;
    double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError(origin_ + ": key '" + key + "': not a number: '" + v + "'");
  }
}

double KeyValueConfig::get_double_or(const std::string& key, double fallback) const {
  return has(key) ? get_double(key) : fallback;
}

int KeyValueConfig::get_int_or(const std::string& key, int fallback) const {
  if (!has(key)) return fallback;
  double d = get_double(key);
  int i = static_cast<int>(d);
  if (static_cast<double>(i) != d) {
    throw ConfigError(origin_ + ": key '" + key + "': expected an integer");
  }
  return i;
}

std::uint64_t KeyValueConfig::get_u64_or(const std::string& key,
                                         std::uint64_t fallback) const {
  if (!has(key)) return fallback;
  const std::string v = get(key);
  try {
    return std::stoull(v);
  } catch (const std::exception&) {
    throw ConfigError(origin_ + ": key '" + key + "': not an unsigned integer");
  }
}

std::vector<double> KeyValueConfig::get_doubles_or(
    const std::string& key, std::vector<double> fallback) const {
  if (!has(key)) return fallback;
  std::vector<double> out;
  for (const std::string& f : split_csv_line(get(key))) {
    std::string t = trim(f);
    if (t.empty()) continue;
    try {
      out.push_back(std::stod(t));
    } catch (const std::exception&) {
      throw ConfigError(origin_ + ": key '" + key + "': bad number '" + t + "'");
    }
  }
  return out;
}

std::vector<std::string> KeyValueConfig::get_strings(const std::string& key) const {
  std::vector<std::string> out;
  for (const std::string& f : split_csv_line(get(key))) {
    std::string t = trim(f);
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

const std::vector<double>& default_gamma_grid() {
  static const std::vector<double> g = {1e-4, 3e-4, 1e-3, 3e-3, 1e-2, 3e-2, 1e-1};
  return g;
}

ExperimentConfig ExperimentConfig::from_kv(const KeyValueConfig& kv) {
  static const std::set<std::string> known = {
      "problem.loss",       "problem.clip_B",     "problem.divergence",
      "problem.alpha",      "problem.cr_k",       "problem.lambda",
      "data.generator",     "data.path",          "data.seed",
      "data.base_n",        "data.feature_dim",   "data.ratios",
      "optimizer.method",   "optimizer.gamma",    "optimizer.beta",
      "optimizer.batch",    "optimizer.iters",    "optimizer.eps",
      "optimizer.seed",     "optimizer.record_full_every",
      "optimizer.x0",       "optimizer.eta0",
      "evaluation.psi_every", "evaluation.eta_tol",
      "output.dir",
      "compare.optimizers", "compare.gamma_grid", "compare.metric",
      "compare.threshold",  "compare.budget_iters"};
  for (const auto& [key, value] : kv.entries()) {
    if (!known.count(key)) {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }

  ExperimentConfig c;
  c.loss_kind = kv.get_or("problem.loss", c.loss_kind);
  c.clip_B = kv.get_double_or("problem.clip_B", c.clip_B);
  c.divergence_kind = kv.get_or("problem.divergence", c.divergence_kind);
  c.alpha = kv.get_double_or("problem.alpha", c.alpha);
  c.cr_k = kv.get_double_or("problem.cr_k", c.cr_k);
  c.lambda = kv.get_double_or("problem.lambda", c.lambda);

  c.generator = kv.get_or("data.generator", c.generator);
  c.csv_path = kv.get_or("data.path", "");
  c.data_seed = kv.get_u64_or("data.seed", c.data_seed);
  c.base_n = kv.get_int_or("data.base_n", c.base_n);
  c.feature_dim = kv.get_int_or("data.feature_dim", c.feature_dim);
  c.ratios = kv.get_doubles_or("data.ratios", {});

  c.method = kv.get_or("optimizer.method", c.method);
  c.opt.step_gamma = kv.get_double_or("optimizer.gamma", 0.01);
  c.opt.momentum_beta = kv.get_double_or("optimizer.beta", 0.9);
  c.opt.batch_S = kv.get_int_or("optimizer.batch", 8);
  c.opt.iters_T = kv.get_int_or("optimizer.iters", 500);
  c.theorem_eps = kv.get_double_or("optimizer.eps", 0.1);
  c.opt.target_eps = c.theorem_eps;
  c.opt.seed = kv.get_u64_or("optimizer.seed", 1);
  c.opt.record_full_every = kv.get_int_or("optimizer.record_full_every", 10);
  c.x0 = kv.get_doubles_or("optimizer.x0", {});
  c.eta0 = kv.get_double_or("optimizer.eta0", 0.0);

  c.psi_every = kv.get_int_or("evaluation.psi_every", 1);
  c.eta_tol = kv.get_double_or("evaluation.eta_tol", 1e-9);

  c.output_dir = kv.get_or("output.dir", "out");

  if (kv.has("compare.optimizers")) {
    c.compare_optimizers = kv.get_strings("compare.optimizers");
  }
  c.gamma_grid = kv.get_doubles_or("compare.gamma_grid", {});
  c.threshold_metric = kv.get_or("compare.metric", c.threshold_metric);
  c.threshold_value = kv.get_double_or("compare.threshold", c.threshold_value);
  c.budget_iters = kv.get_int_or("compare.budget_iters", 0);

  if (c.generator == "csv" && c.csv_path.empty()) {
    throw ConfigError("data.generator = csv requires data.path");
  }
  if (c.psi_every < 1) throw ConfigError("evaluation.psi_every must be >= 1");
  return c;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  return from_kv(KeyValueConfig::parse_file(path));
}

}  // namespace drokit
