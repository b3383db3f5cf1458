#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "drokit/optimizer.hpp"

namespace drokit {

/// Line-based "section.key = value" configuration with '#' comments.
class KeyValueConfig {
 public:
  static KeyValueConfig parse_file(const std::string& path);
  static KeyValueConfig parse_string(const std::string& text,
                                     const std::string& origin = "<string>");

  bool has(const std::string& key) const;
  std::string get(const std::string& key) const;
  std::string get_or(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key) const;
  double get_double_or(const std::string& key, double fallback) const;
  int get_int_or(const std::string& key, int fallback) const;
  std::uint64_t get_u64_or(const std::string& key, std::uint64_t fallback) const;
  std::vector<double> get_doubles_or(const std::string& key,
                                     std::vector<double> fallback) const;
  std::vector<std::string> get_strings(const std::string& key) const;

  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
  std::string origin_;
};

/// Everything one reproducible run or comparison needs.
struct ExperimentConfig {
  // problem.*
  std::string loss_kind = "counterexample";  // counterexample|logistic|clipped_quadratic
  double clip_B = 2.0;
  std::string divergence_kind = "chi2";
  double alpha = 0.02;
  double cr_k = 2.0;
  double lambda = 0.1;

  // data.*
  std::string generator = "rademacher";  // rademacher|imbalanced|csv
  std::string csv_path;
  std::uint64_t data_seed = 1;
  int base_n = 500;
  int feature_dim = 10;
  std::vector<double> ratios;  // empty -> default_imbalance_ratios()

  // optimizer.*
  std::string method = "normalized_momentum";  // + sgd|rspg|theorem_auto
  OptimizerConfig opt;
  std::vector<double> x0;  // empty -> zeros; single entry broadcasts
  double eta0 = 0.0;
  double theorem_eps = 0.1;  // target eps for theorem_auto

  // evaluation.*
  int psi_every = 1;  // epochs between Psi evaluations
  double eta_tol = 1e-9;

  // output.*
  std::string output_dir = "out";

  // compare.*
  std::vector<std::string> compare_optimizers;
  std::vector<double> gamma_grid;   // empty -> the tuned default grid
  std::string threshold_metric = "grad_norm";  // grad_norm|psi|cvar
  double threshold_value = 0.1;     // grad-norm level or relative psi slack
  int budget_iters = 0;             // 0 -> opt.iters_T

  static ExperimentConfig from_kv(const KeyValueConfig& kv);
  static ExperimentConfig from_file(const std::string& path);
};

/// Learning-rate grid used when a comparison asks for tuned baselines.
const std::vector<double>& default_gamma_grid();

}  // namespace drokit
