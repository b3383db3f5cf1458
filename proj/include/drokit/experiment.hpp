#pragma once

#include <optional>
#include <string>
#include <vector>

#include "drokit/config.hpp"
#include "drokit/dro.hpp"
#include "drokit/optimizer.hpp"

namespace drokit {

struct BuiltProblem {
  DroProblem problem;
  Dataset data;
  DualPoint w0;
};

/// Instantiates problem, dataset and initial point from a config. When the
/// chosen path needs a noise bound that the loss does not declare, one is
/// estimated and recorded in the artifacts.
BuiltProblem build_problem(const ExperimentConfig& cfg);

/// Executes a configured run and writes trace.csv, psi_curve.csv and
/// summary.txt under cfg.output_dir. psi_curve values come from a fresh
/// inner eta solve at eta_tol, never from the optimizer's transient eta.
/// Throws DivergenceDetected / ConfigError like the library calls it wraps.
void run_experiment(const ExperimentConfig& cfg);

struct CompareRow {
  std::string optimizer;
  std::optional<std::uint64_t> evals_to_threshold;  // nullopt: not reached
  double final_metric = 0.0;  // final Psi (or CVaR objective in cvar mode)
  double best_gamma = 0.0;
  bool completed = false;
};

/// Runs each requested optimizer with a learning-rate grid, selects the
/// fastest arm per optimizer, writes compare.csv and per-arm traces.
/// Arms run in parallel capped by DRO_KIT_THREADS, with per-arm seeds
/// derived from the master seed by fixed offsets.
std::vector<CompareRow> run_compare(const ExperimentConfig& cfg);

/// CLI entry points; map errors to the documented exit codes
/// (0 ok, 2 divergence detected, 3 config error).
int cmd_run(const std::string& config_path);
int cmd_verify(const std::string& suite, const std::string& out_dir);
int cmd_compare(const std::string& config_path);

}  // namespace drokit
