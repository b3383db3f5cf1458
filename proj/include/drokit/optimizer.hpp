#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "drokit/dro.hpp"

namespace drokit {

enum class OptMethod { NormalizedMomentum, SGD, RSPG };

struct OptimizerConfig {
  OptMethod method = OptMethod::NormalizedMomentum;
  double step_gamma = 0.01;       // gamma
  double momentum_beta = 0.9;     // beta in [0, 1)
  int batch_S = 1;
  int iters_T = 100;
  double target_eps = 0.1;
  std::uint64_t seed = 1;
  std::optional<std::pair<double, double>> eta_box;  // RSPG interval [U~, V~]

  /// Cadence of full-gradient diagnostics (0 disables; they cost a data pass
  /// and are not counted as gradient evaluations).
  int record_full_every = 10;
  /// Store iterate/momentum/gradient vectors for the error decomposition;
  /// forces full-gradient recording every iteration.
  bool record_vectors = false;
  /// Draw the whole dataset in index order instead of sampling.
  bool use_all_batch = false;

  void validate() const;
};

struct TraceRecord {
  int iter = 0;               // 1-based
  double objective = 0.0;     // batch objective estimate at the pre-step point
  std::optional<double> grad_norm;  // full-gradient norm at the pre-step point
  double mom_norm = 0.0;      // |m_t| (SGD: batch-gradient norm; RSPG: generalized gradient norm)
  double step = 0.0;          // |w_t - w_{t-1}|
  double eta = 0.0;
};

struct TraceSummary {
  double best_grad_norm = std::numeric_limits<double>::quiet_NaN();
  std::uint64_t gradient_evaluations = 0;
  double wall_time_s = 0.0;
  int skipped_steps = 0;
};

/// Per-iteration vectors kept when record_vectors is on. Indexing follows the
/// update m_{t+1} = beta m_t + (1-beta) g(w_t), w_{t+1} = w_t - step(m_{t+1}):
/// w[t] and full_grad[t] are the iterate and exact gradient at step t,
/// batch_grad[t] is the estimate drawn at w[t], momentum[t] is m_t.
struct TraceDetail {
  double beta = 0.0;
  std::vector<Eigen::VectorXd> w;           // w_0 .. w_T
  std::vector<Eigen::VectorXd> momentum;    // m_0 .. m_T
  std::vector<Eigen::VectorXd> batch_grad;  // g(w_0) .. g(w_{T-1})
  std::vector<Eigen::VectorXd> full_grad;   // grad F(w_0) .. grad F(w_{T-1})
};

struct TrainingTrace {
  std::vector<TraceRecord> records;
  TraceSummary summary;
  std::optional<TraceDetail> detail;

  /// CSV with header iter,objective,grad_norm,mom_norm,step,eta; empty
  /// grad_norm field when the full gradient was not recorded that iteration.
  void write_csv(std::ostream& out) const;
  std::string csv_string() const;
  /// Flat key=value block (includes wall time, so not byte-stable).
  std::string summary_text() const;
};

/// Thrown when the SGD objective estimate explodes; carries the partial trace.
struct DivergenceDetected : Error {
  DivergenceDetected(const std::string& msg, TrainingTrace t)
      : Error(msg), trace(std::move(t)) {}
  TrainingTrace trace;
};

/// Finite-sum objective the optimizers run on. The DRO adapter supplies the
/// joint (x, eta) view; tests can supply synthetic objectives directly.
struct SampledObjective {
  int dim = 0;
  std::size_t n_samples = 0;
  std::function<double(const Eigen::VectorXd&, std::size_t)> sample_value;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&, std::size_t)> sample_grad;
  /// Optional iterate check (working-box diagnostics); throws on violation.
  std::function<void(const Eigen::VectorXd&)> validate;

  double full_value(const Eigen::VectorXd& w) const;
  Eigen::VectorXd full_grad(const Eigen::VectorXd& w) const;
};

SampledObjective make_dro_objective(const DroProblem& p, const Dataset& data);

using IterObserver = std::function<void(int iter, const Eigen::VectorXd& w)>;

struct GenericRunResult {
  Eigen::VectorXd w;
  TrainingTrace trace;
};

struct RunResult {
  DualPoint w;
  TrainingTrace trace;
};

/// Mini-batch normalized SGD with momentum:
///   m_t = beta m_{t-1} + (1-beta) g(w_{t-1}),  w_t = w_{t-1} - gamma m_t/|m_t|.
/// m_0 is the first stochastic gradient at w_0 (one extra batch draw). Steps
/// with |m_t| <= 1e-300 are skipped and counted in the summary.
GenericRunResult run_normalized_momentum(const SampledObjective& obj,
                                         const Eigen::VectorXd& w0,
                                         const OptimizerConfig& cfg,
                                         const IterObserver& observer = {});
RunResult run_normalized_momentum(const DroProblem& p, const Dataset& data,
                                  const DualPoint& w0, const OptimizerConfig& cfg,
                                  const IterObserver& observer = {});

/// Plain mini-batch SGD: w_t = w_{t-1} - gamma g(w_{t-1}).
GenericRunResult run_sgd(const SampledObjective& obj, const Eigen::VectorXd& w0,
                         const OptimizerConfig& cfg,
                         const IterObserver& observer = {});
RunResult run_sgd(const DroProblem& p, const Dataset& data, const DualPoint& w0,
                  const OptimizerConfig& cfg, const IterObserver& observer = {});

/// Randomized stochastic projected gradient: projected SGD on
/// R^n x [U~, V~] (projection acts on the last coordinate only) returning an
/// iterate drawn uniformly from {1..T}. The trace's mom_norm column records
/// the generalized gradient norm |(w - w+)/gamma|.
GenericRunResult run_rspg(const SampledObjective& obj, const Eigen::VectorXd& w0,
                          const OptimizerConfig& cfg,
                          const IterObserver& observer = {});
/// DRO wrapper; requires a bounded loss. When cfg.eta_box is unset it is
/// filled from eta_interval(p, cfg.target_eps).
RunResult run_rspg(const DroProblem& p, const Dataset& data, const DualPoint& w0,
                   const OptimizerConfig& cfg, const IterObserver& observer = {});

struct EtaInterval {
  double U = 0.0;
  double V = 0.0;
  double U_wide = 0.0;
  double V_wide = 0.0;
};

/// Dual-variable interval for bounded losses: U = -lambda C / G,
/// V = (B - lambda C) / G, widened by eps / L on both sides.
EtaInterval eta_interval(const DroProblem& p, double eps);

/// Hyperparameters prescribed by the convergence analysis:
///   1 - beta = min(4 Gamma^2 eps^2 / Lambda^2, 1)   (1 when Gamma = 0),
///   gamma    = (1/8) min(1/K1, eps/K0) (1 - beta),
///   S        = max(1, ceil(64 Gamma^2)),
///   T        = ceil(4 Delta / (gamma eps)).
/// Emits a warning string when eps exceeds min(K0/K1, Lambda/(2 Gamma)).
OptimizerConfig theorem_hyperparams(const TheoremConstants& c, double eps,
                                    std::string* warning = nullptr);

/// Momentum estimation error delta_t = m_{t+1} - grad F(w_t), both measured
/// directly and rebuilt from its recursion
///   delta_t = beta sum_tau beta^tau (grad F(w_{t-tau-1}) - grad F(w_{t-tau}))
///           + (1-beta) sum_tau beta^tau dhat_{t-tau} + (1-beta) beta^t dhat_0
///           + beta^{t+1} (m_0 - grad F(w_0)),
/// with dhat_s the stochastic gradient noise at step s.
struct DeltaDecomposition {
  std::vector<Eigen::VectorXd> direct;
  std::vector<Eigen::VectorXd> reconstructed;
  double max_abs_gap = 0.0;
};

/// Requires a trace recorded with record_vectors; throws TraceIncomplete.
DeltaDecomposition momentum_error_decomposition(const TrainingTrace& trace);

}  // namespace drokit
