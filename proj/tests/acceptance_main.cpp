// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Each criterion pins its tolerances in code; runtime limits are
// asserted where the criterion carries one.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <vector>

#include "drokit/experiment.hpp"
#include "drokit/verify.hpp"

using namespace drokit;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool ok = true;
  std::string detail;
};

using CriterionFn = std::function<Outcome()>;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

bool reports_pass(const std::vector<CheckReport>& reports, std::string* detail) {
  bool ok = true;
  std::ostringstream os;
  for (const CheckReport& r : reports) {
    if (!r.passed) {
      ok = false;
      os << r.check_name << " violated by " << r.worst_violation << " at "
         << r.witness << "; ";
    }
  }
  if (ok) os << reports.size() << " check(s) clean";
  *detail = os.str();
  return ok;
}

ExperimentConfig counterexample_compare_config(const fs::path& out) {
  ExperimentConfig cfg;
  cfg.loss_kind = "counterexample";
  cfg.divergence_kind = "chi2";
  cfg.lambda = 1.0;
  cfg.generator = "rademacher";
  cfg.opt.batch_S = 8;
  cfg.opt.momentum_beta = 0.9;
  cfg.opt.seed = 1;
  cfg.budget_iters = 4000;
  cfg.x0 = {3.0};
  cfg.eta0 = 0.0;
  cfg.output_dir = out.string();
  cfg.compare_optimizers = {"normalized_momentum", "sgd"};
  cfg.threshold_metric = "grad_norm";
  cfg.threshold_value = 0.1;
  return cfg;
}

ExperimentConfig imbalanced_compare_config(const fs::path& out) {
  ExperimentConfig cfg;
  cfg.loss_kind = "logistic";
  cfg.divergence_kind = "chi2";
  cfg.lambda = 0.1;
  cfg.generator = "imbalanced";
  cfg.data_seed = 7;
  cfg.base_n = 500;
  cfg.feature_dim = 10;
  cfg.opt.batch_S = 128;
  cfg.opt.momentum_beta = 0.9;
  cfg.opt.seed = 1;
  cfg.budget_iters = 840;  // 30 epochs of ceil(3505 / 128) iterations
  cfg.output_dir = out.string();
  cfg.compare_optimizers = {"normalized_momentum", "sgd"};
  cfg.threshold_metric = "psi";
  cfg.threshold_value = 0.05;
  return cfg;
}

ExperimentConfig cvar_compare_config(const fs::path& out) {
  ExperimentConfig cfg;
  cfg.loss_kind = "logistic";
  cfg.divergence_kind = "smoothed_cvar";
  cfg.alpha = 0.02;
  cfg.lambda = 0.1;
  cfg.generator = "imbalanced";
  cfg.data_seed = 7;
  cfg.base_n = 500;
  cfg.feature_dim = 10;
  cfg.opt.batch_S = 128;
  cfg.opt.seed = 1;
  cfg.budget_iters = 840;
  cfg.output_dir = out.string();
  cfg.compare_optimizers = {"sgd", "cvar_subgradient"};
  cfg.threshold_metric = "cvar";
  return cfg;
}

Outcome criterion_conjugate_oracle() {
  auto t0 = std::chrono::steady_clock::now();
  std::string detail;
  bool ok = reports_pass(run_verification_suite("conjugate-oracle"), &detail);
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (secs >= 5.0) {
    ok = false;
    detail += " [runtime " + std::to_string(secs) + "s exceeds 5s]";
  }
  return {ok, detail};
}

Outcome criterion_variance_bound() {
  auto t0 = std::chrono::steady_clock::now();
  CheckReport r =
      check_variance_bound(make_counterexample_chi2(1.0), rademacher_dataset(), 3.0, 41);
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  bool ok = r.passed && r.instances_tested == 1681 && secs < 10.0;
  std::ostringstream os;
  os << r.instances_tested << " grid points, worst violation " << r.worst_violation
     << ", " << secs << "s";
  return {ok, os.str()};
}

Outcome criterion_generalized_smoothness() {
  CheckReport r = check_generalized_smoothness(make_counterexample_chi2(1.0),
                                               rademacher_dataset(), 1000, 0.1);
  std::ostringstream os;
  os << "worst violation " << r.worst_violation << " (slack 1e-8)";
  return {r.passed, os.str()};
}

Outcome criterion_smoothed_cvar_constants() {
  CheckReport r = check_smoothed_cvar_constants({0.02, 0.25, 0.5}, 1000);
  std::ostringstream os;
  os << "worst violation " << r.worst_violation << " over " << r.instances_tested
     << " instances";
  return {r.passed, os.str()};
}

Outcome criterion_cvar_limit() {
  auto t0 = std::chrono::steady_clock::now();
  CheckReport r = check_cvar_limit(0.3, {1.0, 0.3, 0.1, 0.03, 0.01},
                                   {0.0, 0.4, 0.9, 1.5, 2.2}, 1e-6);
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  bool ok = r.passed && secs < 5.0;
  std::ostringstream os;
  os << "worst violation " << r.worst_violation << ", " << secs << "s";
  return {ok, os.str()};
}

Outcome criterion_gradient_fd() {
  std::string detail;
  bool ok = reports_pass(run_verification_suite("gradient-fd"), &detail);
  return {ok, detail};
}

Outcome criterion_delta_identity() {
  DroProblem p = make_counterexample_chi2(1.0);
  Dataset data = rademacher_dataset();
  DualPoint w0;
  w0.x = Eigen::VectorXd::Constant(1, 2.5);
  w0.eta = 0.0;
  OptimizerConfig cfg;
  cfg.method = OptMethod::NormalizedMomentum;
  cfg.step_gamma = 0.02;
  cfg.momentum_beta = 0.9;
  cfg.batch_S = 4;
  cfg.iters_T = 50;
  cfg.seed = 21;
  cfg.record_vectors = true;
  RunResult r = run_normalized_momentum(p, data, w0, cfg);
  DeltaDecomposition dec = momentum_error_decomposition(r.trace);
  std::ostringstream os;
  os << "max |direct - reconstructed| = " << dec.max_abs_gap << " over "
     << dec.direct.size() << " steps";
  return {dec.max_abs_gap <= 1e-10, os.str()};
}

Outcome criterion_descent_inequalities() {
  DroProblem p = make_counterexample_chi2(1.0);
  Dataset data = rademacher_dataset();
  TheoremConstants c = dro_constants(p);
  DualPoint w0;
  w0.x = Eigen::VectorXd::Constant(1, 2.5);
  w0.eta = 0.0;
  OptimizerConfig cfg;
  cfg.method = OptMethod::NormalizedMomentum;
  cfg.step_gamma = 0.02;
  cfg.momentum_beta = 0.9;
  cfg.batch_S = 4;
  cfg.iters_T = 500;
  cfg.seed = 22;
  cfg.record_vectors = true;
  RunResult r = run_normalized_momentum(p, data, w0, cfg);
  const TraceDetail& d = *r.trace.detail;
  SampledObjective obj = make_dro_objective(p, data);

  double worst36 = -1e300, worst37 = -1e300;
  for (std::size_t t = 0; t + 1 < d.w.size(); ++t) {
    Eigen::VectorXd z = d.w[t] - d.w[t + 1];
    double f_t = obj.full_value(d.w[t]);
    double f_next = obj.full_value(d.w[t + 1]);
    double gnorm = d.full_grad[t].norm();
    double rhs = f_t - d.full_grad[t].dot(z) +
                 0.5 * (c.K0 + c.K1 * gnorm) * z.squaredNorm();
    worst36 = std::max(worst36, f_next - rhs);

    double g = cfg.step_gamma;
    double delta_norm = (d.momentum[t + 1] - d.full_grad[t]).norm();
    double lower = (g - 0.5 * c.K1 * g * g) * gnorm - 0.5 * c.K0 * g * g -
                   2.0 * g * delta_norm;
    worst37 = std::max(worst37, lower - (f_t - f_next));
  }
  std::ostringstream os;
  os << "descent-inequality slack " << worst36 << ", per-step-bound slack "
     << worst37 << " over 500 iterations";
  return {worst36 <= 1e-8 && worst37 <= 1e-8, os.str()};
}

Outcome criterion_fig1_ordering() {
  auto t0 = std::chrono::steady_clock::now();
  fs::path base = fs::temp_directory_path() / "drokit_acceptance_fig1";
  fs::remove_all(base);
  std::ostringstream os;
  bool ok = true;

  {
    std::vector<CompareRow> rows =
        run_compare(counterexample_compare_config(base / "counterexample"));
    const CompareRow& nm = rows[0];
    const CompareRow& sgd = rows[1];
    bool part = nm.evals_to_threshold.has_value() &&
                (!sgd.evals_to_threshold.has_value() ||
                 *nm.evals_to_threshold < *sgd.evals_to_threshold);
    os << "counterexample: normalized momentum "
       << (nm.evals_to_threshold ? std::to_string(*nm.evals_to_threshold)
                                 : std::string("not-reached"))
       << " vs sgd "
       << (sgd.evals_to_threshold ? std::to_string(*sgd.evals_to_threshold)
                                  : std::string("not-reached"))
       << " evals to |grad| <= 0.1; ";
    ok = ok && part;
  }
  {
    std::vector<CompareRow> rows =
        run_compare(imbalanced_compare_config(base / "imbalanced"));
    const CompareRow& nm = rows[0];
    const CompareRow& sgd = rows[1];
    bool part = nm.evals_to_threshold.has_value() &&
                (!sgd.evals_to_threshold.has_value() ||
                 *nm.evals_to_threshold < *sgd.evals_to_threshold);
    os << "imbalanced logistic: normalized momentum "
       << (nm.evals_to_threshold ? std::to_string(*nm.evals_to_threshold)
                                 : std::string("not-reached"))
       << " vs sgd "
       << (sgd.evals_to_threshold ? std::to_string(*sgd.evals_to_threshold)
                                  : std::string("not-reached"))
       << " evals to Psi within 5%; ";
    ok = ok && part;
  }
  {
    std::vector<CompareRow> rows = run_compare(cvar_compare_config(base / "cvar"));
    const CompareRow& smoothed = rows[0];
    const CompareRow& plain = rows[1];
    bool part = smoothed.completed && plain.completed &&
                smoothed.final_metric <= plain.final_metric;
    os << "cvar objective after equal budget: smoothed " << smoothed.final_metric
       << " vs plain subgradient " << plain.final_metric << "; ";
    ok = ok && part;
  }
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  os << secs << "s";
  if (secs >= 300.0) ok = false;
  fs::remove_all(base);
  return {ok, os.str()};
}

Outcome criterion_bounded_case() {
  // Plug-in bound from the interval endpoints: C = 0, (psi*)'(2) = 2,
  // Lambda^2 = 2 * 2^2 * 1 + 1 = 9 for chi2, lambda = 1, B = 2, G = 1.
  DivergenceSpec chi2 = DivergenceSpec::chi2();
  double slope = chi2.conj_grad(chi2.crossing_C() + 2.0 / 1.0);
  double lambda2 = 2.0 * slope * slope * 1.0 + 1.0;
  bool plug_in_ok = std::abs(lambda2 - 9.0) < 1e-12;

  CheckReport r = check_bounded_case(1000);
  std::ostringstream os;
  os << "Lambda^2 plug-in " << lambda2 << ", worst violation " << r.worst_violation;
  return {plug_in_ok && r.passed, os.str()};
}

Outcome criterion_determinism() {
  fs::path base = fs::temp_directory_path() / "drokit_acceptance_det";
  fs::remove_all(base);
  ExperimentConfig cfg;
  cfg.loss_kind = "counterexample";
  cfg.divergence_kind = "chi2";
  cfg.lambda = 1.0;
  cfg.generator = "rademacher";
  cfg.method = "normalized_momentum";
  cfg.opt.step_gamma = 0.05;
  cfg.opt.momentum_beta = 0.9;
  cfg.opt.batch_S = 4;
  cfg.opt.iters_T = 120;
  cfg.opt.seed = 17;
  cfg.x0 = {3.0};

  cfg.output_dir = (base / "a").string();
  run_experiment(cfg);
  cfg.output_dir = (base / "b").string();
  run_experiment(cfg);
  bool trace_same = slurp(base / "a" / "trace.csv") == slurp(base / "b" / "trace.csv");
  bool psi_same =
      slurp(base / "a" / "psi_curve.csv") == slurp(base / "b" / "psi_curve.csv");

  // Changing the seed must change the trace (the comparison is not vacuous).
  cfg.opt.seed = 18;
  cfg.output_dir = (base / "c").string();
  run_experiment(cfg);
  bool differs = slurp(base / "a" / "trace.csv") != slurp(base / "c" / "trace.csv");
  fs::remove_all(base);

  std::ostringstream os;
  os << "trace bytes identical: " << (trace_same ? "yes" : "no")
     << ", psi curve identical: " << (psi_same ? "yes" : "no")
     << ", seed change alters trace: " << (differs ? "yes" : "no");
  return {trace_same && psi_same && differs, os.str()};
}

}  // namespace

int main() {
  std::vector<std::pair<std::string, CriterionFn>> criteria = {
      {"conjugate oracle gap <= 1e-4 on [-5,5]", criterion_conjugate_oracle},
      {"gradient-variance envelope on the 41x41 grid", criterion_variance_bound},
      {"generalized smoothness on 1000 random pairs", criterion_generalized_smoothness},
      {"smoothed-cvar derivative and gradient-norm caps", criterion_smoothed_cvar_constants},
      {"smoothed-to-plain cvar gap: monotone and bounded", criterion_cvar_limit},
      {"full gradient vs finite differences (3 families)", criterion_gradient_fd},
      {"momentum error recursion identity (50 steps)", criterion_delta_identity},
      {"descent inequalities along a 500-step run", criterion_descent_inequalities},
      {"optimizer ordering: momentum beats sgd; smoothed beats plain cvar",
       criterion_fig1_ordering},
      {"bounded-loss gradient envelope and projection identity", criterion_bounded_case},
      {"byte-identical traces under a fixed seed", criterion_determinism},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = criteria[i].second();
    } catch (const std::exception& e) {
      out.ok = false;
      out.detail = std::string("exception: ") + e.what();
    }
    double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("[%s] criterion %zu: %s (%.2fs): %s\n", out.ok ? "PASS" : "FAIL",
                i + 1, criteria[i].first.c_str(), secs, out.detail.c_str());
    if (!out.ok) ++failures;
  }
  if (failures == 0) {
    std::printf("all %zu acceptance criteria passed\n", criteria.size());
  } else {
    std::printf("%d criterion(s) failed\n", failures);
  }
  return failures;
}
