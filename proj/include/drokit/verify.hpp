#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "drokit/dro.hpp"
#include "drokit/optimizer.hpp"

namespace drokit {

/// Outcome of one certification run. worst_violation is the largest observed
/// (measured - bound) over all instances, so any value at most `tolerance`
/// (usually 0 or a small slack) passes.
struct CheckReport {
  std::string check_name;
  int instances_tested = 0;
  double worst_violation = 0.0;
  double tolerance = 0.0;
  std::string witness;  // key=value rendering of the worst instance
  bool passed = false;

  std::string text() const;  // flat key=value block
};

/// Brute-force conjugate: sup over a dense s-grid (refined by ternary search,
/// valid since s t - psi(s) is concave) of s t - psi(s).
double conj_oracle(const DivergenceSpec& div, double t);

/// CVaR objective (1/alpha) E[(l - eta)_+] + eta minimized over eta by a
/// 400-point grid plus golden-section refinement; the eta-derivative is
/// discontinuous, so bisection is not used here.
double cvar_psi_reference(double alpha, const std::vector<double>& losses);

/// Counterexample loss + chi-squared divergence, the problem most
/// certificates run on.
DroProblem make_counterexample_chi2(double lambda = 1.0);

/// |closed-form psi* - oracle| over n_t points of [t_lo, t_hi], against a
/// 1e-4 gap bound.
CheckReport check_conjugate_oracle(const DivergenceSpec& div, double t_lo = -5.0,
                                   double t_hi = 5.0, int n_t = 200);

/// Exact two-point gradient variance against the envelope
/// 11 G^2 M^2 sigma^2 / lambda^2 + 8 (G^2 + |grad Lhat|^2) on an
/// (x, eta) grid. Requires two-sample data so expectations are exact.
CheckReport check_variance_bound(const DroProblem& p, const Dataset& data,
                                 double half_width = 3.0, int grid_n = 41);

/// Generalized smoothness |grad Lhat(w) - grad Lhat(w')| <=
/// (K0 + K1 |grad Lhat(w)|) |w - w'| on random nearby pairs, 1e-8 slack.
CheckReport check_generalized_smoothness(const DroProblem& p, const Dataset& data,
                                         int n_pairs = 1000, double radius = 0.1,
                                         std::uint64_t seed = 2026);

/// Smoothed-CVaR approximation: the gap |Psi_smoothed,lambda - Psi_cvar| on a
/// fixed discrete loss set is non-increasing along the lambda sequence and
/// bounded by (lambda/alpha) max(-log alpha, -log(1-alpha)); the per-sample
/// limit bound is certified on a z-grid as well.
CheckReport check_cvar_limit(double alpha, const std::vector<double>& lambdas,
                             const std::vector<double>& losses,
                             double bound_slack = 1e-6);

/// Conjugate-derivative suprema (1/alpha and 1/(4 alpha)) on a t-grid plus
/// the per-sample gradient-norm envelope 2 G^2 / alpha^2 on random draws.
CheckReport check_smoothed_cvar_constants(const std::vector<double>& alphas,
                                          int n_grad_samples = 1000,
                                          std::uint64_t seed = 2027);

/// full_gradient vs central finite differences of the full objective,
/// relative error at most 1e-5 on random points.
CheckReport check_gradient_fd(const DroProblem& p, const Dataset& data,
                              int n_points = 50, std::uint64_t seed = 2028);

/// Bounded-loss certificates on a clipped problem: the per-sample gradient
/// envelope Lambda^2 = 2 [(psi*)'(C + B/lambda)]^2 G^2 + G^2 inside the eta
/// interval, plain smoothness by random-pair ratios, and exact agreement of
/// the projected-step generalized gradient with the batch gradient whenever
/// the eta projection is inactive.
CheckReport check_bounded_case(int n_samples = 1000, std::uint64_t seed = 2029);

/// Registry used by the CLI and the acceptance suite.
std::vector<std::string> verification_suite_names();
std::vector<CheckReport> run_verification_suite(const std::string& name);
std::vector<CheckReport> run_all_verifications();

}  // namespace drokit
