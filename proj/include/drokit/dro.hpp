#pragma once

#include <Eigen/Core>
#include <cstdint>

#include "drokit/divergence.hpp"
#include "drokit/loss.hpp"
#include "drokit/rng.hpp"

namespace drokit {

/// The joint rescaled objective
///   Lhat(x, eta) = E_xi[ lambda psi*((l(x;xi) - G eta) / lambda) + G eta ]
/// over the empirical distribution of a dataset.
struct DroProblem {
  LossModel loss;
  DivergenceSpec divergence;
  double lambda = 1.0;
  double rescale_G = 1.0;  // the G appearing in the eta rescaling

  static DroProblem make(LossModel loss, DivergenceSpec div, double lambda);
  static DroProblem make(LossModel loss, DivergenceSpec div, double lambda,
                         double rescale_G);
};

struct DualPoint {
  Eigen::VectorXd x;
  double eta = 0.0;

  Eigen::VectorXd joint() const;
  static DualPoint from_joint(const Eigen::VectorXd& w);
};

struct GradientEstimate {
  Eigen::VectorXd grad_x;
  double grad_eta = 0.0;
  int batch_size = 1;
  std::uint64_t seed_state = 0;  // RNG draw counter before the batch

  Eigen::VectorXd joint() const;
  double norm() const;
};

/// Constants feeding the convergence theory: generalized smoothness
/// (K0, K1), gradient-variance envelope (Gamma^2, Lambda^2) and the
/// optimality-gap estimate Delta.
struct TheoremConstants {
  double K0 = 0.0;
  double K1 = 0.0;
  double Gamma2 = 0.0;
  double Lambda2 = 0.0;
  double Delta = 0.0;
  bool delta_is_estimate = true;
};

struct StationarityReport {
  double eps = 0.0;
  double joint_norm = 0.0;     // |grad of Lhat| at the queried point
  bool certified = false;      // joint_norm <= eps / sqrt(2)
  double sum_form = 0.0;       // |grad_x| + |grad_eta|
  bool sum_certified = false;  // sum_form <= eps
};

/// lambda psi*((l(x;xi) - G eta) / lambda) + G eta for one sample.
double objective_sample(const DroProblem& p, const DualPoint& w, const Sample& xi);

/// Mean of objective_sample over the dataset.
double objective_full(const DroProblem& p, const DualPoint& w, const Dataset& data);

/// Gradient of the per-sample objective:
///   grad_x  = (psi*)'(z) grad l(x, xi),   grad_eta = G (1 - (psi*)'(z)).
GradientEstimate sample_gradient(const DroProblem& p, const DualPoint& w,
                                 const Sample& xi);

/// Exact average of sample_gradient over the dataset.
GradientEstimate full_gradient(const DroProblem& p, const DualPoint& w,
                               const Dataset& data);

/// Mean gradient over batch_size samples drawn i.i.d. uniformly with
/// replacement (or over the whole dataset in index order when use_all is
/// set). Deterministic given the rng state.
GradientEstimate stochastic_gradient(const DroProblem& p, const DualPoint& w,
                                     const Dataset& data, int batch_size,
                                     Rng& rng, bool use_all = false);

/// Solves the inner minimization over eta by bisection on
///   h(eta) = 1 - E[(psi*)'((l - G eta) / lambda)],
/// which is non-decreasing in eta. tol <= 0 selects the default
/// 1e-10 * (1 + bracket width). Throws BracketFailure if no sign change is
/// found after 60 bracket doublings.
double solve_eta(const DroProblem& p, const Eigen::VectorXd& x,
                 const Dataset& data, double tol = 0.0);

/// Psi(x): the objective at (x, solve_eta(...)).
double evaluate_psi(const DroProblem& p, const Eigen::VectorXd& x,
                    const Dataset& data, double tol = 0.0);

/// Certifies stationarity transfer from the joint gradient: a joint norm at
/// most eps/sqrt(2) makes x an eps-stationary point of Psi.
StationarityReport stationarity_transfer(const GradientEstimate& grad, double eps,
                                         double rescale_G);

/// Populates the generalized-smoothness and variance constants from the
/// problem's declared loss/divergence constants. gamma2 is configurable
/// because the relative-variance coefficient enters the batch-size rule.
/// Delta is left at 0 (an estimate must come from estimate_delta). Throws
/// MissingConstant when a required field is absent.
TheoremConstants dro_constants(const DroProblem& p, double gamma2 = 8.0);

/// Optimality-gap estimate: objective at w0 minus the smallest sample loss
/// at w0.x, floored at 0. Recorded as an estimate.
double estimate_delta(const DroProblem& p, const DualPoint& w0,
                      const Dataset& data);

}  // namespace drokit
