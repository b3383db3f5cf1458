#pragma once

#include <optional>
#include <string>
#include <vector>

#include "drokit/errors.hpp"

namespace drokit {

enum class DivergenceKind {
  Chi2,
  KL,
  CVaR,
  SmoothedCVaR,
  KLRegCVaR,
  CressieRead,
};

/// Extended real: a finite value or a +infinity sentinel. Divergence values
/// outside the generator's domain are reported through this type instead of
/// a floating-point infinity.
class ExtReal {
 public:
  static ExtReal finite(double v) { return ExtReal(v, true); }
  static ExtReal infinity() { return ExtReal(0.0, false); }

  bool is_finite() const { return finite_; }
  bool is_infinite() const { return !finite_; }

  /// Finite value; calling this on the infinity sentinel is an error.
  double value() const {
    if (!finite_) throw Error("ExtReal: value() called on +infinity sentinel");
    return value_;
  }

 private:
  ExtReal(double v, bool f) : value_(v), finite_(f) {}
  double value_;
  bool finite_;
};

/// A divergence generator psi together with its convex conjugate psi*, the
/// conjugate's first two derivatives, and the constants the optimization
/// theory consumes: M (smoothness of psi*), the Lipschitz constant of psi*,
/// and the crossing level C with (psi*)'(C) = 1.
///
/// psi is convex with psi(1) = 0 and psi(t) = +inf for t < 0; psi* is convex
/// and non-decreasing, so (psi*)' >= 0 everywhere.
class DivergenceSpec {
 public:
  static DivergenceSpec chi2();
  static DivergenceSpec kl();
  static DivergenceSpec cvar(double alpha);
  static DivergenceSpec smoothed_cvar(double alpha);
  static DivergenceSpec kl_reg_cvar(double alpha);
  /// Cressie-Read family; only k > 1 is supported (the conjugate power
  /// ((k-1)t+1)^(k/(k-1)) is real there).
  static DivergenceSpec cressie_read(double k);

  DivergenceKind kind() const { return kind_; }
  double alpha() const { return alpha_; }
  double cr_k() const { return cr_k_; }

  /// Smoothness constant of psi*; nullopt means no finite constant exists.
  std::optional<double> smoothness_M() const { return smoothness_M_; }
  /// Lipschitz constant of psi*; nullopt means (psi*)' is unbounded.
  std::optional<double> conj_lipschitz() const { return conj_lipschitz_; }
  /// Stored crossing level C with (psi*)'(C) = 1 (the jump location for CVaR).
  double crossing_C() const { return crossing_C_; }

  /// psi*(t), closed form.
  double conj_value(double t) const;
  /// (psi*)'(t). For CVaR the kink at t = 0 resolves to the left limit 0, so
  /// subgradient-based baselines are deterministic.
  double conj_grad(double t) const;
  /// (psi*)''(t). Throws NotTwiceDifferentiable at kink points (CVaR at 0,
  /// KL-regularized CVaR at -log(alpha)).
  double conj_second(double t) const;

  /// Solves (psi*)'(C) = 1 by bisection for smooth kinds; returns the jump
  /// location 0 for plain CVaR.
  double crossing_point() const;

  /// Generator value psi(t); +infinity outside the domain.
  ExtReal psi(double t) const;
  /// Upper end of dom psi: 1/alpha for the CVaR family, +inf otherwise.
  double domain_upper() const;

  /// sum_i p_i psi(q_i / p_i) for discrete weights. q and p must have equal
  /// length, be nonnegative, and each sum to 1 within 1e-9. Throws
  /// NotAbsolutelyContinuous when q_i > 0 with p_i = 0; returns the infinity
  /// sentinel when a ratio leaves dom psi.
  ExtReal divergence_value(const std::vector<double>& q,
                           const std::vector<double>& p) const;

  std::string name() const;

 private:
  DivergenceSpec() = default;

  DivergenceKind kind_ = DivergenceKind::Chi2;
  double alpha_ = 0.0;
  double cr_k_ = 0.0;
  std::optional<double> smoothness_M_;
  std::optional<double> conj_lipschitz_;
  double crossing_C_ = 0.0;
};

}  // namespace drokit
