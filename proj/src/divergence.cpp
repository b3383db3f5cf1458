#include "drokit/divergence.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace drokit {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw Error("alpha must lie in (0, 1)");
  }
}

double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

}  // namespace

DivergenceSpec DivergenceSpec::chi2() {
  DivergenceSpec d;
  d.kind_ = DivergenceKind::Chi2;
  d.smoothness_M_ = 0.5;     // (psi*)'' = 1/2 on t > -2
  d.conj_lipschitz_ = std::nullopt;
  d.crossing_C_ = 0.0;
  return d;
}

DivergenceSpec DivergenceSpec::kl() {
  DivergenceSpec d;
  d.kind_ = DivergenceKind::KL;
  d.smoothness_M_ = std::nullopt;  // e^t has unbounded second derivative
  d.conj_lipschitz_ = std::nullopt;
  d.crossing_C_ = 0.0;
  return d;
}

DivergenceSpec DivergenceSpec::cvar(double alpha) {
  require_alpha(alpha);
  DivergenceSpec d;
  d.kind_ = DivergenceKind::CVaR;
  d.alpha_ = alpha;
  d.smoothness_M_ = std::nullopt;  // kink at 0
  d.conj_lipschitz_ = 1.0 / alpha;
  d.crossing_C_ = 0.0;  // jump location where (psi*)' crosses level 1
  return d;
}

DivergenceSpec DivergenceSpec::smoothed_cvar(double alpha) {
  require_alpha(alpha);
  DivergenceSpec d;
  d.kind_ = DivergenceKind::SmoothedCVaR;
  d.alpha_ = alpha;
  d.smoothness_M_ = 1.0 / (4.0 * alpha);
  d.conj_lipschitz_ = 1.0 / alpha;
  d.crossing_C_ = 0.0;
  return d;
}

DivergenceSpec DivergenceSpec::kl_reg_cvar(double alpha) {
  require_alpha(alpha);
  DivergenceSpec d;
  d.kind_ = DivergenceKind::KLRegCVaR;
  d.alpha_ = alpha;
  // No closed-form constant is published for this conjugate; (psi*)'' is
  // e^t below the kink at -log(alpha) and 0 above it, so the supremum is
  // 1/alpha and (psi*)' is globally (1/alpha)-Lipschitz.
  d.smoothness_M_ = 1.0 / alpha;
  d.conj_lipschitz_ = 1.0 / alpha;
  d.crossing_C_ = 0.0;
  return d;
}

DivergenceSpec DivergenceSpec::cressie_read(double k) {
  if (!(k > 1.0)) {
    throw Error("cressie_read requires k > 1");
  }
  DivergenceSpec d;
  d.kind_ = DivergenceKind::CressieRead;
  d.cr_k_ = k;
  // (psi*)''(t) = ((k-1)t+1)^((2-k)/(k-1)) on its positive branch; bounded
  // only at k = 2 where it is constant 1.
  if (k == 2.0) {
    d.smoothness_M_ = 1.0;
  } else {
    d.smoothness_M_ = std::nullopt;
  }
  d.conj_lipschitz_ = std::nullopt;
  d.crossing_C_ = 0.0;
  return d;
}

double DivergenceSpec::conj_value(double t) const {
  switch (kind_) {
    case DivergenceKind::Chi2: {
      double u = std::max(t + 2.0, 0.0);
      return 0.25 * u * u - 1.0;
    }
    case DivergenceKind::KL:
      return std::expm1(t);
    case DivergenceKind::CVaR:
      return std::max(t, 0.0) / alpha_;
    case DivergenceKind::SmoothedCVaR: {
      // log(1 - a + a e^t) evaluated stably for large |t|.
      if (t > 0.0) {
        return (t + std::log1p((1.0 - alpha_) * (std::exp(-t) - 1.0))) / alpha_;
      }
      return std::log1p(alpha_ * std::expm1(t)) / alpha_;
    }
    case DivergenceKind::KLRegCVaR: {
      double t0 = -std::log(alpha_);
      if (t <= t0) return std::expm1(t);
      return (1.0 + t + std::log(alpha_)) / alpha_ - 1.0;
    }
    case DivergenceKind::CressieRead: {
      double u = std::max((cr_k_ - 1.0) * t + 1.0, 0.0);
      return (std::pow(u, cr_k_ / (cr_k_ - 1.0)) - 1.0) / cr_k_;
    }
  }
  throw Error("unreachable divergence kind");
}

double DivergenceSpec::conj_grad(double t) const {
  switch (kind_) {
    case DivergenceKind::Chi2:
      return std::max(t + 2.0, 0.0) / 2.0;
    case DivergenceKind::KL:
      return std::exp(t);
    case DivergenceKind::CVaR:
      return t > 0.0 ? 1.0 / alpha_ : 0.0;
    case DivergenceKind::SmoothedCVaR: {
      // e^t / (1 - a + a e^t), written to avoid overflow for large t.
      if (t > 0.0) {
        double e = std::exp(-t);
        return 1.0 / ((1.0 - alpha_) * e + alpha_);
      }
      double e = std::exp(t);
      return e / (1.0 - alpha_ + alpha_ * e);
    }
    case DivergenceKind::KLRegCVaR: {
      double t0 = -std::log(alpha_);
      return t <= t0 ? std::exp(t) : 1.0 / alpha_;
    }
    case DivergenceKind::CressieRead: {
      double u = std::max((cr_k_ - 1.0) * t + 1.0, 0.0);
      return std::pow(u, 1.0 / (cr_k_ - 1.0));
    }
  }
  throw Error("unreachable divergence kind");
}

double DivergenceSpec::conj_second(double t) const {
  switch (kind_) {
    case DivergenceKind::Chi2:
      return t >= -2.0 ? 0.5 : 0.0;
    case DivergenceKind::KL:
      return std::exp(t);
    case DivergenceKind::CVaR:
      if (t == 0.0) {
        throw NotTwiceDifferentiable("CVaR conjugate has a kink at t = 0");
      }
      return 0.0;
    case DivergenceKind::SmoothedCVaR: {
      // (1-a) e^t / (1 - a + a e^t)^2
      if (t > 0.0) {
        double e = std::exp(-t);
        double den = (1.0 - alpha_) * e + alpha_;
        return (1.0 - alpha_) * e / (den * den);
      }
      double e = std::exp(t);
      double den = 1.0 - alpha_ + alpha_ * e;
      return (1.0 - alpha_) * e / (den * den);
    }
    case DivergenceKind::KLRegCVaR: {
      double t0 = -std::log(alpha_);
      if (t == t0) {
        throw NotTwiceDifferentiable(
            "KL-regularized CVaR conjugate has a second-derivative jump at "
            "t = -log(alpha)");
      }
      return t < t0 ? std::exp(t) : 0.0;
    }
    case DivergenceKind::CressieRead: {
      double u = (cr_k_ - 1.0) * t + 1.0;
      if (u <= 0.0) return 0.0;
      return std::pow(u, (2.0 - cr_k_) / (cr_k_ - 1.0));
    }
  }
  throw Error("unreachable divergence kind");
}

double DivergenceSpec::crossing_point() const {
  if (kind_ == DivergenceKind::CVaR) {
    return 0.0;  // (psi*)' jumps from 0 to 1/alpha here
  }
  // (psi*)' is continuous and non-decreasing for all other kinds; bisect
  // conj_grad(t) - 1 over a bracket known to contain the crossing.
  double lo = -10.0, hi = 10.0;
  if (conj_grad(lo) > 1.0 || conj_grad(hi) < 1.0) {
    throw Error("crossing_point: level 1 not bracketed by [-10, 10]");
  }
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    if (conj_grad(mid) < 1.0) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo < 1e-15) break;
  }
  return 0.5 * (lo + hi);
}

double DivergenceSpec::domain_upper() const {
  switch (kind_) {
    case DivergenceKind::CVaR:
    case DivergenceKind::SmoothedCVaR:
    case DivergenceKind::KLRegCVaR:
      return 1.0 / alpha_;
    default:
      return kInf;
  }
}

ExtReal DivergenceSpec::psi(double t) const {
  if (t < 0.0) return ExtReal::infinity();
  switch (kind_) {
    case DivergenceKind::Chi2:
      // Generator paired with the conjugate -1 + (t+2)_+^2 / 4.
      return ExtReal::finite((t - 1.0) * (t - 1.0));
    case DivergenceKind::KL:
      return ExtReal::finite(xlogx(t) - t + 1.0);
    case DivergenceKind::CVaR:
      if (t >= 1.0 / alpha_) return ExtReal::infinity();
      return ExtReal::finite(0.0);
    case DivergenceKind::SmoothedCVaR: {
      if (t >= 1.0 / alpha_) return ExtReal::infinity();
      double s = 1.0 - alpha_ * t;  // in (0, 1]
      return ExtReal::finite(
          xlogx(t) + (xlogx(s) - s * std::log(1.0 - alpha_)) / alpha_);
    }
    case DivergenceKind::KLRegCVaR:
      if (t >= 1.0 / alpha_) return ExtReal::infinity();
      return ExtReal::finite(xlogx(t) - t + 1.0);
    case DivergenceKind::CressieRead:
      return ExtReal::finite((std::pow(t, cr_k_) - cr_k_ * t + cr_k_ - 1.0) /
                             (cr_k_ * (cr_k_ - 1.0)));
  }
  throw Error("unreachable divergence kind");
}

ExtReal DivergenceSpec::divergence_value(const std::vector<double>& q,
                                         const std::vector<double>& p) const {
  if (q.size() != p.size()) {
    throw DimensionMismatch("divergence_value: q and p differ in length");
  }
  auto check_weights = [](const std::vector<double>& w, const char* label) {
    double s = 0.0;
    for (double v : w) {
      if (v < 0.0) throw Error(std::string(label) + " has a negative entry");
      s += v;
    }
    if (std::abs(s - 1.0) > 1e-9) {
      throw Error(std::string(label) + " does not sum to 1");
    }
  };
  check_weights(q, "q");
  check_weights(p, "p");

  double total = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (p[i] == 0.0) {
      if (q[i] > 0.0) {
        throw NotAbsolutelyContinuous(
            "q puts mass where p has none (index " + std::to_string(i) + ")");
      }
      continue;  // 0 * psi(0/0) treated as 0
    }
    ExtReal term = psi(q[i] / p[i]);
    if (term.is_infinite()) return ExtReal::infinity();
    total += p[i] * term.value();
  }
  return ExtReal::finite(total);
}

std::string DivergenceSpec::name() const {
  std::ostringstream os;
  switch (kind_) {
    case DivergenceKind::Chi2:
      return "chi2";
    case DivergenceKind::KL:
      return "kl";
    case DivergenceKind::CVaR:
      os << "cvar(alpha=" << alpha_ << ")";
      return os.str();
    case DivergenceKind::SmoothedCVaR:
      os << "smoothed_cvar(alpha=" << alpha_ << ")";
      return os.str();
    case DivergenceKind::KLRegCVaR:
      os << "kl_reg_cvar(alpha=" << alpha_ << ")";
      return os.str();
    case DivergenceKind::CressieRead:
      os << "cressie_read(k=" << cr_k_ << ")";
      return os.str();
  }
  return "unknown";
}

}  // namespace drokit
