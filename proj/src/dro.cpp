#include "drokit/dro.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace drokit {

DroProblem DroProblem::make(LossModel loss, DivergenceSpec div, double lambda) {
  double g = loss.lipschitz_G;
  return make(std::move(loss), std::move(div), lambda, g);
}

DroProblem DroProblem::make(LossModel loss, DivergenceSpec div, double lambda,
                            double rescale_G) {
  if (!(lambda > 0.0)) throw Error("DroProblem: lambda must be positive");
  if (!(rescale_G > 0.0)) throw Error("DroProblem: rescale_G must be positive");
  return DroProblem{std::move(loss), std::move(div), lambda, rescale_G};
}

Eigen::VectorXd DualPoint::joint() const {
  Eigen::VectorXd w(x.size() + 1);
  w.head(x.size()) = x;
  w[x.size()] = eta;
  return w;
}

DualPoint DualPoint::from_joint(const Eigen::VectorXd& w) {
  DualPoint p;
  p.x = w.head(w.size() - 1);
  p.eta = w[w.size() - 1];
  return p;
}

Eigen::VectorXd GradientEstimate::joint() const {
  Eigen::VectorXd g(grad_x.size() + 1);
  g.head(grad_x.size()) = grad_x;
  g[grad_x.size()] = grad_eta;
  return g;
}

double GradientEstimate::norm() const {
  return std::sqrt(grad_x.squaredNorm() + grad_eta * grad_eta);
}

double objective_sample(const DroProblem& p, const DualPoint& w, const Sample& xi) {
  double z = (p.loss.value(w.x, xi) - p.rescale_G * w.eta) / p.lambda;
  return p.lambda * p.divergence.conj_value(z) + p.rescale_G * w.eta;
}

double objective_full(const DroProblem& p, const DualPoint& w, const Dataset& data) {
  if (data.samples.empty()) throw Error("objective_full: empty dataset");
  double sum = 0.0;
  for (const Sample& s : data.samples) sum += objective_sample(p, w, s);
  return sum / static_cast<double>(data.size());
}

GradientEstimate sample_gradient(const DroProblem& p, const DualPoint& w,
                                 const Sample& xi) {
  double z = (p.loss.value(w.x, xi) - p.rescale_G * w.eta) / p.lambda;
  double slope = p.divergence.conj_grad(z);
  GradientEstimate g;
  g.grad_x = slope * p.loss.grad(w.x, xi);
  g.grad_eta = p.rescale_G * (1.0 - slope);
  g.batch_size = 1;
  return g;
}

GradientEstimate full_gradient(const DroProblem& p, const DualPoint& w,
                               const Dataset& data) {
  if (data.samples.empty()) throw Error("full_gradient: empty dataset");
  GradientEstimate g;
  g.grad_x = Eigen::VectorXd::Zero(w.x.size());
  g.grad_eta = 0.0;
  for (const Sample& s : data.samples) {
    GradientEstimate gi = sample_gradient(p, w, s);
    g.grad_x += gi.grad_x;
    g.grad_eta += gi.grad_eta;
  }
  double n = static_cast<double>(data.size());
  g.grad_x /= n;
  g.grad_eta /= n;
  g.batch_size = static_cast<int>(data.size());
  return g;
}

GradientEstimate stochastic_gradient(const DroProblem& p, const DualPoint& w,
                                     const Dataset& data, int batch_size,
                                     Rng& rng, bool use_all) {
  if (data.samples.empty()) throw Error("stochastic_gradient: empty dataset");
  if (use_all) {
    GradientEstimate g = full_gradient(p, w, data);
    g.seed_state = rng.draw_count();
    return g;
  }
  if (batch_size < 1) throw Error("stochastic_gradient: batch_size must be >= 1");
  GradientEstimate g;
  g.seed_state = rng.draw_count();
  g.grad_x = Eigen::VectorXd::Zero(w.x.size());
  g.grad_eta = 0.0;
  for (int i = 0; i < batch_size; ++i) {
    const Sample& s = data.samples[rng.next_below(data.size())];
    GradientEstimate gi = sample_gradient(p, w, s);
    g.grad_x += gi.grad_x;
    g.grad_eta += gi.grad_eta;
  }
  g.grad_x /= static_cast<double>(batch_size);
  g.grad_eta /= static_cast<double>(batch_size);
  g.batch_size = batch_size;
  return g;
}

namespace {

// h(eta) = 1 - mean (psi*)'((l_i - G eta) / lambda); non-decreasing in eta.
double eta_balance(const DroProblem& p, const std::vector<double>& losses,
                   double eta) {
  double mean = 0.0;
  for (double l : losses) {
    mean += p.divergence.conj_grad((l - p.rescale_G * eta) / p.lambda);
  }
  mean /= static_cast<double>(losses.size());
  return 1.0 - mean;
}

}  // namespace

double solve_eta(const DroProblem& p, const Eigen::VectorXd& x,
                 const Dataset& data, double tol) {
  if (data.samples.empty()) throw Error("solve_eta: empty dataset");
  std::vector<double> losses;
  losses.reserve(data.size());
  double lmin = std::numeric_limits<double>::infinity();
  double lmax = -std::numeric_limits<double>::infinity();
  for (const Sample& s : data.samples) {
    double l = p.loss.value(x, s);
    losses.push_back(l);
    lmin = std::min(lmin, l);
    lmax = std::max(lmax, l);
  }
  const double G = p.rescale_G;

  double lo, hi;
  if (p.loss.bound_B.has_value()) {
    // Bounded-loss interval widened by tol/L so the root is strictly interior.
    double margin = (tol > 0.0 ? tol : 1e-10) / p.loss.smooth_L;
    double c = p.divergence.crossing_C();
    lo = -p.lambda * c / G - margin;
    hi = (*p.loss.bound_B - p.lambda * c) / G + margin;
  } else {
    lo = lmin / G - 10.0 * p.lambda;
    hi = lmax / G + 10.0 * p.lambda;
  }
  double flo = eta_balance(p, losses, lo);
  double fhi = eta_balance(p, losses, hi);
  int doublings = 0;
  while (flo > 0.0 || fhi < 0.0) {
    if (++doublings > 60) {
      throw BracketFailure("solve_eta: no sign change after 60 doublings");
    }
    double width = std::max(hi - lo, 1.0);
    if (flo > 0.0) lo -= width;
    if (fhi < 0.0) hi += width;
    flo = eta_balance(p, losses, lo);
    fhi = eta_balance(p, losses, hi);
  }

  if (tol <= 0.0) tol = 1e-10 * (1.0 + std::abs(hi - lo));
  double mid = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    mid = 0.5 * (lo + hi);
    double f = eta_balance(p, losses, mid);
    if (std::abs(G * f) <= tol) return mid;
    if (f < 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo <= 1e-15 * (1.0 + std::abs(mid))) break;
  }
  // Plain CVaR can leave |grad_eta| above tol at the quantile jump; the
  // bracket has still collapsed onto the minimizer.
  return 0.5 * (lo + hi);
}

double evaluate_psi(const DroProblem& p, const Eigen::VectorXd& x,
                    const Dataset& data, double tol) {
  DualPoint w;
  w.x = x;
  w.eta = solve_eta(p, x, data, tol);
  return objective_full(p, w, data);
}

StationarityReport stationarity_transfer(const GradientEstimate& grad, double eps,
                                         double /*rescale_G*/) {
  StationarityReport r;
  r.eps = eps;
  r.joint_norm = grad.norm();
  r.certified = r.joint_norm <= eps / std::sqrt(2.0);
  // In the rescaled parametrization, G |grad_eta L| equals |grad_eta Lhat|.
  r.sum_form = grad.grad_x.norm() + std::abs(grad.grad_eta);
  r.sum_certified = r.sum_form <= eps;
  return r;
}

TheoremConstants dro_constants(const DroProblem& p, double gamma2) {
  TheoremConstants c;
  const double G = p.rescale_G;
  const double L = p.loss.smooth_L;
  const double lam = p.lambda;

  if (p.divergence.kind() == DivergenceKind::SmoothedCVaR) {
    // Lipschitz-conjugate route: plain smoothness and an absolute
    // gradient-norm envelope.
    double a = p.divergence.alpha();
    c.K0 = L / a + G * G / (2.0 * lam * a);
    c.K1 = 0.0;
    c.Gamma2 = 0.0;
    c.Lambda2 = 2.0 * G * G / (a * a);
    return c;
  }

  if (!p.divergence.smoothness_M().has_value()) {
    throw MissingConstant("smoothness_M");
  }
  if (!p.loss.noise_sigma2.has_value()) {
    throw MissingConstant("noise_sigma2");
  }
  double M = *p.divergence.smoothness_M();
  double s2 = *p.loss.noise_sigma2;
  c.K0 = L + 2.0 * G * G * M / lam;
  c.K1 = L / G;
  c.Gamma2 = gamma2;
  c.Lambda2 = 11.0 * G * G * M * M * s2 / (lam * lam) + 8.0 * G * G;
  return c;
}

double estimate_delta(const DroProblem& p, const DualPoint& w0,
                      const Dataset& data) {
  if (data.samples.empty()) throw Error("estimate_delta: empty dataset");
  double obj0 = objective_full(p, w0, data);
  double lmin = std::numeric_limits<double>::infinity();
  for (const Sample& s : data.samples) {
    lmin = std::min(lmin, p.loss.value(w0.x, s));
  }
  return std::max(obj0 - lmin, 0.0);
}

}  // namespace drokit
