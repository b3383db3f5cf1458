#include "drokit/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "drokit/textio.hpp"

namespace drokit {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string point_witness(const Eigen::VectorXd& w) {
  std::ostringstream os;
  os << "w=";
  for (int i = 0; i < w.size(); ++i) {
    if (i) os << ";";
    os << format_double(w[i]);
  }
  return os.str();
}

Eigen::VectorXd random_box_point(Rng& rng, int dim, double half_width) {
  Eigen::VectorXd w(dim);
  for (int i = 0; i < dim; ++i) {
    w[i] = half_width * (2.0 * rng.next_unit() - 1.0);
  }
  return w;
}

CheckReport finish_report(CheckReport r) {
  r.passed = r.worst_violation <= r.tolerance;
  return r;
}

}  // namespace

std::string CheckReport::text() const {
  std::ostringstream os;
  os << "check_name=" << check_name << "\n"
     << "instances_tested=" << instances_tested << "\n"
     << "worst_violation=" << format_double(worst_violation) << "\n"
     << "tolerance=" << format_double(tolerance) << "\n"
     << "witness=" << witness << "\n"
     << "passed=" << (passed ? "true" : "false") << "\n";
  return os.str();
}

double conj_oracle(const DivergenceSpec& div, double t) {
  auto g = [&](double s) {
    ExtReal v = div.psi(s);
    return v.is_finite() ? s * t - v.value() : -kInf;
  };
  double s_hi = div.domain_upper();
  if (std::isinf(s_hi)) {
    s_hi = 4.0;
    while (s_hi < 1e9 && g(s_hi) > g(s_hi * 0.999)) s_hi *= 2.0;
  } else {
    s_hi *= 1.0 - 1e-12;  // dom psi is right-open for the CVaR family
  }

  const int N = 2000;
  double best = -kInf;
  int best_j = 0;
  for (int j = 0; j <= N; ++j) {
    double v = g(s_hi * j / N);
    if (v > best) {
      best = v;
      best_j = j;
    }
  }
  // s t - psi(s) is concave: ternary-search the bracketing cells.
  double lo = s_hi * std::max(best_j - 1, 0) / N;
  double hi = s_hi * std::min(best_j + 1, N) / N;
  for (int it = 0; it < 300; ++it) {
    double m1 = lo + (hi - lo) / 3.0;
    double m2 = hi - (hi - lo) / 3.0;
    if (g(m1) < g(m2)) {
      lo = m1;
    } else {
      hi = m2;
    }
  }
  return std::max(best, g(0.5 * (lo + hi)));
}

double cvar_psi_reference(double alpha, const std::vector<double>& losses) {
  if (losses.empty()) throw Error("cvar_psi_reference: no losses");
  auto value = [&](double eta) {
    double s = 0.0;
    for (double l : losses) s += std::max(l - eta, 0.0);
    return s / (alpha * static_cast<double>(losses.size())) + eta;
  };
  double lo = *std::min_element(losses.begin(), losses.end());
  double hi = *std::max_element(losses.begin(), losses.end());
  if (hi - lo < 1e-12) return value(lo);

  const int N = 400;
  double best = kInf;
  int best_j = 0;
  for (int j = 0; j <= N; ++j) {
    double v = value(lo + (hi - lo) * j / N);
    if (v < best) {
      best = v;
      best_j = j;
    }
  }
  double a = lo + (hi - lo) * std::max(best_j - 1, 0) / N;
  double b = lo + (hi - lo) * std::min(best_j + 1, N) / N;
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - gr * (b - a);
  double d = a + gr * (b - a);
  for (int it = 0; it < 200; ++it) {
    if (value(c) < value(d)) {
      b = d;
      d = c;
      c = b - gr * (b - a);
    } else {
      a = c;
      c = d;
      d = a + gr * (b - a);
    }
  }
  return std::min(best, value(0.5 * (a + b)));
}

DroProblem make_counterexample_chi2(double lambda) {
  return DroProblem::make(counterexample_loss(), DivergenceSpec::chi2(), lambda);
}

CheckReport check_conjugate_oracle(const DivergenceSpec& div, double t_lo,
                                   double t_hi, int n_t) {
  CheckReport r;
  r.check_name = "conjugate-oracle:" + div.name();
  r.tolerance = 0.0;
  r.worst_violation = -kInf;
  const double bound = 1e-4;
  for (int i = 0; i < n_t; ++i) {
    double t = t_lo + (t_hi - t_lo) * i / (n_t - 1);
    double gap = std::abs(div.conj_value(t) - conj_oracle(div, t));
    if (gap - bound > r.worst_violation) {
      r.worst_violation = gap - bound;
      r.witness = "t=" + format_double(t) + ";gap=" + format_double(gap);
    }
    ++r.instances_tested;
  }
  return finish_report(r);
}

CheckReport check_variance_bound(const DroProblem& p, const Dataset& data,
                                 double half_width, int grid_n) {
  if (data.size() != 2) {
    throw Error("check_variance_bound: needs a two-sample dataset");
  }
  if (!p.loss.noise_sigma2 || !p.divergence.smoothness_M()) {
    throw MissingConstant(!p.loss.noise_sigma2 ? "noise_sigma2" : "smoothness_M");
  }
  const double G = p.rescale_G;
  const double M = *p.divergence.smoothness_M();
  const double s2 = *p.loss.noise_sigma2;
  const double lam = p.lambda;

  CheckReport r;
  r.check_name = "variance-bound";
  r.tolerance = 0.0;
  r.worst_violation = -kInf;
  for (int i = 0; i < grid_n; ++i) {
    for (int j = 0; j < grid_n; ++j) {
      DualPoint w;
      w.x = Eigen::VectorXd::Constant(1, -half_width + 2.0 * half_width * i / (grid_n - 1));
      w.eta = -half_width + 2.0 * half_width * j / (grid_n - 1);
      GradientEstimate g0 = sample_gradient(p, w, data.samples[0]);
      GradientEstimate g1 = sample_gradient(p, w, data.samples[1]);
      // Two equally likely samples: E|g - gbar|^2 = |g0 - g1|^2 / 4.
      double var = 0.25 * (g0.joint() - g1.joint()).squaredNorm();
      double full = full_gradient(p, w, data).norm();
      double bound = 11.0 * G * G * M * M * s2 / (lam * lam) +
                     8.0 * (G * G + full * full);
      double v = var - bound;
      if (v > r.worst_violation) {
        r.worst_violation = v;
        r.witness = "x=" + format_double(w.x[0]) + ";eta=" + format_double(w.eta) +
                    ";variance=" + format_double(var) + ";bound=" + format_double(bound);
      }
      ++r.instances_tested;
    }
  }
  return finish_report(r);
}

CheckReport check_generalized_smoothness(const DroProblem& p, const Dataset& data,
                                         int n_pairs, double radius,
                                         std::uint64_t seed) {
  if (!p.divergence.smoothness_M()) throw MissingConstant("smoothness_M");
  TheoremConstants c = dro_constants(p);
  Rng rng(seed);
  const int dim = p.loss.dim + 1;

  CheckReport r;
  r.check_name = "generalized-smoothness";
  r.tolerance = 1e-8;
  r.worst_violation = -kInf;
  for (int k = 0; k < n_pairs; ++k) {
    Eigen::VectorXd w = random_box_point(rng, dim, 3.0);
    Eigen::VectorXd dir(dim);
    for (int i = 0; i < dim; ++i) dir[i] = rng.next_normal();
    dir.normalize();
    Eigen::VectorXd w2 = w + radius * rng.next_unit() * dir;

    GradientEstimate ga = full_gradient(p, DualPoint::from_joint(w), data);
    GradientEstimate gb = full_gradient(p, DualPoint::from_joint(w2), data);
    double lhs = (ga.joint() - gb.joint()).norm();
    double rhs = (c.K0 + c.K1 * ga.norm()) * (w - w2).norm();
    double v = lhs - rhs;
    if (v > r.worst_violation) {
      r.worst_violation = v;
      r.witness = point_witness(w) + ";lhs=" + format_double(lhs) +
                  ";rhs=" + format_double(rhs);
    }
    ++r.instances_tested;
  }
  return finish_report(r);
}

CheckReport check_cvar_limit(double alpha, const std::vector<double>& lambdas,
                             const std::vector<double>& losses,
                             double bound_slack) {
  Dataset data;
  data.name = "fixed-losses";
  for (double l : losses) {
    Sample s;
    s.features = Eigen::VectorXd::Zero(1);
    s.target = l;
    data.samples.push_back(std::move(s));
  }
  double bound_B = *std::max_element(losses.begin(), losses.end());
  Eigen::VectorXd x = Eigen::VectorXd::Zero(1);
  double psi_cvar = cvar_psi_reference(alpha, losses);

  CheckReport r;
  r.check_name = "cvar-limit";
  r.tolerance = 0.0;
  r.worst_violation = -kInf;
  double prev_gap = kInf;
  for (double lam : lambdas) {
    DroProblem p = DroProblem::make(fixed_sample_loss(1, bound_B),
                                    DivergenceSpec::smoothed_cvar(alpha), lam, 1.0);
    double psi_smo = evaluate_psi(p, x, data, 1e-12);
    double gap = std::abs(psi_smo - psi_cvar);
    double bound = (lam / alpha) * std::max(-std::log(alpha), -std::log1p(-alpha));

    double v_monotone = gap - prev_gap - 1e-9;  // gaps shrink with lambda
    double v_bound = gap - bound - bound_slack;
    double v = std::max(v_monotone, v_bound);
    if (v > r.worst_violation) {
      r.worst_violation = v;
      r.witness = "lambda=" + format_double(lam) + ";gap=" + format_double(gap) +
                  ";bound=" + format_double(bound);
    }
    prev_gap = gap;
    ++r.instances_tested;
  }
  // Pointwise limit certificate on a z-grid:
  // |(lam/alpha) log(1-alpha+alpha e^{z/lam}) - (z)_+ / alpha| <= bound.
  for (double lam : lambdas) {
    DivergenceSpec smo = DivergenceSpec::smoothed_cvar(alpha);
    double bound = (lam / alpha) * std::max(-std::log(alpha), -std::log1p(-alpha));
    for (int i = 0; i <= 200; ++i) {
      double z = -5.0 + 10.0 * i / 200.0;
      double smoothed = lam * smo.conj_value(z / lam);
      double plain = std::max(z, 0.0) / alpha;
      // The bound is met with equality in the large z/lambda regime, so the
      // same slack applies.
      double v = std::abs(smoothed - plain) - bound - bound_slack;
      if (v > r.worst_violation) {
        r.worst_violation = v;
        r.witness = "z=" + format_double(z) + ";lambda=" + format_double(lam);
      }
      ++r.instances_tested;
    }
  }
  return finish_report(r);
}

CheckReport check_smoothed_cvar_constants(const std::vector<double>& alphas,
                                          int n_grad_samples, std::uint64_t seed) {
  CheckReport r;
  r.check_name = "smoothed-cvar-constants";
  r.tolerance = 1e-12;
  r.worst_violation = -kInf;
  Rng rng(seed);

  Dataset data = synth_imbalanced(derive_seed(seed, 1),
                                  std::vector<double>{0.9, 0.5, 0.7}, 40, 4);
  for (double alpha : alphas) {
    DivergenceSpec smo = DivergenceSpec::smoothed_cvar(alpha);
    for (int i = 0; i <= 4000; ++i) {
      double t = -20.0 + 40.0 * i / 4000.0;
      double v1 = smo.conj_grad(t) - 1.0 / alpha;
      double v2 = smo.conj_second(t) - 1.0 / (4.0 * alpha);
      double v = std::max(v1, v2);
      if (v > r.worst_violation) {
        r.worst_violation = v;
        r.witness = "alpha=" + format_double(alpha) + ";t=" + format_double(t);
      }
      ++r.instances_tested;
    }
    DroProblem p =
        DroProblem::make(logistic_loss_for(3, data), smo, 0.1);
    const double G = p.rescale_G;
    for (int k = 0; k < n_grad_samples; ++k) {
      DualPoint w;
      w.x = random_box_point(rng, p.loss.dim, 2.0);
      w.eta = 4.0 * (2.0 * rng.next_unit() - 1.0);
      const Sample& s = data.samples[rng.next_below(data.size())];
      double n2 = sample_gradient(p, w, s).joint().squaredNorm();
      double v = n2 - 2.0 * G * G / (alpha * alpha);
      if (v > r.worst_violation) {
        r.worst_violation = v;
        r.witness = "alpha=" + format_double(alpha) + ";" + point_witness(w.joint());
      }
      ++r.instances_tested;
    }
  }
  return finish_report(r);
}

CheckReport check_gradient_fd(const DroProblem& p, const Dataset& data,
                              int n_points, std::uint64_t seed) {
  Rng rng(seed);
  const int dim = p.loss.dim + 1;
  CheckReport r;
  r.check_name = "gradient-fd:" + p.loss.name + "/" + p.divergence.name();
  r.tolerance = 0.0;
  r.worst_violation = -kInf;
  const double bound = 1e-5;
  for (int k = 0; k < n_points; ++k) {
    Eigen::VectorXd w = random_box_point(rng, dim, 2.0);
    GradientEstimate g = full_gradient(p, DualPoint::from_joint(w), data);
    Eigen::VectorXd gj = g.joint();
    double worst_rel = 0.0;
    for (int i = 0; i < dim; ++i) {
      double h = 1e-6 * (1.0 + std::abs(w[i]));
      Eigen::VectorXd wp = w, wm = w;
      wp[i] += h;
      wm[i] -= h;
      double fd = (objective_full(p, DualPoint::from_joint(wp), data) -
                   objective_full(p, DualPoint::from_joint(wm), data)) /
                  (2.0 * h);
      worst_rel = std::max(worst_rel, std::abs(fd - gj[i]) / (1.0 + std::abs(gj[i])));
    }
    double v = worst_rel - bound;
    if (v > r.worst_violation) {
      r.worst_violation = v;
      r.witness = point_witness(w) + ";rel_err=" + format_double(worst_rel);
    }
    ++r.instances_tested;
  }
  return finish_report(r);
}

CheckReport check_bounded_case(int n_samples, std::uint64_t seed) {
  Rng rng(seed);
  // Clipped loss with feature norms <= 0.5 so the certified Lipschitz
  // constant stays below the G = 1 used in the rescaling.
  const int F = 3;
  Dataset data;
  data.name = "bounded-case";
  for (int i = 0; i < 24; ++i) {
    Sample s;
    s.features.resize(F);
    for (int j = 0; j < F; ++j) s.features[j] = 0.28 * (2.0 * rng.next_unit() - 1.0);
    s.target = 1.5 * (2.0 * rng.next_unit() - 1.0);
    data.samples.push_back(std::move(s));
  }
  LossModel loss = clipped_quadratic_loss(F, 2.0, 0.5);
  DroProblem p = DroProblem::make(loss, DivergenceSpec::chi2(), 1.0, 1.0);

  const double G = p.rescale_G;
  const double B = *p.loss.bound_B;
  const double C = p.divergence.crossing_C();
  const double slope_cap = p.divergence.conj_grad(C + B / p.lambda);
  const double lambda2 = 2.0 * slope_cap * slope_cap * G * G + G * G;
  EtaInterval box = eta_interval(p, 0.0);

  CheckReport r;
  r.check_name = "bounded-case";
  r.tolerance = 0.0;
  r.worst_violation = -kInf;

  // Per-sample gradient envelope inside the eta interval.
  for (int k = 0; k < n_samples; ++k) {
    DualPoint w;
    w.x = random_box_point(rng, p.loss.dim, 2.0);
    w.eta = box.U + (box.V - box.U) * rng.next_unit();
    const Sample& s = data.samples[rng.next_below(data.size())];
    double n2 = sample_gradient(p, w, s).joint().squaredNorm();
    double v = n2 - lambda2;
    if (v > r.worst_violation) {
      r.worst_violation = v;
      r.witness = "grad-bound;" + point_witness(w.joint()) +
                  ";norm2=" + format_double(n2);
    }
    ++r.instances_tested;
  }

  // Plain smoothness on the box via random-pair ratios; the constant comes
  // from the bounded-case gradient splitting (slope-capped loss curvature
  // plus the conjugate-curvature coupling term).
  const double M = *p.divergence.smoothness_M();
  double a_const = slope_cap * p.loss.smooth_L +
                   std::sqrt(2.0) * M * G * G / p.lambda;
  double b_const = std::sqrt(2.0) * M * G * G / p.lambda;
  double K_box = std::sqrt(a_const * a_const + b_const * b_const);
  for (int k = 0; k < n_samples / 2; ++k) {
    DualPoint w1, w2;
    w1.x = random_box_point(rng, p.loss.dim, 2.0);
    w1.eta = box.U + (box.V - box.U) * rng.next_unit();
    Eigen::VectorXd dir(p.loss.dim + 1);
    for (int i = 0; i < dir.size(); ++i) dir[i] = rng.next_normal();
    dir.normalize();
    Eigen::VectorXd j2 = w1.joint() + 0.05 * rng.next_unit() * dir;
    j2[p.loss.dim] = std::clamp(j2[p.loss.dim], box.U, box.V);
    w2 = DualPoint::from_joint(j2);
    double dist = (w1.joint() - j2).norm();
    if (dist < 1e-12) continue;
    double lhs = (full_gradient(p, w1, data).joint() -
                  full_gradient(p, w2, data).joint())
                     .norm();
    double v = lhs - K_box * dist;
    if (v > r.worst_violation) {
      r.worst_violation = v;
      r.witness = "smoothness;" + point_witness(w1.joint()) +
                  ";ratio=" + format_double(lhs / dist);
    }
    ++r.instances_tested;
  }

  // Projection-inactive steps report the batch gradient itself as the
  // generalized gradient, exactly.
  OptimizerConfig cfg;
  cfg.method = OptMethod::RSPG;
  cfg.step_gamma = 1e-3;
  cfg.batch_S = 4;
  cfg.iters_T = 50;
  cfg.seed = derive_seed(seed, 7);
  cfg.record_vectors = true;
  cfg.record_full_every = 1;
  DualPoint w0;
  w0.x = Eigen::VectorXd::Zero(p.loss.dim);
  w0.eta = 0.5 * (box.U + box.V);
  RunResult res = run_rspg(p, data, w0, cfg);
  const TraceDetail& det = *res.trace.detail;
  for (std::size_t t = 0; t < det.batch_grad.size(); ++t) {
    double eta_after = det.w[t + 1][p.loss.dim];
    bool inactive = eta_after > box.U_wide && eta_after < box.V_wide;
    if (!inactive) continue;
    double gen_norm = res.trace.records[t].mom_norm;
    double grad_norm = det.batch_grad[t].norm();
    double v = std::abs(gen_norm - grad_norm);  // exact agreement required
    if (v > r.worst_violation) {
      r.worst_violation = v;
      r.witness = "generalized-gradient;iter=" + std::to_string(t + 1);
    }
    ++r.instances_tested;
  }
  return finish_report(r);
}

std::vector<std::string> verification_suite_names() {
  return {"conjugate-oracle",  "variance-bound",        "generalized-smoothness",
          "smoothed-cvar-constants", "cvar-limit",      "gradient-fd",
          "bounded-case"};
}

std::vector<CheckReport> run_verification_suite(const std::string& name) {
  std::vector<CheckReport> out;
  if (name == "conjugate-oracle") {
    out.push_back(check_conjugate_oracle(DivergenceSpec::chi2()));
    out.push_back(check_conjugate_oracle(DivergenceSpec::kl()));
    out.push_back(check_conjugate_oracle(DivergenceSpec::cvar(0.25)));
    out.push_back(check_conjugate_oracle(DivergenceSpec::smoothed_cvar(0.25)));
    out.push_back(check_conjugate_oracle(DivergenceSpec::kl_reg_cvar(0.25)));
    out.push_back(check_conjugate_oracle(DivergenceSpec::cressie_read(1.5)));
    out.push_back(check_conjugate_oracle(DivergenceSpec::cressie_read(3.0)));
  } else if (name == "variance-bound") {
    out.push_back(check_variance_bound(make_counterexample_chi2(), rademacher_dataset()));
  } else if (name == "generalized-smoothness") {
    out.push_back(check_generalized_smoothness(make_counterexample_chi2(),
                                               rademacher_dataset()));
  } else if (name == "smoothed-cvar-constants") {
    out.push_back(check_smoothed_cvar_constants({0.02, 0.25, 0.5}));
  } else if (name == "cvar-limit") {
    out.push_back(check_cvar_limit(0.3, {1.0, 0.3, 0.1, 0.03, 0.01},
                                   {0.0, 0.4, 0.9, 1.5, 2.2}));
  } else if (name == "gradient-fd") {
    out.push_back(check_gradient_fd(make_counterexample_chi2(), rademacher_dataset()));
    Dataset logi = synth_imbalanced(11, std::vector<double>{0.8, 0.6, 1.0}, 30, 4);
    out.push_back(check_gradient_fd(
        DroProblem::make(logistic_loss_for(3, logi), DivergenceSpec::chi2(), 1.0),
        logi));
    out.push_back(check_gradient_fd(
        DroProblem::make(logistic_loss_for(3, logi),
                         DivergenceSpec::smoothed_cvar(0.25), 0.1),
        logi));
  } else if (name == "bounded-case") {
    out.push_back(check_bounded_case());
  } else {
    std::string valid;
    for (const std::string& n : verification_suite_names()) {
      valid += (valid.empty() ? "" : ", ") + n;
    }
    throw ConfigError("unknown verification suite '" + name +
                      "'; valid names: " + valid);
  }
  return out;
}

std::vector<CheckReport> run_all_verifications() {
  std::vector<CheckReport> out;
  for (const std::string& name : verification_suite_names()) {
    std::vector<CheckReport> part = run_verification_suite(name);
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

}  // namespace drokit
