#include "drokit/optimizer.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

#include "drokit/textio.hpp"

namespace drokit {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct BatchEval {
  Eigen::VectorXd grad;
  double objective = 0.0;
};

BatchEval draw_batch(const SampledObjective& obj, const Eigen::VectorXd& w,
                     const OptimizerConfig& cfg, Rng& rng,
                     std::uint64_t* evals) {
  BatchEval b;
  b.grad = Eigen::VectorXd::Zero(obj.dim);
  if (cfg.use_all_batch) {
    for (std::size_t i = 0; i < obj.n_samples; ++i) {
      b.grad += obj.sample_grad(w, i);
      b.objective += obj.sample_value(w, i);
    }
    b.grad /= static_cast<double>(obj.n_samples);
    b.objective /= static_cast<double>(obj.n_samples);
    *evals += obj.n_samples;
    return b;
  }
  for (int i = 0; i < cfg.batch_S; ++i) {
    std::size_t idx = rng.next_below(obj.n_samples);
    b.grad += obj.sample_grad(w, idx);
    b.objective += obj.sample_value(w, idx);
  }
  b.grad /= static_cast<double>(cfg.batch_S);
  b.objective /= static_cast<double>(cfg.batch_S);
  *evals += static_cast<std::uint64_t>(cfg.batch_S);
  return b;
}

struct Recorder {
  const SampledObjective& obj;
  const OptimizerConfig& cfg;
  TrainingTrace& trace;
  double best_grad_norm = kInf;

  bool wants_full(int t) const {
    if (cfg.record_vectors) return true;
    return cfg.record_full_every > 0 && (t - 1) % cfg.record_full_every == 0;
  }

  // Records iteration t; w_prev is the pre-step point the gradients were
  // drawn at, w_now the post-step iterate.
  void record(int t, const Eigen::VectorXd& w_prev, const Eigen::VectorXd& w_now,
              double objective, double mom_norm) {
    TraceRecord r;
    r.iter = t;
    r.objective = objective;
    r.mom_norm = mom_norm;
    r.step = (w_now - w_prev).norm();
    r.eta = w_now[w_now.size() - 1];
    if (wants_full(t)) {
      Eigen::VectorXd fg = obj.full_grad(w_prev);
      r.grad_norm = fg.norm();
      best_grad_norm = std::min(best_grad_norm, *r.grad_norm);
      if (trace.detail) trace.detail->full_grad.push_back(fg);
    }
    trace.records.push_back(std::move(r));
  }

  void finish(std::uint64_t evals, double wall_s, int skipped) {
    trace.summary.gradient_evaluations = evals;
    trace.summary.wall_time_s = wall_s;
    trace.summary.skipped_steps = skipped;
    trace.summary.best_grad_norm =
        best_grad_norm == kInf ? std::numeric_limits<double>::quiet_NaN()
                               : best_grad_norm;
  }
};

void check_finite_objective(double objective, TrainingTrace& trace) {
  if (!std::isfinite(objective) || objective > 1e12) {
    throw DivergenceDetected(
        "objective estimate " + format_double(objective) + " exceeds 1e12",
        std::move(trace));
  }
}

}  // namespace

void OptimizerConfig::validate() const {
  // SGD tolerates the degenerate gamma = 0 (identity run); the normalized and
  // projected updates divide by gamma-scaled quantities and need it positive.
  bool gamma_ok = method == OptMethod::SGD ? step_gamma >= 0.0 : step_gamma > 0.0;
  if (!gamma_ok) throw Error("OptimizerConfig: gamma must be positive");
  if (!(momentum_beta >= 0.0 && momentum_beta < 1.0)) {
    throw Error("OptimizerConfig: beta must lie in [0, 1)");
  }
  if (batch_S < 1) throw Error("OptimizerConfig: batch size must be >= 1");
  if (iters_T < 1) throw Error("OptimizerConfig: iteration count must be >= 1");
  if (method == OptMethod::RSPG && eta_box.has_value() &&
      !(eta_box->first < eta_box->second)) {
    throw Error("OptimizerConfig: RSPG eta box needs U < V");
  }
}

double SampledObjective::full_value(const Eigen::VectorXd& w) const {
  double s = 0.0;
  for (std::size_t i = 0; i < n_samples; ++i) s += sample_value(w, i);
  return s / static_cast<double>(n_samples);
}

Eigen::VectorXd SampledObjective::full_grad(const Eigen::VectorXd& w) const {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(dim);
  for (std::size_t i = 0; i < n_samples; ++i) g += sample_grad(w, i);
  return g / static_cast<double>(n_samples);
}

SampledObjective make_dro_objective(const DroProblem& p, const Dataset& data) {
  if (data.samples.empty()) throw Error("make_dro_objective: empty dataset");
  SampledObjective obj;
  obj.dim = p.loss.dim + 1;
  obj.n_samples = data.size();
  obj.sample_value = [&p, &data](const Eigen::VectorXd& w, std::size_t i) {
    DualPoint d = DualPoint::from_joint(w);
    return objective_sample(p, d, data.samples[i]);
  };
  obj.sample_grad = [&p, &data](const Eigen::VectorXd& w, std::size_t i) {
    DualPoint d = DualPoint::from_joint(w);
    return sample_gradient(p, d, data.samples[i]).joint();
  };
  if (p.loss.x_box_radius.has_value()) {
    double radius = *p.loss.x_box_radius;
    int xdim = p.loss.dim;
    obj.validate = [radius, xdim](const Eigen::VectorXd& w) {
      for (int j = 0; j < xdim; ++j) {
        if (std::abs(w[j]) > radius) {
          throw IterateOutOfBox(
              "iterate coordinate " + std::to_string(j) + " = " +
              format_double(w[j]) + " left the working box |x| <= " +
              format_double(radius) + " on which the loss constants are certified");
        }
      }
    };
  }
  return obj;
}

GenericRunResult run_normalized_momentum(const SampledObjective& obj,
                                         const Eigen::VectorXd& w0,
                                         const OptimizerConfig& cfg,
                                         const IterObserver& observer) {
  cfg.validate();
  auto t_start = std::chrono::steady_clock::now();
  Rng rng(cfg.seed);
  std::uint64_t evals = 0;
  TrainingTrace trace;
  if (cfg.record_vectors) trace.detail.emplace();
  Recorder rec{obj, cfg, trace};

  Eigen::VectorXd w = w0;
  Eigen::VectorXd m = draw_batch(obj, w, cfg, rng, &evals).grad;
  if (trace.detail) {
    trace.detail->beta = cfg.momentum_beta;
    trace.detail->w.push_back(w);
    trace.detail->momentum.push_back(m);
  }
  int skipped = 0;
  for (int t = 1; t <= cfg.iters_T; ++t) {
    BatchEval b = draw_batch(obj, w, cfg, rng, &evals);
    m = cfg.momentum_beta * m + (1.0 - cfg.momentum_beta) * b.grad;
    double mn = m.norm();
    Eigen::VectorXd w_prev = w;
    if (mn <= 1e-300) {
      ++skipped;  // a stationary estimate must not produce a NaN direction
    } else {
      w -= cfg.step_gamma / mn * m;
    }
    if (obj.validate) obj.validate(w);
    if (trace.detail) {
      trace.detail->batch_grad.push_back(b.grad);
      trace.detail->momentum.push_back(m);
      trace.detail->w.push_back(w);
    }
    rec.record(t, w_prev, w, b.objective, mn);
    if (observer) observer(t, w);
  }
  double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                              t_start)
                    .count();
  rec.finish(evals, wall, skipped);
  return {std::move(w), std::move(trace)};
}

GenericRunResult run_sgd(const SampledObjective& obj, const Eigen::VectorXd& w0,
                         const OptimizerConfig& cfg, const IterObserver& observer) {
  cfg.validate();
  auto t_start = std::chrono::steady_clock::now();
  Rng rng(cfg.seed);
  std::uint64_t evals = 0;
  TrainingTrace trace;
  if (cfg.record_vectors) trace.detail.emplace();
  Recorder rec{obj, cfg, trace};

  Eigen::VectorXd w = w0;
  if (trace.detail) trace.detail->w.push_back(w);
  for (int t = 1; t <= cfg.iters_T; ++t) {
    BatchEval b = draw_batch(obj, w, cfg, rng, &evals);
    check_finite_objective(b.objective, trace);
    Eigen::VectorXd w_prev = w;
    w -= cfg.step_gamma * b.grad;
    if (obj.validate) obj.validate(w);
    if (trace.detail) {
      trace.detail->batch_grad.push_back(b.grad);
      trace.detail->w.push_back(w);
    }
    rec.record(t, w_prev, w, b.objective, b.grad.norm());
    if (observer) observer(t, w);
  }
  double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                              t_start)
                    .count();
  rec.finish(evals, wall, 0);
  return {std::move(w), std::move(trace)};
}

GenericRunResult run_rspg(const SampledObjective& obj, const Eigen::VectorXd& w0,
                          const OptimizerConfig& cfg, const IterObserver& observer) {
  cfg.validate();
  if (!cfg.eta_box.has_value()) {
    throw Error("run_rspg: eta box is required");
  }
  auto t_start = std::chrono::steady_clock::now();
  const double U = cfg.eta_box->first;
  const double V = cfg.eta_box->second;
  Rng rng(cfg.seed);
  std::uint64_t evals = 0;
  TrainingTrace trace;
  if (cfg.record_vectors) trace.detail.emplace();
  Recorder rec{obj, cfg, trace};

  Eigen::VectorXd w = w0;
  const int last = obj.dim - 1;
  w[last] = std::clamp(w[last], U, V);
  if (trace.detail) trace.detail->w.push_back(w);
  std::vector<Eigen::VectorXd> iterates;
  iterates.reserve(cfg.iters_T);
  for (int t = 1; t <= cfg.iters_T; ++t) {
    BatchEval b = draw_batch(obj, w, cfg, rng, &evals);
    Eigen::VectorXd w_prev = w;
    w -= cfg.step_gamma * b.grad;
    double eta_clamped = std::clamp(w[last], U, V);
    // Generalized gradient (w_prev - w_t) / gamma; coincides with the batch
    // gradient on unconstrained coordinates.
    Eigen::VectorXd gen = b.grad;
    if (eta_clamped != w[last]) {
      gen[last] = (w_prev[last] - eta_clamped) / cfg.step_gamma;
      w[last] = eta_clamped;
    }
    if (obj.validate) obj.validate(w);
    if (trace.detail) {
      trace.detail->batch_grad.push_back(b.grad);
      trace.detail->w.push_back(w);
    }
    iterates.push_back(w);
    rec.record(t, w_prev, w, b.objective, gen.norm());
    if (observer) observer(t, w);
  }
  // Uniform output rule: one iterate from {1..T}, drawn from the run's RNG.
  std::size_t pick = rng.next_below(iterates.size());
  double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                              t_start)
                    .count();
  rec.finish(evals, wall, 0);
  return {iterates[pick], std::move(trace)};
}

namespace {

RunResult wrap_dro(GenericRunResult r) {
  return {DualPoint::from_joint(r.w), std::move(r.trace)};
}

}  // namespace

RunResult run_normalized_momentum(const DroProblem& p, const Dataset& data,
                                  const DualPoint& w0, const OptimizerConfig& cfg,
                                  const IterObserver& observer) {
  return wrap_dro(run_normalized_momentum(make_dro_objective(p, data), w0.joint(),
                                          cfg, observer));
}

RunResult run_sgd(const DroProblem& p, const Dataset& data, const DualPoint& w0,
                  const OptimizerConfig& cfg, const IterObserver& observer) {
  return wrap_dro(run_sgd(make_dro_objective(p, data), w0.joint(), cfg, observer));
}

RunResult run_rspg(const DroProblem& p, const Dataset& data, const DualPoint& w0,
                   const OptimizerConfig& cfg, const IterObserver& observer) {
  if (!p.loss.bound_B.has_value()) {
    throw UnboundedLoss("run_rspg: the loss must declare a finite bound");
  }
  OptimizerConfig c = cfg;
  if (!c.eta_box.has_value()) {
    EtaInterval box = eta_interval(p, cfg.target_eps);
    c.eta_box = {box.U_wide, box.V_wide};
  }
  return wrap_dro(run_rspg(make_dro_objective(p, data), w0.joint(), c, observer));
}

EtaInterval eta_interval(const DroProblem& p, double eps) {
  if (!p.loss.bound_B.has_value()) {
    throw UnboundedLoss("eta_interval: the loss must declare a finite bound");
  }
  if (eps < 0.0) throw Error("eta_interval: eps must be nonnegative");
  EtaInterval r;
  double c = p.divergence.crossing_C();
  r.U = -p.lambda * c / p.rescale_G;
  r.V = (*p.loss.bound_B - p.lambda * c) / p.rescale_G;
  double margin = eps / p.loss.smooth_L;
  r.U_wide = r.U - margin;
  r.V_wide = r.V + margin;
  return r;
}

OptimizerConfig theorem_hyperparams(const TheoremConstants& c, double eps,
                                    std::string* warning) {
  if (!(eps > 0.0)) throw Error("theorem_hyperparams: eps must be positive");
  if (!(c.K0 > 0.0)) throw MissingConstant("K0");

  double ratio = (c.Gamma2 == 0.0 || c.Lambda2 == 0.0)
                     ? kInf
                     : 4.0 * c.Gamma2 * eps * eps / c.Lambda2;
  double one_minus_beta = std::min(ratio, 1.0);
  double inv_k1 = c.K1 > 0.0 ? 1.0 / c.K1 : kInf;
  double gamma = 0.125 * std::min(inv_k1, eps / c.K0) * one_minus_beta;

  OptimizerConfig cfg;
  cfg.method = OptMethod::NormalizedMomentum;
  cfg.momentum_beta = 1.0 - one_minus_beta;
  cfg.step_gamma = gamma;
  cfg.batch_S = std::max(1, static_cast<int>(std::ceil(64.0 * c.Gamma2)));
  cfg.iters_T = std::max(
      1, static_cast<int>(std::ceil(4.0 * c.Delta / (gamma * eps))));
  cfg.target_eps = eps;

  double eps_max = inv_k1 == kInf ? kInf : c.K0 / c.K1;
  if (c.Gamma2 > 0.0) {
    eps_max = std::min(eps_max, std::sqrt(c.Lambda2) / (2.0 * std::sqrt(c.Gamma2)));
  }
  if (warning) {
    *warning = eps > eps_max
                   ? "eps " + format_double(eps) +
                         " exceeds the validity threshold " + format_double(eps_max)
                   : "";
  }
  return cfg;
}

DeltaDecomposition momentum_error_decomposition(const TrainingTrace& trace) {
  if (!trace.detail.has_value()) {
    throw TraceIncomplete("momentum_error_decomposition: vectors not recorded");
  }
  const TraceDetail& d = *trace.detail;
  const std::size_t T = d.batch_grad.size();
  if (d.full_grad.size() < T || d.momentum.size() < T + 1 || d.w.size() < T + 1) {
    throw TraceIncomplete("momentum_error_decomposition: missing records");
  }
  const double beta = d.beta;

  DeltaDecomposition out;
  out.direct.reserve(T);
  out.reconstructed.reserve(T);
  for (std::size_t t = 0; t < T; ++t) {
    out.direct.push_back(d.momentum[t + 1] - d.full_grad[t]);

    Eigen::VectorXd acc = Eigen::VectorXd::Zero(d.w[0].size());
    double bpow = 1.0;
    for (std::size_t tau = 0; tau < t; ++tau) {
      acc += beta * bpow * (d.full_grad[t - tau - 1] - d.full_grad[t - tau]);
      acc += (1.0 - beta) * bpow * (d.batch_grad[t - tau] - d.full_grad[t - tau]);
      bpow *= beta;
    }
    // bpow = beta^t here.
    acc += (1.0 - beta) * bpow * (d.batch_grad[0] - d.full_grad[0]);
    acc += beta * bpow * (d.momentum[0] - d.full_grad[0]);
    out.reconstructed.push_back(std::move(acc));

    double gap = (out.direct.back() - out.reconstructed.back())
                     .cwiseAbs()
                     .maxCoeff();
    out.max_abs_gap = std::max(out.max_abs_gap, gap);
  }
  return out;
}

void TrainingTrace::write_csv(std::ostream& out) const {
  out << "iter,objective,grad_norm,mom_norm,step,eta\n";
  for (const TraceRecord& r : records) {
    out << r.iter << ',' << format_double(r.objective) << ',';
    if (r.grad_norm) out << format_double(*r.grad_norm);
    out << ',' << format_double(r.mom_norm) << ',' << format_double(r.step)
        << ',' << format_double(r.eta) << '\n';
  }
}

std::string TrainingTrace::csv_string() const {
  std::ostringstream os;
  write_csv(os);
  return os.str();
}

std::string TrainingTrace::summary_text() const {
  std::ostringstream os;
  os << "iterations=" << records.size() << "\n";
  os << "gradient_evaluations=" << summary.gradient_evaluations << "\n";
  if (!std::isnan(summary.best_grad_norm)) {
    os << "best_grad_norm=" << format_double(summary.best_grad_norm) << "\n";
  }
  os << "skipped_steps=" << summary.skipped_steps << "\n";
  if (!records.empty()) {
    os << "final_objective_estimate=" << format_double(records.back().objective)
       << "\n";
    os << "final_eta=" << format_double(records.back().eta) << "\n";
  }
  os << "wall_time_s=" << format_double(summary.wall_time_s) << "\n";
  return os.str();
}

}  // namespace drokit
