#include "drokit/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "drokit/textio.hpp"
#include "drokit/verify.hpp"

namespace drokit {

namespace {

namespace fs = std::filesystem;

DivergenceSpec make_divergence(const ExperimentConfig& cfg) {
  if (cfg.divergence_kind == "chi2") return DivergenceSpec::chi2();
  if (cfg.divergence_kind == "kl") return DivergenceSpec::kl();
  if (cfg.divergence_kind == "cvar") return DivergenceSpec::cvar(cfg.alpha);
  if (cfg.divergence_kind == "smoothed_cvar") {
    return DivergenceSpec::smoothed_cvar(cfg.alpha);
  }
  if (cfg.divergence_kind == "kl_reg_cvar") {
    return DivergenceSpec::kl_reg_cvar(cfg.alpha);
  }
  if (cfg.divergence_kind == "cressie_read") {
    return DivergenceSpec::cressie_read(cfg.cr_k);
  }
  throw ConfigError("unknown divergence '" + cfg.divergence_kind + "'");
}

OptMethod parse_method(const std::string& name) {
  if (name == "normalized_momentum") return OptMethod::NormalizedMomentum;
  if (name == "sgd" || name == "cvar_subgradient") return OptMethod::SGD;
  if (name == "rspg") return OptMethod::RSPG;
  throw ConfigError("unknown optimizer '" + name + "'");
}

RunResult dispatch_run(OptMethod method, const DroProblem& p, const Dataset& data,
                       const DualPoint& w0, const OptimizerConfig& cfg,
                       const IterObserver& obs) {
  switch (method) {
    case OptMethod::NormalizedMomentum:
      return run_normalized_momentum(p, data, w0, cfg, obs);
    case OptMethod::SGD:
      return run_sgd(p, data, w0, cfg, obs);
    case OptMethod::RSPG:
      return run_rspg(p, data, w0, cfg, obs);
  }
  throw Error("unreachable optimizer method");
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << content;
}

unsigned thread_cap() {
  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("DRO_KIT_THREADS")) {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end != env && v >= 1) hw = static_cast<unsigned>(v);
  }
  return hw;
}

int epoch_length(std::size_t n, const OptimizerConfig& opt) {
  std::size_t s = opt.use_all_batch ? n : static_cast<std::size_t>(opt.batch_S);
  return static_cast<int>((n + s - 1) / s);
}

std::string psi_curve_csv(const std::vector<std::pair<int, double>>& curve) {
  std::ostringstream os;
  os << "epoch,psi\n";
  for (const auto& [epoch, psi] : curve) {
    os << epoch << ',' << format_double(psi) << '\n';
  }
  return os.str();
}

}  // namespace

BuiltProblem build_problem(const ExperimentConfig& cfg) {
  Dataset data;
  if (cfg.generator == "rademacher") {
    data = rademacher_dataset();
  } else if (cfg.generator == "imbalanced") {
    data = synth_imbalanced(cfg.data_seed,
                            cfg.ratios.empty() ? default_imbalance_ratios()
                                               : cfg.ratios,
                            cfg.base_n, cfg.feature_dim);
  } else if (cfg.generator == "csv") {
    data = load_csv(cfg.csv_path);
  } else {
    throw ConfigError("unknown data generator '" + cfg.generator + "'");
  }

  LossModel loss;
  if (cfg.loss_kind == "counterexample") {
    loss = counterexample_loss();
  } else if (cfg.loss_kind == "logistic") {
    int num_classes = 0;
    for (const Sample& s : data.samples) {
      num_classes = std::max(num_classes, static_cast<int>(s.target) + 1);
    }
    if (num_classes < 2) {
      throw ConfigError("logistic loss needs at least two classes in the data");
    }
    loss = logistic_loss_for(num_classes, data);
  } else if (cfg.loss_kind == "clipped_quadratic") {
    double fbound = 1.0;
    for (const Sample& s : data.samples) {
      fbound = std::max(fbound, s.features.norm());
    }
    loss = clipped_quadratic_loss(data.feature_dim(), cfg.clip_B, fbound);
  } else {
    throw ConfigError("unknown loss '" + cfg.loss_kind + "'");
  }

  BuiltProblem bp{DroProblem::make(std::move(loss), make_divergence(cfg), cfg.lambda),
                  std::move(data),
                  {}};
  bp.w0.x = Eigen::VectorXd::Zero(bp.problem.loss.dim);
  if (cfg.x0.size() == 1) {
    bp.w0.x.setConstant(cfg.x0[0]);
  } else if (!cfg.x0.empty()) {
    if (static_cast<int>(cfg.x0.size()) != bp.problem.loss.dim) {
      throw ConfigError("optimizer.x0 has " + std::to_string(cfg.x0.size()) +
                        " entries, expected " + std::to_string(bp.problem.loss.dim));
    }
    for (std::size_t i = 0; i < cfg.x0.size(); ++i) bp.w0.x[i] = cfg.x0[i];
  }
  bp.w0.eta = cfg.eta0;
  return bp;
}

void run_experiment(const ExperimentConfig& cfg) {
  BuiltProblem bp = build_problem(cfg);
  fs::create_directories(cfg.output_dir);

  OptimizerConfig opt = cfg.opt;
  std::string theorem_warning;
  std::string sigma_note;
  OptMethod method;
  if (cfg.method == "theorem_auto") {
    method = OptMethod::NormalizedMomentum;
    if (bp.problem.divergence.kind() != DivergenceKind::SmoothedCVaR &&
        !bp.problem.loss.noise_sigma2.has_value()) {
      double s2 = estimate_noise_sigma2(bp.problem.loss, bp.data, 16,
                                        derive_seed(cfg.opt.seed, 99));
      bp.problem.loss.noise_sigma2 = s2;
      sigma_note = "noise_sigma2_estimate=" + format_double(s2) + "\n";
    }
    TheoremConstants c = dro_constants(bp.problem);
    c.Delta = estimate_delta(bp.problem, bp.w0, bp.data);
    OptimizerConfig derived = theorem_hyperparams(c, cfg.theorem_eps, &theorem_warning);
    derived.seed = cfg.opt.seed;
    derived.record_full_every = cfg.opt.record_full_every;
    opt = derived;
  } else {
    method = parse_method(cfg.method);
    opt.method = method;
  }

  const int epoch_iters = epoch_length(bp.data.size(), opt);
  std::vector<std::pair<int, Eigen::VectorXd>> epoch_points;
  IterObserver observer = [&](int t, const Eigen::VectorXd& w) {
    if (t % (epoch_iters * cfg.psi_every) == 0) {
      epoch_points.emplace_back(t / epoch_iters, w.head(w.size() - 1));
    }
  };

  std::vector<std::pair<int, double>> psi_curve;
  psi_curve.emplace_back(0, evaluate_psi(bp.problem, bp.w0.x, bp.data, cfg.eta_tol));

  auto finalize = [&](const TrainingTrace& trace, bool diverged) {
    for (const auto& [epoch, x] : epoch_points) {
      psi_curve.emplace_back(epoch,
                             evaluate_psi(bp.problem, x, bp.data, cfg.eta_tol));
    }
    write_file(fs::path(cfg.output_dir) / "trace.csv", trace.csv_string());
    write_file(fs::path(cfg.output_dir) / "psi_curve.csv", psi_curve_csv(psi_curve));

    std::ostringstream sum;
    sum << "method=" << cfg.method << "\n"
        << "loss=" << bp.problem.loss.name << "\n"
        << "divergence=" << bp.problem.divergence.name() << "\n"
        << "lambda=" << format_double(bp.problem.lambda) << "\n"
        << "rescale_G=" << format_double(bp.problem.rescale_G) << "\n"
        << "n_samples=" << bp.data.size() << "\n"
        << "gamma=" << format_double(opt.step_gamma) << "\n"
        << "beta=" << format_double(opt.momentum_beta) << "\n"
        << "batch=" << opt.batch_S << "\n"
        << "iters=" << opt.iters_T << "\n"
        << "seed=" << opt.seed << "\n"
        << sigma_note;
    if (!theorem_warning.empty()) sum << "warning=" << theorem_warning << "\n";
    if (diverged) sum << "diverged=true\n";
    if (!psi_curve.empty()) {
      sum << "final_psi=" << format_double(psi_curve.back().second) << "\n";
    }
    sum << trace.summary_text();
    write_file(fs::path(cfg.output_dir) / "summary.txt", sum.str());
  };

  try {
    RunResult res = dispatch_run(method, bp.problem, bp.data, bp.w0, opt, observer);
    finalize(res.trace, false);
  } catch (const DivergenceDetected& e) {
    finalize(e.trace, true);
    throw;
  }
}

namespace {

struct GridOutcome {
  bool completed = false;
  double gamma = 0.0;
  TrainingTrace trace;
  DualPoint w_final;
  std::vector<std::pair<int, double>> psi_curve;  // epoch -> Psi
  std::uint64_t warmup_evals = 0;
  double final_metric = std::numeric_limits<double>::quiet_NaN();
};

struct ArmPlan {
  std::string name;
  OptMethod method;
  const DroProblem* problem;  // may point at an override problem
  std::uint64_t seed;
};

}  // namespace

std::vector<CompareRow> run_compare(const ExperimentConfig& cfg) {
  if (cfg.compare_optimizers.empty()) {
    throw ConfigError("compare.optimizers must list at least one optimizer");
  }
  const std::string metric = cfg.threshold_metric;
  if (metric != "grad_norm" && metric != "psi" && metric != "cvar") {
    throw ConfigError("compare.metric must be grad_norm, psi or cvar");
  }

  BuiltProblem bp = build_problem(cfg);
  fs::create_directories(cfg.output_dir);
  const std::vector<double>& grid =
      cfg.gamma_grid.empty() ? default_gamma_grid() : cfg.gamma_grid;
  const int budget = cfg.budget_iters > 0 ? cfg.budget_iters : cfg.opt.iters_T;

  // The plain-CVaR subgradient baseline trains on the same loss with the
  // divergence swapped to plain CVaR at the configured alpha.
  std::optional<DroProblem> cvar_override;
  std::vector<ArmPlan> arms;
  for (std::size_t a = 0; a < cfg.compare_optimizers.size(); ++a) {
    const std::string& name = cfg.compare_optimizers[a];
    ArmPlan plan;
    plan.name = name;
    plan.method = parse_method(name);
    plan.problem = &bp.problem;
    plan.seed = derive_seed(cfg.opt.seed, a);
    if (name == "cvar_subgradient") {
      if (metric != "cvar") {
        throw ConfigError("cvar_subgradient arms require compare.metric = cvar");
      }
      if (!cvar_override) {
        cvar_override = DroProblem::make(bp.problem.loss,
                                         DivergenceSpec::cvar(cfg.alpha),
                                         cfg.lambda, bp.problem.rescale_G);
      }
      plan.problem = &*cvar_override;
    }
    arms.push_back(std::move(plan));
  }

  const int epoch_iters = epoch_length(bp.data.size(), cfg.opt);
  std::vector<std::vector<GridOutcome>> outcomes(arms.size());

  auto run_arm = [&](std::size_t a) {
    const ArmPlan& plan = arms[a];
    for (double gamma : grid) {
      GridOutcome out;
      out.gamma = gamma;
      OptimizerConfig opt = cfg.opt;
      opt.method = plan.method;
      opt.step_gamma = gamma;
      opt.iters_T = budget;
      opt.seed = plan.seed;
      opt.record_full_every = metric == "grad_norm" ? 1 : 0;
      out.warmup_evals = plan.method == OptMethod::NormalizedMomentum
                             ? static_cast<std::uint64_t>(opt.batch_S)
                             : 0;
      std::vector<std::pair<int, Eigen::VectorXd>> epoch_points;
      IterObserver observer;
      if (metric == "psi") {
        observer = [&](int t, const Eigen::VectorXd& w) {
          if (t % epoch_iters == 0) {
            epoch_points.emplace_back(t / epoch_iters, w.head(w.size() - 1));
          }
        };
      }
      try {
        RunResult res = dispatch_run(plan.method, *plan.problem, bp.data, bp.w0,
                                     opt, observer);
        out.completed = true;
        out.trace = std::move(res.trace);
        out.w_final = std::move(res.w);
        if (metric == "psi") {
          out.psi_curve.emplace_back(
              0, evaluate_psi(*plan.problem, bp.w0.x, bp.data, cfg.eta_tol));
          for (const auto& [epoch, x] : epoch_points) {
            out.psi_curve.emplace_back(
                epoch, evaluate_psi(*plan.problem, x, bp.data, cfg.eta_tol));
          }
          out.final_metric = out.psi_curve.back().second;
        } else if (metric == "cvar") {
          std::vector<double> losses;
          losses.reserve(bp.data.size());
          for (const Sample& s : bp.data.samples) {
            losses.push_back(bp.problem.loss.value(out.w_final.x, s));
          }
          out.final_metric = cvar_psi_reference(cfg.alpha, losses);
        } else {
          out.final_metric =
              evaluate_psi(*plan.problem, out.w_final.x, bp.data, cfg.eta_tol);
        }
      } catch (const DivergenceDetected&) {
        out.completed = false;
      } catch (const IterateOutOfBox&) {
        out.completed = false;
      } catch (const Error&) {
        // Arms run on worker threads; a failed configuration marks the run
        // instead of unwinding across the thread boundary.
        out.completed = false;
      }
      outcomes[a].push_back(std::move(out));
    }
  };

  unsigned cap = thread_cap();
  if (cap <= 1 || arms.size() <= 1) {
    for (std::size_t a = 0; a < arms.size(); ++a) run_arm(a);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t a = 0; a < arms.size(); ++a) {
      pool.emplace_back(run_arm, a);
      if (pool.size() == cap) {
        for (auto& t : pool) t.join();
        pool.clear();
      }
    }
    for (auto& t : pool) t.join();
  }

  // Threshold targets that depend on the whole comparison.
  double psi_best = std::numeric_limits<double>::infinity();
  if (metric == "psi") {
    for (const auto& arm_runs : outcomes) {
      for (const GridOutcome& out : arm_runs) {
        if (!out.completed) continue;
        for (const auto& [epoch, psi] : out.psi_curve) {
          psi_best = std::min(psi_best, psi);
        }
      }
    }
  }

  auto evals_to_threshold =
      [&](const GridOutcome& out) -> std::optional<std::uint64_t> {
    const std::uint64_t S = static_cast<std::uint64_t>(cfg.opt.batch_S);
    if (metric == "grad_norm") {
      for (const TraceRecord& r : out.trace.records) {
        if (r.grad_norm && *r.grad_norm <= cfg.threshold_value) {
          // The qualifying point is the pre-step iterate of record r.
          if (r.iter == 1) return 0;
          return S * static_cast<std::uint64_t>(r.iter - 1) + out.warmup_evals;
        }
      }
      return std::nullopt;
    }
    if (metric == "psi") {
      double thr = psi_best + cfg.threshold_value * std::abs(psi_best);
      for (const auto& [epoch, psi] : out.psi_curve) {
        if (psi <= thr) {
          if (epoch == 0) return 0;
          return S * static_cast<std::uint64_t>(epoch_iters) *
                     static_cast<std::uint64_t>(epoch) +
                 out.warmup_evals;
        }
      }
      return std::nullopt;
    }
    // Equal-budget mode: the spend is the whole budget.
    return out.trace.summary.gradient_evaluations;
  };

  std::vector<CompareRow> rows;
  std::ostringstream csv;
  csv << "optimizer,gradient_evaluations_to_threshold,final_psi\n";
  for (std::size_t a = 0; a < arms.size(); ++a) {
    CompareRow row;
    row.optimizer = arms[a].name;
    const GridOutcome* best = nullptr;
    std::optional<std::uint64_t> best_evals;
    for (const GridOutcome& out : outcomes[a]) {
      if (!out.completed) continue;
      std::optional<std::uint64_t> ev = evals_to_threshold(out);
      bool better = false;
      if (metric == "cvar") {
        better = !best || out.final_metric < best->final_metric;
      } else if (ev.has_value()) {
        better = !best_evals.has_value() || *ev < *best_evals;
      } else if (!best) {
        // Nothing reached yet: prefer the best final metric as a fallback.
        better = true;
      } else if (!best_evals.has_value()) {
        better = out.final_metric < best->final_metric;
      }
      if (better) {
        best = &out;
        best_evals = ev;
      }
    }
    if (best) {
      row.completed = true;
      row.best_gamma = best->gamma;
      row.final_metric = best->final_metric;
      row.evals_to_threshold = best_evals;
      std::ofstream tf(fs::path(cfg.output_dir) / ("trace_" + arms[a].name + ".csv"),
                       std::ios::binary);
      best->trace.write_csv(tf);
    }
    csv << row.optimizer << ',';
    if (row.evals_to_threshold.has_value()) {
      csv << *row.evals_to_threshold;
    } else {
      csv << "not-reached";
    }
    csv << ',' << format_double(row.final_metric) << '\n';
    rows.push_back(std::move(row));
  }
  write_file(fs::path(cfg.output_dir) / "compare.csv", csv.str());
  return rows;
}

int cmd_run(const std::string& config_path) {
  try {
    run_experiment(ExperimentConfig::from_file(config_path));
    return 0;
  } catch (const DivergenceDetected& e) {
    std::cerr << "divergence detected: " << e.what() << "\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 3;
  } catch (const ParseError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

int cmd_verify(const std::string& suite, const std::string& out_dir) {
  try {
    std::vector<CheckReport> reports = suite == "all"
                                           ? run_all_verifications()
                                           : run_verification_suite(suite);
    fs::create_directories(out_dir);
    bool all_passed = true;
    for (const CheckReport& r : reports) {
      std::string fname = r.check_name;
      for (char& c : fname) {
        if (c == ':' || c == '/' || c == ' ') c = '_';
      }
      write_file(fs::path(out_dir) / (fname + ".txt"), r.text());
      std::cout << (r.passed ? "[PASS] " : "[FAIL] ") << r.check_name
                << " worst_violation=" << format_double(r.worst_violation)
                << " (tolerance " << format_double(r.tolerance) << ", "
                << r.instances_tested << " instances)\n";
      all_passed = all_passed && r.passed;
    }
    return all_passed ? 0 : 1;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

int cmd_compare(const std::string& config_path) {
  try {
    std::vector<CompareRow> rows =
        run_compare(ExperimentConfig::from_file(config_path));
    for (const CompareRow& r : rows) {
      std::cout << r.optimizer << ": ";
      if (r.evals_to_threshold.has_value()) {
        std::cout << *r.evals_to_threshold << " gradient evaluations";
      } else {
        std::cout << "not-reached";
      }
      std::cout << ", final metric " << format_double(r.final_metric);
      if (r.completed) std::cout << " (gamma " << format_double(r.best_gamma) << ")";
      std::cout << "\n";
    }
    return 0;
  } catch (const DivergenceDetected& e) {
    std::cerr << "divergence detected: " << e.what() << "\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 3;
  } catch (const ParseError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace drokit
