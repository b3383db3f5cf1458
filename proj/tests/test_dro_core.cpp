#include <cmath>
#include <vector>

#include "doctest.h"
#include "drokit/dro.hpp"
#include "drokit/verify.hpp"

using namespace drokit;

namespace {

Dataset fixed_losses(std::initializer_list<double> values) {
  Dataset d;
  d.name = "fixed";
  for (double v : values) {
    Sample s;
    s.features = Eigen::VectorXd::Zero(1);
    s.target = v;
    d.samples.push_back(std::move(s));
  }
  return d;
}

DroProblem fixed_chi2(double lambda, double bound_B = 0.0) {
  return DroProblem::make(fixed_sample_loss(1, bound_B), DivergenceSpec::chi2(),
                          lambda, 1.0);
}

// Primal side of the penalized problem on a discrete distribution:
// maximize sum_i q_i l_i - lambda sum_i p_i (q_i/p_i - 1)^2 over the simplex.
// KKT gives q_i = p_i (1 + (l_i - mu) / (2 lambda))_+ with mu chosen so the
// weights sum to one; the multiplier is found by bisection.
double chi2_primal_psi(const std::vector<double>& losses, double lambda) {
  const double n = static_cast<double>(losses.size());
  auto mass = [&](double mu) {
    double s = 0.0;
    for (double l : losses) {
      s += std::max(1.0 + (l - mu) / (2.0 * lambda), 0.0) / n;
    }
    return s;
  };
  double lo = -1e6, hi = 1e6;
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    if (mass(mid) > 1.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  double mu = 0.5 * (lo + hi);
  double value = 0.0;
  for (double l : losses) {
    double q = std::max(1.0 + (l - mu) / (2.0 * lambda), 0.0) / n;
    double ratio = q * n;
    value += q * l - lambda * (1.0 / n) * (ratio - 1.0) * (ratio - 1.0);
  }
  return value;
}

}  // namespace

TEST_CASE("objective_sample closed-form points") {
  DroProblem p = fixed_chi2(1.0);
  Sample s;
  s.features = Eigen::VectorXd::Zero(1);

  DualPoint w;
  w.x = Eigen::VectorXd::Zero(1);
  w.eta = 0.0;
  s.target = 0.0;
  CHECK(objective_sample(p, w, s) == doctest::Approx(0.0));

  s.target = 2.0;
  w.eta = 1.0;
  CHECK(objective_sample(p, w, s) == doctest::Approx(2.25));

  DroProblem smo = DroProblem::make(fixed_sample_loss(),
                                    DivergenceSpec::smoothed_cvar(0.5), 1.0, 1.0);
  s.target = 0.7;
  w.eta = 0.7;  // argument 0: value reduces to G eta
  CHECK(objective_sample(smo, w, s) == doctest::Approx(0.7));
}

TEST_CASE("full_gradient structure at pinned points") {
  DroProblem p = make_counterexample_chi2(1.0);
  Dataset data = rademacher_dataset();

  // z = 0 for a single sample: slope one, grad_eta zero.
  DualPoint w;
  w.x = Eigen::VectorXd::Constant(1, 1.0);
  Dataset single;
  single.samples.push_back(data.samples[1]);  // xi = +1, loss 2.25
  w.eta = 2.25 / p.rescale_G;
  GradientEstimate g = full_gradient(p, w, single);
  CHECK(g.grad_x[0] ==
        doctest::Approx(p.loss.grad(w.x, single.samples[0])[0]));
  CHECK(g.grad_eta == doctest::Approx(0.0).epsilon(1e-12));

  // Symmetry at x = 0: both sample gradients vanish in x.
  w.x[0] = 0.0;
  w.eta = 0.0;
  CHECK(full_gradient(p, w, data).grad_x[0] == doctest::Approx(0.0));
}

TEST_CASE("full_gradient matches finite differences of the mean objective") {
  DroProblem p = make_counterexample_chi2(1.0);
  Dataset data = rademacher_dataset();
  CheckReport r = check_gradient_fd(p, data, 50, 404);
  INFO(r.witness);
  CHECK(r.passed);
}

TEST_CASE("stochastic gradient: use-all flag and determinism") {
  DroProblem p = make_counterexample_chi2(1.0);
  Dataset data = rademacher_dataset();
  DualPoint w;
  w.x = Eigen::VectorXd::Constant(1, 0.7);
  w.eta = 0.3;

  Rng r1(42);
  GradientEstimate all = stochastic_gradient(p, w, data, 2, r1, true);
  GradientEstimate full = full_gradient(p, w, data);
  CHECK(all.grad_x[0] == doctest::Approx(full.grad_x[0]));
  CHECK(all.grad_eta == doctest::Approx(full.grad_eta));

  Rng r2(42), r3(42);
  GradientEstimate a = stochastic_gradient(p, w, data, 5, r2);
  GradientEstimate b = stochastic_gradient(p, w, data, 5, r3);
  CHECK(a.grad_x[0] == b.grad_x[0]);
  CHECK(a.grad_eta == b.grad_eta);
  CHECK(a.seed_state == b.seed_state);
}

TEST_CASE("stochastic gradient is unbiased (Monte Carlo, 3 standard errors)") {
  DroProblem p = fixed_chi2(1.0);
  Dataset data = fixed_losses({0.3, 1.1, 2.4});
  DualPoint w;
  w.x = Eigen::VectorXd::Zero(1);
  w.eta = 0.9;
  GradientEstimate full = full_gradient(p, w, data);

  Rng rng(777);
  const int N = 100000;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < N; ++i) {
    double g = stochastic_gradient(p, w, data, 1, rng).grad_eta;
    sum += g;
    sumsq += g * g;
  }
  double mean = sum / N;
  double var = sumsq / N - mean * mean;
  double se = std::sqrt(var / N);
  CHECK(std::abs(mean - full.grad_eta) <= 3.0 * se + 1e-12);
}

TEST_CASE("solve_eta closed-form instances") {
  DroProblem p = fixed_chi2(1.0);

  // Losses {0, 2}: balance (1/4)((2-eta) + (4-eta)) = 1 at eta = 1.
  Dataset d02 = fixed_losses({0.0, 2.0});
  double eta = solve_eta(p, Eigen::VectorXd::Zero(1), d02, 1e-12);
  CHECK(eta == doctest::Approx(1.0).epsilon(1e-9));

  // Single sample: eta* = (l - lambda C) / G with C = 0.
  for (const DivergenceSpec& div :
       {DivergenceSpec::chi2(), DivergenceSpec::kl(),
        DivergenceSpec::smoothed_cvar(0.25)}) {
    DroProblem q = DroProblem::make(fixed_sample_loss(), div, 0.7, 1.0);
    Dataset single = fixed_losses({1.3});
    double e = solve_eta(q, Eigen::VectorXd::Zero(1), single, 1e-12);
    CHECK(e == doctest::Approx(1.3).epsilon(1e-8));
  }

  // Identical losses reduce to the single-sample case.
  Dataset same = fixed_losses({0.8, 0.8, 0.8});
  double e = solve_eta(p, Eigen::VectorXd::Zero(1), same, 1e-12);
  CHECK(e == doctest::Approx(0.8).epsilon(1e-9));
}

TEST_CASE("solve_eta leaves |grad_eta| below tolerance for smooth kinds") {
  Dataset data = fixed_losses({0.1, 0.5, 0.9, 1.7, 2.2});
  for (const DivergenceSpec& div :
       {DivergenceSpec::chi2(), DivergenceSpec::kl(),
        DivergenceSpec::smoothed_cvar(0.3), DivergenceSpec::kl_reg_cvar(0.3),
        DivergenceSpec::cressie_read(2.0)}) {
    for (double lambda : {0.05, 0.3, 1.0}) {
      DroProblem p = DroProblem::make(fixed_sample_loss(), div, lambda, 1.0);
      double eta = solve_eta(p, Eigen::VectorXd::Zero(1), data, 1e-10);
      DualPoint w;
      w.x = Eigen::VectorXd::Zero(1);
      w.eta = eta;
      INFO(div.name(), " lambda=", lambda);
      CHECK(std::abs(full_gradient(p, w, data).grad_eta) <= 1e-10);
    }
  }
}

TEST_CASE("evaluate_psi pinned values") {
  DroProblem p = fixed_chi2(1.0);
  Dataset d02 = fixed_losses({0.0, 2.0});
  // (1/2)[psi*(-1) + psi*(1)] + 1 = (1/2)(-0.75 + 1.25) + 1.
  CHECK(evaluate_psi(p, Eigen::VectorXd::Zero(1), d02, 1e-12) ==
        doctest::Approx(1.25).epsilon(1e-9));

  Dataset same = fixed_losses({0.6, 0.6});
  CHECK(evaluate_psi(p, Eigen::VectorXd::Zero(1), same, 1e-12) ==
        doctest::Approx(0.6).epsilon(1e-9));
}

TEST_CASE("dual Psi agrees with the primal reweighting maximum (chi2)") {
  std::vector<std::vector<double>> instances = {
      {0.0, 2.0}, {0.3, 1.1, 2.4}, {0.1, 0.4, 0.4, 3.0}, {1.0, 1.0, 1.0}};
  for (const auto& losses : instances) {
    for (double lambda : {0.2, 1.0, 3.0}) {
      DroProblem p = fixed_chi2(lambda);
      Dataset d;
      for (double l : losses) {
        Sample s;
        s.features = Eigen::VectorXd::Zero(1);
        s.target = l;
        d.samples.push_back(std::move(s));
      }
      double dual = evaluate_psi(p, Eigen::VectorXd::Zero(1), d, 1e-12);
      double primal = chi2_primal_psi(losses, lambda);
      double mean = 0.0;
      for (double l : losses) mean += l / losses.size();
      INFO("lambda=", lambda);
      CHECK(dual == doctest::Approx(primal).epsilon(1e-7));
      CHECK(dual >= mean - 1e-9);  // worst-case reweighting dominates the mean
    }
  }
}

TEST_CASE("stationarity transfer thresholds") {
  GradientEstimate g;
  g.grad_x = Eigen::VectorXd::Zero(2);
  g.grad_eta = 0.0;
  CHECK(stationarity_transfer(g, 1e-9, 1.0).certified);

  g.grad_x = Eigen::VectorXd::Zero(1);
  g.grad_x[0] = 0.7;
  StationarityReport r = stationarity_transfer(g, 1.0, 1.0);
  CHECK(r.joint_norm == doctest::Approx(0.7));
  CHECK(r.certified);  // 0.7 <= 1/sqrt(2)

  g.grad_x[0] = 0.8;
  CHECK(!stationarity_transfer(g, 1.0, 1.0).certified);
}

TEST_CASE("gradient at the solved eta is dominated by any other eta pair") {
  DroProblem p = make_counterexample_chi2(1.0);
  Dataset data = rademacher_dataset();
  Rng rng(55);
  for (int k = 0; k < 30; ++k) {
    Eigen::VectorXd x = Eigen::VectorXd::Constant(1, 4.0 * (rng.next_unit() - 0.5));
    double eta_star = solve_eta(p, x, data, 1e-12);
    DualPoint at_star{x, eta_star};
    double psi_grad = full_gradient(p, at_star, data).grad_x.norm();
    for (int j = 0; j < 10; ++j) {
      DualPoint w{x, eta_star + 2.0 * (rng.next_unit() - 0.5)};
      GradientEstimate g = full_gradient(p, w, data);
      CHECK(psi_grad <= g.grad_x.norm() + std::abs(g.grad_eta) + 1e-9);
    }
  }
}

TEST_CASE("dro_constants closed forms") {
  LossModel unit = fixed_sample_loss();
  unit.lipschitz_G = 1.0;
  unit.smooth_L = 1.0;
  unit.noise_sigma2 = 1.0;
  DroProblem p = DroProblem::make(unit, DivergenceSpec::chi2(), 1.0, 1.0);
  TheoremConstants c = dro_constants(p);
  CHECK(c.K0 == doctest::Approx(2.0));
  CHECK(c.K1 == doctest::Approx(1.0));
  CHECK(c.Gamma2 == doctest::Approx(8.0));
  CHECK(c.Lambda2 == doctest::Approx(10.75));

  LossModel quiet = unit;
  quiet.noise_sigma2 = 0.0;
  TheoremConstants c0 =
      dro_constants(DroProblem::make(quiet, DivergenceSpec::chi2(), 1.0, 1.0));
  CHECK(c0.Lambda2 == doctest::Approx(8.0));

  DroProblem smo = DroProblem::make(unit, DivergenceSpec::smoothed_cvar(0.02),
                                    0.1, 1.0);
  TheoremConstants cs = dro_constants(smo);
  CHECK(cs.K0 == doctest::Approx(300.0));
  CHECK(cs.K1 == doctest::Approx(0.0));
  CHECK(cs.Gamma2 == doctest::Approx(0.0));
  CHECK(cs.Lambda2 == doctest::Approx(5000.0));
}

TEST_CASE("dro_constants reports missing fields by name") {
  LossModel unit = fixed_sample_loss();
  unit.noise_sigma2 = std::nullopt;
  try {
    dro_constants(DroProblem::make(unit, DivergenceSpec::chi2(), 1.0, 1.0));
    FAIL("expected MissingConstant");
  } catch (const MissingConstant& e) {
    CHECK(e.field_name == "noise_sigma2");
  }

  LossModel with_noise = fixed_sample_loss();
  with_noise.noise_sigma2 = 1.0;
  try {
    dro_constants(DroProblem::make(with_noise, DivergenceSpec::kl(), 1.0, 1.0));
    FAIL("expected MissingConstant");
  } catch (const MissingConstant& e) {
    CHECK(e.field_name == "smoothness_M");
  }
}

TEST_CASE("estimate_delta is a nonnegative gap estimate") {
  DroProblem p = make_counterexample_chi2(1.0);
  Dataset data = rademacher_dataset();
  DualPoint w0;
  w0.x = Eigen::VectorXd::Constant(1, 3.0);
  w0.eta = 0.0;
  double delta = estimate_delta(p, w0, data);
  CHECK(delta >= 0.0);
  CHECK(delta > 1.0);  // far from stationary at x = 3
}
