#include <cmath>
#include <sstream>

#include "doctest.h"
#include "drokit/verify.hpp"

using namespace drokit;

namespace {

// Pulls "key=1.25" style numbers out of a witness string.
double witness_field(const std::string& witness, const std::string& key) {
  std::size_t pos = witness.find(key + "=");
  REQUIRE(pos != std::string::npos);
  return std::stod(witness.substr(pos + key.size() + 1));
}

}  // namespace

TEST_CASE("cvar psi reference on tiny instances") {
  CHECK(cvar_psi_reference(0.3, {0.7, 0.7, 0.7}) == doctest::Approx(0.7));
  // Two losses {0, 1} at alpha = 0.5: the objective is constant 1 on [0, 1].
  CHECK(cvar_psi_reference(0.5, {0.0, 1.0}) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("variance bound certificate on the counterexample") {
  CheckReport r =
      check_variance_bound(make_counterexample_chi2(1.0), rademacher_dataset());
  INFO(r.witness);
  CHECK(r.passed);
  CHECK(r.instances_tested == 41 * 41);

  // Witness re-evaluates to the recorded violation.
  double x = witness_field(r.witness, "x");
  double eta = witness_field(r.witness, "eta");
  DroProblem p = make_counterexample_chi2(1.0);
  Dataset data = rademacher_dataset();
  DualPoint w;
  w.x = Eigen::VectorXd::Constant(1, x);
  w.eta = eta;
  GradientEstimate g0 = sample_gradient(p, w, data.samples[0]);
  GradientEstimate g1 = sample_gradient(p, w, data.samples[1]);
  double var = 0.25 * (g0.joint() - g1.joint()).squaredNorm();
  double full = full_gradient(p, w, data).norm();
  double bound = 11.0 * p.rescale_G * p.rescale_G * 0.25 * 4.0 +
                 8.0 * (p.rescale_G * p.rescale_G + full * full);
  CHECK(var - bound == doctest::Approx(r.worst_violation).epsilon(1e-12));
}

TEST_CASE("generalized smoothness certificate") {
  CheckReport r = check_generalized_smoothness(make_counterexample_chi2(1.0),
                                               rademacher_dataset(), 500, 0.1);
  INFO(r.witness);
  CHECK(r.passed);

  // Same seed, same report; the checks are reproducible.
  CheckReport again = check_generalized_smoothness(make_counterexample_chi2(1.0),
                                                   rademacher_dataset(), 500, 0.1);
  CHECK(r.worst_violation == again.worst_violation);
  CHECK(r.witness == again.witness);
}

TEST_CASE("cvar limit certificate") {
  CheckReport r = check_cvar_limit(0.5, {1.0, 0.1, 0.01}, {0.0, 1.0});
  INFO(r.witness);
  CHECK(r.passed);

  CheckReport five = check_cvar_limit(0.3, {1.0, 0.3, 0.1, 0.03, 0.01},
                                      {0.0, 0.4, 0.9, 1.5, 2.2});
  INFO(five.witness);
  CHECK(five.passed);
}

TEST_CASE("smoothed cvar constants certificate") {
  CheckReport r = check_smoothed_cvar_constants({0.02, 0.25, 0.5}, 300);
  INFO(r.witness);
  CHECK(r.passed);
}

TEST_CASE("bounded-case certificate") {
  CheckReport r = check_bounded_case(400);
  INFO(r.witness);
  CHECK(r.passed);
}

TEST_CASE("suite registry") {
  CHECK(verification_suite_names().size() == 7);
  CHECK_THROWS_WITH_AS(run_verification_suite("nope"),
                       doctest::Contains("valid names"), ConfigError);
  std::vector<CheckReport> reports = run_verification_suite("variance-bound");
  CHECK(reports.size() == 1);
  CHECK(reports[0].passed);
  // passed is derived from the violation/tolerance pair.
  for (const CheckReport& rep : reports) {
    CHECK(rep.passed == (rep.worst_violation <= rep.tolerance));
  }
}

TEST_CASE("report text serialization") {
  CheckReport r =
      check_variance_bound(make_counterexample_chi2(1.0), rademacher_dataset(), 1.0, 5);
  std::string text = r.text();
  CHECK(text.find("check_name=variance-bound") != std::string::npos);
  CHECK(text.find("passed=true") != std::string::npos);
}
