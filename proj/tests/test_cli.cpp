#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "drokit/config.hpp"
#include "drokit/experiment.hpp"

using namespace drokit;
namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args) {
  std::string cmd = std::string(DRO_KIT_BIN) + " " + args + " >/dev/null 2>&1";
  int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

fs::path fresh_dir(const char* name) {
  fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string counterexample_config(const fs::path& out_dir) {
  std::ostringstream os;
  os << "problem.loss = counterexample\n"
     << "problem.divergence = chi2\n"
     << "problem.lambda = 1.0\n"
     << "data.generator = rademacher\n"
     << "optimizer.method = normalized_momentum\n"
     << "optimizer.gamma = 0.05\n"
     << "optimizer.beta = 0.9\n"
     << "optimizer.batch = 4\n"
     << "optimizer.iters = 60\n"
     << "optimizer.seed = 3\n"
     << "optimizer.x0 = 3\n"
     << "output.dir = " << out_dir.string() << "\n";
  return os.str();
}

}  // namespace

TEST_CASE("key-value config parsing") {
  KeyValueConfig kv = KeyValueConfig::parse_string(
      "# comment line\n"
      "problem.lambda = 0.5  # trailing comment\n"
      "data.ratios = 0.1, 0.2,0.3\n"
      "output.dir = out\n");
  CHECK(kv.get_double("problem.lambda") == doctest::Approx(0.5));
  CHECK(kv.get_doubles_or("data.ratios", {}).size() == 3);
  CHECK(kv.get("output.dir") == "out");

  CHECK_THROWS_AS(KeyValueConfig::parse_string("no equals sign here"), ConfigError);
  CHECK_THROWS_AS(
      KeyValueConfig::parse_string("a.b = 1\na.b = 2\n"), ConfigError);
  CHECK_THROWS_AS(KeyValueConfig::parse_string("plainkey = 1\n"), ConfigError);
}

TEST_CASE("experiment config rejects unknown keys and bad values") {
  CHECK_THROWS_WITH_AS(
      ExperimentConfig::from_kv(
          KeyValueConfig::parse_string("problem.typo = 1\n")),
      doctest::Contains("unknown config key"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_kv(KeyValueConfig::parse_string(
                      "data.generator = csv\n")),
                  ConfigError);
}

TEST_CASE("cmd_run writes the three artifacts and is seed-reproducible") {
  fs::path dir = fresh_dir("drokit_cli_run");
  fs::path cfg_path = dir / "run.cfg";
  {
    std::ofstream out(cfg_path);
    out << counterexample_config(dir / "out");
  }
  CHECK(run_cli("run " + cfg_path.string()) == 0);
  CHECK(fs::exists(dir / "out" / "trace.csv"));
  CHECK(fs::exists(dir / "out" / "psi_curve.csv"));
  CHECK(fs::exists(dir / "out" / "summary.txt"));

  std::string first = slurp(dir / "out" / "trace.csv");
  std::string first_psi = slurp(dir / "out" / "psi_curve.csv");
  CHECK(run_cli("run " + cfg_path.string()) == 0);
  CHECK(slurp(dir / "out" / "trace.csv") == first);
  CHECK(slurp(dir / "out" / "psi_curve.csv") == first_psi);
  fs::remove_all(dir);
}

TEST_CASE("cmd_run exits 3 when a referenced data file is missing") {
  fs::path dir = fresh_dir("drokit_cli_missing");
  fs::path cfg_path = dir / "run.cfg";
  {
    std::ofstream out(cfg_path);
    out << "problem.loss = logistic\n"
        << "problem.divergence = chi2\n"
        << "data.generator = csv\n"
        << "data.path = " << (dir / "does_not_exist.csv").string() << "\n"
        << "optimizer.method = sgd\n"
        << "output.dir = " << (dir / "out").string() << "\n";
  }
  CHECK(run_cli("run " + cfg_path.string()) == 3);
  CHECK(run_cli("run " + (dir / "no_such_config.cfg").string()) == 3);
  fs::remove_all(dir);
}

TEST_CASE("cmd_run exits 2 on divergence and still writes the partial trace") {
  fs::path dir = fresh_dir("drokit_cli_diverge");
  fs::path cfg_path = dir / "run.cfg";
  {
    std::ofstream out(cfg_path);
    out << "problem.loss = logistic\n"
        << "problem.divergence = chi2\n"
        << "problem.lambda = 0.1\n"
        << "data.generator = imbalanced\n"
        << "data.seed = 3\n"
        << "data.base_n = 30\n"
        << "data.feature_dim = 4\n"
        << "data.ratios = 0.8,0.6\n"
        << "optimizer.method = sgd\n"
        << "optimizer.gamma = 1e8\n"
        << "optimizer.batch = 8\n"
        << "optimizer.iters = 50\n"
        << "optimizer.seed = 2\n"
        << "output.dir = " << (dir / "out").string() << "\n";
  }
  CHECK(run_cli("run " + cfg_path.string()) == 2);
  CHECK(fs::exists(dir / "out" / "trace.csv"));
  CHECK(slurp(dir / "out" / "summary.txt").find("diverged=true") !=
        std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("cmd_verify handles unknown suites and single-suite selection") {
  fs::path dir = fresh_dir("drokit_cli_verify");
  CHECK(run_cli("verify bogus-suite --out " + (dir / "r").string()) == 3);
  CHECK(run_cli("verify variance-bound --out " + (dir / "r").string()) == 0);
  CHECK(fs::exists(dir / "r" / "variance-bound.txt"));
  int reports = 0;
  for (const auto& entry : fs::directory_iterator(dir / "r")) {
    (void)entry;
    ++reports;
  }
  CHECK(reports == 1);  // a named suite emits only its own report
  fs::remove_all(dir);
}

TEST_CASE("cmd_verify all suites on defaults exits 0") {
  fs::path dir = fresh_dir("drokit_cli_verify_all");
  CHECK(run_cli("verify all --out " + (dir / "r").string()) == 0);
  CHECK(fs::exists(dir / "r" / "variance-bound.txt"));
  CHECK(fs::exists(dir / "r" / "bounded-case.txt"));
  CHECK(fs::exists(dir / "r" / "conjugate-oracle_chi2.txt"));
  fs::remove_all(dir);
}

TEST_CASE("compare with a single optimizer produces a degenerate table") {
  fs::path dir = fresh_dir("drokit_cli_compare");
  fs::path cfg_path = dir / "cmp.cfg";
  {
    std::ofstream out(cfg_path);
    out << "problem.loss = counterexample\n"
        << "problem.divergence = chi2\n"
        << "problem.lambda = 1.0\n"
        << "data.generator = rademacher\n"
        << "optimizer.method = normalized_momentum\n"
        << "optimizer.batch = 4\n"
        << "optimizer.iters = 150\n"
        << "optimizer.seed = 5\n"
        << "optimizer.x0 = 3\n"
        << "output.dir = " << (dir / "out").string() << "\n"
        << "compare.optimizers = normalized_momentum\n"
        << "compare.metric = grad_norm\n"
        << "compare.threshold = 0.5\n"
        << "compare.gamma_grid = 0.01,0.05\n";
  }
  CHECK(run_cli("compare " + cfg_path.string()) == 0);
  std::string csv = slurp(dir / "out" / "compare.csv");
  CHECK(csv.find("optimizer,gradient_evaluations_to_threshold,final_psi") !=
        std::string::npos);
  CHECK(csv.find("normalized_momentum") != std::string::npos);
  CHECK(fs::exists(dir / "out" / "trace_normalized_momentum.csv"));
  fs::remove_all(dir);
}

TEST_CASE("unreachable threshold reports the not-reached sentinel") {
  ExperimentConfig cfg;
  cfg.loss_kind = "counterexample";
  cfg.divergence_kind = "chi2";
  cfg.lambda = 1.0;
  cfg.generator = "rademacher";
  cfg.opt.batch_S = 4;
  cfg.opt.iters_T = 5;
  cfg.opt.seed = 1;
  cfg.x0 = {3.0};
  cfg.output_dir = (fs::temp_directory_path() / "drokit_unreachable").string();
  cfg.compare_optimizers = {"sgd"};
  cfg.threshold_metric = "grad_norm";
  cfg.threshold_value = 1e-12;  // five tiny-step iterations cannot reach this
  cfg.gamma_grid = {1e-6};
  std::vector<CompareRow> rows = run_compare(cfg);
  REQUIRE(rows.size() == 1);
  CHECK(!rows[0].evals_to_threshold.has_value());
  std::string csv = slurp(fs::path(cfg.output_dir) / "compare.csv");
  CHECK(csv.find("not-reached") != std::string::npos);
  fs::remove_all(cfg.output_dir);
}
