#include <string>

#include "CLI11.hpp"
#include "drokit/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"dro-kit: penalized distributionally robust optimization toolkit"};
  app.require_subcommand(1);

  std::string run_config;
  CLI::App* run = app.add_subcommand("run", "execute a configured training run");
  run->add_option("config", run_config, "config file path")->required();

  std::string verify_suite = "all";
  std::string verify_out = "verify_reports";
  CLI::App* verify =
      app.add_subcommand("verify", "run certification suites and write reports");
  verify->add_option("suite", verify_suite, "suite name (default: all)");
  verify->add_option("--out", verify_out, "report output directory");

  std::string compare_config;
  CLI::App* compare =
      app.add_subcommand("compare", "grid-tuned optimizer comparison");
  compare->add_option("config", compare_config, "config file path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 3;
  }

  if (run->parsed()) return drokit::cmd_run(run_config);
  if (verify->parsed()) return drokit::cmd_verify(verify_suite, verify_out);
  if (compare->parsed()) return drokit::cmd_compare(compare_config);
  return 3;
}
