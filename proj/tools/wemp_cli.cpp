// Command-line front end.
//   wemp run <config> [--assert] [--workers N] [--out DIR]
//   wemp soe-table <alpha> <tau_f> <epsilon>
// Exit codes: 0 ok, 1 configuration error, 2 acceptance breach, 3 numerical failure.
#include <CLI11.hpp>
#include <iostream>

#include "oracles.hpp"
#include "wemp/errors.hpp"
#include "wemp/experiment.hpp"
#include "wemp/soe.hpp"

namespace {

enum ExitCode : int { ok = 0, config_error = 1, breach = 2, numerical = 3 };

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Time-fractional diffusion with multiscale parareal"};
  app.require_subcommand(1);

  std::string config_path;
  bool assert_thresholds = false;
  int workers = 0;
  std::string out_dir;
  auto* run = app.add_subcommand("run", "Run the experiment described by a config file");
  run->add_option("config", config_path, "Config file")->required();
  run->add_flag("--assert", assert_thresholds, "Exit with code 2 when a result misses its threshold");
  run->add_option("--workers", workers, "Worker threads (overrides the config)")->check(CLI::PositiveNumber);
  run->add_option("--out", out_dir, "Output directory (overrides the config)");

  double alpha = 0.0;
  double tau_f = 0.0;
  double epsilon = 0.0;
  auto* table = app.add_subcommand("soe-table", "Print the sum-of-exponentials terms as CSV");
  table->add_option("alpha", alpha)->required();
  table->add_option("tau_f", tau_f)->required();
  table->add_option("epsilon", epsilon)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? ok : config_error;
  }

  try {
    if (*table) {
      wemp::write_soe_csv(std::cout, wemp::build_soe(alpha, tau_f, epsilon));
      return ok;
    }
    const wemp::ExperimentConfig config = wemp::load_config(config_path);
    wemp::RunOptions options;
    options.assert_thresholds = assert_thresholds;
    if (workers > 0) options.workers = workers;
    if (!out_dir.empty()) options.output = out_dir;
    options.oracles = [](std::ostream& report) { return wemp::oracles::run_all(report); };
    wemp::run_experiment(config, options, std::cout);
    return ok;
  } catch (const wemp::AcceptanceBreach& e) {
    std::cerr << "acceptance breach: " << e.what() << '\n';
    return breach;
  } catch (const wemp::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return config_error;
  } catch (const wemp::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return numerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return numerical;
  }
}
