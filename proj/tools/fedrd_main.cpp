#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "fedrd/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Heterogeneous federated learning simulator (FedRD, FedAvg, FedProx)"};
  app.require_subcommand(1);

  fedrd::RunOptions run;
  std::optional<std::uint64_t> seed;
  bool serial = false;
  std::string run_config, run_out;
  auto* run_cmd = app.add_subcommand("run", "Run a leave-one-domain-out federation (or a sweep of them)");
  run_cmd->add_option("config", run_config, "JSON experiment config")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("-o,--out", run_out, "Output directory")->required();
  run_cmd->add_option("--seed", seed, "Override federation.seed");
  run_cmd->add_flag("--sweep", run.sweep, "Expand list-valued fields into a cross product of runs");
  run_cmd->add_flag("--serial", serial, "Train clients sequentially instead of in parallel");

  std::string gen_config, gen_out;
  auto* gen_cmd = app.add_subcommand("gen-data", "Write each synthetic domain as domain_<id>.csv");
  gen_cmd->add_option("config", gen_config, "JSON experiment config")->required()->check(CLI::ExistingFile);
  gen_cmd->add_option("-o,--out", gen_out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : fedrd::kExitConfigError;
  }

  if (*run_cmd) {
    run.config_path = run_config;
    run.out_dir = run_out;
    run.seed_override = seed;
    if (serial) run.parallel_override = false;
    return fedrd::cmd_run(run, std::cerr);
  }
  return fedrd::cmd_gen_data(gen_config, gen_out, std::cerr);
}
