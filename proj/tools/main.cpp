#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "fedq/cli.hpp"
#include "fedq/metrics.hpp"
#include "fedq/version.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Federated-learning simulator with adaptive gradient quantization"};
  app.set_version_flag("--version", std::string(fedq::kVersion));
  app.require_subcommand(1);

  fedq::run_options run_opt;
  CLI::App* run = app.add_subcommand("run", "Run one experiment");
  run->add_option("--config", run_opt.config_path, "Config JSON path")->required();
  run->add_option("--seed", run_opt.seed, "Seed override");
  run->add_option("--out", run_opt.out_dir, "Output directory")->required();
  run->add_option("--override", run_opt.overrides,
                  "key.path=value config override (repeatable)");

  fedq::run_options replay_opt;
  CLI::App* replay = app.add_subcommand(
      "replay", "Run one experiment against dumped link/compute profiles");
  replay->add_option("--config", replay_opt.config_path, "Config JSON path")
      ->required();
  replay->add_option("--seed", replay_opt.seed, "Seed override");
  replay->add_option("--out", replay_opt.out_dir, "Output directory")->required();
  replay->add_option("--override", replay_opt.overrides,
                     "key.path=value config override (repeatable)");
  replay->add_option("--trace", replay_opt.trace_path,
                     "trace.json from a previous run")
      ->required();

  std::vector<std::string> compare_dirs;
  std::string compare_out;
  CLI::App* compare =
      app.add_subcommand("compare", "Tabulate finished runs against the first");
  compare->add_option("dirs", compare_dirs, "Run directories")->required();
  compare->add_option("--out", compare_out, "Also write the table to this file");

  fedq::sweep_options sweep_opt;
  CLI::App* sweep = app.add_subcommand(
      "sweep", "Cartesian grid over strategies, sigma_d and sigma_r");
  sweep->add_option("--config", sweep_opt.config_path, "Config JSON path")
      ->required();
  sweep->add_option("--seed", sweep_opt.seed, "Seed override");
  sweep->add_option("--out", sweep_opt.out_dir, "Output directory")->required();
  sweep->add_option("--override", sweep_opt.overrides,
                    "key.path=value config override (repeatable)");
  sweep->add_option("--strategy", sweep_opt.strategies, "Strategy names")
      ->required();
  sweep->add_option("--sigma-d", sweep_opt.sigma_ds, "sigma_d values")->required();
  sweep->add_option("--sigma-r", sweep_opt.sigma_rs, "sigma_r values")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return fedq::cmd_run(run_opt);
    if (replay->parsed()) return fedq::cmd_run(replay_opt);
    if (compare->parsed()) {
      const std::string table = fedq::compare_table_csv(compare_dirs);
      std::fputs(table.c_str(), stdout);
      if (!compare_out.empty()) fedq::write_text_file(compare_out, table);
      return 0;
    }
    if (sweep->parsed()) return fedq::cmd_sweep(sweep_opt);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
