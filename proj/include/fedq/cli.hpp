#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fedq/config.hpp"
#include "fedq/data.hpp"

namespace fedq {

// Library-level entry points behind the command-line verbs, so the driver
// stays a thin flag parser and tests can call the verbs directly.

struct run_options {
  std::string config_path;
  std::optional<std::uint64_t> seed;  // overrides the config's seed
  std::string out_dir;
  std::vector<std::string> overrides;  // "a.b.c=value", applied in order
  std::string trace_path;  // non-empty: replay link/compute profiles
};

// Read + override + validate the config; the --seed flag wins last.
experiment_config load_config(const run_options& opt);

// Materialize the configured dataset (synthetic generation draws from the
// experiment seed).
dataset load_dataset(const dataset_config& dc, std::uint64_t seed);

// One experiment. Writes metrics.csv, summary.json, config_echo.json and
// trace.json into out_dir. Returns 0 when a target was reached, 2 when the
// round cap stopped the run.
int cmd_run(const run_options& opt);

// Summary table over finished run directories, ratio columns against the
// first one (ratio = first / this run, so a run in half the time reads 2).
// A directory without summary.json is an error naming that directory.
std::string compare_table_csv(const std::vector<std::string>& run_dirs);

struct sweep_options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::vector<std::string> overrides;
  std::vector<std::string> strategies;
  std::vector<double> sigma_ds;
  std::vector<double> sigma_rs;
};

// Cartesian grid strategies x sigma_d x sigma_r; every cell runs into
// out_dir/<strategy>_sd<v>_sr<v>/ and out_dir/sweep.csv collects the
// summaries. Returns 0 once every cell ran (cap_reached cells included).
int cmd_sweep(const sweep_options& opt);

}  // namespace fedq
