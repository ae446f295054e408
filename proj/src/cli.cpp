#include "fedq/cli.hpp"

#include <filesystem>
#include <memory>

#include "json.hpp"

#include "fedq/engine.hpp"
#include "fedq/errors.hpp"
#include "fedq/metrics.hpp"
#include "fedq/rng.hpp"
#include "fedq/simnet.hpp"

namespace fedq {

experiment_config load_config(const run_options& opt) {
  if (!std::filesystem::exists(opt.config_path))
    throw config_error("config file not found: " + opt.config_path);
  std::string text = read_text_file(opt.config_path);
  for (const auto& kv : opt.overrides) text = apply_override(text, kv);
  experiment_config cfg = parse_config(text);
  if (opt.seed) cfg.seed = *opt.seed;
  return cfg;
}

dataset load_dataset(const dataset_config& dc, std::uint64_t seed) {
  if (dc.kind == "synthetic") {
    rng_stream rng = rng_stream::derive(seed, rng_domain::synth_data);
    return generate_synthetic(dc.n_samples, dc.input_dim, dc.n_classes,
                              dc.class_sep, rng);
  }
  if (dc.kind == "idx") return load_idx(dc.images_path, dc.labels_path);
  if (dc.kind == "csv")
    return load_csv(dc.csv_path, dc.label_column, dc.csv_has_header);
  throw config_error("unknown dataset kind: " + dc.kind);
}

int cmd_run(const run_options& opt) {
  const experiment_config cfg = load_config(opt);
  dataset d = load_dataset(cfg.dataset, cfg.seed);

  std::unique_ptr<simulation> sim;
  if (!opt.trace_path.empty()) {
    std::vector<link_profile> links;
    std::vector<compute_profile> computes;
    profiles_from_json(read_text_file(opt.trace_path), links, computes);
    sim = std::make_unique<simulation>(cfg, std::move(d), std::move(links),
                                       std::move(computes));
  } else {
    sim = std::make_unique<simulation>(cfg, std::move(d));
  }

  const experiment_result res = sim->run();

  std::filesystem::create_directories(opt.out_dir);
  const std::filesystem::path out(opt.out_dir);
  write_text_file((out / "metrics.csv").string(),
                  metrics_csv(res.rounds, cfg.n_clients));
  write_text_file((out / "summary.json").string(), summary_json(cfg, res));
  write_text_file((out / "config_echo.json").string(), config_to_json(cfg));
  write_text_file((out / "trace.json").string(),
                  profiles_to_json(sim->links(), sim->computes()));
  return res.reached ? 0 : 2;
}

namespace {

struct summary_row {
  std::string dir, strategy;
  double rounds = 0.0, uploaded = 0.0, time_s = 0.0;
};

summary_row read_summary(const std::string& dir) {
  const std::filesystem::path p = std::filesystem::path(dir) / "summary.json";
  if (!std::filesystem::exists(p))
    throw sim_error("missing summary.json in directory: " + dir);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(p.string()));
  } catch (const nlohmann::json::exception& e) {
    throw sim_error("unreadable summary.json in directory: " + dir + ": " +
                    e.what());
  }
  summary_row row;
  row.dir = dir;
  row.strategy = j.at("strategy").get<std::string>();
  row.rounds = j.at("rounds").get<double>();
  row.uploaded = j.at("avg_uploaded_gb_per_client").get<double>();
  row.time_s = j.at("total_time_s").get<double>();
  return row;
}

double ratio(double base, double value) { return base / value; }

}  // namespace

std::string compare_table_csv(const std::vector<std::string>& run_dirs) {
  if (run_dirs.empty()) throw sim_error("compare: no run directories given");
  std::vector<summary_row> rows;
  rows.reserve(run_dirs.size());
  for (const auto& d : run_dirs) rows.push_back(read_summary(d));
  const summary_row& base = rows.front();

  std::string out =
      "dir,strategy,rounds,avg_uploaded_gb_per_client,total_time_s,"
      "rounds_ratio,uploaded_ratio,time_ratio\n";
  for (const auto& r : rows) {
    out += r.dir;
    out += ',';
    out += r.strategy;
    out += ',';
    out += fmt_g(r.rounds);
    out += ',';
    out += fmt_g(r.uploaded);
    out += ',';
    out += fmt_g(r.time_s);
    out += ',';
    out += fmt_g(ratio(base.rounds, r.rounds));
    out += ',';
    out += fmt_g(ratio(base.uploaded, r.uploaded));
    out += ',';
    out += fmt_g(ratio(base.time_s, r.time_s));
    out += '\n';
  }
  return out;
}

int cmd_sweep(const sweep_options& opt) {
  if (opt.strategies.empty() || opt.sigma_ds.empty() || opt.sigma_rs.empty())
    throw config_error("sweep: strategies, sigma_d and sigma_r lists must be non-empty");
  std::filesystem::create_directories(opt.out_dir);

  std::string table =
      "strategy,sigma_d,sigma_r,rounds,reached,final_loss,final_accuracy,"
      "total_time_s,avg_uploaded_gb_per_client,dir\n";
  for (const auto& strat : opt.strategies) {
    strategy_from_name(strat);  // validate before running anything
    for (double sd : opt.sigma_ds) {
      for (double sr : opt.sigma_rs) {
        const std::string name =
            strat + "_sd" + fmt_g(sd) + "_sr" + fmt_g(sr);
        run_options ro;
        ro.config_path = opt.config_path;
        ro.seed = opt.seed;
        ro.out_dir = (std::filesystem::path(opt.out_dir) / name).string();
        ro.overrides = opt.overrides;
        ro.overrides.push_back("strategy=" + strat);
        ro.overrides.push_back("sigma_d=" + fmt_g(sd));
        ro.overrides.push_back("sigma_r=" + fmt_g(sr));
        cmd_run(ro);

        const nlohmann::json s = nlohmann::json::parse(read_text_file(
            (std::filesystem::path(ro.out_dir) / "summary.json").string()));
        table += strat;
        table += ',';
        table += fmt_g(sd);
        table += ',';
        table += fmt_g(sr);
        table += ',';
        table += fmt_g(s.at("rounds").get<double>());
        table += ',';
        table += s.at("reached").get<bool>() ? '1' : '0';
        table += ',';
        table += fmt_g(s.at("final_loss").get<double>());
        table += ',';
        table += fmt_g(s.at("final_accuracy").get<double>());
        table += ',';
        table += fmt_g(s.at("total_time_s").get<double>());
        table += ',';
        table += fmt_g(s.at("avg_uploaded_gb_per_client").get<double>());
        table += ',';
        table += name;
        table += '\n';
      }
    }
  }
  write_text_file(
      (std::filesystem::path(opt.out_dir) / "sweep.csv").string(), table);
  return 0;
}

}  // namespace fedq
