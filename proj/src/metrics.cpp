#include "fedq/metrics.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "fedq/errors.hpp"
#include "fedq/version.hpp"

namespace fedq {

std::string fmt_g(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", x);
  return buf;
}

namespace {

void append_group(std::string& out, const char* stem, int n) {
  for (int i = 0; i < n; ++i) {
    out += ',';
    out += stem;
    out += std::to_string(i);
  }
}

}  // namespace

std::string metrics_csv_header(int n_clients) {
  std::string h =
      "round,sim_time_s,cum_time_s,train_loss,accuracy,mean_levels,aux_levels,"
      "controller_sign,controller_active,calibration_skipped,allocator_fallback,"
      "agg_norm,probe_loss_mean,probe_loss_aux_mean";
  append_group(h, "bits_", n_clients);
  append_group(h, "t_down_s_", n_clients);
  append_group(h, "t_cp_s_", n_clients);
  append_group(h, "t_cm_s_", n_clients);
  append_group(h, "up_bits_", n_clients);
  append_group(h, "cum_up_bytes_", n_clients);
  return h;
}

std::string metrics_csv_row(const round_telemetry& tel) {
  std::string r;
  r += std::to_string(tel.round);
  r += ',';
  r += fmt_g(tel.sim_time_s);
  r += ',';
  r += fmt_g(tel.cum_time_s);
  r += ',';
  r += fmt_g(tel.train_loss);
  r += ',';
  r += fmt_g(tel.accuracy);
  r += ',';
  r += fmt_g(tel.mean_levels);
  r += ',';
  r += std::to_string(tel.aux_levels);
  r += ',';
  r += std::to_string(tel.controller_sign);
  r += ',';
  r += tel.controller_active ? '1' : '0';
  r += ',';
  r += tel.calibration_skipped ? '1' : '0';
  r += ',';
  r += tel.allocator_fallback ? '1' : '0';
  r += ',';
  r += fmt_g(tel.agg_norm);
  r += ',';
  r += fmt_g(tel.probe_loss_mean);
  r += ',';
  r += fmt_g(tel.probe_loss_aux_mean);
  for (int b : tel.bits) {
    r += ',';
    r += std::to_string(b);
  }
  for (double t : tel.t_down_s) {
    r += ',';
    r += fmt_g(t);
  }
  for (double t : tel.t_cp_s) {
    r += ',';
    r += fmt_g(t);
  }
  for (double t : tel.t_cm_s) {
    r += ',';
    r += fmt_g(t);
  }
  for (std::uint64_t b : tel.up_bits) {
    r += ',';
    r += std::to_string(b);
  }
  for (std::uint64_t b : tel.cum_up_bits) {
    r += ',';
    r += fmt_g(static_cast<double>(b) / 8.0);
  }
  return r;
}

std::string metrics_csv(const std::vector<round_telemetry>& rounds,
                        int n_clients) {
  std::string out = metrics_csv_header(n_clients);
  out += '\n';
  for (const auto& tel : rounds) {
    out += metrics_csv_row(tel);
    out += '\n';
  }
  return out;
}

std::string summary_json(const experiment_config& cfg,
                         const experiment_result& res) {
  const double total_gb = static_cast<double>(res.total_up_bits) / 8.0 / 1e9;
  nlohmann::json j;
  j["version"] = kVersion;
  j["metrics_schema"] = kMetricsSchema;
  j["strategy"] = strategy_name(cfg.strategy);
  j["seed"] = cfg.seed;
  j["rounds"] = res.rounds.size();
  j["reached"] = res.reached;
  j["cap_reached"] = !res.reached;
  j["stop_reason"] = res.stop_reason;
  j["final_loss"] = res.final_loss;
  j["final_accuracy"] = res.final_accuracy;
  j["total_time_s"] = res.total_time_s;
  j["total_uploaded_gb"] = total_gb;
  j["avg_uploaded_gb_per_client"] = total_gb / cfg.n_clients;
  return j.dump(2) + "\n";
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw sim_error("cannot open for writing: " + path);
  f << content;
  if (!f) throw sim_error("write failed: " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw sim_error("cannot open: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace fedq
