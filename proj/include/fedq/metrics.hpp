#pragma once

#include <string>
#include <vector>

#include "fedq/config.hpp"
#include "fedq/engine.hpp"

namespace fedq {

// Frozen per-round CSV schema (see README): scalar columns first, then one
// column group per field across clients. Doubles print as %.12g, booleans as
// 0/1, so equal runs produce byte-identical files.
inline constexpr const char* kMetricsSchema = "fedq-metrics-v1";

// %.12g, the one formatting used in every CSV cell holding a real.
std::string fmt_g(double x);

std::string metrics_csv_header(int n_clients);
std::string metrics_csv_row(const round_telemetry& tel);
std::string metrics_csv(const std::vector<round_telemetry>& rounds,
                        int n_clients);

// rounds, per-client average upload, total simulated seconds, stop status.
std::string summary_json(const experiment_config& cfg,
                         const experiment_result& res);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace fedq
