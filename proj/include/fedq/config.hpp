#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "fedq/core_ml.hpp"

namespace fedq {

// Upload strategies.
//   adaptive:      stochastic quantization with the online resolution
//                  controller and heterogeneous per-client bit allocation
//   qsgd:          stochastic quantization at a fixed bit width
//   topk:          magnitude sparsification (fraction of coordinates)
//   fedavg:        multi-epoch local training, dense float32 deltas
//   fedpaq:        multi-epoch local training, quantized deltas
//   norm_tracking: fixed-width start, bit width drifts with log2 of the
//                  aggregated gradient norm ratio
enum class strategy_kind { adaptive, qsgd, topk, fedavg, fedpaq, norm_tracking };

const char* strategy_name(strategy_kind k);
strategy_kind strategy_from_name(const std::string& name);

enum class codec_kind { qsgd, identity };

struct dataset_config {
  std::string kind = "synthetic";  // synthetic | idx | csv
  // synthetic
  int n_samples = 20000;
  int input_dim = 32;
  int n_classes = 10;
  double class_sep = 3.0;
  // idx
  std::string images_path;
  std::string labels_path;
  // csv
  std::string csv_path;
  int label_column = 0;
  bool csv_has_header = false;
};

struct model_config {
  std::string kind = "logistic";  // logistic | mlp
  int hidden = 64;
};

struct network_config {
  double max_rate_mbps = 20.0;
  bool jitter_on = false;
  double jitter_frac = 0.1;
  // Price the broadcast at each client's previous uplink resolution instead
  // of dense float32.
  bool downlink_mirror_uplink = false;
};

struct compute_config {
  double base_min_s = 0.5;
  double base_max_s = 1.5;
  bool noise_on = true;
  double noise_sigma = 0.05;
};

struct controller_config {
  int init_bits = 8;        // rounds 0-1 resolution; also fixed-qsgd default
  double lambda = 1.0;      // norm-calibration gain
  double levels_min = 1.0;
  double levels_max = 32767.0;
};

struct strategy_config {
  int qsgd_bits = 8;          // qsgd / fedpaq quantizer width
  double topk_fraction = 0.1;
  int local_epochs = 0;       // 0 = strategy default (1, or 5 for fedavg/fedpaq)
};

struct experiment_config {
  strategy_kind strategy = strategy_kind::adaptive;
  codec_kind codec = codec_kind::qsgd;
  strategy_config strategy_params;

  int n_clients = 20;
  double sigma_d = 0.5;  // dominant-class fraction per client partition
  double sigma_r = 4.0;  // fastest/slowest link rate ratio

  std::uint64_t seed = 1;
  int round_cap = 200;
  std::optional<double> target_loss;
  std::optional<double> target_accuracy;

  int batch_size = 32;
  double lr_initial = 0.01;
  double lr_decay = 0.995;
  double probe_fraction = 0.1;

  dataset_config dataset;
  model_config model;
  network_config network;
  compute_config compute;
  controller_config controller;
  double t_server_s = 0.05;

  int local_epochs() const;  // resolved per strategy
  model_kind resolved_model_kind() const;
};

// Parse + validate a config JSON document. Unknown keys anywhere are errors
// (the message names the key); all range violations name the field.
experiment_config parse_config(const std::string& json_text);

// Apply "a.b.c=value" overrides to the JSON text before parsing (value is
// parsed as JSON when possible, else taken as a string).
std::string apply_override(const std::string& json_text, const std::string& kv);

// Fully-resolved echo (includes every default) plus the code version.
std::string config_to_json(const experiment_config& cfg);

}  // namespace fedq
