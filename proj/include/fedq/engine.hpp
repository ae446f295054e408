#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fedq/allocator.hpp"
#include "fedq/codec.hpp"
#include "fedq/config.hpp"
#include "fedq/controller.hpp"
#include "fedq/core_ml.hpp"
#include "fedq/data.hpp"
#include "fedq/simnet.hpp"

namespace fedq {

// Synchronous federated rounds over simulated clients.
//
// Round r (server clock):
//   1. broadcast last round's aggregate g_{r-1} (downlink time t_down)
//   2. clients probe g_{r-1} at last round's active and auxiliary
//      resolutions on their local probe split (adaptive strategy only)
//   3. server picks this round's resolution/bit plan from round-(r-1)
//      feedback; clients run local epochs from their synced replica
//   4. clients upload encoded effective gradients (t_cp, t_cm)
//   5. server aggregates in client-id order, steps the global model,
//      derives the next auxiliary plan
// Rounds 0 and 1 run at the uniform initial width (no feedback yet); the
// controller first acts in round 2. Round 0 broadcasts nothing (t_down = 0).

// Equal-share non-iid split: client i's dominant class is i mod n_classes
// holding round(sigma_d * m) samples; the rest spreads uniformly over the
// other classes (sigma_d = 0 means uniform over all classes). Class counts
// are deterministic; the RNG only shuffles which samples fill them. Each
// client then reserves probe_fraction of its samples as a local probe split.
struct partition {
  std::vector<std::vector<int>> train;  // per client row indices
  std::vector<std::vector<int>> probe;
};

partition partition_noniid(const dataset& d, int n_clients, double sigma_d,
                           double probe_fraction, rng_stream& rng);

// Weighted sum of decoded updates, summed in client-id order. weights must
// sum to 1 (1e-9 tolerance) and every update must share one dimension.
std::vector<double> aggregate_decoded(const std::vector<std::vector<double>>& updates,
                                      const std::vector<double>& weights);
std::vector<double> aggregate(const std::vector<quantized_gradient>& updates,
                              const std::vector<double>& weights);

struct round_telemetry {
  int round = 0;
  double sim_time_s = 0.0;   // this round's simulated duration
  double cum_time_s = 0.0;
  double train_loss = 0.0;   // global model, full dataset, after this round
  double accuracy = 0.0;
  double mean_levels = 0.0;  // controller target (adaptive) or active levels
  int aux_levels = 0;        // next auxiliary resolution (adaptive only)
  int controller_sign = 0;   // -1/0/+1; 0 when the controller did not run
  bool controller_active = false;
  bool calibration_skipped = false;
  bool allocator_fallback = false;
  double agg_norm = 0.0;     // l2 of the aggregated gradient
  double probe_loss_mean = 0.0;      // adaptive only
  double probe_loss_aux_mean = 0.0;  // adaptive only
  std::vector<int> bits;             // per client nominal upload width
  std::vector<double> t_down_s;
  std::vector<double> t_cp_s;
  std::vector<double> t_cm_s;
  std::vector<std::uint64_t> up_bits;
  std::vector<std::uint64_t> cum_up_bits;
};

struct experiment_result {
  std::vector<round_telemetry> rounds;
  bool reached = false;             // a target was hit before the cap
  std::string stop_reason;          // target_loss | target_accuracy | cap_reached
  double final_loss = 0.0;
  double final_accuracy = 0.0;
  double total_time_s = 0.0;
  std::uint64_t total_up_bits = 0;
};

class simulation {
 public:
  // The dataset is supplied by the caller (loaded/generated per config).
  // Profiles are sampled from the config seed unless explicit profiles are
  // given (trace replay).
  simulation(const experiment_config& cfg, dataset data);
  simulation(const experiment_config& cfg, dataset data,
             std::vector<link_profile> links,
             std::vector<compute_profile> computes);

  round_telemetry run_round();
  experiment_result run();

  const model& global_model() const { return global_; }
  const partition& parts() const { return part_; }
  const std::vector<link_profile>& links() const { return links_; }
  const std::vector<compute_profile>& computes() const { return computes_; }
  int rounds_run() const { return round_; }

 private:
  void init();
  std::vector<int> plan_for_round(int r, std::vector<int>& levels,
                                  round_telemetry& tel);
  std::vector<client_time_stats> collect_stats() const;

  experiment_config cfg_;
  dataset data_;
  partition part_;
  std::vector<double> weights_;  // aggregation weights p_i
  std::vector<batch> probe_batches_;
  model global_;
  std::vector<model> replicas_;
  std::vector<link_profile> links_;
  std::vector<compute_profile> computes_;
  int param_count_ = 0;
  int round_ = 0;

  // broadcast state: last round's aggregate and the lr it was computed at
  std::vector<double> prev_g_;
  double prev_lr_ = 0.0;
  double prev_norm_ = 0.0;       // |g_{r-1}|
  double prev_prev_norm_ = 0.0;  // |g_{r-2}|

  // adaptive controller state (levels of the previous round and the pending
  // current value)
  double mean_levels_ = 0.0;
  int aux_levels_ = 1;
  double prev_mean_levels_ = 0.0;
  int prev_aux_levels_ = 1;
  std::vector<int> prev_bits_up_, prev_bits_aux_;
  std::vector<int> prev_levels_up_, prev_levels_aux_;
  double lbar_prev_ = 0.0;  // probe estimate of L at end of round r-2
  bool have_lbar_prev_ = false;
  round_timing prev_timing_;
  bool have_prev_timing_ = false;

  // norm-tracking baseline state (drifting bit width)
  double bits_real_ = 8.0;

  // allocator inputs
  std::vector<std::vector<double>> tcp_hist_;
  std::vector<double> last_tcm_;
  std::vector<int> last_bits_;

  std::vector<std::uint64_t> cum_up_bits_;
  double cum_time_ = 0.0;
};

}  // namespace fedq
