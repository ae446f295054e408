#pragma once

#include <vector>

namespace fedq {

// Heterogeneous per-client bit allocation.
//
// Model: a client's expected round time is E(t) = mean_compute + bits *
// trans_coeff, where trans_coeff ~ t_cm / b estimates seconds per payload
// bit-width unit from the last observed upload. Picking an anchor client i
// at B bits, every other client j gets the (continuous) bits that equalize
// expected times:
//   bits_j = (mean_cp_i - mean_cp_j + B * coeff_i) / coeff_j
// allocate() searches all (anchor, B) pairs exhaustively, rounds to integer
// bits in [bits_min, bits_max], maps bits to levels = 2^bits - 1, and keeps
// the plan whose mean levels is closest to the requested target (ties: fewer
// total bits, then lower anchor id, then lower anchor bits). Plans whose
// predicted max/min time ratio exceeds the closest uniform plan's are
// discarded (rounding and clamping can unbalance an equalized plan); if
// nothing survives, that uniform plan is emitted.

struct client_time_stats {
  int client_id = 0;
  double mean_compute_s = 0.0;        // mean of observed per-round t_cp
  double trans_coeff_s_per_bit = 0.0; // last t_cm / last bits
};

// Aggregate observed history into stats. tcp_history must be non-empty,
// last_bits >= 1, last_tcm >= 0.
client_time_stats estimate_time_stats(int client_id,
                                      const std::vector<double>& tcp_history,
                                      double last_tcm_s, int last_bits);

// Continuous equalizing bits for `other` given the anchor at anchor_bits.
// Results <= 0 clamp to 1 (sets *clamped if provided).
double relative_bits(const client_time_stats& anchor, int anchor_bits,
                     const client_time_stats& other, bool* clamped = nullptr);

struct allocation_plan {
  std::vector<int> bits;    // per client, aligned with the stats order
  std::vector<int> levels;  // 2^bits - 1 per client
  double mean_levels = 0.0;
  int anchor_id = -1;       // -1 on a uniform plan
  int anchor_bits = 0;
  bool fallback_uniform = false;  // degenerate stats, or no plan beat uniform
};

// Exhaustive anchor search as described above. Degenerate stats (nonpositive
// or non-finite coefficients / negative compute means) fall back to uniform
// bits = round(log2(target_mean_levels)) + 1, clamped to the bit range.
allocation_plan allocate(double target_mean_levels,
                         const std::vector<client_time_stats>& stats,
                         int bits_min = 1, int bits_max = 16);

// Model-predicted expected local round time under the stats (no downlink
// term: it is allocation-invariant here).
double predicted_time_s(const client_time_stats& s, int bits);

}  // namespace fedq
