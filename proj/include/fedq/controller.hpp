#pragma once

namespace fedq {

// Online resolution control for the mean quantization level s.
//
// Each round the server compares the realized loss-decrease rate R (at the
// active resolution) against the rate R_aux it would have had at roughly half
// the resolution (estimated from probe losses and a hypothetical round time).
// The sign of the finite difference (R_aux - R)/(s - s_aux) says which way
// faster-progress-per-second lies: positive -> halve s (one fewer bit),
// negative -> double s (one more bit), zero -> hold. A norm term then nudges
// the result by lambda * log2(|g_k| / |g_{k-1}|) so s tracks the shrinking
// gradient magnitude between sign flips.

struct rate_pair {
  double full = 0.0;  // R: realized loss decrease per second
  double aux = 0.0;   // R_aux: estimated rate at the auxiliary resolution
};

struct controller_bounds {
  double levels_min = 1.0;
  double levels_max = 32767.0;  // 15-bit indices; per-client bits cap at 16
};

// R = (loss_prev - loss_mean) / t_round, likewise for the auxiliary pair.
// Both times must be positive.
rate_pair loss_decrease_rates(double loss_prev, double loss_mean,
                              double loss_aux_mean, double t_round,
                              double t_round_aux);

// Sign of (R_aux - R) / (s - s_aux). Requires s > s_aux; returns -1, 0, +1.
int derivative_sign(const rate_pair& rates, double levels, double levels_aux);

// +1 -> s/2, -1 -> 2s, 0 -> s.
double update_mean_levels(double levels, int sign);

// s_hat + lambda * (log2 norm_now - log2 norm_prev), clamped to bounds.
// A nonpositive norm skips the nudge (returns clamped s_hat) and sets
// *skipped if provided.
double calibrate_with_norm(double levels_hat, double norm_now, double norm_prev,
                           double lambda, const controller_bounds& bounds,
                           bool* skipped = nullptr);

// Auxiliary probe resolution: floor(s/2), floored at 1.
int auxiliary_levels(double levels);

// Norm-tracking-only rule (no probe feedback): value + log2(norm_now /
// norm_prev). The caller decides what the drifting value means (the
// norm-tracking baseline drifts its bit width). Nonpositive norms return
// value unchanged.
double norm_only_update(double value, double norm_now, double norm_prev);

}  // namespace fedq
