#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedq/rng.hpp"

namespace fedq {

// Simulated wall-clock accounting: per-client link rates and compute speeds,
// per-round component times, and the synchronous round time
//   T = max_i (t_down_i + t_cp_i + t_cm_i) + t_server.

struct link_profile {
  int client_id = 0;
  double base_rate_mbps = 0.0;
  bool jitter_on = false;
  double jitter_frac = 0.1;  // multiplicative, uniform in +-jitter_frac
};

struct compute_profile {
  int client_id = 0;
  double base_epoch_s = 0.0;  // seconds per local epoch
  bool noise_on = true;
  double noise_sigma = 0.05;  // lognormal, unit mean
};

// Heterogeneous link draw: client 0 pins the fastest rate (max_rate_mbps),
// client n-1 pins the slowest (max/sigma_r), the rest are uniform in
// [max/sigma_r, max]. sigma_r >= 1; n >= 2.
std::vector<link_profile> sample_rates(int n, double sigma_r,
                                       double max_rate_mbps, rng_stream& rng,
                                       bool jitter_on = false,
                                       double jitter_frac = 0.1);

// Per-client compute base drawn once, uniform in [base_min_s, base_max_s].
std::vector<compute_profile> sample_compute(int n, double base_min_s,
                                            double base_max_s, rng_stream& rng,
                                            bool noise_on = true,
                                            double noise_sigma = 0.05);

// Effective rate for a given round (applies jitter via a stream derived from
// (seed, client, round), so queries are order-independent).
double link_rate_mbps(const link_profile& link, std::uint64_t seed, int round);

// bits / (rate_mbps * 1e6) seconds. rate must be positive.
double transmission_time_s(std::uint64_t bits, double rate_mbps);

// epochs * base * lognormal-noise(round). Noise off -> exactly epochs * base.
double compute_time_s(const compute_profile& prof, int epochs,
                      std::uint64_t seed, int round);

struct round_timing {
  std::vector<double> t_down;  // per client, seconds
  std::vector<double> t_cp;
  std::vector<double> t_cm;
  double t_server = 0.0;
};

// T = max_i (t_down + t_cp + t_cm) + t_server.
double round_time_s(const round_timing& t);

// Same round with only uplink times rescaled to a hypothetical bit plan:
// t_cm_i * bits_alt_i / bits_i (nominal widths).
double hypothetical_round_time_s(const round_timing& t,
                                 const std::vector<int>& bits,
                                 const std::vector<int>& bits_alt);

// Replayable trace of the resolved per-client profiles.
std::string profiles_to_json(const std::vector<link_profile>& links,
                             const std::vector<compute_profile>& computes);
void profiles_from_json(const std::string& text,
                        std::vector<link_profile>& links,
                        std::vector<compute_profile>& computes);

}  // namespace fedq
