#include "fedq/allocator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fedq/codec.hpp"
#include "fedq/errors.hpp"

namespace fedq {

client_time_stats estimate_time_stats(int client_id,
                                      const std::vector<double>& tcp_history,
                                      double last_tcm_s, int last_bits) {
  if (tcp_history.empty())
    throw sim_error("estimate_time_stats: empty compute history");
  if (last_bits < 1) throw sim_error("estimate_time_stats: last_bits must be >= 1");
  if (last_tcm_s < 0.0) throw sim_error("estimate_time_stats: negative t_cm");
  double sum = 0.0;
  for (double t : tcp_history) {
    if (t < 0.0) throw sim_error("estimate_time_stats: negative t_cp");
    sum += t;
  }
  client_time_stats s;
  s.client_id = client_id;
  s.mean_compute_s = sum / static_cast<double>(tcp_history.size());
  s.trans_coeff_s_per_bit = last_tcm_s / static_cast<double>(last_bits);
  return s;
}

double relative_bits(const client_time_stats& anchor, int anchor_bits,
                     const client_time_stats& other, bool* clamped) {
  if (clamped) *clamped = false;
  if (!(other.trans_coeff_s_per_bit > 0.0))
    throw sim_error("relative_bits: nonpositive transmission coefficient");
  const double b =
      (anchor.mean_compute_s - other.mean_compute_s +
       anchor_bits * anchor.trans_coeff_s_per_bit) /
      other.trans_coeff_s_per_bit;
  if (b <= 0.0) {
    if (clamped) *clamped = true;
    return 1.0;
  }
  return b;
}

double predicted_time_s(const client_time_stats& s, int bits) {
  return s.mean_compute_s + bits * s.trans_coeff_s_per_bit;
}

namespace {

bool degenerate(const client_time_stats& s) {
  return !(s.trans_coeff_s_per_bit > 0.0) ||
         !std::isfinite(s.trans_coeff_s_per_bit) ||
         !(s.mean_compute_s >= 0.0) || !std::isfinite(s.mean_compute_s);
}

// max/min predicted local time across clients under a uniform bit width.
double uniform_time_ratio(const std::vector<client_time_stats>& stats, int bits) {
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (const auto& s : stats) {
    const double t = predicted_time_s(s, bits);
    lo = std::min(lo, t);
    hi = std::max(hi, t);
  }
  return hi / lo;
}

}  // namespace

allocation_plan allocate(double target_mean_levels,
                         const std::vector<client_time_stats>& stats,
                         int bits_min, int bits_max) {
  if (stats.empty()) throw sim_error("allocate: no clients");
  if (!(target_mean_levels >= 1.0) || !std::isfinite(target_mean_levels))
    throw sim_error("allocate: target mean levels must be >= 1");
  if (bits_min < 1 || bits_max > 16 || bits_min > bits_max)
    throw sim_error("allocate: bit range must satisfy 1 <= min <= max <= 16");

  const int n = static_cast<int>(stats.size());
  const bool any_degenerate = std::any_of(stats.begin(), stats.end(), degenerate);

  allocation_plan best;
  if (!any_degenerate) {
    // Balance guard: the closest uniform plan (by mean level; ties take the
    // lower width) benchmarks the max/min predicted-time ratio. Integer
    // rounding and clamping can leave an equalized plan balancing worse than
    // uniform bits would; such plans are discarded, and when nothing
    // survives the benchmark plan itself is emitted.
    int bench_bits = bits_min;
    double bench_gap = std::numeric_limits<double>::infinity();
    for (int b = bits_min; b <= bits_max; ++b) {
      const double gap =
          std::abs(static_cast<double>(levels_for_bits(b)) - target_mean_levels);
      if (gap < bench_gap) {
        bench_gap = gap;
        bench_bits = b;
      }
    }
    const double bench_ratio = uniform_time_ratio(stats, bench_bits);

    bool found = false;
    double best_gap = std::numeric_limits<double>::infinity();
    long best_total = std::numeric_limits<long>::max();
    std::vector<int> bits(static_cast<std::size_t>(n));
    for (int a = 0; a < n; ++a) {
      for (int B = bits_min; B <= bits_max; ++B) {
        long total = 0;
        double level_sum = 0.0;
        double t_lo = std::numeric_limits<double>::infinity(), t_hi = 0.0;
        for (int j = 0; j < n; ++j) {
          int bj;
          if (j == a) {
            bj = B;
          } else {
            const double raw = relative_bits(stats[a], B, stats[j]);
            bj = static_cast<int>(std::lround(raw));
            bj = std::clamp(bj, bits_min, bits_max);
          }
          bits[static_cast<std::size_t>(j)] = bj;
          total += bj;
          level_sum += static_cast<double>(levels_for_bits(bj));
          const double t = predicted_time_s(stats[static_cast<std::size_t>(j)], bj);
          t_lo = std::min(t_lo, t);
          t_hi = std::max(t_hi, t);
        }
        if (t_hi / t_lo > bench_ratio * (1.0 + 1e-12)) continue;
        const double gap = std::abs(level_sum / n - target_mean_levels);
        // Lexicographic: closest mean, then fewest total bits, then lowest
        // anchor position, then lowest anchor bits (implicit in scan order).
        if (gap < best_gap || (gap == best_gap && total < best_total)) {
          found = true;
          best_gap = gap;
          best_total = total;
          best.bits = bits;
          best.anchor_id = stats[static_cast<std::size_t>(a)].client_id;
          best.anchor_bits = B;
          best.mean_levels = level_sum / n;
        }
      }
    }
    if (found) {
      best.fallback_uniform = false;
    } else {
      best.bits.assign(static_cast<std::size_t>(n), bench_bits);
      best.anchor_id = -1;
      best.anchor_bits = bench_bits;
      best.mean_levels = static_cast<double>(levels_for_bits(bench_bits));
      best.fallback_uniform = true;
    }
  } else {
    const int b = std::clamp(
        static_cast<int>(std::lround(std::log2(target_mean_levels))) + 1,
        bits_min, bits_max);
    best.bits.assign(static_cast<std::size_t>(n), b);
    best.anchor_id = -1;
    best.anchor_bits = b;
    best.mean_levels = static_cast<double>(levels_for_bits(b));
    best.fallback_uniform = true;
  }
  best.levels.resize(best.bits.size());
  for (std::size_t i = 0; i < best.bits.size(); ++i)
    best.levels[i] = levels_for_bits(best.bits[i]);
  return best;
}

}  // namespace fedq
