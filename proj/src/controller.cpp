#include "fedq/controller.hpp"

#include <algorithm>
#include <cmath>

#include "fedq/errors.hpp"

namespace fedq {

rate_pair loss_decrease_rates(double loss_prev, double loss_mean,
                              double loss_aux_mean, double t_round,
                              double t_round_aux) {
  if (!(t_round > 0.0) || !(t_round_aux > 0.0))
    throw sim_error("loss_decrease_rates: round times must be positive");
  return {(loss_prev - loss_mean) / t_round,
          (loss_prev - loss_aux_mean) / t_round_aux};
}

int derivative_sign(const rate_pair& rates, double levels, double levels_aux) {
  if (!(levels > levels_aux))
    throw sim_error("derivative_sign: needs levels > levels_aux");
  // levels - levels_aux > 0, so only the rate difference decides the sign.
  const double diff = rates.aux - rates.full;
  if (diff > 0.0) return 1;
  if (diff < 0.0) return -1;
  return 0;
}

double update_mean_levels(double levels, int sign) {
  if (sign > 0) return levels / 2.0;
  if (sign < 0) return levels * 2.0;
  return levels;
}

double calibrate_with_norm(double levels_hat, double norm_now, double norm_prev,
                           double lambda, const controller_bounds& bounds,
                           bool* skipped) {
  if (skipped) *skipped = false;
  double s = levels_hat;
  if (norm_now > 0.0 && norm_prev > 0.0) {
    s += lambda * (std::log2(norm_now) - std::log2(norm_prev));
  } else if (skipped) {
    *skipped = true;
  }
  return std::clamp(s, bounds.levels_min, bounds.levels_max);
}

int auxiliary_levels(double levels) {
  return std::max(1, static_cast<int>(std::floor(levels / 2.0)));
}

double norm_only_update(double value, double norm_now, double norm_prev) {
  if (!(norm_now > 0.0) || !(norm_prev > 0.0)) return value;
  return value + std::log2(norm_now / norm_prev);
}

}  // namespace fedq
