#include "fedq/engine.hpp"

#include <algorithm>
#include <cmath>

#include "fedq/errors.hpp"

namespace fedq {

namespace {

double l2_norm(const std::vector<double>& v) {
  double sq = 0.0;
  for (double x : v) sq += x * x;
  return std::sqrt(sq);
}

// Dense float32 wire round trip (full-precision uploads).
std::vector<double> through_f32(const std::vector<double>& v) {
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    out[i] = static_cast<double>(static_cast<float>(v[i]));
  return out;
}

}  // namespace

partition partition_noniid(const dataset& d, int n_clients, double sigma_d,
                           double probe_fraction, rng_stream& rng) {
  if (n_clients < 1) throw sim_error("partition_noniid: need at least 1 client");
  if (!(sigma_d >= 0.0 && sigma_d <= 1.0))
    throw sim_error("partition_noniid: sigma_d must be in [0, 1]");
  if (!(probe_fraction > 0.0 && probe_fraction < 1.0))
    throw sim_error("partition_noniid: probe_fraction must be in (0, 1)");
  if (d.n < n_clients) throw sim_error("partition_noniid: fewer samples than clients");

  const int C = d.n_classes;
  std::vector<std::vector<int>> pools(static_cast<std::size_t>(C));
  for (int i = 0; i < d.n; ++i)
    pools[static_cast<std::size_t>(d.y[static_cast<std::size_t>(i)])].push_back(i);
  for (int c = 0; c < C; ++c) rng.shuffle(pools[static_cast<std::size_t>(c)]);
  std::vector<std::size_t> cursor(static_cast<std::size_t>(C), 0);

  partition out;
  out.train.resize(static_cast<std::size_t>(n_clients));
  out.probe.resize(static_cast<std::size_t>(n_clients));

  const int base_m = d.n / n_clients;
  const int rem_m = d.n % n_clients;
  for (int i = 0; i < n_clients; ++i) {
    const int m = base_m + (i < rem_m ? 1 : 0);
    const int ci = i % C;
    int dom = static_cast<int>(std::lround(sigma_d * m));
    dom = std::min(dom, m);
    // Deterministic per-class counts; remainders rotate so aggregate demand
    // stays balanced across classes.
    std::vector<int> want(static_cast<std::size_t>(C), 0);
    if (dom == 0) {
      const int b = m / C, r = m % C;
      for (int c = 0; c < C; ++c) want[static_cast<std::size_t>(c)] = b;
      for (int t = 0; t < r; ++t) ++want[static_cast<std::size_t>((i + t) % C)];
    } else {
      want[static_cast<std::size_t>(ci)] = dom;
      if (C > 1) {
        const int o = m - dom;
        const int b = o / (C - 1), r = o % (C - 1);
        for (int c = 0; c < C; ++c)
          if (c != ci) want[static_cast<std::size_t>(c)] = b;
        for (int t = 0; t < r; ++t)
          ++want[static_cast<std::size_t>((ci + 1 + t) % C)];
      } else if (dom != m) {
        throw sim_error("partition_noniid: single class cannot host non-dominant mass");
      }
    }
    std::vector<int>& rows = out.train[static_cast<std::size_t>(i)];
    for (int c = 0; c < C; ++c) {
      const std::size_t need = static_cast<std::size_t>(want[static_cast<std::size_t>(c)]);
      std::vector<int>& pool = pools[static_cast<std::size_t>(c)];
      if (cursor[static_cast<std::size_t>(c)] + need > pool.size())
        throw data_error("partition_noniid: class " + std::to_string(c) +
                         " exhausted (needs " +
                         std::to_string(cursor[static_cast<std::size_t>(c)] + need) +
                         ", dataset has " + std::to_string(pool.size()) + ")");
      for (std::size_t t = 0; t < need; ++t)
        rows.push_back(pool[cursor[static_cast<std::size_t>(c)]++]);
    }
    rng.shuffle(rows);
    const int probe_count =
        std::max(1, static_cast<int>(std::lround(probe_fraction * m)));
    if (probe_count >= m)
      throw sim_error("partition_noniid: partition too small for the probe split");
    out.probe[static_cast<std::size_t>(i)] =
        std::vector<int>(rows.begin(), rows.begin() + probe_count);
    rows.erase(rows.begin(), rows.begin() + probe_count);
  }
  return out;
}

std::vector<double> aggregate_decoded(const std::vector<std::vector<double>>& updates,
                                      const std::vector<double>& weights) {
  if (updates.empty()) throw sim_error("aggregate: missing updates");
  if (updates.size() != weights.size())
    throw sim_error("aggregate: client update missing (update/weight count mismatch)");
  double wsum = 0.0;
  for (double w : weights) wsum += w;
  if (std::abs(wsum - 1.0) > 1e-9)
    throw sim_error("aggregate: weights must sum to 1");
  const std::size_t dim = updates[0].size();
  std::vector<double> out(dim, 0.0);
  for (std::size_t i = 0; i < updates.size(); ++i) {
    if (updates[i].size() != dim)
      throw dimension_error("aggregate: update dimension mismatch");
    const double w = weights[i];
    for (std::size_t j = 0; j < dim; ++j) out[j] += w * updates[i][j];
  }
  return out;
}

std::vector<double> aggregate(const std::vector<quantized_gradient>& updates,
                              const std::vector<double>& weights) {
  std::vector<std::vector<double>> decoded;
  decoded.reserve(updates.size());
  for (const auto& q : updates) decoded.push_back(qsgd_decode(q));
  return aggregate_decoded(decoded, weights);
}

simulation::simulation(const experiment_config& cfg, dataset data)
    : cfg_(cfg), data_(std::move(data)) {
  rng_stream rates_rng = rng_stream::derive(cfg_.seed, rng_domain::link_rates);
  links_ = sample_rates(cfg_.n_clients, cfg_.sigma_r, cfg_.network.max_rate_mbps,
                        rates_rng, cfg_.network.jitter_on, cfg_.network.jitter_frac);
  rng_stream comp_rng = rng_stream::derive(cfg_.seed, rng_domain::compute_base);
  computes_ = sample_compute(cfg_.n_clients, cfg_.compute.base_min_s,
                             cfg_.compute.base_max_s, comp_rng,
                             cfg_.compute.noise_on, cfg_.compute.noise_sigma);
  init();
}

simulation::simulation(const experiment_config& cfg, dataset data,
                       std::vector<link_profile> links,
                       std::vector<compute_profile> computes)
    : cfg_(cfg), data_(std::move(data)), links_(std::move(links)),
      computes_(std::move(computes)) {
  if (static_cast<int>(links_.size()) != cfg_.n_clients ||
      static_cast<int>(computes_.size()) != cfg_.n_clients)
    throw config_error("trace profiles disagree with n_clients");
  init();
}

void simulation::init() {
  const int n = cfg_.n_clients;
  rng_stream part_rng = rng_stream::derive(cfg_.seed, rng_domain::partition);
  part_ = partition_noniid(data_, n, cfg_.sigma_d, cfg_.probe_fraction, part_rng);

  std::size_t total_train = 0;
  for (const auto& t : part_.train) total_train += t.size();
  weights_.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    weights_[static_cast<std::size_t>(i)] =
        static_cast<double>(part_.train[static_cast<std::size_t>(i)].size()) /
        static_cast<double>(total_train);

  probe_batches_.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    probe_batches_.push_back(gather(data_, part_.probe[static_cast<std::size_t>(i)]));

  model_spec spec;
  spec.kind = cfg_.resolved_model_kind();
  spec.input_dim = data_.dim;
  spec.n_classes = data_.n_classes;
  spec.hidden = cfg_.model.hidden;
  rng_stream init_rng = rng_stream::derive(cfg_.seed, rng_domain::model_init);
  global_ = init_model(spec, init_rng);
  replicas_.assign(static_cast<std::size_t>(n), global_);
  param_count_ = param_count(spec);

  mean_levels_ = static_cast<double>(levels_for_bits(cfg_.controller.init_bits));
  aux_levels_ = auxiliary_levels(mean_levels_);
  prev_mean_levels_ = mean_levels_;
  prev_aux_levels_ = aux_levels_;
  bits_real_ = static_cast<double>(cfg_.controller.init_bits);

  tcp_hist_.assign(static_cast<std::size_t>(n), {});
  last_tcm_.assign(static_cast<std::size_t>(n), 0.0);
  last_bits_.assign(static_cast<std::size_t>(n), cfg_.controller.init_bits);
  cum_up_bits_.assign(static_cast<std::size_t>(n), 0);
}

std::vector<client_time_stats> simulation::collect_stats() const {
  std::vector<client_time_stats> stats;
  stats.reserve(tcp_hist_.size());
  for (std::size_t i = 0; i < tcp_hist_.size(); ++i)
    stats.push_back(estimate_time_stats(static_cast<int>(i), tcp_hist_[i],
                                        last_tcm_[i], last_bits_[i]));
  return stats;
}

// Decide this round's per-client nominal widths and levels; fills the
// controller fields of tel for the adaptive strategy.
std::vector<int> simulation::plan_for_round(int r, std::vector<int>& levels,
                                            round_telemetry& tel) {
  const int n = cfg_.n_clients;
  std::vector<int> bits(static_cast<std::size_t>(n), cfg_.controller.init_bits);

  switch (cfg_.strategy) {
    case strategy_kind::adaptive: {
      if (r >= 2 && have_lbar_prev_ && have_prev_timing_) {
        const double t_prev = round_time_s(prev_timing_);
        const double t_aux = hypothetical_round_time_s(prev_timing_, prev_bits_up_,
                                                       prev_bits_aux_);
        int sign = 0;
        if (t_prev > 0.0 && t_aux > 0.0 &&
            prev_mean_levels_ > static_cast<double>(prev_aux_levels_)) {
          const rate_pair rates = loss_decrease_rates(
              lbar_prev_, tel.probe_loss_mean, tel.probe_loss_aux_mean, t_prev,
              t_aux);
          sign = derivative_sign(rates, prev_mean_levels_,
                                 static_cast<double>(prev_aux_levels_));
        }
        const double hat = update_mean_levels(prev_mean_levels_, sign);
        controller_bounds bounds{cfg_.controller.levels_min,
                                 cfg_.controller.levels_max};
        bool skipped = false;
        mean_levels_ = calibrate_with_norm(hat, prev_norm_, prev_prev_norm_,
                                           cfg_.controller.lambda, bounds,
                                           &skipped);
        tel.controller_active = true;
        tel.controller_sign = sign;
        tel.calibration_skipped = skipped;
        const auto stats = collect_stats();
        allocation_plan plan = allocate(mean_levels_, stats);
        tel.allocator_fallback = plan.fallback_uniform;
        bits = plan.bits;
        levels = plan.levels;
        aux_levels_ = auxiliary_levels(mean_levels_);
        allocation_plan aux_plan = allocate(static_cast<double>(aux_levels_), stats);
        prev_bits_aux_ = aux_plan.bits;      // becomes round r's aux plan
        prev_levels_aux_ = aux_plan.levels;
      } else {
        // rounds 0-1: uniform initial width, auxiliary one bit lower
        const int b = cfg_.controller.init_bits;
        bits.assign(static_cast<std::size_t>(n), b);
        levels.assign(static_cast<std::size_t>(n), levels_for_bits(b));
        mean_levels_ = static_cast<double>(levels_for_bits(b));
        aux_levels_ = auxiliary_levels(mean_levels_);
        const int ab = std::max(1, b - 1);
        prev_bits_aux_.assign(static_cast<std::size_t>(n), ab);
        prev_levels_aux_.assign(static_cast<std::size_t>(n), levels_for_bits(ab));
      }
      tel.mean_levels = mean_levels_;
      tel.aux_levels = aux_levels_;
      break;
    }
    case strategy_kind::qsgd:
    case strategy_kind::fedpaq: {
      const int b = cfg_.strategy_params.qsgd_bits;
      bits.assign(static_cast<std::size_t>(n), b);
      levels.assign(static_cast<std::size_t>(n), levels_for_bits(b));
      tel.mean_levels = static_cast<double>(levels_for_bits(b));
      break;
    }
    case strategy_kind::norm_tracking: {
      if (r >= 2)
        bits_real_ = std::clamp(
            norm_only_update(bits_real_, prev_norm_, prev_prev_norm_), 1.0, 16.0);
      const int b = std::clamp(static_cast<int>(std::lround(bits_real_)), 1, 16);
      bits.assign(static_cast<std::size_t>(n), b);
      levels.assign(static_cast<std::size_t>(n), levels_for_bits(b));
      tel.mean_levels = static_cast<double>(levels_for_bits(b));
      break;
    }
    case strategy_kind::topk:
    case strategy_kind::fedavg: {
      bits.assign(static_cast<std::size_t>(n), 32);  // float32 values
      levels.assign(static_cast<std::size_t>(n), 0);
      tel.mean_levels = 0.0;
      break;
    }
  }
  return bits;
}

round_telemetry simulation::run_round() {
  const int r = round_;
  const int n = cfg_.n_clients;
  const double lr = lr_at_round(r, cfg_.lr_initial, cfg_.lr_decay);
  const bool quantizing = cfg_.codec == codec_kind::qsgd;

  round_telemetry tel;
  tel.round = r;
  tel.t_down_s.assign(static_cast<std::size_t>(n), 0.0);
  tel.t_cp_s.resize(static_cast<std::size_t>(n));
  tel.t_cm_s.resize(static_cast<std::size_t>(n));
  tel.up_bits.resize(static_cast<std::size_t>(n));

  std::vector<double> rate(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    rate[static_cast<std::size_t>(i)] =
        link_rate_mbps(links_[static_cast<std::size_t>(i)], cfg_.seed, r);

  // 1-2: downlink, probes, replica sync.
  if (r >= 1) {
    for (int i = 0; i < n; ++i) {
      std::uint64_t down_bits;
      if (cfg_.network.downlink_mirror_uplink && quantizing &&
          !prev_levels_up_.empty() && prev_levels_up_[static_cast<std::size_t>(i)] > 0)
        down_bits = encoded_size_bits(static_cast<std::uint32_t>(param_count_),
                                      prev_levels_up_[static_cast<std::size_t>(i)]);
      else
        down_bits = dense_size_bits(static_cast<std::uint32_t>(param_count_));
      tel.t_down_s[static_cast<std::size_t>(i)] =
          transmission_time_s(down_bits, rate[static_cast<std::size_t>(i)]);
    }
    if (cfg_.strategy == strategy_kind::adaptive) {
      double lsum = 0.0, lsum_aux = 0.0;
      for (int i = 0; i < n; ++i) {
        const auto& replica = replicas_[static_cast<std::size_t>(i)];
        std::vector<double> probe_full = prev_g_;
        std::vector<double> probe_aux = prev_g_;
        if (quantizing) {
          rng_stream rng_full = rng_stream::derive(
              cfg_.seed, rng_domain::probe_quant_full,
              static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(r));
          probe_full = qsgd_decode(qsgd_encode(
              prev_g_, prev_levels_up_[static_cast<std::size_t>(i)], rng_full));
          rng_stream rng_aux = rng_stream::derive(
              cfg_.seed, rng_domain::probe_quant_aux,
              static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(r));
          probe_aux = qsgd_decode(qsgd_encode(
              prev_g_, prev_levels_aux_[static_cast<std::size_t>(i)], rng_aux));
        }
        const model w_full = sgd_step(replica, probe_full, prev_lr_);
        const model w_aux = sgd_step(replica, probe_aux, prev_lr_);
        lsum += forward_loss(w_full, probe_batches_[static_cast<std::size_t>(i)]);
        lsum_aux += forward_loss(w_aux, probe_batches_[static_cast<std::size_t>(i)]);
      }
      tel.probe_loss_mean = lsum / n;
      tel.probe_loss_aux_mean = lsum_aux / n;
    }
    for (int i = 0; i < n; ++i)
      replicas_[static_cast<std::size_t>(i)] =
          sgd_step(replicas_[static_cast<std::size_t>(i)], prev_g_, prev_lr_);
  }

  // 3: this round's plan, then local training.
  std::vector<int> levels(static_cast<std::size_t>(n), 0);
  tel.bits = plan_for_round(r, levels, tel);

  const int epochs = cfg_.local_epochs();
  std::vector<std::vector<double>> decoded(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const auto& start = replicas_[static_cast<std::size_t>(i)];
    model m = start;
    std::vector<int> order = part_.train[static_cast<std::size_t>(i)];
    rng_stream shuffle_rng = rng_stream::derive(cfg_.seed, rng_domain::batch_shuffle,
                                                static_cast<std::uint64_t>(i),
                                                static_cast<std::uint64_t>(r));
    for (int e = 0; e < epochs; ++e) {
      shuffle_rng.shuffle(order);
      for (std::size_t off = 0; off < order.size();
           off += static_cast<std::size_t>(cfg_.batch_size)) {
        const std::size_t end =
            std::min(order.size(), off + static_cast<std::size_t>(cfg_.batch_size));
        const std::vector<int> rows(order.begin() + static_cast<std::ptrdiff_t>(off),
                                    order.begin() + static_cast<std::ptrdiff_t>(end));
        const batch b = gather(data_, rows);
        const std::vector<double> g = gradient(m, b);
        m = sgd_step(m, g, lr);
      }
    }
    // Effective gradient: the scaled model displacement, so every strategy
    // shares the aggregation path.
    std::vector<double> g_eff(m.w.size());
    for (std::size_t j = 0; j < m.w.size(); ++j)
      g_eff[j] = (start.w[j] - m.w[j]) / lr;

    tel.t_cp_s[static_cast<std::size_t>(i)] =
        compute_time_s(computes_[static_cast<std::size_t>(i)], epochs, cfg_.seed, r);

    // 4: encode + upload.
    std::uint64_t bits_up = 0;
    if (!quantizing) {
      decoded[static_cast<std::size_t>(i)] = std::move(g_eff);  // identity codec
      bits_up = dense_size_bits(static_cast<std::uint32_t>(param_count_));
    } else {
      switch (cfg_.strategy) {
        case strategy_kind::adaptive:
        case strategy_kind::qsgd:
        case strategy_kind::fedpaq:
        case strategy_kind::norm_tracking: {
          rng_stream up_rng = rng_stream::derive(cfg_.seed, rng_domain::uplink_quant,
                                                 static_cast<std::uint64_t>(i),
                                                 static_cast<std::uint64_t>(r));
          const quantized_gradient q =
              qsgd_encode(g_eff, levels[static_cast<std::size_t>(i)], up_rng);
          decoded[static_cast<std::size_t>(i)] = qsgd_decode(q);
          bits_up = encoded_size_bits(q.dim, q.levels);
          break;
        }
        case strategy_kind::topk: {
          const sparse_gradient s =
              topk_encode(g_eff, cfg_.strategy_params.topk_fraction);
          decoded[static_cast<std::size_t>(i)] = topk_decode(s);
          bits_up = topk_size_bits(s.dim, static_cast<std::uint32_t>(s.idx.size()));
          break;
        }
        case strategy_kind::fedavg: {
          decoded[static_cast<std::size_t>(i)] = through_f32(g_eff);
          bits_up = dense_size_bits(static_cast<std::uint32_t>(param_count_));
          break;
        }
      }
    }
    tel.up_bits[static_cast<std::size_t>(i)] = bits_up;
    tel.t_cm_s[static_cast<std::size_t>(i)] =
        transmission_time_s(bits_up, rate[static_cast<std::size_t>(i)]);
    cum_up_bits_[static_cast<std::size_t>(i)] += bits_up;
  }
  tel.cum_up_bits = cum_up_bits_;

  // 5: aggregate in client-id order, step the global model.
  std::vector<double> g_agg = aggregate_decoded(decoded, weights_);
  const double norm = l2_norm(g_agg);
  global_ = sgd_step(global_, g_agg, lr);
  const eval_result ev = evaluate(global_, data_);
  tel.train_loss = ev.loss;
  tel.accuracy = ev.accuracy;
  tel.agg_norm = norm;

  round_timing timing{tel.t_down_s, tel.t_cp_s, tel.t_cm_s, cfg_.t_server_s};
  tel.sim_time_s = round_time_s(timing);
  cum_time_ += tel.sim_time_s;
  tel.cum_time_s = cum_time_;

  // Bookkeeping for the next round.
  for (int i = 0; i < n; ++i) {
    tcp_hist_[static_cast<std::size_t>(i)].push_back(
        tel.t_cp_s[static_cast<std::size_t>(i)]);
    last_tcm_[static_cast<std::size_t>(i)] = tel.t_cm_s[static_cast<std::size_t>(i)];
    last_bits_[static_cast<std::size_t>(i)] = tel.bits[static_cast<std::size_t>(i)];
  }
  prev_g_ = std::move(g_agg);
  prev_lr_ = lr;
  prev_prev_norm_ = prev_norm_;
  prev_norm_ = norm;
  prev_timing_ = timing;
  have_prev_timing_ = true;
  prev_bits_up_ = tel.bits;
  prev_levels_up_ = levels;
  prev_mean_levels_ = mean_levels_;
  prev_aux_levels_ = aux_levels_;
  if (cfg_.strategy == strategy_kind::adaptive && r >= 1) {
    lbar_prev_ = tel.probe_loss_mean;
    have_lbar_prev_ = true;
  }
  ++round_;
  return tel;
}

experiment_result simulation::run() {
  experiment_result res;
  res.stop_reason = "cap_reached";
  for (int r = 0; r < cfg_.round_cap; ++r) {
    res.rounds.push_back(run_round());
    const round_telemetry& tel = res.rounds.back();
    if (cfg_.target_loss && tel.train_loss <= *cfg_.target_loss) {
      res.reached = true;
      res.stop_reason = "target_loss";
      break;
    }
    if (cfg_.target_accuracy && tel.accuracy >= *cfg_.target_accuracy) {
      res.reached = true;
      res.stop_reason = "target_accuracy";
      break;
    }
  }
  if (!res.rounds.empty()) {
    const round_telemetry& last = res.rounds.back();
    res.final_loss = last.train_loss;
    res.final_accuracy = last.accuracy;
    res.total_time_s = last.cum_time_s;
    for (std::uint64_t b : last.cum_up_bits) res.total_up_bits += b;
  }
  return res;
}

}  // namespace fedq
