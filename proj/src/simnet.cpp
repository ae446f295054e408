#include "fedq/simnet.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"

#include "fedq/errors.hpp"

namespace fedq {

std::vector<link_profile> sample_rates(int n, double sigma_r,
                                       double max_rate_mbps, rng_stream& rng,
                                       bool jitter_on, double jitter_frac) {
  if (n < 2) throw sim_error("sample_rates: need at least 2 clients");
  if (!(sigma_r >= 1.0)) throw sim_error("sample_rates: sigma_r must be >= 1");
  if (!(max_rate_mbps > 0.0)) throw sim_error("sample_rates: max rate must be positive");
  const double min_rate = max_rate_mbps / sigma_r;
  std::vector<link_profile> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    link_profile& l = out[static_cast<std::size_t>(i)];
    l.client_id = i;
    l.jitter_on = jitter_on;
    l.jitter_frac = jitter_frac;
    if (i == 0)
      l.base_rate_mbps = max_rate_mbps;  // pinned fastest
    else if (i == n - 1)
      l.base_rate_mbps = min_rate;  // pinned slowest
    else
      l.base_rate_mbps = rng.uniform(min_rate, max_rate_mbps);
  }
  return out;
}

std::vector<compute_profile> sample_compute(int n, double base_min_s,
                                            double base_max_s, rng_stream& rng,
                                            bool noise_on, double noise_sigma) {
  if (n < 1) throw sim_error("sample_compute: need at least 1 client");
  if (!(base_min_s > 0.0) || base_max_s < base_min_s)
    throw sim_error("sample_compute: need 0 < base_min_s <= base_max_s");
  std::vector<compute_profile> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    compute_profile& c = out[static_cast<std::size_t>(i)];
    c.client_id = i;
    c.base_epoch_s = rng.uniform(base_min_s, base_max_s);
    c.noise_on = noise_on;
    c.noise_sigma = noise_sigma;
  }
  return out;
}

double link_rate_mbps(const link_profile& link, std::uint64_t seed, int round) {
  double rate = link.base_rate_mbps;
  if (link.jitter_on) {
    rng_stream s = rng_stream::derive(seed, rng_domain::link_jitter,
                                      static_cast<std::uint64_t>(link.client_id),
                                      static_cast<std::uint64_t>(round));
    rate *= 1.0 + link.jitter_frac * s.uniform(-1.0, 1.0);
  }
  if (!(rate > 0.0)) throw sim_error("link_rate_mbps: nonpositive effective rate");
  return rate;
}

double transmission_time_s(std::uint64_t bits, double rate_mbps) {
  if (!(rate_mbps > 0.0)) throw sim_error("transmission_time_s: rate must be positive");
  return static_cast<double>(bits) / (rate_mbps * 1e6);
}

double compute_time_s(const compute_profile& prof, int epochs,
                      std::uint64_t seed, int round) {
  if (epochs < 1) throw sim_error("compute_time_s: epochs must be >= 1");
  if (!(prof.base_epoch_s > 0.0))
    throw sim_error("compute_time_s: base epoch time must be positive");
  double t = static_cast<double>(epochs) * prof.base_epoch_s;
  if (prof.noise_on) {
    rng_stream s = rng_stream::derive(seed, rng_domain::compute_noise,
                                      static_cast<std::uint64_t>(prof.client_id),
                                      static_cast<std::uint64_t>(round));
    t *= s.lognormal_unit_mean(prof.noise_sigma);
  }
  return t;
}

double round_time_s(const round_timing& t) {
  const std::size_t n = t.t_cp.size();
  if (n == 0 || t.t_down.size() != n || t.t_cm.size() != n)
    throw dimension_error("round_time_s: component vectors disagree on client count");
  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double local = t.t_down[i] + t.t_cp[i] + t.t_cm[i];
    if (!(local >= 0.0)) throw sim_error("round_time_s: negative component time");
    worst = std::max(worst, local);
  }
  return worst + t.t_server;
}

double hypothetical_round_time_s(const round_timing& t,
                                 const std::vector<int>& bits,
                                 const std::vector<int>& bits_alt) {
  const std::size_t n = t.t_cp.size();
  if (bits.size() != n || bits_alt.size() != n)
    throw dimension_error("hypothetical_round_time_s: bit plans disagree on client count");
  round_timing alt = t;
  for (std::size_t i = 0; i < n; ++i) {
    if (bits[i] < 1 || bits_alt[i] < 1)
      throw sim_error("hypothetical_round_time_s: bits must be >= 1");
    alt.t_cm[i] = t.t_cm[i] * static_cast<double>(bits_alt[i]) /
                  static_cast<double>(bits[i]);
  }
  return round_time_s(alt);
}

std::string profiles_to_json(const std::vector<link_profile>& links,
                             const std::vector<compute_profile>& computes) {
  if (links.size() != computes.size())
    throw dimension_error("profiles_to_json: profile lists disagree on client count");
  nlohmann::json j;
  j["schema"] = "fedq-trace-v1";
  j["clients"] = nlohmann::json::array();
  for (std::size_t i = 0; i < links.size(); ++i) {
    nlohmann::json c;
    c["id"] = links[i].client_id;
    c["rate_mbps"] = links[i].base_rate_mbps;
    c["jitter_on"] = links[i].jitter_on;
    c["jitter_frac"] = links[i].jitter_frac;
    c["compute_base_s"] = computes[i].base_epoch_s;
    c["noise_on"] = computes[i].noise_on;
    c["noise_sigma"] = computes[i].noise_sigma;
    j["clients"].push_back(c);
  }
  return j.dump(2) + "\n";
}

void profiles_from_json(const std::string& text,
                        std::vector<link_profile>& links,
                        std::vector<compute_profile>& computes) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    throw data_error(std::string("trace parse failure: ") + e.what());
  }
  if (!j.contains("schema") || j["schema"] != "fedq-trace-v1")
    throw data_error("trace: missing or unknown schema tag");
  if (!j.contains("clients") || !j["clients"].is_array() || j["clients"].empty())
    throw data_error("trace: missing clients array");
  links.clear();
  computes.clear();
  for (const auto& c : j["clients"]) {
    link_profile l;
    compute_profile p;
    try {
      l.client_id = c.at("id").get<int>();
      l.base_rate_mbps = c.at("rate_mbps").get<double>();
      l.jitter_on = c.at("jitter_on").get<bool>();
      l.jitter_frac = c.at("jitter_frac").get<double>();
      p.client_id = l.client_id;
      p.base_epoch_s = c.at("compute_base_s").get<double>();
      p.noise_on = c.at("noise_on").get<bool>();
      p.noise_sigma = c.at("noise_sigma").get<double>();
    } catch (const std::exception& e) {
      throw data_error(std::string("trace: bad client entry: ") + e.what());
    }
    if (!(l.base_rate_mbps > 0.0) || !(p.base_epoch_s > 0.0))
      throw data_error("trace: rates and compute bases must be positive");
    links.push_back(l);
    computes.push_back(p);
  }
  for (std::size_t i = 0; i < links.size(); ++i)
    if (links[i].client_id != static_cast<int>(i))
      throw data_error("trace: client ids must be 0..n-1 in order");
}

}  // namespace fedq
