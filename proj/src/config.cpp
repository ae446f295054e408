#include "fedq/config.hpp"

#include <cmath>
#include <set>

#include "json.hpp"

#include "fedq/errors.hpp"
#include "fedq/version.hpp"

namespace fedq {

using nlohmann::json;

const char* strategy_name(strategy_kind k) {
  switch (k) {
    case strategy_kind::adaptive: return "adaptive";
    case strategy_kind::qsgd: return "qsgd";
    case strategy_kind::topk: return "topk";
    case strategy_kind::fedavg: return "fedavg";
    case strategy_kind::fedpaq: return "fedpaq";
    case strategy_kind::norm_tracking: return "norm_tracking";
  }
  throw config_error("unreachable strategy kind");
}

strategy_kind strategy_from_name(const std::string& name) {
  if (name == "adaptive") return strategy_kind::adaptive;
  if (name == "qsgd") return strategy_kind::qsgd;
  if (name == "topk") return strategy_kind::topk;
  if (name == "fedavg") return strategy_kind::fedavg;
  if (name == "fedpaq") return strategy_kind::fedpaq;
  if (name == "norm_tracking") return strategy_kind::norm_tracking;
  throw config_error("unknown strategy '" + name +
                     "' (expected adaptive|qsgd|topk|fedavg|fedpaq|norm_tracking)");
}

int experiment_config::local_epochs() const {
  if (strategy_params.local_epochs > 0) return strategy_params.local_epochs;
  switch (strategy) {
    case strategy_kind::fedavg:
    case strategy_kind::fedpaq:
      return 5;
    default:
      return 1;
  }
}

model_kind experiment_config::resolved_model_kind() const {
  return model.kind == "mlp" ? model_kind::mlp : model_kind::logistic;
}

namespace {

// Every object consumed through this helper rejects unrecognized keys so
// config typos fail loudly.
class strict_object {
 public:
  strict_object(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object())
      throw config_error(path_ + ": expected an object");
  }
  ~strict_object() = default;

  template <typename T>
  void opt(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const std::exception&) {
      throw config_error(path_ + "." + key + ": wrong type");
    }
  }

  template <typename T>
  void opt_nullable(const char* key, std::optional<T>& out) {
    seen_.insert(key);
    if (!j_.contains(key) || j_.at(key).is_null()) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const std::exception&) {
      throw config_error(path_ + "." + key + ": wrong type");
    }
  }

  bool has(const char* key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  const json& child(const char* key) {
    seen_.insert(key);
    return j_.at(key);
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key()))
        throw config_error(path_ + ": unknown key '" + it.key() + "'");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void require(bool ok, const std::string& msg) {
  if (!ok) throw config_error(msg);
}

}  // namespace

experiment_config parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const std::exception& e) {
    throw config_error(std::string("config parse failure: ") + e.what());
  }
  experiment_config c;
  strict_object root(j, "config");

  std::string strategy = strategy_name(c.strategy);
  root.opt("strategy", strategy);
  c.strategy = strategy_from_name(strategy);

  std::string codec = "qsgd";
  root.opt("codec", codec);
  if (codec == "qsgd") c.codec = codec_kind::qsgd;
  else if (codec == "identity") c.codec = codec_kind::identity;
  else throw config_error("config.codec: expected qsgd|identity");

  if (root.has("strategy_params")) {
    strict_object sp(root.child("strategy_params"), "config.strategy_params");
    sp.opt("qsgd_bits", c.strategy_params.qsgd_bits);
    sp.opt("topk_fraction", c.strategy_params.topk_fraction);
    sp.opt("local_epochs", c.strategy_params.local_epochs);
    sp.finish();
    require(c.strategy_params.qsgd_bits >= 1 && c.strategy_params.qsgd_bits <= 16,
            "config.strategy_params.qsgd_bits: must be in [1, 16]");
    require(c.strategy_params.topk_fraction > 0.0 && c.strategy_params.topk_fraction <= 1.0,
            "config.strategy_params.topk_fraction: must be in (0, 1]");
    require(c.strategy_params.local_epochs >= 0,
            "config.strategy_params.local_epochs: must be >= 0 (0 = default)");
  }

  root.opt("n_clients", c.n_clients);
  require(c.n_clients >= 2, "config.n_clients: must be >= 2");
  root.opt("sigma_d", c.sigma_d);
  require(c.sigma_d >= 0.0 && c.sigma_d <= 1.0, "config.sigma_d: must be in [0, 1]");
  root.opt("sigma_r", c.sigma_r);
  require(c.sigma_r >= 1.0, "config.sigma_r: must be >= 1");

  root.opt("seed", c.seed);
  root.opt("round_cap", c.round_cap);
  require(c.round_cap >= 0, "config.round_cap: must be >= 0");
  root.opt_nullable("target_loss", c.target_loss);
  root.opt_nullable("target_accuracy", c.target_accuracy);
  if (c.target_accuracy)
    require(*c.target_accuracy > 0.0 && *c.target_accuracy <= 1.0,
            "config.target_accuracy: must be in (0, 1]");

  root.opt("batch_size", c.batch_size);
  require(c.batch_size >= 1, "config.batch_size: must be >= 1");
  if (root.has("lr")) {
    strict_object lr(root.child("lr"), "config.lr");
    lr.opt("initial", c.lr_initial);
    lr.opt("decay", c.lr_decay);
    lr.finish();
    require(c.lr_initial > 0.0, "config.lr.initial: must be positive");
    require(c.lr_decay > 0.0 && c.lr_decay <= 1.0, "config.lr.decay: must be in (0, 1]");
  }
  root.opt("probe_fraction", c.probe_fraction);
  require(c.probe_fraction > 0.0 && c.probe_fraction < 1.0,
          "config.probe_fraction: must be in (0, 1)");

  if (root.has("dataset")) {
    strict_object ds(root.child("dataset"), "config.dataset");
    ds.opt("kind", c.dataset.kind);
    ds.opt("n_samples", c.dataset.n_samples);
    ds.opt("input_dim", c.dataset.input_dim);
    ds.opt("n_classes", c.dataset.n_classes);
    ds.opt("class_sep", c.dataset.class_sep);
    ds.opt("images_path", c.dataset.images_path);
    ds.opt("labels_path", c.dataset.labels_path);
    ds.opt("csv_path", c.dataset.csv_path);
    ds.opt("label_column", c.dataset.label_column);
    ds.opt("csv_has_header", c.dataset.csv_has_header);
    ds.finish();
    require(c.dataset.kind == "synthetic" || c.dataset.kind == "idx" ||
                c.dataset.kind == "csv",
            "config.dataset.kind: expected synthetic|idx|csv");
    if (c.dataset.kind == "idx")
      require(!c.dataset.images_path.empty() && !c.dataset.labels_path.empty(),
              "config.dataset: idx needs images_path and labels_path");
    if (c.dataset.kind == "csv")
      require(!c.dataset.csv_path.empty(), "config.dataset: csv needs csv_path");
  }

  if (root.has("model")) {
    strict_object m(root.child("model"), "config.model");
    m.opt("kind", c.model.kind);
    m.opt("hidden", c.model.hidden);
    m.finish();
    require(c.model.kind == "logistic" || c.model.kind == "mlp",
            "config.model.kind: expected logistic|mlp");
    require(c.model.hidden >= 1, "config.model.hidden: must be >= 1");
  }

  if (root.has("network")) {
    strict_object n(root.child("network"), "config.network");
    n.opt("max_rate_mbps", c.network.max_rate_mbps);
    n.opt("jitter_on", c.network.jitter_on);
    n.opt("jitter_frac", c.network.jitter_frac);
    n.opt("downlink_mirror_uplink", c.network.downlink_mirror_uplink);
    n.finish();
    require(c.network.max_rate_mbps > 0.0, "config.network.max_rate_mbps: must be positive");
    require(c.network.jitter_frac >= 0.0 && c.network.jitter_frac < 1.0,
            "config.network.jitter_frac: must be in [0, 1)");
  }

  if (root.has("compute")) {
    strict_object n(root.child("compute"), "config.compute");
    n.opt("base_min_s", c.compute.base_min_s);
    n.opt("base_max_s", c.compute.base_max_s);
    n.opt("noise_on", c.compute.noise_on);
    n.opt("noise_sigma", c.compute.noise_sigma);
    n.finish();
    require(c.compute.base_min_s > 0.0 && c.compute.base_max_s >= c.compute.base_min_s,
            "config.compute: need 0 < base_min_s <= base_max_s");
    require(c.compute.noise_sigma >= 0.0, "config.compute.noise_sigma: must be >= 0");
  }

  if (root.has("controller")) {
    strict_object n(root.child("controller"), "config.controller");
    n.opt("init_bits", c.controller.init_bits);
    n.opt("lambda", c.controller.lambda);
    n.opt("levels_min", c.controller.levels_min);
    n.opt("levels_max", c.controller.levels_max);
    n.finish();
    require(c.controller.init_bits >= 1 && c.controller.init_bits <= 16,
            "config.controller.init_bits: must be in [1, 16]");
    require(c.controller.levels_min >= 1.0 &&
                c.controller.levels_max <= 65535.0 &&
                c.controller.levels_min <= c.controller.levels_max,
            "config.controller: need 1 <= levels_min <= levels_max <= 65535");
  }

  root.opt("t_server_s", c.t_server_s);
  require(c.t_server_s >= 0.0, "config.t_server_s: must be >= 0");

  root.finish();
  return c;
}

std::string apply_override(const std::string& json_text, const std::string& kv) {
  const auto eq = kv.find('=');
  if (eq == std::string::npos || eq == 0)
    throw config_error("override '" + kv + "': expected key.path=value");
  const std::string path = kv.substr(0, eq);
  const std::string value = kv.substr(eq + 1);
  json j;
  try {
    j = json::parse(json_text);
  } catch (const std::exception& e) {
    throw config_error(std::string("config parse failure: ") + e.what());
  }
  json* cur = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot - start);
    if (key.empty()) throw config_error("override '" + kv + "': empty key segment");
    if (dot == std::string::npos) {
      json parsed;
      try {
        parsed = json::parse(value);
      } catch (const std::exception&) {
        parsed = value;  // plain string
      }
      (*cur)[key] = parsed;
      break;
    }
    cur = &(*cur)[key];
    start = dot + 1;
  }
  return j.dump(2);
}

std::string config_to_json(const experiment_config& c) {
  json j;
  j["version"] = kVersion;
  j["strategy"] = strategy_name(c.strategy);
  j["codec"] = c.codec == codec_kind::identity ? "identity" : "qsgd";
  j["strategy_params"] = {{"qsgd_bits", c.strategy_params.qsgd_bits},
                          {"topk_fraction", c.strategy_params.topk_fraction},
                          {"local_epochs", c.local_epochs()}};
  j["n_clients"] = c.n_clients;
  j["sigma_d"] = c.sigma_d;
  j["sigma_r"] = c.sigma_r;
  j["seed"] = c.seed;
  j["round_cap"] = c.round_cap;
  j["target_loss"] = c.target_loss ? json(*c.target_loss) : json(nullptr);
  j["target_accuracy"] = c.target_accuracy ? json(*c.target_accuracy) : json(nullptr);
  j["batch_size"] = c.batch_size;
  j["lr"] = {{"initial", c.lr_initial}, {"decay", c.lr_decay}};
  j["probe_fraction"] = c.probe_fraction;
  json ds = {{"kind", c.dataset.kind}};
  if (c.dataset.kind == "synthetic") {
    ds["n_samples"] = c.dataset.n_samples;
    ds["input_dim"] = c.dataset.input_dim;
    ds["n_classes"] = c.dataset.n_classes;
    ds["class_sep"] = c.dataset.class_sep;
  } else if (c.dataset.kind == "idx") {
    ds["images_path"] = c.dataset.images_path;
    ds["labels_path"] = c.dataset.labels_path;
  } else {
    ds["csv_path"] = c.dataset.csv_path;
    ds["label_column"] = c.dataset.label_column;
    ds["csv_has_header"] = c.dataset.csv_has_header;
  }
  j["dataset"] = ds;
  j["model"] = {{"kind", c.model.kind}, {"hidden", c.model.hidden}};
  j["network"] = {{"max_rate_mbps", c.network.max_rate_mbps},
                  {"jitter_on", c.network.jitter_on},
                  {"jitter_frac", c.network.jitter_frac},
                  {"downlink_mirror_uplink", c.network.downlink_mirror_uplink}};
  j["compute"] = {{"base_min_s", c.compute.base_min_s},
                  {"base_max_s", c.compute.base_max_s},
                  {"noise_on", c.compute.noise_on},
                  {"noise_sigma", c.compute.noise_sigma}};
  j["controller"] = {{"init_bits", c.controller.init_bits},
                     {"lambda", c.controller.lambda},
                     {"levels_min", c.controller.levels_min},
                     {"levels_max", c.controller.levels_max}};
  j["t_server_s"] = c.t_server_s;
  return j.dump(2) + "\n";
}

}  // namespace fedq
