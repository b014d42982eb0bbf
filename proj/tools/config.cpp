#include "config.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <sstream>

#include "iadcps/error.hpp"

namespace iadcps::cli {

namespace {

using nlohmann::json;

struct Key {
  std::string path;
  std::string help;
  std::function<json(const Config&)> get;
  std::function<void(Config&, const json&)> set;
};

template <typename T>
T as(const json& v, const std::string& path) {
  try {
    if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
      if (!v.is_number_unsigned()) throw ConfigError(path + " must be a non-negative integer");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError(path + " must be a number");
    }
    return v.get<T>();
  } catch (const json::exception&) {
    throw ConfigError(path + " has the wrong type");
  }
}

// Binds a key to a member reached through `field`.
template <typename T, typename Field>
Key bind(std::string path, std::string help, Field field) {
  return {path, std::move(help),
          [field](const Config& c) {
            Config copy = c;
            return json(field(copy));
          },
          [field, path](Config& c, const json& v) { field(c) = as<T>(v, path); }};
}

const std::vector<Key>& keys() {
  static const std::vector<Key> table = [] {
    std::vector<Key> k;
    k.push_back({"mode", "static, it or iadcps",
                 [](const Config& c) { return json(pipeline::to_string(c.run.mode)); },
                 [](Config& c, const json& v) { c.run.mode = pipeline::parse_mode(as<std::string>(v, "mode")); }});
    k.push_back(bind<std::uint64_t>("seed", "seed for initialization, shuffling and mixup pairing",
                                    [](Config& c) -> auto& { return c.run.seed; }));
    k.push_back(bind<std::size_t>("window", "window length w", [](Config& c) -> auto& { return c.run.window; }));
    k.push_back(bind<std::size_t>("latent", "latent size", [](Config& c) -> auto& { return c.run.latent; }));
    k.push_back({"hidden", "hidden layer widths of each net", [](const Config& c) { return json(c.run.hidden); },
                 [](Config& c, const json& v) { c.run.hidden = as<std::vector<std::size_t>>(v, "hidden"); }});
    k.push_back({"scorer", "filter or residual",
                 [](const Config& c) { return json(scoring::to_string(c.run.scorer)); },
                 [](Config& c, const json& v) { c.run.scorer = scoring::parse_scorer(as<std::string>(v, "scorer")); }});
    k.push_back(bind<bool>("merge_includes_meta", "evolving normals join the standard-training set",
                           [](Config& c) -> auto& { return c.run.merge_includes_meta; }));
    k.push_back(bind<bool>("continue_on_error", "keep the previous model when a task fails",
                           [](Config& c) -> auto& { return c.run.continue_on_error; }));
    k.push_back(bind<double>("validation_fraction", "tail of the initial series held out for calibration",
                             [](Config& c) -> auto& { return c.run.validation_fraction; }));
    k.push_back(bind<std::size_t>("task_train_len", "leading evolving-normal points of each task file",
                                  [](Config& c) -> auto& { return c.run.task_train_len; }));

    k.push_back(bind<std::size_t>("train.epochs", "standard-training epochs",
                                  [](Config& c) -> auto& { return c.run.train.epochs; }));
    k.push_back(bind<double>("train.learning_rate", "Adam learning rate",
                             [](Config& c) -> auto& { return c.run.train.learning_rate; }));
    k.push_back(bind<double>("train.meta_learning_rate", "meta step size",
                             [](Config& c) -> auto& { return c.run.train.meta_learning_rate; }));
    k.push_back(bind<std::size_t>("train.episodes", "meta episodes (support sets)",
                                  [](Config& c) -> auto& { return c.run.train.episodes; }));
    k.push_back(bind<std::size_t>("train.batch_size", "mini-batch size",
                                  [](Config& c) -> auto& { return c.run.train.batch_size; }));
    k.push_back(bind<double>("train.recon_weight", "weight of the reconstruction term",
                             [](Config& c) -> auto& { return c.run.train.recon_weight; }));
    k.push_back(bind<double>("train.latent_weight", "weight of the latent consistency term",
                             [](Config& c) -> auto& { return c.run.train.latent_weight; }));

    k.push_back(bind<double>("mixup.lambda", "share of the historical sample",
                             [](Config& c) -> auto& { return c.run.mixup.lambda; }));
    k.push_back(bind<std::size_t>("mixup.window", "moving-average length N (even)",
                                  [](Config& c) -> auto& { return c.run.mixup.window; }));
    k.push_back(bind<std::uint64_t>("mixup.seed", "extra seed for mixup pairing",
                                    [](Config& c) -> auto& { return c.run.mixup.seed; }));

    k.push_back(bind<std::size_t>("threshold.grid_points", "KDE query points Z",
                                  [](Config& c) -> auto& { return c.run.threshold.grid_points; }));
    k.push_back(bind<double>("threshold.delta", "density regarded as near zero",
                             [](Config& c) -> auto& { return c.run.threshold.delta; }));
    k.push_back(bind<std::size_t>("threshold.memory", "score memory capacity M",
                                  [](Config& c) -> auto& { return c.run.threshold.memory; }));

    k.push_back(bind<double>("filter.kappa_per_dim", "sigma-point kappa per latent dimension",
                             [](Config& c) -> auto& { return c.run.filter.kappa_per_dim; }));
    k.push_back(bind<double>("filter.jitter", "regularization added to a singular S",
                             [](Config& c) -> auto& { return c.run.filter.jitter; }));

    k.push_back(bind<std::size_t>("sim.length", "initial series length",
                                  [](Config& c) -> auto& { return c.sim.base.length; }));
    k.push_back(bind<double>("sim.amp", "initial amplitude", [](Config& c) -> auto& { return c.sim.base.amp; }));
    k.push_back(bind<double>("sim.freq", "initial frequency divisor",
                             [](Config& c) -> auto& { return c.sim.base.freq; }));
    k.push_back(bind<double>("sim.u0", "initial actuator value", [](Config& c) -> auto& { return c.sim.base.u0; }));
    k.push_back(bind<double>("sim.meas_noise_std", "measurement noise",
                             [](Config& c) -> auto& { return c.sim.base.meas_noise_std; }));
    k.push_back(bind<double>("sim.proc_noise_std", "process noise",
                             [](Config& c) -> auto& { return c.sim.base.proc_noise_std; }));
    k.push_back(bind<double>("sim.anomaly_noise_std", "measurement noise inside anomaly blocks",
                             [](Config& c) -> auto& { return c.sim.base.anomaly_noise_std; }));
    k.push_back(bind<std::uint64_t>("sim.seed", "simulation seed", [](Config& c) -> auto& { return c.sim.base.seed; }));
    k.push_back({"sim.amps", "task amplitudes", [](const Config& c) { return json(c.sim.amps); },
                 [](Config& c, const json& v) { c.sim.amps = as<std::vector<double>>(v, "sim.amps"); }});
    k.push_back({"sim.freqs", "task frequency divisors", [](const Config& c) { return json(c.sim.freqs); },
                 [](Config& c, const json& v) { c.sim.freqs = as<std::vector<double>>(v, "sim.freqs"); }});
    k.push_back(bind<std::size_t>("sim.train_len", "evolving normal points per task",
                                  [](Config& c) -> auto& { return c.sim.train_len; }));
    k.push_back(bind<std::size_t>("sim.test_len", "test points per task",
                                  [](Config& c) -> auto& { return c.sim.test_len; }));
    return k;
  }();
  return table;
}

const Key& find(const std::string& path) {
  for (const auto& k : keys())
    if (k.path == path) return k;
  throw ConfigError("unknown config key '" + path + "'");
}

void apply_at(Config& cfg, const json& j, const std::string& prefix) {
  if (!j.is_object()) throw ConfigError("config " + (prefix.empty() ? std::string("root") : prefix) + " must be an object");
  for (const auto& [name, value] : j.items()) {
    const std::string path = prefix.empty() ? name : prefix + "." + name;
    if (value.is_object()) {
      apply_at(cfg, value, path);
      continue;
    }
    find(path).set(cfg, value);
  }
}

}  // namespace

std::string describe_keys() {
  const Config defaults;
  std::ostringstream out;
  for (const auto& k : keys()) out << "  " << k.path << " = " << k.get(defaults).dump() << "  " << k.help << "\n";
  return out.str();
}

void apply_json(Config& cfg, const json& j) { apply_at(cfg, j, ""); }

void set_key(Config& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("expected key=value, got '" + assignment + "'");
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  find(path).set(cfg, value);
}

Config load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path);
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ConfigError("config " + path + " is not valid JSON");
  Config cfg;
  apply_json(cfg, j);
  return cfg;
}

json to_json(const Config& cfg) {
  json out = json::object();
  for (const auto& k : keys()) {
    std::string pointer = "/" + k.path;
    std::replace(pointer.begin(), pointer.end(), '.', '/');
    out[json::json_pointer(pointer)] = k.get(cfg);
  }
  return out;
}

}  // namespace iadcps::cli
