#include "iadcps/simulator.hpp"

#include <cmath>
#include <numeric>

#include "iadcps/error.hpp"

namespace iadcps::sim {

void SimConfig::validate() const {
  if (length == 0) throw ConfigError("simulation length must be positive");
  if (meas_noise_std < 0 || proc_noise_std < 0 || anomaly_noise_std < 0)
    throw ConfigError("noise standard deviations must be non-negative");
  if (freq == 0) throw ConfigError("frequency divisor must be non-zero");
}

double actuator_at(std::int64_t t, double u0) {
  // u flips at every multiple of 30 up to and including t
  const std::int64_t flips = t >= 0 ? t / 30 : 0;
  return flips % 2 == 0 ? u0 : 9.0 - u0;
}

ts::TimeSeries simulate(const SimConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  std::vector<ts::TimePoint> points;
  points.reserve(cfg.length);
  for (std::size_t i = 0; i < cfg.length; ++i) {
    const std::int64_t t = cfg.start_tick + static_cast<std::int64_t>(i);
    const double u = actuator_at(t, cfg.u0);
    const bool anomalous = cfg.inject_anomalies && i % 1000 < 100;
    const double meas_std = anomalous ? cfg.anomaly_noise_std : cfg.meas_noise_std;
    const double e_meas = rng.gaussian();
    const double e_proc = rng.gaussian();
    const double z = cfg.amp * std::sin(static_cast<double>(t) / cfg.freq * u) + meas_std * e_meas;
    const double x = 2.0 * z + cfg.proc_noise_std * e_proc;
    points.push_back({t, {x}, {u}, anomalous ? ts::Label::Anomalous : ts::Label::Normal});
  }
  return ts::TimeSeries(std::move(points), 1, 1);
}

EvolveMode parse_evolve_mode(const std::string& name) {
  if (name == "remove") return EvolveMode::Remove;
  if (name == "upgrade") return EvolveMode::Upgrade;
  if (name == "mix") return EvolveMode::Mix;
  throw ConfigError("unknown evolve mode '" + name + "' (expected remove, upgrade or mix)");
}

std::string to_string(EvolveMode mode) {
  switch (mode) {
    case EvolveMode::Remove: return "remove";
    case EvolveMode::Upgrade: return "upgrade";
    case EvolveMode::Mix: return "mix";
  }
  return "?";
}

std::vector<std::size_t> pick_channels(std::size_t channels, std::size_t count, Rng& rng) {
  std::vector<std::size_t> pool(channels);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  // partial Fisher-Yates
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(channels - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(count);
  return pool;
}

namespace {

void scale_channel(std::vector<ts::TimePoint>& points, std::size_t sensors, std::size_t c, double factor) {
  for (auto& p : points) {
    double& v = c < sensors ? p.sensors[c] : p.actuators[c - sensors];
    v = factor == 0.0 ? 0.0 : v * factor;
  }
}

}  // namespace

ts::TimeSeries evolve(const ts::TimeSeries& series, const EvolveSpec& spec) {
  const std::size_t channels = series.channels();
  if (spec.devices == 0) throw ConfigError("evolution needs at least one device");
  if (spec.devices > channels)
    throw ConfigError("cannot evolve " + std::to_string(spec.devices) + " devices in a series with " +
                      std::to_string(channels) + " channels");
  if (spec.factor_lo > spec.factor_hi) throw ConfigError("upgrade factor range is inverted");

  Rng rng(spec.seed);
  std::vector<ts::TimePoint> points = series.points();
  const std::size_t m = series.sensors();
  if (spec.mode == EvolveMode::Remove || spec.mode == EvolveMode::Mix) {
    for (std::size_t c : pick_channels(channels, spec.devices, rng)) scale_channel(points, m, c, 0.0);
  }
  if (spec.mode == EvolveMode::Upgrade || spec.mode == EvolveMode::Mix) {
    for (std::size_t c : pick_channels(channels, spec.devices, rng)) {
      const double factor = rng.uniform(spec.factor_lo, spec.factor_hi);
      if (factor != 1.0) scale_channel(points, m, c, factor);
    }
  }
  return ts::TimeSeries(std::move(points), m, series.actuators());
}

std::vector<Task> make_tasks(const SimConfig& base, std::span<const double> amps, std::span<const double> freqs,
                             std::size_t train_len, std::size_t test_len) {
  if (amps.size() != freqs.size())
    throw ConfigError("amplitude and frequency schedules differ in length");
  std::vector<Task> tasks;
  tasks.reserve(amps.size());
  for (std::size_t i = 0; i < amps.size(); ++i) {
    SimConfig train = base;
    train.amp = amps[i];
    train.freq = freqs[i];
    train.length = train_len;
    train.inject_anomalies = false;
    train.start_tick = 1;
    train.seed = Rng::derive(base.seed, 2 * i);

    SimConfig test = train;
    test.length = test_len;
    test.inject_anomalies = true;
    test.start_tick = 1 + static_cast<std::int64_t>(train_len);
    test.seed = Rng::derive(base.seed, 2 * i + 1);
    tasks.push_back({simulate(train), simulate(test)});
  }
  return tasks;
}

}  // namespace iadcps::sim
