#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "iadcps/rng.hpp"
#include "iadcps/timeseries.hpp"

namespace iadcps::sim {

/// Sine-wave plant with a toggling actuator.
///
/// At tick t the actuator u flips to 9 - u whenever t % 30 == 0, and
///   z = amp * sin(t / freq * u) + e_meas,   x = 2 z + e_proc
/// with e_meas ~ N(0, meas_noise_std^2) and e_proc ~ N(0, proc_noise_std^2).
/// When anomalies are injected, the first 100 points of every 1000-point
/// block draw e_meas with anomaly_noise_std instead and are labeled anomalous.
struct SimConfig {
  std::size_t length = 10000;
  double amp = 1.0;
  double freq = 1.0;
  double u0 = 3.0;
  double meas_noise_std = 0.2;
  double proc_noise_std = 0.2;
  double anomaly_noise_std = 0.6;
  std::uint64_t seed = 0;
  bool inject_anomalies = false;
  /// Tick of the first emitted point; the actuator phase follows from it.
  std::int64_t start_tick = 1;

  void validate() const;
};

ts::TimeSeries simulate(const SimConfig& cfg);

/// Actuator state at tick t for initial value u0.
double actuator_at(std::int64_t t, double u0);

enum class EvolveMode { Remove, Upgrade, Mix };

EvolveMode parse_evolve_mode(const std::string& name);
std::string to_string(EvolveMode mode);

struct EvolveSpec {
  EvolveMode mode = EvolveMode::Mix;
  std::size_t devices = 1;
  std::uint64_t seed = 0;
  /// Upgrade factors are drawn uniformly from [factor_lo, factor_hi].
  double factor_lo = 0.95;
  double factor_hi = 1.05;
};

/// Applies a device evolution to all channels (sensors then actuators).
/// Remove zero-fills the chosen channels; upgrade scales each chosen channel by
/// one factor; mix does both with independent channel choices.
ts::TimeSeries evolve(const ts::TimeSeries& series, const EvolveSpec& spec);

/// Channels picked by an evolution, in draw order. Exposed for tests.
std::vector<std::size_t> pick_channels(std::size_t channels, std::size_t count, Rng& rng);

struct Task {
  ts::TimeSeries train;
  ts::TimeSeries test;
};

/// One task per (amp, freq): an anomaly-free train split followed by a test
/// split with injected anomalies. Task i draws from seeds derived from base.seed.
std::vector<Task> make_tasks(const SimConfig& base, std::span<const double> amps, std::span<const double> freqs,
                             std::size_t train_len = 500, std::size_t test_len = 2000);

inline constexpr double kDriftAmps[] = {1.2, 1.4, 1.6, 1.8, 2.0};
inline constexpr double kDriftFreqs[] = {2.0, 4.0, 6.0, 8.0, 10.0};

}  // namespace iadcps::sim
