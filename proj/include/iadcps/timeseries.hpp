#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace iadcps::ts {

enum class Label : int { Normal = 0, Anomalous = 1, Unknown = -1 };

struct TimePoint {
  std::int64_t t = 0;
  std::vector<double> sensors;
  std::vector<double> actuators;
  Label label = Label::Unknown;
};

/// Uniformly ticked multivariate series of sensor and actuator channels.
///
/// Construction validates that the series is non-empty, that every point has
/// the same channel counts and that ticks increase by exactly one.
class TimeSeries {
 public:
  TimeSeries(std::vector<TimePoint> points, std::size_t sensors, std::size_t actuators);

  std::size_t size() const { return points_.size(); }
  std::size_t sensors() const { return sensors_; }
  std::size_t actuators() const { return actuators_; }
  std::size_t channels() const { return sensors_ + actuators_; }

  const TimePoint& operator[](std::size_t i) const { return points_[i]; }
  const std::vector<TimePoint>& points() const { return points_; }

  /// Channel value by combined index: sensors first, then actuators.
  double channel(std::size_t i, std::size_t c) const;

  /// Points [first, first + count) re-based so the first tick keeps its value.
  TimeSeries slice(std::size_t first, std::size_t count) const;

 private:
  std::vector<TimePoint> points_;
  std::size_t sensors_;
  std::size_t actuators_;
};

/// One supervised sample cut from a series with window length w.
///
/// x: time-major flattening of the w steps [i, i+w-1], each step laid out as
///    sensors then actuators, so x has w * (m + k) entries.
/// u: actuators at step i+w-1.  y: sensors at step i+w.
/// t and label belong to step i+w.
struct WindowPair {
  Eigen::VectorXd x;
  Eigen::VectorXd u;
  Eigen::VectorXd y;
  std::int64_t t = 0;
  Label label = Label::Unknown;
};

/// Per-channel min/max (sensors then actuators).
struct NormStats {
  Eigen::VectorXd min;
  Eigen::VectorXd max;
};

TimeSeries load_csv(const std::filesystem::path& path);
TimeSeries read_csv(std::istream& in, const std::string& source = "<stream>");
void save_csv(const TimeSeries& series, const std::filesystem::path& path);
void write_csv(const TimeSeries& series, std::ostream& out);

NormStats fit_norm(const TimeSeries& series, std::span<const std::size_t> subset);
NormStats fit_norm(const TimeSeries& series);
/// Elementwise envelope of two stats over the same channels.
NormStats merge(const NormStats& a, const NormStats& b);

/// Min-max scaling per channel, no clamping. Constant channels map to 0.
TimeSeries apply_norm(const TimeSeries& series, const NormStats& stats);
/// Inverse of apply_norm on non-constant channels; constant channels map back to min.
TimeSeries invert_norm(const TimeSeries& series, const NormStats& stats);

std::vector<WindowPair> sliding_pairs(const TimeSeries& series, std::size_t window);

/// Sensor values at the last step of a pair's window.
Eigen::VectorXd last_step_sensors(const WindowPair& pair, std::size_t sensors, std::size_t actuators);

}  // namespace iadcps::ts
