#include "iadcps/timeseries.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include "iadcps/csv.hpp"
#include "iadcps/error.hpp"

namespace iadcps::ts {

TimeSeries::TimeSeries(std::vector<TimePoint> points, std::size_t sensors, std::size_t actuators)
    : points_(std::move(points)), sensors_(sensors), actuators_(actuators) {
  if (points_.empty()) throw DataError("time series must not be empty");
  const std::int64_t t0 = points_.front().t;
  for (std::size_t i = 0; i < points_.size(); ++i) {
    const auto& p = points_[i];
    if (p.sensors.size() != sensors_ || p.actuators.size() != actuators_)
      throw DataError("point " + std::to_string(i) + " has inconsistent channel counts");
    if (p.t != t0 + static_cast<std::int64_t>(i))
      throw DataError("ticks must increase by one; point " + std::to_string(i) + " has t=" + std::to_string(p.t));
  }
}

double TimeSeries::channel(std::size_t i, std::size_t c) const {
  const auto& p = points_[i];
  return c < sensors_ ? p.sensors[c] : p.actuators[c - sensors_];
}

TimeSeries TimeSeries::slice(std::size_t first, std::size_t count) const {
  if (first + count > points_.size() || count == 0) throw DataError("slice out of range");
  return TimeSeries({points_.begin() + first, points_.begin() + first + count}, sensors_, actuators_);
}

// ---------------------------------------------------------------------------
// CSV

namespace {

struct Layout {
  std::size_t sensors = 0;
  std::size_t actuators = 0;
  bool has_label = false;
};

Layout parse_header(std::string_view header, const std::string& source) {
  const auto fields = csv::split(header);
  if (fields.empty() || fields[0] != "t") throw DataError(source + ":1: header must start with 't'");
  Layout layout;
  std::size_t i = 1;
  while (i < fields.size() && fields[i] == "s" + std::to_string(layout.sensors)) {
    ++layout.sensors;
    ++i;
  }
  while (i < fields.size() && fields[i] == "a" + std::to_string(layout.actuators)) {
    ++layout.actuators;
    ++i;
  }
  if (i < fields.size() && fields[i] == "label") {
    layout.has_label = true;
    ++i;
  }
  if (i != fields.size())
    throw DataError(source + ":1: unexpected header column '" + std::string(fields[i]) +
                    "'; expected t,s0..s{m-1},a0..a{k-1}[,label]");
  return layout;
}

}  // namespace

TimeSeries read_csv(std::istream& in, const std::string& source) {
  std::string line;
  if (!std::getline(in, line)) throw DataError(source + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const Layout layout = parse_header(line, source);
  const std::size_t columns = 1 + layout.sensors + layout.actuators + (layout.has_label ? 1 : 0);

  std::vector<TimePoint> points;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = csv::split(line);
    const std::string where = source + ":" + std::to_string(line_no);
    if (fields.size() != columns)
      throw DataError(where + ": expected " + std::to_string(columns) + " columns, found " +
                      std::to_string(fields.size()));
    TimePoint p;
    long long t = 0;
    if (!csv::parse(fields[0], t)) throw DataError(where + ": malformed tick '" + std::string(fields[0]) + "'");
    p.t = t;
    p.sensors.resize(layout.sensors);
    p.actuators.resize(layout.actuators);
    for (std::size_t c = 0; c < layout.sensors + layout.actuators; ++c) {
      double v = 0.0;
      if (!csv::parse(fields[1 + c], v))
        throw DataError(where + ": malformed value '" + std::string(fields[1 + c]) + "' in column " +
                        std::to_string(c + 1));
      (c < layout.sensors ? p.sensors[c] : p.actuators[c - layout.sensors]) = v;
    }
    if (layout.has_label) {
      long long label = 0;
      if (!csv::parse(fields.back(), label) || label < -1 || label > 1)
        throw DataError(where + ": label must be 0, 1 or -1");
      p.label = static_cast<Label>(label);
    }
    points.push_back(std::move(p));
  }
  if (points.empty()) throw DataError(source + ": no data rows");
  try {
    return TimeSeries(std::move(points), layout.sensors, layout.actuators);
  } catch (const DataError& e) {
    throw DataError(source + ": " + e.what());
  }
}

TimeSeries load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return read_csv(in, path.string());
}

void write_csv(const TimeSeries& series, std::ostream& out) {
  out << 't';
  for (std::size_t c = 0; c < series.sensors(); ++c) out << ",s" << c;
  for (std::size_t c = 0; c < series.actuators(); ++c) out << ",a" << c;
  out << ",label\n";
  for (const auto& p : series.points()) {
    out << p.t;
    for (double v : p.sensors) out << ',' << csv::format(v);
    for (double v : p.actuators) out << ',' << csv::format(v);
    out << ',' << static_cast<int>(p.label) << '\n';
  }
}

void save_csv(const TimeSeries& series, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  write_csv(series, out);
}

// ---------------------------------------------------------------------------
// Normalization

NormStats fit_norm(const TimeSeries& series, std::span<const std::size_t> subset) {
  if (subset.empty()) throw DataError("normalization subset must not be empty");
  const auto channels = static_cast<Eigen::Index>(series.channels());
  NormStats stats{Eigen::VectorXd::Constant(channels, std::numeric_limits<double>::infinity()),
                  Eigen::VectorXd::Constant(channels, -std::numeric_limits<double>::infinity())};
  for (std::size_t i : subset) {
    if (i >= series.size()) throw DataError("normalization index out of range");
    for (Eigen::Index c = 0; c < channels; ++c) {
      const double v = series.channel(i, static_cast<std::size_t>(c));
      stats.min[c] = std::min(stats.min[c], v);
      stats.max[c] = std::max(stats.max[c], v);
    }
  }
  return stats;
}

NormStats fit_norm(const TimeSeries& series) {
  std::vector<std::size_t> all(series.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return fit_norm(series, all);
}

NormStats merge(const NormStats& a, const NormStats& b) {
  if (a.min.size() != b.min.size()) throw DataError("cannot merge stats over different channels");
  return {a.min.cwiseMin(b.min), a.max.cwiseMax(b.max)};
}

namespace {

template <typename Map>
TimeSeries map_channels(const TimeSeries& series, const NormStats& stats, Map map) {
  if (static_cast<std::size_t>(stats.min.size()) != series.channels())
    throw DataError("normalization stats do not match series channels");
  std::vector<TimePoint> points = series.points();
  const std::size_t m = series.sensors();
  for (auto& p : points) {
    for (std::size_t c = 0; c < m; ++c) p.sensors[c] = map(p.sensors[c], stats.min[c], stats.max[c]);
    for (std::size_t c = 0; c < series.actuators(); ++c)
      p.actuators[c] = map(p.actuators[c], stats.min[m + c], stats.max[m + c]);
  }
  return TimeSeries(std::move(points), series.sensors(), series.actuators());
}

}  // namespace

TimeSeries apply_norm(const TimeSeries& series, const NormStats& stats) {
  return map_channels(series, stats, [](double v, double lo, double hi) {
    const double range = hi - lo;
    return range > 0.0 ? (v - lo) / range : 0.0;
  });
}

TimeSeries invert_norm(const TimeSeries& series, const NormStats& stats) {
  return map_channels(series, stats, [](double v, double lo, double hi) { return lo + v * (hi - lo); });
}

// ---------------------------------------------------------------------------
// Windows

std::vector<WindowPair> sliding_pairs(const TimeSeries& series, std::size_t window) {
  if (window == 0) throw DataError("window length must be positive");
  if (series.size() <= window)
    throw DataError("series of length " + std::to_string(series.size()) + " is too short for window " +
                    std::to_string(window));
  const std::size_t m = series.sensors();
  const std::size_t k = series.actuators();
  const std::size_t width = m + k;
  std::vector<WindowPair> pairs;
  pairs.reserve(series.size() - window);
  for (std::size_t i = 0; i + window < series.size(); ++i) {
    WindowPair pair;
    pair.x.resize(static_cast<Eigen::Index>(window * width));
    for (std::size_t s = 0; s < window; ++s)
      for (std::size_t c = 0; c < width; ++c)
        pair.x[static_cast<Eigen::Index>(s * width + c)] = series.channel(i + s, c);
    const auto& last = series[i + window - 1];
    const auto& target = series[i + window];
    pair.u = Eigen::Map<const Eigen::VectorXd>(last.actuators.data(), static_cast<Eigen::Index>(k));
    pair.y = Eigen::Map<const Eigen::VectorXd>(target.sensors.data(), static_cast<Eigen::Index>(m));
    pair.t = target.t;
    pair.label = target.label;
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

Eigen::VectorXd last_step_sensors(const WindowPair& pair, std::size_t sensors, std::size_t actuators) {
  const auto width = static_cast<Eigen::Index>(sensors + actuators);
  return pair.x.segment(pair.x.size() - width, static_cast<Eigen::Index>(sensors));
}

}  // namespace iadcps::ts
