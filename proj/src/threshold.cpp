#include "iadcps/threshold.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "iadcps/error.hpp"

namespace iadcps::threshold {

void ThresholdConfig::validate() const {
  if (grid_points < 2) throw ConfigError("the KDE grid needs at least 2 points");
  if (!(delta > 0)) throw ConfigError("delta must be positive");
  if (memory == 0) throw ConfigError("score memory capacity must be positive");
}

double population_stddev(std::span<const double> scores) {
  if (scores.empty()) throw DataError("standard deviation of an empty score set");
  // the rounded mean of equal values can miss them; keep the exact zero
  const auto [lo, hi] = std::minmax_element(scores.begin(), scores.end());
  if (*lo == *hi) return 0.0;
  double mean = 0.0;
  for (double s : scores) mean += s;
  mean /= static_cast<double>(scores.size());
  double ss = 0.0;
  for (double s : scores) ss += (s - mean) * (s - mean);
  return std::sqrt(ss / static_cast<double>(scores.size()));
}

std::vector<double> query_grid(std::span<const double> scores, std::size_t points) {
  if (points < 2) throw ConfigError("the KDE grid needs at least 2 points");
  if (scores.empty()) throw DataError("KDE grid over an empty score set");
  const auto [lo_it, hi_it] = std::minmax_element(scores.begin(), scores.end());
  const double sigma = population_stddev(scores);
  const double lo = *lo_it - 3.0 * sigma;
  const double hi = *hi_it + 3.0 * sigma;
  std::vector<double> grid(points);
  const double span = hi - lo;
  for (std::size_t i = 0; i < points; ++i)
    grid[i] = lo + static_cast<double>(i) / static_cast<double>(points - 1) * span;
  grid.back() = hi;
  return grid;
}

double bandwidth(std::span<const double> scores) {
  const double n = static_cast<double>(scores.size());
  const double h = std::pow(4.0 / (3.0 * n), 0.2) * population_stddev(scores);
  return std::max(h, kBandwidthFloor);
}

std::vector<double> kde_pdf(std::span<const double> scores, std::span<const double> grid, double h) {
  if (!(h > 0)) throw ConfigError("KDE bandwidth must be positive");
  if (scores.empty()) throw DataError("KDE over an empty score set");
  const double norm = 1.0 / (std::sqrt(2.0 * std::numbers::pi) * h * static_cast<double>(scores.size()));
  const double inv_two_h2 = 1.0 / (2.0 * h * h);
  std::vector<double> density(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    double sum = 0.0;
    for (double s : scores) {
      const double d = grid[i] - s;
      sum += std::exp(-d * d * inv_two_h2);
    }
    density[i] = norm * sum;
  }
  return density;
}

std::size_t find_peak(std::span<const double> density) {
  if (density.empty()) throw DataError("peak of an empty density");
  return static_cast<std::size_t>(std::max_element(density.begin(), density.end()) - density.begin());
}

double ldp_threshold(std::span<const double> grid, std::span<const double> density, std::size_t peak_index,
                     double delta) {
  if (!(delta > 0)) throw ConfigError("delta must be positive");
  if (grid.size() != density.size() || grid.empty()) throw DataError("grid and density sizes differ");
  for (std::size_t i = peak_index + 1; i < density.size(); ++i)
    if (density[i] < delta) return grid[i];
  return grid.back();
}

KdeResult compute(std::span<const double> scores, const ThresholdConfig& cfg) {
  cfg.validate();
  KdeResult r;
  r.delta = cfg.delta;
  r.grid = query_grid(scores, cfg.grid_points);
  r.bandwidth = bandwidth(scores);
  r.density = kde_pdf(scores, r.grid, r.bandwidth);
  r.peak_index = find_peak(r.density);
  if (r.grid.front() == r.grid.back()) {
    r.degenerate = true;
    r.threshold = r.grid.front() + 3.0 * kBandwidthFloor;
    return r;
  }
  r.threshold = ldp_threshold(r.grid, r.density, r.peak_index, cfg.delta);
  return r;
}

ScoreMemory::ScoreMemory(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) throw ConfigError("score memory capacity must be positive");
}

void ScoreMemory::push(std::span<const double> scores) {
  for (double s : scores) {
    buffer_.push_back(s);
    if (buffer_.size() > capacity_) buffer_.pop_front();
  }
}

}  // namespace iadcps::threshold
