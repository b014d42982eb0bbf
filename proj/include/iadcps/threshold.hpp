#pragma once

#include <cstddef>
#include <deque>
#include <span>
#include <vector>

namespace iadcps::threshold {

inline constexpr double kBandwidthFloor = 1e-6;

struct ThresholdConfig {
  std::size_t grid_points = 1000;  ///< Z
  double delta = 0.05;             ///< density regarded as "near zero"
  std::size_t memory = 10000;      ///< score memory capacity M

  void validate() const;
};

struct KdeResult {
  std::vector<double> grid;
  std::vector<double> density;
  double bandwidth = 0.0;
  std::size_t peak_index = 0;
  double threshold = 0.0;
  double delta = 0.0;
  bool degenerate = false;  ///< all scores equal; no density contrast
};

/// Population standard deviation.
double population_stddev(std::span<const double> scores);

/// Z evenly spaced points from min - 3 sigma to max + 3 sigma, both ends included.
std::vector<double> query_grid(std::span<const double> scores, std::size_t points);

/// Rule-of-thumb bandwidth (4 / (3 n))^(1/5) * sigma, floored at kBandwidthFloor.
double bandwidth(std::span<const double> scores);

/// Gaussian kernel density of `scores` evaluated at each grid point.
std::vector<double> kde_pdf(std::span<const double> scores, std::span<const double> grid, double h);

/// Leftmost index of the maximum.
std::size_t find_peak(std::span<const double> density);

/// First grid value right of the peak whose density drops below delta; the last grid
/// value when the density never does.
double ldp_threshold(std::span<const double> grid, std::span<const double> density, std::size_t peak_index,
                     double delta);

/// Full low-density-point computation over a score set. Equal scores collapse the
/// grid; the threshold is then the score plus 3 * kBandwidthFloor so nothing is flagged.
KdeResult compute(std::span<const double> scores, const ThresholdConfig& cfg);

inline bool is_anomalous(double score, double threshold) { return score > threshold; }

/// Bounded FIFO of the most recent anomaly scores.
class ScoreMemory {
 public:
  explicit ScoreMemory(std::size_t capacity = 10000);

  void push(std::span<const double> scores);
  std::size_t size() const { return buffer_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::vector<double> snapshot() const { return {buffer_.begin(), buffer_.end()}; }

 private:
  std::size_t capacity_;
  std::deque<double> buffer_;
};

}  // namespace iadcps::threshold
