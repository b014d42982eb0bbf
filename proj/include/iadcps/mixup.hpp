#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "iadcps/timeseries.hpp"

namespace iadcps::mixup {

struct MixupConfig {
  /// Share of the historical sample in each mixed step.
  double lambda = 0.2;
  /// Mixed window length N: each step averages the evolving sample over [d - N/2, d + N/2].
  std::size_t window = 2;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Step-wise temporal mixup of two (steps x channels) blocks:
///   out[d] = lambda * hist[d] + (1 - lambda) * mean(meta[d - N/2 .. d + N/2])
/// with the averaging window clipped to the block.
Eigen::MatrixXd temporal_mixup(const Eigen::MatrixXd& hist, const Eigen::MatrixXd& meta, const MixupConfig& cfg);

/// Mixes two window pairs of the same shape. The target is lambda * y_hist + (1 - lambda) * y_meta,
/// u is read back from the mixed window's last step and the result is labeled normal.
ts::WindowPair temporal_mixup(const ts::WindowPair& hist, const ts::WindowPair& meta, const MixupConfig& cfg,
                              std::size_t sensors, std::size_t actuators);

/// One mixed sample per historical pair, each paired with an evolving pair drawn
/// uniformly with replacement. Warns when lambda >= 0.5.
std::vector<ts::WindowPair> build_mixed_dataset(std::span<const ts::WindowPair> d_train,
                                                std::span<const ts::WindowPair> d_meta, const MixupConfig& cfg,
                                                std::size_t sensors, std::size_t actuators);

}  // namespace iadcps::mixup
