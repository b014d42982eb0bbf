#include "iadcps/mixup.hpp"

#include <algorithm>
#include <string>

#include "iadcps/error.hpp"
#include "iadcps/log.hpp"
#include "iadcps/rng.hpp"

namespace iadcps::mixup {

void MixupConfig::validate() const {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("mixing rate must lie in [0, 1]");
  if (window < 2 || window % 2 != 0) throw ConfigError("mixed window length must be even and at least 2");
}

Eigen::MatrixXd temporal_mixup(const Eigen::MatrixXd& hist, const Eigen::MatrixXd& meta, const MixupConfig& cfg) {
  cfg.validate();
  if (hist.rows() != meta.rows() || hist.cols() != meta.cols())
    throw DataError("mixup samples must have identical shapes");
  const Eigen::Index steps = meta.rows();
  const auto half = static_cast<Eigen::Index>(cfg.window / 2);

  // prefix[d] = sum of meta rows [0, d)
  Eigen::MatrixXd prefix = Eigen::MatrixXd::Zero(steps + 1, meta.cols());
  for (Eigen::Index d = 0; d < steps; ++d) prefix.row(d + 1) = prefix.row(d) + meta.row(d);

  Eigen::MatrixXd out(steps, meta.cols());
  for (Eigen::Index d = 0; d < steps; ++d) {
    const Eigen::Index lo = std::max<Eigen::Index>(0, d - half);
    const Eigen::Index hi = std::min<Eigen::Index>(steps - 1, d + half);
    const auto smooth = (prefix.row(hi + 1) - prefix.row(lo)) / static_cast<double>(hi - lo + 1);
    out.row(d) = cfg.lambda * hist.row(d) + (1.0 - cfg.lambda) * smooth;
  }
  return out;
}

namespace {

using RowBlock = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Time-major window vector viewed as (steps x channels).
Eigen::Map<const RowBlock> as_block(const Eigen::VectorXd& x, Eigen::Index channels) {
  return {x.data(), x.size() / channels, channels};
}

}  // namespace

ts::WindowPair temporal_mixup(const ts::WindowPair& hist, const ts::WindowPair& meta, const MixupConfig& cfg,
                              std::size_t sensors, std::size_t actuators) {
  const auto channels = static_cast<Eigen::Index>(sensors + actuators);
  if (hist.x.size() != meta.x.size() || hist.y.size() != meta.y.size() || hist.u.size() != meta.u.size() ||
      channels == 0 || hist.x.size() % channels != 0)
    throw DataError("mixup samples must have identical shapes");
  const Eigen::MatrixXd mixed = temporal_mixup(Eigen::MatrixXd(as_block(hist.x, channels)),
                                               Eigen::MatrixXd(as_block(meta.x, channels)), cfg);
  ts::WindowPair out;
  out.x.resize(hist.x.size());
  Eigen::Map<RowBlock>(out.x.data(), mixed.rows(), channels) = mixed;
  out.u = mixed.row(mixed.rows() - 1).tail(static_cast<Eigen::Index>(actuators)).transpose();
  out.y = cfg.lambda * hist.y + (1.0 - cfg.lambda) * meta.y;
  out.t = hist.t;
  out.label = ts::Label::Normal;
  return out;
}

std::vector<ts::WindowPair> build_mixed_dataset(std::span<const ts::WindowPair> d_train,
                                                std::span<const ts::WindowPair> d_meta, const MixupConfig& cfg,
                                                std::size_t sensors, std::size_t actuators) {
  cfg.validate();
  if (d_train.empty() || d_meta.empty()) throw DataError("mixup needs non-empty historical and evolving sets");
  if (cfg.lambda >= 0.5)
    log::warn("mixing rate " + std::to_string(cfg.lambda) + " lets historical samples dominate (expected < 0.5)");
  Rng rng(cfg.seed);
  std::vector<ts::WindowPair> mixed;
  mixed.reserve(d_train.size());
  for (const auto& hist : d_train) {
    const auto& meta = d_meta[rng.below(d_meta.size())];
    mixed.push_back(temporal_mixup(hist, meta, cfg, sensors, actuators));
  }
  return mixed;
}

}  // namespace iadcps::mixup
