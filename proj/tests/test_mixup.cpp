#include <doctest.h>

#include "iadcps/error.hpp"
#include "iadcps/log.hpp"
#include "iadcps/mixup.hpp"
#include "oracles.hpp"

using namespace iadcps;

namespace {

Eigen::MatrixXd random_block(Rng& rng, long rows, long cols) {
  Eigen::MatrixXd b(rows, cols);
  for (long i = 0; i < b.size(); ++i) b.data()[i] = rng.gaussian();
  return b;
}

}  // namespace

TEST_CASE("mixup degenerate weights") {
  Rng rng(1);
  const auto h = random_block(rng, 31, 3), m = random_block(rng, 31, 3);
  mixup::MixupConfig cfg;
  cfg.lambda = 1.0;
  CHECK(mixup::temporal_mixup(h, m, cfg) == h);

  cfg.lambda = 0.0;
  const Eigen::MatrixXd c = Eigen::MatrixXd::Constant(31, 3, 2.5);
  CHECK((mixup::temporal_mixup(h, c, cfg).array() - 2.5).abs().maxCoeff() < 1e-15);
}

TEST_CASE("mixup arithmetic") {
  mixup::MixupConfig cfg;
  cfg.lambda = 0.2;
  cfg.window = 2;
  const Eigen::MatrixXd h = Eigen::MatrixXd::Ones(5, 1);
  Eigen::MatrixXd m(5, 1);
  m << 0.0, 1.0, 0.5, 0.0, 1.0;
  // step 2 averages steps 1..3 = 0.5
  CHECK(mixup::temporal_mixup(h, m, cfg)(2, 0) == doctest::Approx(0.6).epsilon(1e-15));
}

TEST_CASE("mixup against brute force") {
  Rng rng(2);
  for (std::size_t n : {2u, 4u, 6u, 10u, 40u}) {
    mixup::MixupConfig cfg;
    cfg.window = n;
    const auto h = random_block(rng, 12, 2), h2 = random_block(rng, 12, 2), m = random_block(rng, 12, 2);

    cfg.lambda = 0.0;
    CHECK((mixup::temporal_mixup(h, m, cfg) - oracle::moving_average(m, n)).cwiseAbs().maxCoeff() <= 1e-12);

    cfg.lambda = 0.3;
    const Eigen::MatrixXd diff = mixup::temporal_mixup(h, m, cfg) - mixup::temporal_mixup(h2, m, cfg);
    CHECK((diff - 0.3 * (h - h2)).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("mixed pairs") {
  Rng rng(3);
  const std::size_t w = 6, m = 2, k = 1;
  auto hist = oracle::random_pairs(rng, 1, w, m, k)[0];
  auto meta = oracle::random_pairs(rng, 1, w, m, k)[0];
  hist.label = ts::Label::Anomalous;
  hist.u[0] = hist.x[static_cast<Eigen::Index>((w - 1) * (m + k) + m)];
  mixup::MixupConfig cfg;
  cfg.lambda = 0.25;
  const auto mixed = mixup::temporal_mixup(hist, meta, cfg, m, k);
  CHECK(mixed.label == ts::Label::Normal);
  CHECK(((mixed.y - (0.25 * hist.y + 0.75 * meta.y)).cwiseAbs().maxCoeff()) <= 1e-15);
  CHECK(mixed.u[0] == mixed.x[static_cast<Eigen::Index>((w - 1) * (m + k) + m)]);

  cfg.lambda = 1.0;
  const auto same = mixup::temporal_mixup(hist, meta, cfg, m, k);
  CHECK(same.x == hist.x);
  CHECK(same.y == hist.y);
  CHECK(same.u == hist.u);
}

TEST_CASE("mixed dataset") {
  Rng rng(4);
  const auto d_train = oracle::random_pairs(rng, 10, 4, 1, 1);
  const auto d_meta = oracle::random_pairs(rng, 3, 4, 1, 1);
  mixup::MixupConfig cfg;
  cfg.seed = 8;
  const auto a = mixup::build_mixed_dataset(d_train, d_meta, cfg, 1, 1);
  const auto b = mixup::build_mixed_dataset(d_train, d_meta, cfg, 1, 1);
  REQUIRE(a.size() == 10);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].x == b[i].x);
    CHECK(a[i].label == ts::Label::Normal);
  }

  cfg.lambda = 0.6;
  std::vector<std::string> seen;
  auto prev = log::set_warning_sink([&](const std::string& s) { seen.push_back(s); });
  CHECK(mixup::build_mixed_dataset(d_train, d_meta, cfg, 1, 1).size() == 10);
  log::set_warning_sink(prev);
  CHECK(seen.size() == 1);

  CHECK_THROWS_AS(mixup::build_mixed_dataset(d_train, std::span<const ts::WindowPair>{}, cfg, 1, 1), DataError);
  cfg.lambda = 1.5;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
