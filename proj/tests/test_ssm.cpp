#include <doctest.h>

#include <filesystem>

#include "iadcps/error.hpp"
#include "iadcps/log.hpp"
#include "iadcps/simulator.hpp"
#include "iadcps/ssm.hpp"
#include "oracles.hpp"

using namespace iadcps;

namespace {

nn::DenseNet scalar(double w) {
  nn::DenseNet net({1, 1});
  net.weight(0)(0, 0) = w;
  return net;
}

// y_hat = w * x with window 1, one sensor and no actuators
ssm::SsmModel chain(double w) { return ssm::SsmModel::assemble(scalar(1.0), scalar(w), scalar(1.0), 1, 1, 0); }

ts::WindowPair scalar_pair(double x, double y) {
  return {Eigen::VectorXd::Constant(1, x), Eigen::VectorXd(0), Eigen::VectorXd::Constant(1, y), 0, ts::Label::Normal};
}

std::vector<ts::WindowPair> plant_pairs(std::size_t n, std::size_t w) {
  sim::SimConfig cfg;
  cfg.length = n + w;
  cfg.meas_noise_std = cfg.proc_noise_std = 0.0;
  auto s = sim::simulate(cfg);
  s = ts::apply_norm(s, ts::fit_norm(s));
  return ts::sliding_pairs(s, w);
}

ssm::SsmModel small_model(std::uint64_t seed, std::size_t w = 4) {
  Rng rng(seed);
  return ssm::SsmModel::create({w, 1, 1, 3, {6}}, rng);
}

}  // namespace

TEST_CASE("model shapes") {
  Rng rng(1);
  const auto m = ssm::SsmModel::create({31, 2, 1, 8, {64}}, rng);
  CHECK(m.encoder.sizes() == std::vector<std::size_t>{93, 64, 8});
  CHECK(m.transition.sizes() == std::vector<std::size_t>{9, 64, 8});
  CHECK(m.emission.sizes() == std::vector<std::size_t>{8, 64, 2});
  CHECK(m.latent() == 8);
  CHECK_THROWS_AS(ssm::SsmModel::assemble(scalar(1), scalar(1), scalar(1), 2, 1, 0), ConfigError);
}

TEST_CASE("predict") {
  Rng rng(2);
  auto m = ssm::SsmModel::create({3, 1, 1, 2, {4}}, rng);
  m.encoder.params().setZero();
  m.transition.params().setZero();
  m.emission.params().setZero();
  m.emission.bias(1)[0] = 0.25;
  ts::WindowPair p{Eigen::VectorXd::Random(6), Eigen::VectorXd::Ones(1), Eigen::VectorXd::Zero(1), 0, {}};
  CHECK(ssm::predict(m, p)[0] == 0.25);

  CHECK(ssm::predict(chain(1.0), scalar_pair(0.7, 0.0))[0] == 0.7);

  const auto r = small_model(9);
  const auto q = plant_pairs(3, 4)[0];
  CHECK(ssm::predict(r, q) == ssm::predict(small_model(9), q));
}

TEST_CASE("training loss gradient matches central differences") {
  Rng rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t w = 2 + rng.below(3), m = 1 + rng.below(2), k = rng.below(3);
    const std::size_t z = 2 + rng.below(3), hidden = 3 + rng.below(5);
    auto model = ssm::SsmModel::create({w, m, k, z, {hidden}}, rng);
    for (auto* net : {&model.encoder, &model.transition, &model.emission})
      for (auto& v : net->params()) v += 0.05 * rng.gaussian();
    const auto pairs = oracle::random_pairs(rng, 5, w, m, k);
    const ssm::LossWeights weights{rng.uniform(0.0, 2.0), rng.uniform(0.0, 2.0)};
    const auto lg = ssm::loss_and_grad(model, pairs, weights);
    CHECK(lg.loss == doctest::Approx(ssm::loss(model, pairs, weights)).epsilon(1e-12));
    CHECK(oracle::max_rel_err(oracle::flatten(lg.grad), oracle::fd_gradient(model, pairs, weights)) < 1e-4);
  }
}

TEST_CASE("train_standard") {
  const auto pairs = plant_pairs(50, 4);
  ssm::TrainConfig cfg;
  cfg.seed = 3;

  SUBCASE("loss decreases on clean data") {
    std::vector<double> traj;
    const auto trained = ssm::train_standard(small_model(1), pairs, cfg, &traj);
    REQUIRE(traj.size() == cfg.epochs + 1);
    CHECK(traj.back() < traj.front());
    CHECK(trained.stage == ssm::Stage::Adapted);
    CHECK(trained.optimizer.encoder.step > 0);
  }
  SUBCASE("bitwise reproducible") {
    cfg.epochs = 5;
    const auto a = ssm::train_standard(small_model(1), pairs, cfg);
    const auto b = ssm::train_standard(small_model(1), pairs, cfg);
    CHECK(a.same_parameters(b));
  }
  SUBCASE("targets already predicted leave the model fixed") {
    const auto model = small_model(5);
    auto fixed = pairs;
    for (auto& p : fixed) p.y = ssm::predict(model, p);
    cfg.recon_weight = cfg.latent_weight = 0.0;
    cfg.epochs = 3;
    std::vector<double> traj;
    const auto trained = ssm::train_standard(model, fixed, cfg, &traj);
    CHECK(trained.same_parameters(model));
    for (double l : traj) CHECK(l == 0.0);
  }
  SUBCASE("empty merge set") {
    CHECK_THROWS_AS(ssm::train_standard(small_model(1), std::span<const ts::WindowPair>{}, cfg), DataError);
  }
}

TEST_CASE("meta_finetune") {
  ssm::TrainConfig cfg;
  cfg.meta_learning_rate = 0.1;

  SUBCASE("hand step") {
    cfg.episodes = 1;
    const std::vector<ts::WindowPair> support{scalar_pair(1.0, 0.0)};
    const auto out = ssm::meta_finetune(chain(1.0), support, cfg);
    // d/dw (w x - y)^2 = 2 at w = 1
    CHECK(out.transition.weight(0)(0, 0) == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(out.stage == ssm::Stage::Final);
  }
  SUBCASE("zero rate is the identity") {
    cfg.meta_learning_rate = 0.0;
    const auto model = small_model(2);
    CHECK(ssm::meta_finetune(model, plant_pairs(20, 4), cfg).same_parameters(model));
  }
  SUBCASE("sequential support sets") {
    cfg.episodes = 2;
    const auto pairs = plant_pairs(4, 4);
    const auto model = small_model(4);
    auto manual = model;
    for (std::size_t first : {0u, 2u}) {
      const auto lg = ssm::loss_and_grad(manual, std::span(pairs).subspan(first, 2), {0.0, 0.0});
      nn::sgd_step(manual.encoder.params(), lg.grad.encoder, 0.1);
      nn::sgd_step(manual.transition.params(), lg.grad.transition, 0.1);
      nn::sgd_step(manual.emission.params(), lg.grad.emission, 0.1);
    }
    const auto out = ssm::meta_finetune(model, pairs, cfg);
    CHECK(out.same_parameters(manual));

    cfg.episodes = 1;
    CHECK_FALSE(ssm::meta_finetune(model, pairs, cfg).same_parameters(out));
  }
  SUBCASE("one episode is one full-set gradient step") {
    cfg.episodes = 1;
    const auto pairs = plant_pairs(12, 4);
    const auto model = small_model(6);
    const auto lg = ssm::loss_and_grad(model, pairs, {0.0, 0.0});
    const auto out = ssm::meta_finetune(model, pairs, cfg);
    const Eigen::VectorXd expect = model.transition.params() - 0.1 * lg.grad.transition;
    CHECK((out.transition.params() - expect).cwiseAbs().maxCoeff() <= 1e-12);
  }
  SUBCASE("more episodes than pairs warns") {
    cfg.episodes = 10;
    std::vector<std::string> seen;
    auto prev = log::set_warning_sink([&](const std::string& m) { seen.push_back(m); });
    ssm::meta_finetune(small_model(1), plant_pairs(3, 4), cfg);
    log::set_warning_sink(prev);
    CHECK(seen.size() == 1);
  }
}

TEST_CASE("support bounds") {
  CHECK(ssm::support_bounds(10, 3) == std::vector<std::size_t>{0, 3, 6, 10});
  CHECK(ssm::support_bounds(4, 2) == std::vector<std::size_t>{0, 2, 4});
}

TEST_CASE("checkpoint round trip") {
  ssm::TrainConfig cfg;
  cfg.epochs = 2;
  auto model = ssm::train_standard(small_model(7), plant_pairs(20, 4), cfg);
  const auto path = std::filesystem::temp_directory_path() / "iadcps_ckpt_test.json";
  ssm::save_checkpoint(model, path.string());
  const auto back = ssm::load_checkpoint(path.string());
  std::filesystem::remove(path);
  CHECK(back.same_parameters(model));
  CHECK(back.stage == model.stage);
  CHECK(back.optimizer.emission.step == model.optimizer.emission.step);
  CHECK(back.optimizer.emission.second_moment == model.optimizer.emission.second_moment);
  CHECK(ssm::to_json(back) == ssm::to_json(model));

  auto j = ssm::to_json(model);
  j["window"] = 5;
  CHECK_THROWS_AS(ssm::model_from_json(j), DataError);
  CHECK_THROWS_AS(ssm::load_checkpoint("/nonexistent/ckpt.json"), DataError);
}
