#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "iadcps/neuralnet.hpp"
#include "iadcps/rng.hpp"
#include "iadcps/timeseries.hpp"

namespace iadcps::ssm {

/// Which point of the per-task update a parameter set comes from.
enum class Stage {
  Previous,  ///< model carried over from the preceding task
  Adapted,   ///< after standard training on the merged set
  Final,     ///< after the meta fine-tuning step
};

std::string to_string(Stage stage);
Stage parse_stage(const std::string& name);

struct Architecture {
  std::size_t window = 31;
  std::size_t sensors = 1;
  std::size_t actuators = 1;
  std::size_t latent = 8;
  std::vector<std::size_t> hidden = {64};
};

struct OptimizerState {
  nn::AdamState encoder;
  nn::AdamState transition;
  nn::AdamState emission;
};

/// Neural state-space model: y_hat = emission(transition(encoder(x) ++ u)).
///
/// encoder:    window * (m + k) -> latent
/// transition: latent + k       -> latent
/// emission:   latent           -> m
struct SsmModel {
  nn::DenseNet encoder;
  nn::DenseNet transition;
  nn::DenseNet emission;
  Stage stage = Stage::Previous;
  std::size_t window = 0;
  std::size_t sensors = 0;
  std::size_t actuators = 0;
  OptimizerState optimizer;

  static SsmModel create(const Architecture& arch, Rng& rng, double learning_rate = 1e-5);
  /// Builds a model from explicit nets and checks the dimension chain.
  static SsmModel assemble(nn::DenseNet encoder, nn::DenseNet transition, nn::DenseNet emission,
                           std::size_t window, std::size_t sensors, std::size_t actuators,
                           double learning_rate = 1e-5);

  std::size_t latent() const { return encoder.output_size(); }
  std::size_t parameter_count() const;
  void validate() const;
  void reset_optimizer(double learning_rate);

  /// Parameter equality; optimizer state and stage are ignored.
  bool same_parameters(const SsmModel& other) const;
};

Eigen::VectorXd encode(const SsmModel& model, const Eigen::VectorXd& window);
Eigen::VectorXd transition(const SsmModel& model, const Eigen::VectorXd& latent, const Eigen::VectorXd& u);
Eigen::VectorXd emit(const SsmModel& model, const Eigen::VectorXd& latent);
Eigen::VectorXd predict(const SsmModel& model, const ts::WindowPair& pair);

struct LossWeights {
  double recon = 1.0;
  double latent = 1.0;
};

struct TrainConfig {
  std::size_t epochs = 100;
  double learning_rate = 1e-5;
  double meta_learning_rate = 1e-5;
  std::size_t episodes = 10;
  std::size_t batch_size = 32;
  double recon_weight = 1.0;
  double latent_weight = 1.0;
  std::uint64_t seed = 0;

  LossWeights weights() const { return {recon_weight, latent_weight}; }

  void validate() const;
};

struct Gradient {
  Eigen::VectorXd encoder;
  Eigen::VectorXd transition;
  Eigen::VectorXd emission;
};

struct LossGradient {
  double loss = 0.0;
  Gradient grad;
};

/// Mean over pairs of
///     mean_j (y_hat - y)^2
///   + recon  * mean_j (emission(encoder(x)) - s_last)^2
///   + latent * mean_i (transition(encoder(x), u) - encoder(x_next))^2
/// where s_last are the sensors at the window's final step and x_next is the
/// window one step later (target sensors appended, actuators held at u).
LossGradient loss_and_grad(const SsmModel& model, std::span<const ts::WindowPair> pairs, const LossWeights& weights);
double loss(const SsmModel& model, std::span<const ts::WindowPair> pairs, const LossWeights& weights);

/// Mini-batch Adam over `merge` for cfg.epochs. The returned model is tagged Adapted.
/// trajectory (optional) receives the loss before training followed by each
/// epoch's sample-weighted mean batch loss.
SsmModel train_standard(SsmModel model, std::span<const ts::WindowPair> merge, const TrainConfig& cfg,
                        std::vector<double>* trajectory = nullptr);

/// Splits d_meta into cfg.episodes contiguous support sets and, in order, takes one
/// plain gradient step on each support set's prediction loss. Tagged Final.
SsmModel meta_finetune(SsmModel model, std::span<const ts::WindowPair> d_meta, const TrainConfig& cfg);

/// Contiguous, near-equal split points: support set e covers [bounds[e], bounds[e+1]).
std::vector<std::size_t> support_bounds(std::size_t count, std::size_t episodes);

nlohmann::json to_json(const SsmModel& model);
SsmModel model_from_json(const nlohmann::json& j);
void save_checkpoint(const SsmModel& model, const std::string& path);
SsmModel load_checkpoint(const std::string& path);

}  // namespace iadcps::ssm
