#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Core>

#include <json.hpp>
#include "iadcps/rng.hpp"

namespace iadcps::nn {

/// Activations recorded by a batched forward pass, one column per sample.
/// activations[0] is the input, activations[l + 1] the output of layer l.
struct Tape {
  std::vector<Eigen::MatrixXd> activations;
};

/// Fully connected network: rectifier on hidden layers, linear output.
///
/// All parameters live in one flat vector. Layer l occupies a column-major
/// (out x in) weight block followed by its out-sized bias, layers in order.
class DenseNet {
 public:
  DenseNet() = default;
  /// Zero-initialized network. sizes = {input, hidden..., output}.
  explicit DenseNet(std::vector<std::size_t> sizes);
  /// Uniform in +-sqrt(6 / (fan_in + fan_out)) per weight, zero biases.
  static DenseNet glorot(std::vector<std::size_t> sizes, Rng& rng);

  const std::vector<std::size_t>& sizes() const { return sizes_; }
  std::size_t layers() const { return sizes_.empty() ? 0 : sizes_.size() - 1; }
  std::size_t input_size() const { return sizes_.front(); }
  std::size_t output_size() const { return sizes_.back(); }
  std::size_t parameter_count() const { return static_cast<std::size_t>(params_.size()); }

  Eigen::VectorXd& params() { return params_; }
  const Eigen::VectorXd& params() const { return params_; }

  Eigen::Map<Eigen::MatrixXd> weight(std::size_t layer);
  Eigen::Map<const Eigen::MatrixXd> weight(std::size_t layer) const;
  Eigen::Map<Eigen::VectorXd> bias(std::size_t layer);
  Eigen::Map<const Eigen::VectorXd> bias(std::size_t layer) const;

  Eigen::VectorXd forward(const Eigen::VectorXd& input) const;
  Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& inputs, Tape* tape = nullptr) const;

  /// Back-propagates d_output (output x batch) through a recorded pass.
  /// Parameter gradients are added into grad; the input gradient is returned.
  Eigen::MatrixXd backward(const Tape& tape, const Eigen::MatrixXd& d_output, Eigen::Ref<Eigen::VectorXd> grad) const;

  bool operator==(const DenseNet& other) const;

 private:
  std::vector<std::size_t> sizes_;
  std::vector<std::size_t> offsets_;
  Eigen::VectorXd params_;
};

struct LossGrad {
  double loss = 0.0;
  Eigen::VectorXd gradient;
};

/// Mean squared error over the output vector and its parameter gradient.
LossGrad grad(const DenseNet& net, const Eigen::VectorXd& input, const Eigen::VectorXd& target);

struct AdamState {
  AdamState() = default;
  AdamState(std::size_t parameters, double learning_rate);

  Eigen::VectorXd first_moment;
  Eigen::VectorXd second_moment;
  long step = 0;
  double learning_rate = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

void adam_step(AdamState& state, Eigen::Ref<Eigen::VectorXd> params, const Eigen::VectorXd& grads);
void sgd_step(Eigen::Ref<Eigen::VectorXd> params, const Eigen::VectorXd& grads, double rate);

nlohmann::json to_json(const DenseNet& net);
DenseNet dense_net_from_json(const nlohmann::json& j);

}  // namespace iadcps::nn
