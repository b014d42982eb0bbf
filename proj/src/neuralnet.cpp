#include "iadcps/neuralnet.hpp"

#include <cmath>
#include <string>

#include "iadcps/error.hpp"

namespace iadcps::nn {

DenseNet::DenseNet(std::vector<std::size_t> sizes) : sizes_(std::move(sizes)) {
  if (sizes_.size() < 2) throw ConfigError("a network needs at least an input and an output size");
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    if (sizes_[l] == 0 || sizes_[l + 1] == 0) throw ConfigError("layer sizes must be positive");
    offsets_.push_back(total);
    total += sizes_[l + 1] * sizes_[l] + sizes_[l + 1];
  }
  params_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(total));
}

DenseNet DenseNet::glorot(std::vector<std::size_t> sizes, Rng& rng) {
  DenseNet net(std::move(sizes));
  for (std::size_t l = 0; l < net.layers(); ++l) {
    const double limit = std::sqrt(6.0 / static_cast<double>(net.sizes_[l] + net.sizes_[l + 1]));
    auto w = net.weight(l);
    for (Eigen::Index c = 0; c < w.cols(); ++c)
      for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, c) = rng.uniform(-limit, limit);
  }
  return net;
}

Eigen::Map<Eigen::MatrixXd> DenseNet::weight(std::size_t layer) {
  return {params_.data() + offsets_[layer], static_cast<Eigen::Index>(sizes_[layer + 1]),
          static_cast<Eigen::Index>(sizes_[layer])};
}

Eigen::Map<const Eigen::MatrixXd> DenseNet::weight(std::size_t layer) const {
  return {params_.data() + offsets_[layer], static_cast<Eigen::Index>(sizes_[layer + 1]),
          static_cast<Eigen::Index>(sizes_[layer])};
}

Eigen::Map<Eigen::VectorXd> DenseNet::bias(std::size_t layer) {
  return {params_.data() + offsets_[layer] + sizes_[layer + 1] * sizes_[layer],
          static_cast<Eigen::Index>(sizes_[layer + 1])};
}

Eigen::Map<const Eigen::VectorXd> DenseNet::bias(std::size_t layer) const {
  return {params_.data() + offsets_[layer] + sizes_[layer + 1] * sizes_[layer],
          static_cast<Eigen::Index>(sizes_[layer + 1])};
}

Eigen::VectorXd DenseNet::forward(const Eigen::VectorXd& input) const {
  if (static_cast<std::size_t>(input.size()) != input_size())
    throw DataError("network expects input of size " + std::to_string(input_size()) + ", got " +
                    std::to_string(input.size()));
  Eigen::VectorXd a = input;
  for (std::size_t l = 0; l < layers(); ++l) {
    Eigen::VectorXd next = weight(l) * a + bias(l);
    if (l + 1 < layers()) next = next.cwiseMax(0.0);
    a = std::move(next);
  }
  return a;
}

Eigen::MatrixXd DenseNet::forward_batch(const Eigen::MatrixXd& inputs, Tape* tape) const {
  if (static_cast<std::size_t>(inputs.rows()) != input_size())
    throw DataError("network expects input of size " + std::to_string(input_size()) + ", got " +
                    std::to_string(inputs.rows()));
  if (tape) {
    tape->activations.clear();
    tape->activations.push_back(inputs);
  }
  Eigen::MatrixXd a = inputs;
  for (std::size_t l = 0; l < layers(); ++l) {
    Eigen::MatrixXd next = weight(l) * a;
    next.colwise() += bias(l);
    if (l + 1 < layers()) next = next.cwiseMax(0.0);
    a = std::move(next);
    if (tape) tape->activations.push_back(a);
  }
  return a;
}

Eigen::MatrixXd DenseNet::backward(const Tape& tape, const Eigen::MatrixXd& d_output,
                                   Eigen::Ref<Eigen::VectorXd> grad) const {
  if (tape.activations.size() != layers() + 1) throw Error("tape does not belong to this network");
  if (grad.size() != params_.size()) throw Error("gradient buffer has the wrong size");
  Eigen::MatrixXd delta = d_output;
  for (std::size_t l = layers(); l-- > 0;) {
    if (l + 1 < layers()) delta = (tape.activations[l + 1].array() > 0.0).select(delta, 0.0);
    const auto rows = static_cast<Eigen::Index>(sizes_[l + 1]);
    const auto cols = static_cast<Eigen::Index>(sizes_[l]);
    Eigen::Map<Eigen::MatrixXd> gw(grad.data() + offsets_[l], rows, cols);
    Eigen::Map<Eigen::VectorXd> gb(grad.data() + offsets_[l] + sizes_[l + 1] * sizes_[l], rows);
    gw.noalias() += delta * tape.activations[l].transpose();
    gb += delta.rowwise().sum();
    delta = weight(l).transpose() * delta;
  }
  return delta;
}

bool DenseNet::operator==(const DenseNet& other) const {
  return sizes_ == other.sizes_ && params_.size() == other.params_.size() &&
         (params_.array() == other.params_.array()).all();
}

LossGrad grad(const DenseNet& net, const Eigen::VectorXd& input, const Eigen::VectorXd& target) {
  if (static_cast<std::size_t>(target.size()) != net.output_size())
    throw DataError("target size does not match network output");
  Tape tape;
  const Eigen::MatrixXd out = net.forward_batch(input, &tape);
  const Eigen::VectorXd diff = out.col(0) - target;
  const double n = static_cast<double>(diff.size());
  LossGrad result;
  result.loss = diff.squaredNorm() / n;
  if (!std::isfinite(result.loss)) throw NumericalError("non-finite loss in gradient evaluation");
  result.gradient = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(net.parameter_count()));
  net.backward(tape, (2.0 / n) * diff, result.gradient);
  if (!result.gradient.allFinite()) throw NumericalError("non-finite gradient");
  return result;
}

AdamState::AdamState(std::size_t parameters, double lr)
    : first_moment(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(parameters))),
      second_moment(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(parameters))),
      learning_rate(lr) {}

void adam_step(AdamState& state, Eigen::Ref<Eigen::VectorXd> params, const Eigen::VectorXd& grads) {
  if (params.size() != grads.size() || state.first_moment.size() != params.size())
    throw Error("optimizer state does not match parameter shape");
  ++state.step;
  state.first_moment = state.beta1 * state.first_moment + (1.0 - state.beta1) * grads;
  state.second_moment = state.beta2 * state.second_moment + (1.0 - state.beta2) * grads.cwiseAbs2();
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  params.array() -= state.learning_rate * (state.first_moment.array() / c1) /
                    ((state.second_moment.array() / c2).sqrt() + state.epsilon);
}

void sgd_step(Eigen::Ref<Eigen::VectorXd> params, const Eigen::VectorXd& grads, double rate) {
  if (params.size() != grads.size()) throw Error("gradient does not match parameter shape");
  params -= rate * grads;
}

nlohmann::json to_json(const DenseNet& net) {
  return {{"sizes", net.sizes()},
          {"params", std::vector<double>(net.params().data(), net.params().data() + net.params().size())}};
}

DenseNet dense_net_from_json(const nlohmann::json& j) {
  DenseNet net(j.at("sizes").get<std::vector<std::size_t>>());
  const auto params = j.at("params").get<std::vector<double>>();
  if (params.size() != net.parameter_count())
    throw DataError("checkpoint has " + std::to_string(params.size()) + " parameters, layer sizes imply " +
                    std::to_string(net.parameter_count()));
  net.params() = Eigen::Map<const Eigen::VectorXd>(params.data(), static_cast<Eigen::Index>(params.size()));
  if (!net.params().allFinite()) throw DataError("checkpoint contains non-finite parameters");
  return net;
}

}  // namespace iadcps::nn
