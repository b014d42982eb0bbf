#include "iadcps/ssm.hpp"

#include <cmath>
#include <fstream>
#include <numeric>

#include "iadcps/error.hpp"
#include "iadcps/log.hpp"

namespace iadcps::ssm {

std::string to_string(Stage stage) {
  switch (stage) {
    case Stage::Previous: return "previous";
    case Stage::Adapted: return "adapted";
    case Stage::Final: return "final";
  }
  return "?";
}

Stage parse_stage(const std::string& name) {
  if (name == "previous") return Stage::Previous;
  if (name == "adapted") return Stage::Adapted;
  if (name == "final") return Stage::Final;
  throw DataError("unknown model stage '" + name + "'");
}

// ---------------------------------------------------------------------------
// Model

namespace {

std::vector<std::size_t> layer_sizes(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out) {
  std::vector<std::size_t> sizes{in};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(out);
  return sizes;
}

}  // namespace

SsmModel SsmModel::create(const Architecture& arch, Rng& rng, double learning_rate) {
  if (arch.window == 0 || arch.sensors == 0 || arch.latent == 0)
    throw ConfigError("window, sensor count and latent size must be positive");
  const std::size_t width = arch.sensors + arch.actuators;
  auto encoder = nn::DenseNet::glorot(layer_sizes(arch.window * width, arch.hidden, arch.latent), rng);
  auto transition = nn::DenseNet::glorot(layer_sizes(arch.latent + arch.actuators, arch.hidden, arch.latent), rng);
  auto emission = nn::DenseNet::glorot(layer_sizes(arch.latent, arch.hidden, arch.sensors), rng);
  return assemble(std::move(encoder), std::move(transition), std::move(emission), arch.window, arch.sensors,
                  arch.actuators, learning_rate);
}

SsmModel SsmModel::assemble(nn::DenseNet encoder, nn::DenseNet transition, nn::DenseNet emission,
                            std::size_t window, std::size_t sensors, std::size_t actuators, double learning_rate) {
  SsmModel model;
  model.encoder = std::move(encoder);
  model.transition = std::move(transition);
  model.emission = std::move(emission);
  model.window = window;
  model.sensors = sensors;
  model.actuators = actuators;
  model.validate();
  model.reset_optimizer(learning_rate);
  return model;
}

std::size_t SsmModel::parameter_count() const {
  return encoder.parameter_count() + transition.parameter_count() + emission.parameter_count();
}

void SsmModel::validate() const {
  const std::size_t z = encoder.output_size();
  if (encoder.input_size() != window * (sensors + actuators))
    throw ConfigError("encoder input does not match window * channels");
  if (transition.input_size() != z + actuators) throw ConfigError("transition input must be latent + actuators");
  if (transition.output_size() != z) throw ConfigError("transition output must match the latent size");
  if (emission.input_size() != z) throw ConfigError("emission input must match the latent size");
  if (emission.output_size() != sensors) throw ConfigError("emission output must match the sensor count");
}

void SsmModel::reset_optimizer(double learning_rate) {
  optimizer.encoder = nn::AdamState(encoder.parameter_count(), learning_rate);
  optimizer.transition = nn::AdamState(transition.parameter_count(), learning_rate);
  optimizer.emission = nn::AdamState(emission.parameter_count(), learning_rate);
}

bool SsmModel::same_parameters(const SsmModel& other) const {
  return encoder == other.encoder && transition == other.transition && emission == other.emission;
}

Eigen::VectorXd encode(const SsmModel& model, const Eigen::VectorXd& window) { return model.encoder.forward(window); }

Eigen::VectorXd transition(const SsmModel& model, const Eigen::VectorXd& latent, const Eigen::VectorXd& u) {
  Eigen::VectorXd input(latent.size() + u.size());
  input << latent, u;
  return model.transition.forward(input);
}

Eigen::VectorXd emit(const SsmModel& model, const Eigen::VectorXd& latent) { return model.emission.forward(latent); }

Eigen::VectorXd predict(const SsmModel& model, const ts::WindowPair& pair) {
  if (static_cast<std::size_t>(pair.u.size()) != model.actuators ||
      static_cast<std::size_t>(pair.y.size()) != model.sensors)
    throw DataError("window pair dimensions do not match the model");
  return emit(model, transition(model, encode(model, pair.x), pair.u));
}

// ---------------------------------------------------------------------------
// Loss and gradient

void TrainConfig::validate() const {
  if (learning_rate < 0 || meta_learning_rate < 0) throw ConfigError("learning rates must be non-negative");
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  if (recon_weight < 0 || latent_weight < 0) throw ConfigError("loss weights must be non-negative");
}

namespace {

struct Batch {
  Eigen::MatrixXd x;
  Eigen::MatrixXd u;
  Eigen::MatrixXd y;
  Eigen::MatrixXd last;
};

template <typename IndexRange>
Batch gather(const SsmModel& model, std::span<const ts::WindowPair> pairs, const IndexRange& indices) {
  const auto n = static_cast<Eigen::Index>(indices.size());
  Batch b{Eigen::MatrixXd(static_cast<Eigen::Index>(model.encoder.input_size()), n),
          Eigen::MatrixXd(static_cast<Eigen::Index>(model.actuators), n),
          Eigen::MatrixXd(static_cast<Eigen::Index>(model.sensors), n),
          Eigen::MatrixXd(static_cast<Eigen::Index>(model.sensors), n)};
  Eigen::Index col = 0;
  for (std::size_t i : indices) {
    const auto& p = pairs[i];
    if (p.x.size() != b.x.rows() || p.u.size() != b.u.rows() || p.y.size() != b.y.rows())
      throw DataError("window pair dimensions do not match the model");
    b.x.col(col) = p.x;
    b.u.col(col) = p.u;
    b.y.col(col) = p.y;
    b.last.col(col) = ts::last_step_sensors(p, model.sensors, model.actuators);
    ++col;
  }
  return b;
}

// Window one step later: drop the first step, append the target sensors with the
// last actuators held.
Eigen::MatrixXd next_windows(const SsmModel& model, const Batch& b) {
  const auto width = static_cast<Eigen::Index>(model.sensors + model.actuators);
  const Eigen::Index rows = b.x.rows();
  Eigen::MatrixXd next(rows, b.x.cols());
  next.topRows(rows - width) = b.x.bottomRows(rows - width);
  next.middleRows(rows - width, static_cast<Eigen::Index>(model.sensors)) = b.y;
  next.bottomRows(static_cast<Eigen::Index>(model.actuators)) = b.u;
  return next;
}

Gradient zero_gradient(const SsmModel& model) {
  return {Eigen::VectorXd::Zero(static_cast<Eigen::Index>(model.encoder.parameter_count())),
          Eigen::VectorXd::Zero(static_cast<Eigen::Index>(model.transition.parameter_count())),
          Eigen::VectorXd::Zero(static_cast<Eigen::Index>(model.emission.parameter_count()))};
}

// Batch-mean loss; when grad is given, adds the batch-mean gradient scaled by `scale`.
double batch_loss(const SsmModel& model, const Batch& b, const LossWeights& weights, Gradient* grad,
                  double scale = 1.0) {
  const double count = static_cast<double>(b.x.cols());
  const double m = static_cast<double>(model.sensors);
  const auto z_dim = static_cast<Eigen::Index>(model.latent());

  nn::Tape tape_h, tape_f, tape_g, tape_r, tape_n;
  const Eigen::MatrixXd z = model.encoder.forward_batch(b.x, grad ? &tape_h : nullptr);
  Eigen::MatrixXd f_in(z.rows() + b.u.rows(), z.cols());
  f_in << z, b.u;
  const Eigen::MatrixXd z_next = model.transition.forward_batch(f_in, grad ? &tape_f : nullptr);
  const Eigen::MatrixXd y_hat = model.emission.forward_batch(z_next, grad ? &tape_g : nullptr);
  const Eigen::MatrixXd pred_err = y_hat - b.y;
  double total = pred_err.squaredNorm() / (m * count);

  Eigen::MatrixXd recon_err;
  const bool with_recon = weights.recon > 0.0;
  if (with_recon) {
    recon_err = model.emission.forward_batch(z, grad ? &tape_r : nullptr) - b.last;
    total += weights.recon * recon_err.squaredNorm() / (m * count);
  }
  Eigen::MatrixXd latent_err;
  const bool with_latent = weights.latent > 0.0;
  if (with_latent) {
    latent_err = z_next - model.encoder.forward_batch(next_windows(model, b), grad ? &tape_n : nullptr);
    total += weights.latent * latent_err.squaredNorm() / (static_cast<double>(z_dim) * count);
  }
  if (!std::isfinite(total)) throw NumericalError("non-finite training loss");
  if (!grad) return total;

  const double k = 2.0 * scale / (m * count);
  Eigen::MatrixXd d_z_next = model.emission.backward(tape_g, k * pred_err, grad->emission);
  if (with_latent) {
    const Eigen::MatrixXd d_latent = (2.0 * scale * weights.latent / (static_cast<double>(z_dim) * count)) * latent_err;
    d_z_next += d_latent;
    model.encoder.backward(tape_n, -d_latent, grad->encoder);
  }
  const Eigen::MatrixXd d_f_in = model.transition.backward(tape_f, d_z_next, grad->transition);
  Eigen::MatrixXd d_z = d_f_in.topRows(z_dim);
  if (with_recon) d_z += model.emission.backward(tape_r, (k * weights.recon) * recon_err, grad->emission);
  model.encoder.backward(tape_h, d_z, grad->encoder);
  return total;
}

std::vector<std::size_t> iota_indices(std::size_t first, std::size_t last) {
  std::vector<std::size_t> v(last - first);
  std::iota(v.begin(), v.end(), first);
  return v;
}

}  // namespace

LossGradient loss_and_grad(const SsmModel& model, std::span<const ts::WindowPair> pairs, const LossWeights& weights) {
  if (pairs.empty()) throw DataError("loss over an empty set of pairs");
  LossGradient out{0.0, zero_gradient(model)};
  out.loss = batch_loss(model, gather(model, pairs, iota_indices(0, pairs.size())), weights, &out.grad);
  return out;
}

double loss(const SsmModel& model, std::span<const ts::WindowPair> pairs, const LossWeights& weights) {
  if (pairs.empty()) throw DataError("loss over an empty set of pairs");
  // chunked so large sets do not materialize one huge matrix
  constexpr std::size_t kChunk = 1024;
  double weighted = 0.0;
  for (std::size_t first = 0; first < pairs.size(); first += kChunk) {
    const std::size_t last = std::min(pairs.size(), first + kChunk);
    weighted += static_cast<double>(last - first) *
                batch_loss(model, gather(model, pairs, iota_indices(first, last)), weights, nullptr);
  }
  return weighted / static_cast<double>(pairs.size());
}

// ---------------------------------------------------------------------------
// Training

SsmModel train_standard(SsmModel model, std::span<const ts::WindowPair> merge, const TrainConfig& cfg,
                        std::vector<double>* trajectory) {
  cfg.validate();
  if (merge.empty()) throw DataError("standard training needs a non-empty merged set");
  for (auto* state : {&model.optimizer.encoder, &model.optimizer.transition, &model.optimizer.emission})
    state->learning_rate = cfg.learning_rate;

  if (trajectory) {
    trajectory->clear();
    trajectory->push_back(loss(model, merge, cfg.weights()));
  }

  Rng rng(cfg.seed);
  std::vector<std::size_t> order = iota_indices(0, merge.size());
  Gradient grad = zero_gradient(model);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    double epoch_loss = 0.0;
    for (std::size_t first = 0; first < order.size(); first += cfg.batch_size) {
      const std::size_t last = std::min(order.size(), first + cfg.batch_size);
      const std::span<const std::size_t> indices(order.data() + first, last - first);
      grad.encoder.setZero();
      grad.transition.setZero();
      grad.emission.setZero();
      double batch = 0.0;
      try {
        batch = batch_loss(model, gather(model, merge, indices), cfg.weights(), &grad);
      } catch (const NumericalError&) {
        throw NumericalError("non-finite training loss at epoch " + std::to_string(epoch) + ", batch starting " +
                             std::to_string(first));
      }
      epoch_loss += batch * static_cast<double>(indices.size());
      nn::adam_step(model.optimizer.encoder, model.encoder.params(), grad.encoder);
      nn::adam_step(model.optimizer.transition, model.transition.params(), grad.transition);
      nn::adam_step(model.optimizer.emission, model.emission.params(), grad.emission);
    }
    if (trajectory) trajectory->push_back(epoch_loss / static_cast<double>(order.size()));
  }
  model.stage = Stage::Adapted;
  return model;
}

std::vector<std::size_t> support_bounds(std::size_t count, std::size_t episodes) {
  std::vector<std::size_t> bounds{0};
  for (std::size_t e = 1; e <= episodes; ++e) bounds.push_back(e * count / episodes);
  return bounds;
}

SsmModel meta_finetune(SsmModel model, std::span<const ts::WindowPair> d_meta, const TrainConfig& cfg) {
  cfg.validate();
  if (d_meta.empty()) throw DataError("meta fine-tuning needs a non-empty meta set");
  std::size_t episodes = cfg.episodes;
  if (episodes > d_meta.size()) {
    log::warn("meta fine-tuning: " + std::to_string(episodes) + " episodes exceed " +
              std::to_string(d_meta.size()) + " meta pairs; reducing episodes");
    episodes = d_meta.size();
  }
  const auto bounds = support_bounds(d_meta.size(), episodes);
  for (std::size_t e = 0; e < episodes; ++e) {
    const auto support = d_meta.subspan(bounds[e], bounds[e + 1] - bounds[e]);
    const LossGradient lg = loss_and_grad(model, support, LossWeights{0.0, 0.0});
    nn::sgd_step(model.encoder.params(), lg.grad.encoder, cfg.meta_learning_rate);
    nn::sgd_step(model.transition.params(), lg.grad.transition, cfg.meta_learning_rate);
    nn::sgd_step(model.emission.params(), lg.grad.emission, cfg.meta_learning_rate);
  }
  model.stage = Stage::Final;
  return model;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

nlohmann::json adam_to_json(const nn::AdamState& s) {
  auto vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  return {{"step", s.step}, {"learning_rate", s.learning_rate}, {"first_moment", vec(s.first_moment)},
          {"second_moment", vec(s.second_moment)}};
}

nn::AdamState adam_from_json(const nlohmann::json& j, std::size_t parameters) {
  nn::AdamState s(parameters, j.at("learning_rate").get<double>());
  s.step = j.at("step").get<long>();
  const auto m = j.at("first_moment").get<std::vector<double>>();
  const auto v = j.at("second_moment").get<std::vector<double>>();
  if (m.size() != parameters || v.size() != parameters) throw DataError("optimizer state does not match parameters");
  s.first_moment = Eigen::Map<const Eigen::VectorXd>(m.data(), static_cast<Eigen::Index>(m.size()));
  s.second_moment = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
  return s;
}

constexpr const char* kFormat = "iadcps-ssm";
constexpr int kVersion = 1;

}  // namespace

nlohmann::json to_json(const SsmModel& model) {
  return {{"format", kFormat},
          {"version", kVersion},
          {"stage", to_string(model.stage)},
          {"window", model.window},
          {"sensors", model.sensors},
          {"actuators", model.actuators},
          {"encoder", nn::to_json(model.encoder)},
          {"transition", nn::to_json(model.transition)},
          {"emission", nn::to_json(model.emission)},
          {"optimizer",
           {{"encoder", adam_to_json(model.optimizer.encoder)},
            {"transition", adam_to_json(model.optimizer.transition)},
            {"emission", adam_to_json(model.optimizer.emission)}}}};
}

SsmModel model_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != kFormat) throw DataError("not an SSM checkpoint");
    if (j.at("version").get<int>() != kVersion) throw DataError("unsupported checkpoint version");
    SsmModel model = SsmModel::assemble(
        nn::dense_net_from_json(j.at("encoder")), nn::dense_net_from_json(j.at("transition")),
        nn::dense_net_from_json(j.at("emission")), j.at("window").get<std::size_t>(),
        j.at("sensors").get<std::size_t>(), j.at("actuators").get<std::size_t>());
    model.stage = parse_stage(j.at("stage").get<std::string>());
    if (j.contains("optimizer")) {
      const auto& o = j.at("optimizer");
      model.optimizer.encoder = adam_from_json(o.at("encoder"), model.encoder.parameter_count());
      model.optimizer.transition = adam_from_json(o.at("transition"), model.transition.parameter_count());
      model.optimizer.emission = adam_from_json(o.at("emission"), model.emission.parameter_count());
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed checkpoint: ") + e.what());
  } catch (const ConfigError& e) {
    throw DataError(std::string("inconsistent checkpoint: ") + e.what());
  }
}

void save_checkpoint(const SsmModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << to_json(model).dump() << '\n';
}

SsmModel load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
  return model_from_json(j);
}

}  // namespace iadcps::ssm
