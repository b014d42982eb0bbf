#include "iadcps/scoring.hpp"

#include <cmath>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "iadcps/error.hpp"

namespace iadcps::scoring {

NoiseModel estimate_noise(const ssm::SsmModel& model, std::span<const ts::WindowPair> pairs, double floor) {
  if (pairs.size() < 10)
    throw DataError("noise estimation needs at least 10 pairs, got " + std::to_string(pairs.size()));
  const auto n = static_cast<Eigen::Index>(pairs.size());
  Eigen::MatrixXd residuals(static_cast<Eigen::Index>(model.sensors), n);
  Eigen::MatrixXd latents(static_cast<Eigen::Index>(model.latent()), n);
  Eigen::MatrixXd forecasts(static_cast<Eigen::Index>(model.latent()), n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& p = pairs[static_cast<std::size_t>(i)];
    latents.col(i) = ssm::encode(model, p.x);
    forecasts.col(i) = ssm::transition(model, latents.col(i), p.u);
    residuals.col(i) = p.y - ssm::emit(model, forecasts.col(i));
  }
  auto variance = [](const Eigen::MatrixXd& samples) -> Eigen::VectorXd {
    const Eigen::VectorXd mean = samples.rowwise().mean();
    return (samples.colwise() - mean).cwiseAbs2().rowwise().sum() / static_cast<double>(samples.cols());
  };
  const Eigen::MatrixXd drift = latents.rightCols(n - 1) - forecasts.leftCols(n - 1);
  return {variance(drift).cwiseMax(floor), variance(residuals).cwiseMax(floor)};
}

SigmaPoints sigma_points(const Eigen::VectorXd& mean, const Eigen::MatrixXd& covariance, double kappa) {
  const Eigen::Index n = mean.size();
  const double spread = static_cast<double>(n) + kappa;
  if (!(spread > 0)) throw NumericalError("sigma-point spread must be positive");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(nearest_psd(covariance));
  const Eigen::MatrixXd root =
      eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() * std::sqrt(spread);

  SigmaPoints sp{Eigen::MatrixXd(n, 2 * n + 1), Eigen::VectorXd::Constant(2 * n + 1, 0.5 / spread)};
  sp.points.col(0) = mean;
  sp.weights[0] = kappa / spread;
  for (Eigen::Index i = 0; i < n; ++i) {
    sp.points.col(1 + i) = mean + root.col(i);
    sp.points.col(1 + n + i) = mean - root.col(i);
  }
  return sp;
}

Eigen::MatrixXd nearest_psd(const Eigen::MatrixXd& m) {
  const Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
  if (eig.info() != Eigen::Success) throw NumericalError("eigendecomposition of covariance failed");
  if (eig.eigenvalues().minCoeff() >= 0.0) return sym;
  return eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).asDiagonal() * eig.eigenvectors().transpose();
}

namespace {

// Factor S, adding jitter * I (growing tenfold) until it is positive definite.
Eigen::LLT<Eigen::MatrixXd> factor(const Eigen::MatrixXd& s, double jitter) {
  Eigen::LLT<Eigen::MatrixXd> llt(s);
  double added = jitter;
  for (int attempt = 0; llt.info() != Eigen::Success || !std::isfinite(llt.matrixLLT().diagonal().minCoeff());
       ++attempt) {
    if (attempt > 30) throw NumericalError("innovation covariance cannot be regularized");
    llt.compute(s + added * Eigen::MatrixXd::Identity(s.rows(), s.cols()));
    added *= 10.0;
  }
  return llt;
}

}  // namespace

double mahalanobis(const Eigen::VectorXd& innovation, const Eigen::MatrixXd& covariance, double jitter) {
  const auto llt = factor(covariance, jitter);
  const Eigen::VectorXd w = llt.matrixL().solve(innovation);
  return w.norm();
}

FilterState init_state(const ssm::SsmModel& model, const ts::WindowPair& first, const NoiseModel& noise) {
  return {ssm::encode(model, first.x), noise.process.asDiagonal()};
}

StepResult filter_step(const ssm::SsmModel& model, const FilterState& state, const ts::WindowPair& pair,
                       const NoiseModel& noise, const FilterConfig& cfg) {
  const Eigen::Index n = state.mean.size();
  if (static_cast<std::size_t>(n) != model.latent() || state.covariance.rows() != n || state.covariance.cols() != n)
    throw DataError("filter state does not match the model's latent size");
  if (static_cast<std::size_t>(pair.y.size()) != model.sensors ||
      static_cast<std::size_t>(pair.u.size()) != model.actuators)
    throw DataError("window pair dimensions do not match the model");
  const double kappa = cfg.kappa_per_dim * static_cast<double>(n);
  const Eigen::MatrixXd process = noise.process.asDiagonal();

  // 1. re-encoding: the window's encoding replaces the carried mean, the
  // carried covariance is kept
  const Eigen::VectorXd mean = ssm::encode(model, pair.x);
  const Eigen::MatrixXd cov = nearest_psd(state.covariance);

  // 2. latent prediction
  const SigmaPoints prior = sigma_points(mean, cov, kappa);
  Eigen::MatrixXd moved(n, prior.points.cols());
  for (Eigen::Index i = 0; i < prior.points.cols(); ++i)
    moved.col(i) = ssm::transition(model, prior.points.col(i), pair.u);
  const Eigen::VectorXd latent_mean = moved * prior.weights;
  const Eigen::MatrixXd latent_dev = moved.colwise() - latent_mean;
  const Eigen::MatrixXd latent_cov =
      nearest_psd(latent_dev * prior.weights.asDiagonal() * latent_dev.transpose() + process);

  // 3. measurement prediction
  const SigmaPoints predicted = sigma_points(latent_mean, latent_cov, kappa);
  Eigen::MatrixXd emitted(static_cast<Eigen::Index>(model.sensors), predicted.points.cols());
  for (Eigen::Index i = 0; i < predicted.points.cols(); ++i)
    emitted.col(i) = ssm::emit(model, predicted.points.col(i));
  StepResult result;
  result.predicted = emitted * predicted.weights;
  const Eigen::MatrixXd meas_dev = emitted.colwise() - result.predicted;
  const Eigen::MatrixXd state_dev = predicted.points.colwise() - latent_mean;
  result.innovation_cov = meas_dev * predicted.weights.asDiagonal() * meas_dev.transpose();
  result.innovation_cov = 0.5 * (result.innovation_cov + result.innovation_cov.transpose());
  result.innovation_cov.diagonal() += noise.measurement;
  const Eigen::MatrixXd cross = state_dev * predicted.weights.asDiagonal() * meas_dev.transpose();

  // 4. score
  const Eigen::VectorXd innovation = pair.y - result.predicted;
  const auto llt = factor(result.innovation_cov, cfg.jitter);
  result.score = llt.matrixL().solve(innovation).norm();
  if (!std::isfinite(result.score)) throw NumericalError("non-finite anomaly score at t=" + std::to_string(pair.t));

  // 5. update
  const Eigen::MatrixXd gain = llt.solve(cross.transpose()).transpose();
  result.state.mean = latent_mean + gain * innovation;
  result.state.covariance = nearest_psd(latent_cov - gain * result.innovation_cov * gain.transpose());
  return result;
}

double residual_score(const ssm::SsmModel& model, const ts::WindowPair& pair) {
  return (pair.y - ssm::predict(model, pair)).norm();
}

ScorerKind parse_scorer(const std::string& name) {
  if (name == "filter") return ScorerKind::Filter;
  if (name == "residual") return ScorerKind::Residual;
  throw ConfigError("unknown scorer '" + name + "' (expected filter or residual)");
}

std::string to_string(ScorerKind kind) { return kind == ScorerKind::Filter ? "filter" : "residual"; }

std::vector<double> score_stream(const ssm::SsmModel& model, std::span<const ts::WindowPair> pairs,
                                 const NoiseModel& noise, ScorerKind kind, const FilterConfig& cfg) {
  std::vector<double> scores;
  scores.reserve(pairs.size());
  if (pairs.empty()) return scores;
  if (kind == ScorerKind::Residual) {
    for (const auto& p : pairs) scores.push_back(residual_score(model, p));
    return scores;
  }
  FilterState state = init_state(model, pairs.front(), noise);
  for (const auto& p : pairs) {
    StepResult step = filter_step(model, state, p, noise, cfg);
    scores.push_back(step.score);
    state = std::move(step.state);
  }
  return scores;
}

}  // namespace iadcps::scoring
