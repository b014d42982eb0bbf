#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "iadcps/ssm.hpp"
#include "iadcps/timeseries.hpp"

namespace iadcps::scoring {

/// Diagonal noise covariances of the latent dynamics (process) and sensors (measurement).
struct NoiseModel {
  Eigen::VectorXd process;
  Eigen::VectorXd measurement;
};

/// Calibrates noise on consecutive normal pairs (at least 10):
///   measurement = per-sensor variance of y - predict(pair)
///   process     = per-latent variance of encode(x[t+1]) - transition(encode(x[t]), u[t])
/// both floored at `floor`.
NoiseModel estimate_noise(const ssm::SsmModel& model, std::span<const ts::WindowPair> pairs, double floor = 1e-6);

struct FilterConfig {
  /// Sigma-point spread kappa = kappa_per_dim * latent size.
  double kappa_per_dim = 1e-3;
  /// Added to the innovation covariance diagonal when it is not positive definite.
  double jitter = 1e-9;
};

struct FilterState {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
};

struct SigmaPoints {
  Eigen::MatrixXd points;  ///< one column per point, 2n + 1 columns
  Eigen::VectorXd weights;
};

/// Symmetric sigma set: mean, mean +- sqrt(n + kappa) * columns of sqrt(cov).
/// Weights kappa / (n + kappa) for the centre and 1 / (2 (n + kappa)) otherwise.
SigmaPoints sigma_points(const Eigen::VectorXd& mean, const Eigen::MatrixXd& covariance, double kappa);

/// Symmetrizes and clips negative eigenvalues to zero.
Eigen::MatrixXd nearest_psd(const Eigen::MatrixXd& m);

/// sqrt(innovation' * S^-1 * innovation), regularizing S with jitter * I until it factors.
double mahalanobis(const Eigen::VectorXd& innovation, const Eigen::MatrixXd& covariance, double jitter = 1e-9);

/// Filter state at the start of a stream: the first window's encoding with covariance diag(process).
FilterState init_state(const ssm::SsmModel& model, const ts::WindowPair& first, const NoiseModel& noise);

struct StepResult {
  FilterState state;
  double score = 0.0;
  Eigen::VectorXd predicted;       ///< predicted sensors y_hat
  Eigen::MatrixXd innovation_cov;  ///< S
};

/// One unscented filter step for `pair`:
///  1. take encode(pair.x) as the latent mean, keep the state's covariance;
///  2. push sigma points through the transition with pair.u, add diag(process);
///  3. push re-drawn sigma points through the emission, S = spread + diag(measurement);
///  4. score the innovation y - y_hat by its Mahalanobis length under S;
///  5. apply the standard gain update with the innovation. The returned mean is
///     only informative; the next step re-encodes.
StepResult filter_step(const ssm::SsmModel& model, const FilterState& state, const ts::WindowPair& pair,
                       const NoiseModel& noise, const FilterConfig& cfg = {});

/// Euclidean length of y - predict(pair).
double residual_score(const ssm::SsmModel& model, const ts::WindowPair& pair);

enum class ScorerKind { Filter, Residual };

ScorerKind parse_scorer(const std::string& name);
std::string to_string(ScorerKind kind);

/// Scores a contiguous query stream, restarting the filter at its first pair.
std::vector<double> score_stream(const ssm::SsmModel& model, std::span<const ts::WindowPair> pairs,
                                 const NoiseModel& noise, ScorerKind kind, const FilterConfig& cfg = {});

}  // namespace iadcps::scoring
