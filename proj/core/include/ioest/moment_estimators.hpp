#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "ioest/trajectory.hpp"

namespace ioest {

/// Sample counts at or above this use compensated (Neumaier) accumulation.
inline constexpr std::size_t kCompensatedSummationThreshold = 100000;

/// The "N >> kappa" standing condition, quantified.
inline constexpr std::size_t kMinObsPerLagStep = 10;

struct LagRequest {
  double lag_u = 0.0;
};

/// Closest integer to lag_u / big_delta, ties to even. kappa(0, .) = 0.
std::size_t lag_index(double lag_u, double big_delta);

struct MeanEstimate {
  Eigen::VectorXd vector;          // (1/N) sum_{n=1..N} s_n
  Eigen::VectorXd shifted_vector;  // (1/N) sum_{n=1..N} s_{n+kappa}
  std::size_t n_obs = 0;
  double big_delta = 0.0;
  std::size_t kappa = 0;
};

/// Needs at least n_obs + kappa samples in `samples`.
MeanEstimate empirical_mean(const SampleView& samples, std::size_t n_obs, std::size_t kappa,
                            double big_delta = 0.0);

struct LaggedCovarianceEstimate {
  Eigen::MatrixXd matrix;
  double lag_requested = 0.0;
  std::size_t kappa = 0;
  double lag_used = 0.0;
  std::size_t n_obs = 0;
  double big_delta = 0.0;
};

/// Sub-sampled lagged covariance
///   K = (1/N) sum_n (s_n - mean)(s_{n+kappa} - shifted_mean)^T,
/// evaluated in centered-product form. Requires N >= 2, N >= 10 kappa and
/// N + kappa samples.
LaggedCovarianceEstimate lagged_covariance(const SampleView& samples, std::size_t n_obs,
                                           std::size_t kappa, double big_delta, double lag_u);

/// The same estimator evaluated as (1/N) sum_n s_n s_{n+kappa}^T - mean shifted_mean^T.
/// Algebraically identical to lagged_covariance(); kept as an independent route.
Eigen::MatrixXd lagged_covariance_product_form(const SampleView& samples, std::size_t n_obs,
                                               std::size_t kappa);

/// One estimate per requested lag on an already sub-sampled sequence
/// (element 0 is the first sub-sampled point). Lags above `horizon` are
/// rejected. Estimates for equal kappa share one computation.
std::vector<LaggedCovarianceEstimate> covariance_curve(
    const SampleView& samples, const SubsamplingScheme& scheme, std::span<const LagRequest> lags,
    double horizon = std::numeric_limits<double>::infinity());

/// sup_{i,j} |M_ij|, the matrix norm used throughout.
double sup_norm(const Eigen::MatrixXd& m);

std::string covariance_csv_header(std::size_t dim);
/// lag_requested, lag_used, N, Delta, then the r^2 entries row-major.
std::string to_csv_row(const LaggedCovarianceEstimate& estimate);

}  // namespace ioest
