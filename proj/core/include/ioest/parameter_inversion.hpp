#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ioest/trajectory.hpp"

namespace ioest {

/// Names one lagged moment: a mean coordinate or a covariance entry at a lag.
/// Indices are 0-based; the text form is 1-based ("mean(1)", "cov(1,1)@0.5").
struct MomentDescriptor {
  enum class Kind { mean, covariance };
  Kind kind = Kind::mean;
  std::size_t i = 0;
  std::size_t j = 0;
  double lag = 0.0;

  static MomentDescriptor mean(std::size_t i) { return {Kind::mean, i, 0, 0.0}; }
  static MomentDescriptor covariance(std::size_t i, std::size_t j, double lag) {
    return {Kind::covariance, i, j, lag};
  }
  static MomentDescriptor parse(const std::string& text);
  std::string to_string() const;

  friend bool operator==(const MomentDescriptor&, const MomentDescriptor&) = default;
};

/// The p lagged moments Psi that determine the model parameters.
class MomentVector {
 public:
  /// `lags_used` holds the discretized lag kappa * Delta per entry (0 for
  /// means); empty means "as requested".
  MomentVector(std::vector<MomentDescriptor> descriptors, std::vector<double> entries,
               std::vector<double> lags_used = {});

  std::size_t size() const noexcept { return entries_.size(); }
  const std::vector<MomentDescriptor>& descriptors() const noexcept { return descriptors_; }
  const std::vector<double>& entries() const noexcept { return entries_; }
  const std::vector<double>& lags_used() const noexcept { return lags_used_; }
  double operator[](std::size_t k) const noexcept { return entries_[k]; }
  Eigen::VectorXd as_vector() const;

 private:
  std::vector<MomentDescriptor> descriptors_;
  std::vector<double> entries_;
  std::vector<double> lags_used_;
};

struct ParameterBall {
  Eigen::VectorXd center;
  double radius = 1.0;

  void validate() const;
  /// Closed ball: the boundary counts as inside.
  bool contains(const Eigen::VectorXd& theta) const;
  Eigen::VectorXd project(const Eigen::VectorXd& theta) const;
};

struct SolverDiagnostics {
  double residual_norm = 0.0;
  int iterations = 0;
  bool converged = true;
};

struct ParameterEstimate {
  Eigen::VectorXd theta;
  std::vector<std::string> names;
  bool truncated = false;
  std::optional<MomentVector> moment_input;
  SolverDiagnostics diagnostics;
};

/// Computes each descriptor's moment from the sub-sampled grid via the
/// empirical mean and lagged covariance estimators.
MomentVector extract_moment_vector(const TrajectoryGrid& grid, const SubsamplingScheme& scheme,
                                   std::span<const MomentDescriptor> descriptors);

/// OU from Psi = [mean, K(0), K(u1)]: mu = mean, gamma = ln(K0/K1)/u1,
/// sigma = sqrt(2 gamma K0). theta = (mu, gamma, sigma).
ParameterEstimate invert_ou(const MomentVector& psi, double u1);

/// CIR variance from Psi = [E V, Var V, K_V(u1)]: theta_H = E V,
/// kappa = ln(Var/K1)/u1, sigma = sqrt(2 kappa Var / theta_H).
/// theta = (kappa, theta_H, sigma).
ParameterEstimate invert_cir(const MomentVector& psi, double u1);

/// CIR variance from two positive lags, Psi = [E V, K_V(u1), K_V(u2)] with
/// u1 < u2: kappa = ln(K1/K2)/(u2 - u1), Var = K1 exp(kappa u1). Insensitive
/// to white measurement noise that only inflates the lag-0 moment.
ParameterEstimate invert_cir_two_lag(const MomentVector& psi, double u1, double u2);

using ForwardMap = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

struct MomentModel {
  std::string id;
  std::vector<std::string> parameter_names;
  ForwardMap forward;
};

/// theta = (mu, gamma, sigma) -> [mu, K(0), K(u1)]
MomentModel ou_moment_model(double u1);
/// theta = (kappa, theta_H, sigma) -> [theta_H, Var, K(u1)]
MomentModel cir_moment_model(double u1);

struct LeastSquaresOptions {
  int max_iterations = 200;
  double step_tolerance = 1e-10;
};

/// Gauss-Newton with finite-difference Jacobians (step 1e-6 (1 + |theta_i|)),
/// Levenberg damping and projection onto the ball. A solution held on the
/// ball boundary is flagged truncated; diagnostics.converged reports
/// SolverDidNotConverge without throwing.
ParameterEstimate invert_least_squares(const MomentModel& model, const MomentVector& psi_hat,
                                       const Eigen::VectorXd& init, const ParameterBall& bounds,
                                       const LeastSquaresOptions& options = {});

/// 1_Lambda(theta) theta: unchanged inside the closed ball, zero outside.
ParameterEstimate truncate_to_ball(const Eigen::VectorXd& theta, const ParameterBall& ball);

}  // namespace ioest
