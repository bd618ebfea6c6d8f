#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ioest/random_stream.hpp"
#include "ioest/trajectory.hpp"

namespace ioest {

struct SimulationOptions {
  /// Accept noise == 0 for zero-noise limit checks.
  bool allow_degenerate_noise = false;
};

// ---------------------------------------------------------------------------
// Ornstein-Uhlenbeck: dX = reversion (mean - X) dt + noise dW.

struct OUParams {
  double mean = 0.0;
  double reversion = 1.0;
  double noise = 1.4142135623730951;

  void validate(const SimulationOptions& options = {}) const;
  /// sigma^2 / (2 gamma)
  double stationary_variance() const noexcept { return noise * noise / (2.0 * reversion); }
};

/// Exact Gaussian transition, started from the stationary law.
TrajectoryGrid simulate_ou(const OUParams& params, std::size_t length, double delta,
                           const RandomStreamSpec& stream, const SimulationOptions& options = {});

/// Plain Euler-Maruyama OU from a stationary draw; used only to compare
/// against the exact scheme.
TrajectoryGrid simulate_ou_euler(const OUParams& params, std::size_t length, double delta,
                                 const RandomStreamSpec& stream);

/// K(u) = (sigma^2 / 2 gamma) exp(-gamma u).
double ou_true_covariance(const OUParams& params, double lag);

// ---------------------------------------------------------------------------
// Gradient diffusions dX = -grad Q(X) dt + sigma dW on R^r, with a separable
// polynomial potential Q(x) = sum_i sum_k c_k x_i^k.

struct PolynomialPotential {
  std::string name = "polynomial";
  std::vector<double> coefficients;  // c_k multiplies x^k

  static PolynomialPotential quadratic();  // x^2 / 2
  static PolynomialPotential quartic();    // x^4 / 4
  static PolynomialPotential double_well();  // x^4 / 4 - x^2 / 2
  /// Looks up one of the names above.
  static PolynomialPotential from_name(const std::string& name);

  double value(double x) const noexcept;
  double derivative(double x) const noexcept;
  /// Highest non-zero coefficient has even degree >= 2 and is positive.
  bool confining() const noexcept;
};

struct GradientDiffusionParams {
  PolynomialPotential potential = PolynomialPotential::quadratic();
  Eigen::MatrixXd diffusion = Eigen::MatrixXd::Constant(1, 1, 1.4142135623730951);

  std::size_t dim() const noexcept { return static_cast<std::size_t>(diffusion.rows()); }
  void validate() const;
};

/// ceil(10 / (slowest_rate * delta)) steps.
std::size_t default_burn_in_steps(double slowest_rate, double delta);

/// Euler-Maruyama from the origin; the first `burn_in` steps are discarded.
TrajectoryGrid simulate_gradient_diffusion(const GradientDiffusionParams& params,
                                           std::size_t length, double delta_fine,
                                           const RandomStreamSpec& stream, std::size_t burn_in);

// ---------------------------------------------------------------------------
// Heston: dS = mu S dt + sqrt(V) S dW1, dV = kappa (theta - V) dt + sigma sqrt(V) dW2,
// with W1 and W2 independent.

struct HestonParams {
  double drift = 0.05;
  double vol_reversion = 2.0;
  double vol_mean = 0.04;
  double vol_of_vol = 0.3;

  void validate() const;
  /// 2 kappa theta / sigma^2; values below 1 are allowed but flagged.
  double feller_ratio() const noexcept;
  bool feller_satisfied() const noexcept { return feller_ratio() >= 1.0; }
  /// Stationary CIR variance sigma^2 theta / (2 kappa).
  double stationary_variance() const noexcept;
};

/// Lagged covariance of the stationary CIR variance process.
double cir_true_covariance(const HestonParams& params, double lag);

struct VarianceInit {
  enum class Mode { stationary, fixed };
  Mode mode = Mode::stationary;
  double value = 0.0;

  static VarianceInit stationary() { return {}; }
  static VarianceInit fixed(double v) { return {Mode::fixed, v}; }
};

struct HestonPaths {
  TrajectoryGrid returns;   // cumulative R with dR = dS / S, R_0 = 0 (not stored)
  TrajectoryGrid variance;  // V, clamped at 0
};

/// Full-truncation Euler for V; R uses the same truncated V.
/// Process noise drives V, auxiliary noise drives R.
HestonPaths simulate_heston(const HestonParams& params, std::size_t length, double delta_fine,
                            const RandomStreamSpec& stream,
                            VarianceInit v0 = VarianceInit::stationary(),
                            const SimulationOptions& options = {});

// ---------------------------------------------------------------------------
// Observable approximations Y^eps of a process X.

/// An observable path together with its alignment: path[i] corresponds to
/// source[i + lead].
struct Observable {
  TrajectoryGrid path;
  std::size_t lead = 0;
};

/// Default realized-volatility window ceil(eps^(-1/2)).
std::size_t default_realized_window(double eps);

/// Y_t = (1 / (M eps)) sum_{k=1..M} (R_{t_k} - R_{t_{k-1}})^2 over the M most
/// recent steps ending at t. Lead is M.
Observable realized_volatility_observable(const TrajectoryGrid& returns, double eps,
                                          std::size_t window);

/// Trapezoid approximation of (1/eps) int_{t-eps}^t X_s ds; eps must be a
/// multiple of the grid step. Lead is eps / delta.
Observable smoothing_observable(const TrajectoryGrid& x, double eps);

/// Y = (1 + rho) X.
TrajectoryGrid multiplicative_perturbation_observable(const TrajectoryGrid& x, double rho);

// ---------------------------------------------------------------------------
// Slow-fast systems
//   dx = a(x,y) dt + b(x,y) dW1
//   dy = (1/eps) c(x,y) dt + (1/sqrt(eps)) d(x,y) dW2
// and the averaged dynamics dX = A(X) dt + B(X) dW1 with A = E_q a and
// B^2 = E_q b^2, q(y|x) the stationary law of the fast equation.

enum class SlowFastEntry {
  linear_ou,             // a = -x + y, c = -y: A = -x
  modulated_drift,       // a = -x (1 + y^2) / 2, c = -y: A = -x
  state_dependent_mean,  // a = -x + y, c = sin x - y: A = -x + sin x
};

struct SlowFastCoefficients {
  std::function<double(double, double)> a, b, c, d;
  std::function<double(double)> averaged_drift;      // A
  std::function<double(double)> averaged_diffusion;  // B = sqrt(E_q b^2)
  /// Mean of q(y|x), used for the initial fast state.
  std::function<double(double)> fast_mean;
};

SlowFastCoefficients slow_fast_coefficients(SlowFastEntry entry);
SlowFastEntry slow_fast_entry_from_name(const std::string& name);
std::string to_string(SlowFastEntry entry);

struct SlowFastParams {
  double scale = 0.1;
  SlowFastEntry entry = SlowFastEntry::linear_ou;

  void validate() const;
};

struct SlowFastPaths {
  TrajectoryGrid slow;     // x_t, the observable
  TrajectoryGrid reduced;  // X_t from the averaged SDE, same W1 increments
};

/// Requires delta_fine <= scale / 10. Burn-in defaults to 10 time units.
SlowFastPaths simulate_slow_fast(const SlowFastParams& params, std::size_t length,
                                 double delta_fine, const RandomStreamSpec& stream,
                                 std::optional<std::size_t> burn_in = std::nullopt);

}  // namespace ioest
