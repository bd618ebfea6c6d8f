#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ioest/trajectory.hpp"

namespace ioest {

/// Decreasing, integrable bound f(T) on fourth-order decorrelation across a
/// time gap T.
class DecorrelationProfile {
 public:
  enum class Form { exponential, power, tabulated };

  /// f(T) = c exp(-rate T)
  static DecorrelationProfile exponential(double c, double rate);
  /// f(T) = c T^(-exponent), exponent > 1
  static DecorrelationProfile power(double c, double exponent);
  /// Log-linear interpolation through (times, values); before the first
  /// point f is held constant, past the last point the final log-slope is
  /// extrapolated.
  static DecorrelationProfile tabulated(std::vector<double> times, std::vector<double> values);

  Form form() const noexcept { return form_; }
  double coefficient() const noexcept { return c_; }
  double rate() const noexcept { return rate_; }

  double operator()(double t) const;

  /// I(f) = int_1^inf f(T) dT.
  double integral_I_f() const noexcept { return integral_from_one_; }
  /// int_0^inf f(T) dT; infinite for the power form.
  double integral_from_zero() const noexcept { return integral_from_zero_; }

  std::string describe() const;

 private:
  DecorrelationProfile() = default;
  double integrate(double from) const;

  Form form_ = Form::exponential;
  double c_ = 0.0;
  double rate_ = 0.0;  // exponential rate or power exponent
  std::vector<double> times_, log_values_;
  double integral_from_one_ = 0.0;
  double integral_from_zero_ = 0.0;
};

/// Which I(f) convention enters the covariance bound constant.
enum class IntegralConvention { from_one, from_zero };

struct BoundInputs {
  double nu = 1.0;                // uniform L4 bound on X_t
  double horizon_A = 1.0;         // largest lag of interest
  std::size_t dim_r = 1;
  DecorrelationProfile profile = DecorrelationProfile::exponential(1.0, 1.0);
  double lipschitz_lambda = 1.0;  // Lipschitz constant of K on [0, A]
  IntegralConvention convention = IntegralConvention::from_one;

  void validate() const;
  double integral() const noexcept;
};

struct SchemeRecommendation {
  SubsamplingScheme scheme;
  double rho = 0.0;
  double span_S = 0.0;
  double predicted_error = 0.0;
};

/// Delta = c_delta * N^(-1/3); stride is left unbound. Requires N >= 8.
SubsamplingScheme scheme_from_n(std::size_t n_obs, double c_delta = 1.0);

/// N = ceil(c_n rho^-3), Delta = c_delta rho, with the observable error bound
/// as predicted_error. Requires 0 < rho < 1.
SchemeRecommendation scheme_from_rho(double rho, const BoundInputs& inputs, double c_n = 1.0,
                                     double c_delta = 1.0);

/// Finite-sample proxy for Delta -> 0, N Delta -> inf along a list sorted by
/// decreasing eps (length >= 3): Delta non-increasing, N Delta strictly
/// increasing.
ValidationResult validate_scheme_sequence(
    std::span<const std::pair<double, SubsamplingScheme>> schemes);

struct DecorrelationSum {
  double g_exact = 0.0;  // sum_{j=1}^{q-1} j f(j d)
  double g_bound = 0.0;  // (q - 1) I / d
};

/// g(q, D) by direct summation and its integral bound. The bound uses
/// int_0^inf f, the integral for which the summation inequality holds.
DecorrelationSum decorrelation_sum_bound(std::size_t q, double d,
                                         const DecorrelationProfile& profile);

struct UnobservableBound {
  double gamma_app = 0.0;         // 8 sqrt(r I) + 2.5 nu^2 sqrt(A + 1)
  double covariance_bound = 0.0;  // gamma_app / sqrt(N Delta) + lambda Delta
  double mean_constant_C = 0.0;   // 7 I
  double mean_l4_bound = 0.0;     // (r C)^(1/4) / (N Delta)^(1/4)
  double mean_l2_bound = 0.0;     // (nu sqrt(r Delta) + sqrt(2 r I)) / sqrt(N Delta)
};

UnobservableBound error_bound_unobservable(const BoundInputs& inputs,
                                           const SubsamplingScheme& scheme);

/// 4 nu rho + c N^(-1/3) for a scheme with Delta = family_constant * N^(-1/3)
/// (within 10%, to allow for grid rounding). c folds the unobservable bound
/// at N Delta = k N^(2/3): c = gamma_app / sqrt(k) + lambda k.
double error_bound_observable(const BoundInputs& inputs, const SubsamplingScheme& scheme,
                             double rho, double family_constant = 1.0);

/// E[Z1 Z2 Z3 Z4] = s12 s34 + s13 s24 + s23 s14 for centered jointly Gaussian Z.
double gaussian_fourth_moment(const Eigen::Matrix4d& cov);

/// Exponential profile for a stationary Gaussian process with
/// K(u) = variance exp(-rate u), constants from the pairing formula:
/// single values decorrelate like variance e^{-rate T}, products like
/// 2 variance^2 e^{-rate T}.
DecorrelationProfile gaussian_exponential_profile(double variance, double rate);

/// ||X||_4 for a N(mean, variance) variable.
double gaussian_l4_norm(double mean, double variance);

}  // namespace ioest
