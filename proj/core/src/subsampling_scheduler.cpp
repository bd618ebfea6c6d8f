#include "ioest/subsampling_scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "ioest/error.hpp"

namespace ioest {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require(bool condition, const std::string& what) {
  if (!condition) throw Error(ErrorKind::ParameterDomain, what);
}

// int over [a, b] of exp(l(t)) with l linear from la (at ta) to lb (at tb).
double log_linear_segment(double ta, double tb, double la, double lb, double a, double b) {
  if (b <= a) return 0.0;
  const double slope = (lb - la) / (tb - ta);
  const double l_at_a = la + slope * (a - ta);
  const double l_at_b = la + slope * (b - ta);
  if (std::abs(slope) < 1e-14) return std::exp(l_at_a) * (b - a);
  return (std::exp(l_at_b) - std::exp(l_at_a)) / slope;
}

}  // namespace

// --- DecorrelationProfile ---------------------------------------------------

DecorrelationProfile DecorrelationProfile::exponential(double c, double rate) {
  require(c > 0.0 && std::isfinite(c), "decorrelation coefficient must be > 0");
  require(rate > 0.0 && std::isfinite(rate), "decorrelation rate must be > 0");
  DecorrelationProfile p;
  p.form_ = Form::exponential;
  p.c_ = c;
  p.rate_ = rate;
  p.integral_from_one_ = c / rate * std::exp(-rate);
  p.integral_from_zero_ = c / rate;
  return p;
}

DecorrelationProfile DecorrelationProfile::power(double c, double exponent) {
  require(c > 0.0 && std::isfinite(c), "decorrelation coefficient must be > 0");
  require(exponent > 1.0 && std::isfinite(exponent), "power-law exponent must be > 1");
  DecorrelationProfile p;
  p.form_ = Form::power;
  p.c_ = c;
  p.rate_ = exponent;
  p.integral_from_one_ = c / (exponent - 1.0);
  p.integral_from_zero_ = kInf;
  return p;
}

DecorrelationProfile DecorrelationProfile::tabulated(std::vector<double> times,
                                                     std::vector<double> values) {
  require(times.size() == values.size() && times.size() >= 2,
          "tabulated profile needs >= 2 matching (time, value) points");
  for (std::size_t i = 0; i < times.size(); ++i) {
    require(std::isfinite(times[i]) && times[i] >= 0.0, "tabulated times must be >= 0");
    require(values[i] > 0.0 && std::isfinite(values[i]), "tabulated values must be > 0");
    if (i > 0) {
      require(times[i] > times[i - 1], "tabulated times must be increasing");
      require(values[i] <= values[i - 1], "tabulated values must be non-increasing");
    }
  }
  require(values.back() < values[values.size() - 2],
          "tabulated profile must be strictly decreasing on its last segment");
  DecorrelationProfile p;
  p.form_ = Form::tabulated;
  p.times_ = std::move(times);
  p.log_values_.reserve(values.size());
  for (double v : values) p.log_values_.push_back(std::log(v));
  const std::size_t k = p.times_.size() - 1;
  p.c_ = std::exp(p.log_values_[0]);
  p.rate_ = -(p.log_values_[k] - p.log_values_[k - 1]) / (p.times_[k] - p.times_[k - 1]);
  p.integral_from_one_ = p.integrate(1.0);
  p.integral_from_zero_ = p.integrate(0.0);
  return p;
}

double DecorrelationProfile::operator()(double t) const {
  switch (form_) {
    case Form::exponential:
      return c_ * std::exp(-rate_ * t);
    case Form::power:
      return t <= 0.0 ? kInf : c_ * std::pow(t, -rate_);
    case Form::tabulated: {
      if (t <= times_.front()) return std::exp(log_values_.front());
      const std::size_t k = times_.size() - 1;
      if (t >= times_[k]) return std::exp(log_values_[k] - rate_ * (t - times_[k]));
      const auto it = std::upper_bound(times_.begin(), times_.end(), t);
      const auto i = static_cast<std::size_t>(it - times_.begin()) - 1;
      const double w = (t - times_[i]) / (times_[i + 1] - times_[i]);
      return std::exp(log_values_[i] + w * (log_values_[i + 1] - log_values_[i]));
    }
  }
  return 0.0;
}

double DecorrelationProfile::integrate(double from) const {
  // Only used for the tabulated form.
  double total = 0.0;
  const std::size_t k = times_.size() - 1;
  if (from < times_.front()) {
    total += std::exp(log_values_.front()) * (times_.front() - from);
    from = times_.front();
  }
  for (std::size_t i = 0; i < k; ++i) {
    total += log_linear_segment(times_[i], times_[i + 1], log_values_[i], log_values_[i + 1],
                                std::max(from, times_[i]), times_[i + 1]);
  }
  const double tail_start = std::max(from, times_[k]);
  total += std::exp(log_values_[k] - rate_ * (tail_start - times_[k])) / rate_;
  return total;
}

std::string DecorrelationProfile::describe() const {
  std::ostringstream out;
  out.precision(17);
  switch (form_) {
    case Form::exponential: out << "exponential(c=" << c_ << ", rate=" << rate_ << ")"; break;
    case Form::power: out << "power(c=" << c_ << ", exponent=" << rate_ << ")"; break;
    case Form::tabulated: out << "tabulated(" << times_.size() << " points)"; break;
  }
  return out.str();
}

// --- bound inputs -------------------------------------------------------------

void BoundInputs::validate() const {
  require(nu > 0.0 && std::isfinite(nu), "nu must be > 0");
  require(horizon_A >= 0.0 && std::isfinite(horizon_A), "horizon A must be >= 0");
  require(dim_r >= 1, "dimension r must be >= 1");
  require(lipschitz_lambda >= 0.0 && std::isfinite(lipschitz_lambda), "lambda must be >= 0");
  require(std::isfinite(integral()), "I(f) must be finite under the chosen convention");
}

double BoundInputs::integral() const noexcept {
  return convention == IntegralConvention::from_one ? profile.integral_I_f()
                                                    : profile.integral_from_zero();
}

// --- schemes ------------------------------------------------------------------

SubsamplingScheme scheme_from_n(std::size_t n_obs, double c_delta) {
  require(n_obs >= 8, "scheme_from_n needs N >= 8");
  require(c_delta > 0.0 && std::isfinite(c_delta), "c_delta must be > 0");
  return {n_obs, 0, c_delta / std::cbrt(static_cast<double>(n_obs))};
}

SchemeRecommendation scheme_from_rho(double rho, const BoundInputs& inputs, double c_n,
                                     double c_delta) {
  require(rho > 0.0 && rho < 1.0, "rho must lie in (0, 1)");
  require(c_n > 0.0 && std::isfinite(c_n), "c_n must be > 0");
  require(c_delta > 0.0 && std::isfinite(c_delta), "c_delta must be > 0");
  SchemeRecommendation rec;
  // Guard the ceiling against round-off in rho^-3 (0.1^-3 = 1000.0000000000002).
  const double n_real = c_n / (rho * rho * rho);
  rec.scheme.n_obs = static_cast<std::size_t>(std::ceil(n_real * (1.0 - 1e-12)));
  rec.scheme.big_delta = c_delta * rho;
  rec.rho = rho;
  rec.span_S = rec.scheme.span();
  rec.predicted_error =
      error_bound_observable(inputs, rec.scheme, rho, c_delta * std::cbrt(c_n));
  return rec;
}

ValidationResult validate_scheme_sequence(
    std::span<const std::pair<double, SubsamplingScheme>> schemes) {
  if (schemes.size() < 3) {
    return ValidationResult::reject("need at least 3 schemes to judge the trend");
  }
  for (std::size_t i = 0; i < schemes.size(); ++i) {
    if (!schemes[i].second.valid()) return ValidationResult::reject("invalid scheme", i);
    if (i == 0) continue;
    const auto& [eps_prev, prev] = schemes[i - 1];
    const auto& [eps, cur] = schemes[i];
    if (!(eps < eps_prev)) {
      return ValidationResult::reject("eps values must be strictly decreasing", i);
    }
    if (cur.big_delta > prev.big_delta) {
      return ValidationResult::reject("Delta increases as eps decreases", i);
    }
    if (!(cur.span() > prev.span())) {
      return ValidationResult::reject("N * Delta does not increase as eps decreases", i);
    }
  }
  return ValidationResult::accept();
}

DecorrelationSum decorrelation_sum_bound(std::size_t q, double d,
                                         const DecorrelationProfile& profile) {
  require(q >= 2, "q must be >= 2");
  require(d > 0.0 && std::isfinite(d), "D must be > 0");
  DecorrelationSum out;
  for (std::size_t j = 1; j < q; ++j) {
    out.g_exact += static_cast<double>(j) * profile(static_cast<double>(j) * d);
  }
  out.g_bound = static_cast<double>(q - 1) * profile.integral_from_zero() / d;
  return out;
}

UnobservableBound error_bound_unobservable(const BoundInputs& inputs,
                                           const SubsamplingScheme& scheme) {
  inputs.validate();
  require(scheme.valid(), "invalid scheme");
  const double r = static_cast<double>(inputs.dim_r);
  const double i_f = inputs.integral();
  const double span = scheme.span();
  UnobservableBound out;
  out.gamma_app = 8.0 * std::sqrt(r * i_f) + 2.5 * inputs.nu * inputs.nu *
                                                 std::sqrt(inputs.horizon_A + 1.0);
  out.covariance_bound =
      out.gamma_app / std::sqrt(span) + inputs.lipschitz_lambda * scheme.big_delta;
  out.mean_constant_C = 7.0 * i_f;
  out.mean_l4_bound = std::pow(r * out.mean_constant_C, 0.25) / std::pow(span, 0.25);
  out.mean_l2_bound =
      (inputs.nu * std::sqrt(r * scheme.big_delta) + std::sqrt(2.0 * r * i_f)) / std::sqrt(span);
  return out;
}

double error_bound_observable(const BoundInputs& inputs, const SubsamplingScheme& scheme,
                              double rho, double family_constant) {
  require(rho >= 0.0 && std::isfinite(rho), "rho must be >= 0");
  require(family_constant > 0.0, "family constant must be > 0");
  require(scheme.valid(), "invalid scheme");
  const double n = static_cast<double>(scheme.n_obs);
  const double measured = scheme.big_delta * std::cbrt(n);
  if (std::abs(measured / family_constant - 1.0) > 0.1) {
    throw Error(ErrorKind::ParameterDomain,
                "scheme is not in the Delta = k N^(-1/3) family (Delta N^(1/3) = " +
                    std::to_string(measured) + ")");
  }
  inputs.validate();
  const double k = family_constant;
  const double gamma_app = error_bound_unobservable(inputs, scheme).gamma_app;
  const double c = gamma_app / std::sqrt(k) + inputs.lipschitz_lambda * k;
  return 4.0 * inputs.nu * rho + c / std::cbrt(n);
}

double gaussian_fourth_moment(const Eigen::Matrix4d& cov) {
  const double scale = std::max(1.0, cov.cwiseAbs().maxCoeff());
  if (!cov.allFinite() || (cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw Error(ErrorKind::ParameterDomain, "covariance matrix must be symmetric");
  }
  return cov(0, 1) * cov(2, 3) + cov(0, 2) * cov(1, 3) + cov(1, 2) * cov(0, 3);
}

DecorrelationProfile gaussian_exponential_profile(double variance, double rate) {
  require(variance > 0.0, "variance must be > 0");
  // |Cov(X_s, X_u)| at gap T: variance e^{-rate T}.
  const double single = variance;
  // |Cov(X_s X_t, X_u X_v)| = |E[X_s X_t X_u X_v] - K(t-s) K(v-u)|, largest
  // when s = t and u = v; its T -> 0 envelope sets the coefficient.
  Eigen::Matrix4d cov = Eigen::Matrix4d::Constant(variance);
  const double product = gaussian_fourth_moment(cov) - variance * variance;
  return DecorrelationProfile::exponential(std::max(single, product), rate);
}

double gaussian_l4_norm(double mean, double variance) {
  require(variance >= 0.0, "variance must be >= 0");
  const double m2 = mean * mean;
  return std::pow(m2 * m2 + 6.0 * m2 * variance + 3.0 * variance * variance, 0.25);
}

}  // namespace ioest
