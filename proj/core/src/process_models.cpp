#include "ioest/process_models.hpp"

#include <algorithm>
#include <cmath>

#include "ioest/error.hpp"

namespace ioest {
namespace {

void require(bool condition, ErrorKind kind, const std::string& what) {
  if (!condition) throw Error(kind, what);
}

void require_length(std::size_t length) {
  require(length >= 1, ErrorKind::ParameterDomain, "requested an empty trajectory (length 0)");
}

void require_step(double delta) {
  require(delta > 0.0 && std::isfinite(delta), ErrorKind::ParameterDomain,
          "time step must be positive and finite");
}

}  // namespace

// --- OU ---------------------------------------------------------------------

void OUParams::validate(const SimulationOptions& options) const {
  require(std::isfinite(mean), ErrorKind::ParameterDomain, "OU mean must be finite");
  require(reversion > 0.0 && std::isfinite(reversion), ErrorKind::ParameterDomain,
          "OU reversion must be > 0");
  const bool noise_ok = options.allow_degenerate_noise ? noise >= 0.0 : noise > 0.0;
  require(noise_ok && std::isfinite(noise), ErrorKind::ParameterDomain, "OU noise must be > 0");
}

TrajectoryGrid simulate_ou(const OUParams& params, std::size_t length, double delta,
                           const RandomStreamSpec& stream, const SimulationOptions& options) {
  params.validate(options);
  require_length(length);
  require_step(delta);

  RandomStream rng(stream);
  const double var = params.stationary_variance();
  const double decay = std::exp(-params.reversion * delta);
  const double step_sd = std::sqrt(var * -std::expm1(-2.0 * params.reversion * delta));

  std::vector<double> data(length);
  double x = params.mean + std::sqrt(var) * rng.normal();
  for (std::size_t n = 0; n < length; ++n) {
    x = params.mean + decay * (x - params.mean) + step_sd * rng.normal();
    data[n] = x;
  }
  return TrajectoryGrid::scalar(delta, std::move(data));
}

TrajectoryGrid simulate_ou_euler(const OUParams& params, std::size_t length, double delta,
                                 const RandomStreamSpec& stream) {
  params.validate();
  require_length(length);
  require_step(delta);

  RandomStream rng(stream);
  const double sqrt_dt = std::sqrt(delta);
  std::vector<double> data(length);
  double x = params.mean + std::sqrt(params.stationary_variance()) * rng.normal();
  for (std::size_t n = 0; n < length; ++n) {
    x += params.reversion * (params.mean - x) * delta + params.noise * sqrt_dt * rng.normal();
    data[n] = x;
  }
  return TrajectoryGrid::scalar(delta, std::move(data));
}

double ou_true_covariance(const OUParams& params, double lag) {
  require(lag >= 0.0, ErrorKind::ParameterDomain, "lag must be >= 0");
  return params.stationary_variance() * std::exp(-params.reversion * lag);
}

// --- gradient diffusions ----------------------------------------------------

PolynomialPotential PolynomialPotential::quadratic() { return {"quadratic", {0.0, 0.0, 0.5}}; }
PolynomialPotential PolynomialPotential::quartic() {
  return {"quartic", {0.0, 0.0, 0.0, 0.0, 0.25}};
}
PolynomialPotential PolynomialPotential::double_well() {
  return {"double_well", {0.0, 0.0, -0.5, 0.0, 0.25}};
}

PolynomialPotential PolynomialPotential::from_name(const std::string& name) {
  if (name == "quadratic") return quadratic();
  if (name == "quartic") return quartic();
  if (name == "double_well") return double_well();
  throw Error(ErrorKind::ParameterDomain, "unknown potential '" + name + "'");
}

double PolynomialPotential::value(double x) const noexcept {
  double acc = 0.0;
  for (auto it = coefficients.rbegin(); it != coefficients.rend(); ++it) acc = acc * x + *it;
  return acc;
}

double PolynomialPotential::derivative(double x) const noexcept {
  double acc = 0.0;
  for (std::size_t k = coefficients.size(); k-- > 1;) {
    acc = acc * x + static_cast<double>(k) * coefficients[k];
  }
  return acc;
}

bool PolynomialPotential::confining() const noexcept {
  for (std::size_t k = coefficients.size(); k-- > 0;) {
    if (coefficients[k] != 0.0) return k >= 2 && k % 2 == 0 && coefficients[k] > 0.0;
  }
  return false;
}

void GradientDiffusionParams::validate() const {
  require(potential.confining(), ErrorKind::ParameterDomain,
          "potential '" + potential.name + "' is not confining");
  require(diffusion.rows() >= 1 && diffusion.rows() == diffusion.cols(),
          ErrorKind::ParameterDomain, "diffusion matrix must be square");
  require(diffusion.allFinite(), ErrorKind::ParameterDomain, "diffusion matrix must be finite");
  Eigen::FullPivLU<Eigen::MatrixXd> lu(diffusion);
  require(lu.rank() == diffusion.rows(), ErrorKind::ParameterDomain,
          "diffusion matrix must have full rank");
}

std::size_t default_burn_in_steps(double slowest_rate, double delta) {
  require(slowest_rate > 0.0, ErrorKind::ParameterDomain, "reversion rate must be > 0");
  require_step(delta);
  return static_cast<std::size_t>(std::ceil(10.0 / (slowest_rate * delta)));
}

TrajectoryGrid simulate_gradient_diffusion(const GradientDiffusionParams& params,
                                           std::size_t length, double delta_fine,
                                           const RandomStreamSpec& stream, std::size_t burn_in) {
  params.validate();
  require_length(length);
  require_step(delta_fine);

  // Drift step must stay below half the state scale at representative points.
  const double scale = std::max(1.0, params.diffusion.cwiseAbs().maxCoeff());
  for (double m : {1.0, 2.0, 4.0}) {
    const double x = m * scale;
    if (delta_fine * std::abs(params.potential.derivative(x)) >= 0.5 * x) {
      throw Error(ErrorKind::ParameterDomain,
                  "delta_fine too large for potential '" + params.potential.name + "'");
    }
  }

  const std::size_t r = params.dim();
  RandomStream rng(stream);
  const double sqrt_dt = std::sqrt(delta_fine);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(r));
  Eigen::VectorXd z(static_cast<Eigen::Index>(r));
  Eigen::VectorXd drift(static_cast<Eigen::Index>(r));
  std::vector<double> data(length * r);

  const std::size_t total = burn_in + length;
  for (std::size_t n = 0; n < total; ++n) {
    for (std::size_t i = 0; i < r; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      drift(ii) = -params.potential.derivative(x(ii));
      z(ii) = rng.normal();
    }
    x += drift * delta_fine + sqrt_dt * (params.diffusion * z);
    if (!x.allFinite()) {
      throw Error(ErrorKind::SimulationDiverged,
                  "gradient diffusion produced a non-finite state at step " + std::to_string(n));
    }
    if (n >= burn_in) {
      std::copy(x.data(), x.data() + r, data.begin() + static_cast<std::ptrdiff_t>((n - burn_in) * r));
    }
  }
  return TrajectoryGrid(r, delta_fine, std::move(data));
}

// --- Heston -----------------------------------------------------------------

void HestonParams::validate() const {
  require(std::isfinite(drift), ErrorKind::ParameterDomain, "Heston drift must be finite");
  require(vol_reversion > 0.0 && vol_mean > 0.0 && vol_of_vol >= 0.0 &&
              std::isfinite(vol_reversion) && std::isfinite(vol_mean) && std::isfinite(vol_of_vol),
          ErrorKind::ParameterDomain, "Heston kappa, theta must be > 0 and sigma >= 0");
}

double HestonParams::feller_ratio() const noexcept {
  return 2.0 * vol_reversion * vol_mean / (vol_of_vol * vol_of_vol);
}

double HestonParams::stationary_variance() const noexcept {
  return vol_of_vol * vol_of_vol * vol_mean / (2.0 * vol_reversion);
}

double cir_true_covariance(const HestonParams& params, double lag) {
  require(lag >= 0.0, ErrorKind::ParameterDomain, "lag must be >= 0");
  return params.stationary_variance() * std::exp(-params.vol_reversion * lag);
}

HestonPaths simulate_heston(const HestonParams& params, std::size_t length, double delta_fine,
                            const RandomStreamSpec& stream, VarianceInit v0,
                            const SimulationOptions& options) {
  params.validate();
  require(options.allow_degenerate_noise || params.vol_of_vol > 0.0, ErrorKind::ParameterDomain,
          "Heston vol_of_vol must be > 0");
  require_length(length);
  require_step(delta_fine);

  RandomStreamSpec vol_spec = stream;
  vol_spec.role = StreamRole::process_noise;
  RandomStreamSpec price_spec = stream;
  price_spec.role = StreamRole::auxiliary_noise;
  RandomStream vol_rng(vol_spec);
  RandomStream price_rng(price_spec);

  double v = 0.0;
  if (v0.mode == VarianceInit::Mode::fixed) {
    require(v0.value >= 0.0, ErrorKind::ParameterDomain, "initial variance must be >= 0");
    v = v0.value;
  } else if (params.vol_of_vol == 0.0) {
    v = params.vol_mean;
  } else {
    // Stationary law: Gamma(2 kappa theta / sigma^2, sigma^2 / (2 kappa)).
    const double shape = params.feller_ratio();
    const double scale = params.vol_of_vol * params.vol_of_vol / (2.0 * params.vol_reversion);
    v = scale * vol_rng.gamma(shape);
  }

  const double sqrt_dt = std::sqrt(delta_fine);
  std::vector<double> returns(length), variance(length);
  double r = 0.0;
  for (std::size_t n = 0; n < length; ++n) {
    const double v_plus = std::max(v, 0.0);
    const double sqrt_v = std::sqrt(v_plus);
    r += params.drift * delta_fine + sqrt_v * sqrt_dt * price_rng.normal();
    v += params.vol_reversion * (params.vol_mean - v_plus) * delta_fine +
         params.vol_of_vol * sqrt_v * sqrt_dt * vol_rng.normal();
    if (!std::isfinite(v) || !std::isfinite(r)) {
      throw Error(ErrorKind::SimulationDiverged,
                  "Heston state became non-finite at step " + std::to_string(n));
    }
    returns[n] = r;
    variance[n] = std::max(v, 0.0);
  }
  return {TrajectoryGrid::scalar(delta_fine, std::move(returns)),
          TrajectoryGrid::scalar(delta_fine, std::move(variance))};
}

// --- observables ------------------------------------------------------------

std::size_t default_realized_window(double eps) {
  require(eps > 0.0, ErrorKind::ParameterDomain, "eps must be > 0");
  return static_cast<std::size_t>(std::ceil(1.0 / std::sqrt(eps) - 1e-9));
}

Observable realized_volatility_observable(const TrajectoryGrid& returns, double eps,
                                          std::size_t window) {
  require(window >= 1, ErrorKind::ParameterDomain, "realized-volatility window must be >= 1");
  require(eps > 0.0, ErrorKind::ParameterDomain, "eps must be > 0");
  if (std::abs(returns.delta() - eps) > 1e-9 * eps) {
    throw Error(ErrorKind::SchemeGridMismatch, "return grid step must equal eps");
  }
  const std::size_t length = returns.length();
  if (length < window + 1) {
    throw Error(ErrorKind::InsufficientData,
                "need at least M + 1 = " + std::to_string(window + 1) + " return samples");
  }
  const std::size_t r = returns.dim();
  const double scale = 1.0 / (static_cast<double>(window) * eps);
  const std::size_t out_len = length - window;
  std::vector<double> out(out_len * r);
  for (std::size_t c = 0; c < r; ++c) {
    // Rolling sum of squared increments, recomputed every `window` outputs
    // to keep round-off from accumulating.
    double rolling = 0.0;
    for (std::size_t t = 0; t < out_len; ++t) {
      const std::size_t end = t + window;  // 0-based index of the newest return
      if (t % window == 0) {
        rolling = 0.0;
        for (std::size_t k = t + 1; k <= end; ++k) {
          const double d = returns.at(k, c) - returns.at(k - 1, c);
          rolling += d * d;
        }
      } else {
        const double d_new = returns.at(end, c) - returns.at(end - 1, c);
        const double d_old = returns.at(t, c) - returns.at(t - 1, c);
        rolling += d_new * d_new - d_old * d_old;
      }
      out[t * r + c] = scale * std::max(rolling, 0.0);
    }
  }
  return {TrajectoryGrid(r, eps, std::move(out)), window};
}

Observable smoothing_observable(const TrajectoryGrid& x, double eps) {
  require(eps > 0.0, ErrorKind::ParameterDomain, "eps must be > 0");
  const double ratio = eps / x.delta();
  const double m_real = std::nearbyint(ratio);
  if (m_real < 1.0 || std::abs(ratio - m_real) > 1e-9 * std::max(1.0, ratio)) {
    throw Error(ErrorKind::SchemeGridMismatch, "eps must be an integer multiple of the grid step");
  }
  const auto m = static_cast<std::size_t>(m_real);
  if (x.length() < m + 1) {
    throw Error(ErrorKind::InsufficientData, "trajectory shorter than the smoothing window");
  }
  const std::size_t r = x.dim();
  const std::size_t out_len = x.length() - m;
  const double w = 1.0 / static_cast<double>(m);
  std::vector<double> out(out_len * r);
  for (std::size_t t = 0; t < out_len; ++t) {
    const std::size_t end = t + m;
    for (std::size_t c = 0; c < r; ++c) {
      double acc = 0.5 * (x.at(t, c) + x.at(end, c));
      for (std::size_t k = t + 1; k < end; ++k) acc += x.at(k, c);
      out[t * r + c] = w * acc;
    }
  }
  return {TrajectoryGrid(r, x.delta(), std::move(out)), m};
}

TrajectoryGrid multiplicative_perturbation_observable(const TrajectoryGrid& x, double rho) {
  require(rho >= 0.0 && std::isfinite(rho), ErrorKind::ParameterDomain, "rho must be >= 0");
  std::vector<double> out(x.values().begin(), x.values().end());
  const double factor = 1.0 + rho;
  for (double& v : out) v *= factor;
  return TrajectoryGrid(x.dim(), x.delta(), std::move(out));
}

// --- slow-fast ----------------------------------------------------------------

SlowFastCoefficients slow_fast_coefficients(SlowFastEntry entry) {
  const auto one = [](double, double) { return 1.0; };
  const auto unit = [](double) { return 1.0; };
  const auto sqrt2 = [](double, double) { return std::sqrt(2.0); };
  switch (entry) {
    case SlowFastEntry::linear_ou:
      return {[](double x, double y) { return -x + y; }, one,
              [](double, double y) { return -y; }, sqrt2,
              [](double x) { return -x; }, unit, [](double) { return 0.0; }};
    case SlowFastEntry::modulated_drift:
      return {[](double x, double y) { return -0.5 * x * (1.0 + y * y); }, one,
              [](double, double y) { return -y; }, sqrt2,
              [](double x) { return -x; }, unit, [](double) { return 0.0; }};
    case SlowFastEntry::state_dependent_mean:
      return {[](double x, double y) { return -x + y; }, one,
              [](double x, double y) { return std::sin(x) - y; }, sqrt2,
              [](double x) { return -x + std::sin(x); }, unit,
              [](double x) { return std::sin(x); }};
  }
  throw Error(ErrorKind::ParameterDomain, "unknown slow-fast catalog entry");
}

SlowFastEntry slow_fast_entry_from_name(const std::string& name) {
  if (name == "linear_ou") return SlowFastEntry::linear_ou;
  if (name == "modulated_drift") return SlowFastEntry::modulated_drift;
  if (name == "state_dependent_mean") return SlowFastEntry::state_dependent_mean;
  throw Error(ErrorKind::ParameterDomain, "unknown slow-fast catalog entry '" + name + "'");
}

std::string to_string(SlowFastEntry entry) {
  switch (entry) {
    case SlowFastEntry::linear_ou: return "linear_ou";
    case SlowFastEntry::modulated_drift: return "modulated_drift";
    case SlowFastEntry::state_dependent_mean: return "state_dependent_mean";
  }
  return "unknown";
}

void SlowFastParams::validate() const {
  require(scale > 0.0 && std::isfinite(scale), ErrorKind::ParameterDomain,
          "slow-fast scale eps must be > 0");
}

SlowFastPaths simulate_slow_fast(const SlowFastParams& params, std::size_t length,
                                 double delta_fine, const RandomStreamSpec& stream,
                                 std::optional<std::size_t> burn_in) {
  params.validate();
  require_length(length);
  require_step(delta_fine);
  if (delta_fine > params.scale / 10.0 * (1.0 + 1e-12)) {
    throw Error(ErrorKind::ParameterDomain,
                "delta_fine must resolve the fast scale (delta_fine <= eps / 10)");
  }
  const SlowFastCoefficients co = slow_fast_coefficients(params.entry);
  const std::size_t warmup = burn_in.value_or(default_burn_in_steps(1.0, delta_fine));

  RandomStreamSpec slow_spec = stream;
  slow_spec.role = StreamRole::process_noise;
  RandomStreamSpec fast_spec = stream;
  fast_spec.role = StreamRole::auxiliary_noise;
  RandomStream slow_rng(slow_spec);
  RandomStream fast_rng(fast_spec);

  const double sqrt_dt = std::sqrt(delta_fine);
  const double inv_eps = 1.0 / params.scale;
  const double inv_sqrt_eps = 1.0 / std::sqrt(params.scale);

  double x = 0.0;
  double reduced = 0.0;
  double y = co.fast_mean(x) + fast_rng.normal();
  std::vector<double> slow(length), red(length);
  for (std::size_t n = 0; n < warmup + length; ++n) {
    const double dw1 = sqrt_dt * slow_rng.normal();
    const double dw2 = sqrt_dt * fast_rng.normal();
    const double x_next = x + co.a(x, y) * delta_fine + co.b(x, y) * dw1;
    const double y_next =
        y + inv_eps * co.c(x, y) * delta_fine + inv_sqrt_eps * co.d(x, y) * dw2;
    reduced += co.averaged_drift(reduced) * delta_fine + co.averaged_diffusion(reduced) * dw1;
    x = x_next;
    y = y_next;
    if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(reduced)) {
      throw Error(ErrorKind::SimulationDiverged,
                  "slow-fast state became non-finite at step " + std::to_string(n));
    }
    if (n >= warmup) {
      slow[n - warmup] = x;
      red[n - warmup] = reduced;
    }
  }
  return {TrajectoryGrid::scalar(delta_fine, std::move(slow)),
          TrajectoryGrid::scalar(delta_fine, std::move(red))};
}

}  // namespace ioest
