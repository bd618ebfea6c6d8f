#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "ioest/error.hpp"
#include "ioest/process_models.hpp"

using namespace ioest;

namespace {

RandomStreamSpec stream(std::uint64_t seed, std::uint64_t rep = 0) {
  return {seed, rep, StreamRole::process_noise};
}

double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double var_of(std::span<const double> v) {
  const double m = mean_of(v);
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size());
}

double autocorr(std::span<const double> v, std::size_t lag) {
  const double m = mean_of(v);
  double num = 0, den = 0;
  for (std::size_t i = 0; i + lag < v.size(); ++i) num += (v[i] - m) * (v[i + lag] - m);
  for (double x : v) den += (x - m) * (x - m);
  return num / static_cast<double>(v.size() - lag) / (den / static_cast<double>(v.size()));
}

// Two-sample Kolmogorov-Smirnov statistic.
double ks_statistic(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double d = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] <= b[j]) ++i; else ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / a.size() - static_cast<double>(j) / b.size()));
  }
  return d;
}

// Simpson quadrature of x^k exp(-x^4/4) over [-8, 8].
double quartic_moment(int k) {
  const int n = 20000;
  const double lo = -8, hi = 8, h = (hi - lo) / n;
  double s = 0;
  for (int i = 0; i <= n; ++i) {
    const double x = lo + i * h;
    const double w = (i == 0 || i == n) ? 1 : (i % 2 ? 4 : 2);
    s += w * std::pow(x, k) * std::exp(-std::pow(x, 4) / 4);
  }
  return s * h / 3;
}

}  // namespace

TEST_SUITE("process_models") {
  TEST_CASE("OU stationary variance and unit-lag autocorrelation") {
    const auto g = simulate_ou({}, 200000, 0.05, stream(21));
    CHECK(var_of(g.values()) == doctest::Approx(1.0).epsilon(0.05));
    CHECK(std::abs(mean_of(g.values())) < 0.05);
    CHECK(autocorr(g.values(), 20) == doctest::Approx(std::exp(-1.0)).epsilon(0.05));
  }

  TEST_CASE("OU covariance function") {
    const OUParams p{1.0, 2.0, 3.0};
    CHECK(ou_true_covariance(p, 0) == doctest::Approx(9.0 / 4.0));
    CHECK(ou_true_covariance(p, 0.5) == doctest::Approx(9.0 / 4.0 * std::exp(-1.0)));
  }

  TEST_CASE("OU with zero noise is deterministic at the mean") {
    const OUParams p{3.0, 1.0, 0.0};
    CHECK_THROWS_AS(simulate_ou(p, 10, 0.1, stream(1)), Error);
    const auto g = simulate_ou(p, 10, 0.1, stream(1), {true});
    for (double v : g.values()) CHECK(v == doctest::Approx(3.0));
  }

  TEST_CASE("zero length and bad step are rejected") {
    CHECK_THROWS_AS(simulate_ou({}, 0, 0.1, stream(1)), Error);
    CHECK_THROWS_AS(simulate_ou({}, 10, 0.0, stream(1)), Error);
    CHECK_THROWS_AS(simulate_heston({}, 0, 0.1, stream(1)), Error);
  }

  TEST_CASE("exact OU and Euler OU agree in law") {
    const std::size_t spacing = 500, count = 2000;
    const auto exact = simulate_ou({}, spacing * count, 0.01, stream(31));
    const auto euler = simulate_ou_euler({}, spacing * count, 0.01, stream(32));
    std::vector<double> a, b;
    for (std::size_t i = spacing - 1; i < exact.length(); i += spacing) {
      a.push_back(exact.at(i, 0));
      b.push_back(euler.at(i, 0));
    }
    // Critical value at the 0.1% level.
    CHECK(ks_statistic(a, b) < 1.95 * std::sqrt(2.0 / static_cast<double>(count)));
  }

  TEST_CASE("quadratic gradient diffusion is OU") {
    GradientDiffusionParams p;
    const auto g = simulate_gradient_diffusion(p, 200000, 0.01, stream(41), 1000);
    // Q = x^2/2 gives rate 1 and variance sigma^2 / 2 = 1.
    CHECK(var_of(g.values()) == doctest::Approx(1.0).epsilon(0.08));
    CHECK(autocorr(g.values(), 100) == doctest::Approx(std::exp(-1.0)).epsilon(0.1));
  }

  TEST_CASE("quartic potential matches its Gibbs density") {
    GradientDiffusionParams p;
    p.potential = PolynomialPotential::quartic();
    const auto g = simulate_gradient_diffusion(p, 400000, 0.005, stream(42), 2000);
    const double expected = quartic_moment(2) / quartic_moment(0);
    CHECK(expected == doctest::Approx(2 * std::tgamma(0.75) / std::tgamma(0.25)).epsilon(1e-8));
    CHECK(var_of(g.values()) == doctest::Approx(expected).epsilon(0.06));
  }

  TEST_CASE("potential catalog") {
    CHECK(PolynomialPotential::quadratic().confining());
    CHECK(PolynomialPotential::double_well().confining());
    CHECK(PolynomialPotential::double_well().derivative(1.0) == doctest::Approx(0.0));
    CHECK(PolynomialPotential::from_name("quartic").value(2.0) == doctest::Approx(4.0));
    CHECK_THROWS_AS(PolynomialPotential::from_name("sextic"), Error);
    PolynomialPotential cubic{"cubic", {0, 0, 0, 1}};
    CHECK_FALSE(cubic.confining());
  }

  TEST_CASE("Heston variance is non-negative with CIR moments") {
    const HestonParams p;
    const auto paths = simulate_heston(p, 400000, 0.01, stream(51));
    for (double v : paths.variance.values()) REQUIRE(v >= 0.0);
    CHECK(mean_of(paths.variance.values()) == doctest::Approx(p.vol_mean).epsilon(0.05));
    CHECK(var_of(paths.variance.values()) ==
          doctest::Approx(p.stationary_variance()).epsilon(0.15));
    CHECK(cir_true_covariance(p, 0.0) == doctest::Approx(0.3 * 0.3 * 0.04 / 4.0));
  }

  TEST_CASE("Heston with vanishing vol-of-vol relaxes deterministically") {
    HestonParams p;
    p.vol_of_vol = 0.0;
    CHECK_THROWS_AS(simulate_heston(p, 10, 0.01, stream(1)), Error);
    const auto paths = simulate_heston(p, 100, 0.01, stream(1), VarianceInit::fixed(0.1), {true});
    // Euler recursion of v' = kappa (theta - v).
    double v = 0.1;
    for (std::size_t n = 0; n < 100; ++n) {
      v += p.vol_reversion * (p.vol_mean - v) * 0.01;
      REQUIRE(paths.variance.at(n, 0) == doctest::Approx(v).epsilon(1e-12));
    }
  }

  TEST_CASE("realized volatility identities") {
    const std::size_t window = 4;
    const double eps = 0.01;
    const auto flat = TrajectoryGrid::scalar(eps, std::vector<double>(20, 3.0));
    const auto zero = realized_volatility_observable(flat, eps, window);
    CHECK(zero.lead == window);
    CHECK(zero.path.length() == 16);
    for (double v : zero.path.values()) CHECK(v == 0.0);

    std::vector<double> ramp(20);
    for (std::size_t i = 0; i < ramp.size(); ++i) ramp[i] = 0.2 * static_cast<double>(i);
    const auto lin = realized_volatility_observable(TrajectoryGrid::scalar(eps, ramp), eps, window);
    for (double v : lin.path.values()) CHECK(v == doctest::Approx(0.04 / eps));

    CHECK_THROWS_AS(realized_volatility_observable(flat, 0.02, window), Error);
    CHECK_THROWS_AS(realized_volatility_observable(flat, eps, 20), Error);
    CHECK(default_realized_window(0.01) == 10);
    CHECK(default_realized_window(0.02) == 8);
  }

  TEST_CASE("realized volatility approaches the variance as eps shrinks") {
    const HestonParams p;
    double prev = 1e300;
    for (double eps : {0.02, 0.005, 0.00125}) {
      const std::size_t window = default_realized_window(eps);
      const auto len = static_cast<std::size_t>(200.0 / eps);
      const auto paths = simulate_heston(p, len, eps, stream(61));
      const auto y = realized_volatility_observable(paths.returns, eps, window);
      double err = 0;
      for (std::size_t i = 0; i < y.path.length(); ++i) {
        const double d = y.path.at(i, 0) - paths.variance.at(i + y.lead, 0);
        err += d * d;
      }
      err = std::sqrt(err / static_cast<double>(y.path.length()));
      CHECK(err < prev);
      prev = err;
    }
  }

  TEST_CASE("smoothing observable") {
    const auto flat = TrajectoryGrid::scalar(0.01, std::vector<double>(50, 2.5));
    const auto c = smoothing_observable(flat, 0.1);
    CHECK(c.lead == 10);
    for (double v : c.path.values()) CHECK(v == doctest::Approx(2.5));

    // X_t = t gives (1/eps) int_{t-eps}^t s ds = t - eps/2, exactly for the trapezoid rule.
    std::vector<double> t(50);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = 0.01 * static_cast<double>(i + 1);
    const auto lin = smoothing_observable(TrajectoryGrid::scalar(0.01, t), 0.1);
    for (std::size_t i = 0; i < lin.path.length(); ++i) {
      CHECK(lin.path.at(i, 0) == doctest::Approx(t[i + lin.lead] - 0.05).epsilon(1e-12));
    }
    CHECK_THROWS_AS(smoothing_observable(flat, 0.015), Error);
    CHECK_THROWS_AS(smoothing_observable(flat, 1.0), Error);
  }

  TEST_CASE("smoothing error scales like sqrt(eps)") {
    const double delta = 0.001;
    const auto x = simulate_ou({}, 400000, delta, stream(71));
    std::vector<double> log_eps, log_err;
    for (double eps : {0.01, 0.04, 0.16}) {
      const auto y = smoothing_observable(x, eps);
      double err = 0;
      for (std::size_t i = 0; i < y.path.length(); ++i) {
        const double d = y.path.at(i, 0) - x.at(i + y.lead, 0);
        err += d * d;
      }
      log_eps.push_back(std::log(eps));
      log_err.push_back(0.5 * std::log(err / static_cast<double>(y.path.length())));
    }
    const double slope = (log_err.back() - log_err.front()) / (log_eps.back() - log_eps.front());
    CHECK(slope == doctest::Approx(0.5).epsilon(0.3));
  }

  TEST_CASE("multiplicative perturbation has an exact L4 gap") {
    const auto x = simulate_ou({}, 1000, 0.1, stream(81));
    const double rho = 0.3;
    const auto y = multiplicative_perturbation_observable(x, rho);
    double lhs = 0, rhs = 0;
    for (std::size_t i = 0; i < x.length(); ++i) {
      lhs += std::pow(y.at(i, 0) - x.at(i, 0), 4);
      rhs += std::pow(x.at(i, 0), 4);
    }
    CHECK(std::pow(lhs, 0.25) == doctest::Approx(rho * std::pow(rhs, 0.25)).epsilon(1e-12));
    CHECK_THROWS_AS(multiplicative_perturbation_observable(x, -0.1), Error);
  }

  TEST_CASE("slow-fast catalog") {
    const auto co = slow_fast_coefficients(SlowFastEntry::state_dependent_mean);
    CHECK(co.averaged_drift(1.0) == doctest::Approx(-1.0 + std::sin(1.0)));
    CHECK(slow_fast_entry_from_name("modulated_drift") == SlowFastEntry::modulated_drift);
    CHECK(to_string(SlowFastEntry::linear_ou) == "linear_ou");
    CHECK_THROWS_AS(slow_fast_entry_from_name("nope"), Error);
  }

  TEST_CASE("slow-fast simulation") {
    SlowFastParams p{1.0, SlowFastEntry::linear_ou};
    const auto far = simulate_slow_fast(p, 1000, 0.1, stream(91), 100);
    for (double v : far.slow.values()) REQUIRE(std::isfinite(v));
    CHECK_THROWS_AS(simulate_slow_fast({0.1, SlowFastEntry::linear_ou}, 10, 0.02, stream(1)),
                    Error);

    // The slow path approaches the averaged path as the scale separation grows.
    double prev = 1e300;
    for (double scale : {0.1, 0.01}) {
      const double dt = scale / 10;
      const auto len = static_cast<std::size_t>(20.0 / dt);
      const auto paths = simulate_slow_fast({scale, SlowFastEntry::linear_ou}, len, dt,
                                            stream(92), static_cast<std::size_t>(2.0 / dt));
      double err = 0;
      for (std::size_t i = 0; i < len; ++i) {
        const double d = paths.slow.at(i, 0) - paths.reduced.at(i, 0);
        err += d * d;
      }
      err = std::sqrt(err / static_cast<double>(len));
      CHECK(err < prev);
      prev = err;
    }
  }

  TEST_CASE("OU windows look stationary") {
    const auto g = simulate_ou({}, 100000, 0.05, stream(101));
    const auto v = g.values();
    const std::size_t half = v.size() / 2;
    const auto first = v.subspan(0, half), second = v.subspan(half);
    CHECK(std::abs(mean_of(first) - mean_of(second)) < 0.1);
    CHECK(var_of(first) == doctest::Approx(var_of(second)).epsilon(0.1));
  }
}
