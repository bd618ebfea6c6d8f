#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <vector>

#include "ioest/error.hpp"
#include "ioest/random_stream.hpp"
#include "ioest/subsampling_scheduler.hpp"

using namespace ioest;

namespace {

// Exponential profile with int_1^inf f = i_f: c e^{-1} = i_f at unit rate.
BoundInputs unit_inputs(double i_f = 1.0) {
  BoundInputs in;
  in.nu = 1.0;
  in.horizon_A = 0.0;
  in.dim_r = 1;
  in.profile = DecorrelationProfile::exponential(i_f * std::exp(1.0), 1.0);
  in.lipschitz_lambda = 1.0;
  return in;
}

}  // namespace

TEST_SUITE("subsampling_scheduler") {
  TEST_CASE("scheme_from_rho examples") {
    const auto rec = scheme_from_rho(0.1, unit_inputs());
    CHECK(rec.scheme.n_obs == 1000);
    CHECK(rec.scheme.big_delta == doctest::Approx(0.1));
    CHECK(rec.span_S == doctest::Approx(100.0));
    const auto half = scheme_from_rho(0.5, unit_inputs());
    CHECK(half.scheme.n_obs == 8);
    CHECK(half.scheme.big_delta == doctest::Approx(0.5));
    const auto smaller = scheme_from_rho(0.05, unit_inputs());
    CHECK(smaller.scheme.n_obs == 8 * rec.scheme.n_obs);
    CHECK(smaller.span_S == doctest::Approx(4 * rec.span_S));
    CHECK_THROWS_AS(scheme_from_rho(0.0, unit_inputs()), Error);
    CHECK_THROWS_AS(scheme_from_rho(1.0, unit_inputs()), Error);
  }

  TEST_CASE("scheme_from_n") {
    const auto s = scheme_from_n(1000);
    CHECK(s.n_obs == 1000);
    CHECK(s.big_delta == doctest::Approx(0.1));
    CHECK_FALSE(s.resolved());
    CHECK_THROWS_AS(scheme_from_n(7), Error);
  }

  TEST_CASE("scheme sequence validation") {
    std::vector<std::pair<double, SubsamplingScheme>> seq;
    for (double eps : {0.4, 0.2, 0.1}) seq.emplace_back(eps, scheme_from_rho(eps, unit_inputs()).scheme);
    CHECK(validate_scheme_sequence(seq).ok);

    std::vector<std::pair<double, SubsamplingScheme>> flat{
        {0.4, {100, 0, 0.1}}, {0.2, {100, 0, 0.1}}, {0.1, {100, 0, 0.1}}};
    CHECK_FALSE(validate_scheme_sequence(flat).ok);

    std::vector<std::pair<double, SubsamplingScheme>> growing{
        {0.4, {100, 0, 0.1}}, {0.2, {1000, 0, 0.2}}, {0.1, {10000, 0, 0.3}}};
    CHECK_FALSE(validate_scheme_sequence(growing).ok);
    CHECK_FALSE(validate_scheme_sequence(std::span(seq).first(2)).ok);
  }

  TEST_CASE("rho schemes stay valid along any decreasing rho sequence") {
    std::vector<std::pair<double, SubsamplingScheme>> seq;
    for (double rho = 0.9; rho > 0.01; rho *= 0.63) {
      seq.emplace_back(rho, scheme_from_rho(rho, unit_inputs(), 2.0, 0.5).scheme);
    }
    CHECK(validate_scheme_sequence(seq).ok);
  }

  TEST_CASE("decorrelation sum examples") {
    const auto f = DecorrelationProfile::exponential(1.0, 1.0);
    const auto g = decorrelation_sum_bound(3, 1.0, f);
    CHECK(g.g_exact == doctest::Approx(std::exp(-1.0) + 2 * std::exp(-2.0)));
    CHECK(g.g_exact == doctest::Approx(0.6387).epsilon(1e-4));
    for (double d : {0.01, 0.7, 5.0}) {
      CHECK(decorrelation_sum_bound(2, d, f).g_exact == doctest::Approx(f(d)));
    }
    CHECK_THROWS_AS(decorrelation_sum_bound(1, 1.0, f), Error);
  }

  TEST_CASE("summation bound holds over a grid of q and d") {
    const std::array profiles{DecorrelationProfile::exponential(1.0, 1.0),
                              DecorrelationProfile::exponential(3.0, 0.2),
                              DecorrelationProfile::exponential(0.5, 7.0)};
    int violations = 0;
    for (const auto& f : profiles) {
      for (std::size_t q = 2; q <= 200; ++q) {
        for (int k = 0; k <= 30; ++k) {
          const double d = 0.01 * std::pow(1000.0, k / 30.0);
          const auto g = decorrelation_sum_bound(q, d, f);
          if (g.g_exact > g.g_bound) ++violations;
        }
      }
    }
    CHECK(violations == 0);
  }

  TEST_CASE("profile integrals") {
    const auto e = DecorrelationProfile::exponential(2.0, 0.5);
    CHECK(e.integral_I_f() == doctest::Approx(4.0 * std::exp(-0.5)));
    CHECK(e.integral_from_zero() == doctest::Approx(4.0));
    const auto p = DecorrelationProfile::power(1.0, 3.0);
    CHECK(p.integral_I_f() == doctest::Approx(0.5));
    CHECK(std::isinf(p.integral_from_zero()));
    CHECK(p(2.0) == doctest::Approx(0.125));
    CHECK_THROWS_AS(DecorrelationProfile::power(1.0, 1.0), Error);
    const auto t = DecorrelationProfile::tabulated({1.0, 2.0}, {1.0, std::exp(-1.0)});
    CHECK(t(1.5) == doctest::Approx(std::exp(-0.5)));
    CHECK(t(0.1) == doctest::Approx(1.0));
    CHECK(t(3.0) == doctest::Approx(std::exp(-2.0)));
  }

  TEST_CASE("unobservable bound constants") {
    const auto in = unit_inputs(1.0);
    CHECK(in.integral() == doctest::Approx(1.0));
    const auto b = error_bound_unobservable(in, {100, 0, 0.1});
    CHECK(b.gamma_app == doctest::Approx(10.5));
    CHECK(b.covariance_bound == doctest::Approx(10.5 / std::sqrt(10.0) + 0.1));
    CHECK(error_bound_unobservable(unit_inputs(2.0), {100, 0, 0.1}).mean_constant_C ==
          doctest::Approx(14.0));

    double prev = b.covariance_bound;
    for (std::size_t n : {1000u, 10000u, 100000u}) {
      const auto s = scheme_from_n(n);
      const double next = error_bound_unobservable(in, s).covariance_bound;
      CHECK(next < prev);
      prev = next;
    }
  }

  TEST_CASE("observable bound") {
    auto in = unit_inputs();
    const auto s = scheme_from_n(1000);
    const double zero = error_bound_observable(in, s, 0.0);
    const double with = error_bound_observable(in, s, 0.1);
    CHECK(with - zero == doctest::Approx(0.4));
    // rho = 0 folds the unobservable bound at N Delta = N^(2/3).
    const double gamma = error_bound_unobservable(in, s).gamma_app;
    CHECK(zero == doctest::Approx((gamma + 1.0) / 10.0));

    const auto s2 = scheme_from_n(2000);
    const double z2 = error_bound_observable(in, s2, 0.0);
    CHECK(z2 / zero == doctest::Approx(std::pow(2.0, -1.0 / 3.0)));

    for (double rho : {0.0, 0.01, 0.3, 0.9}) {
      CHECK(error_bound_observable(in, s, rho) >= 4.0 * in.nu * rho);
    }
    CHECK_THROWS_AS(error_bound_observable(in, {1000, 0, 0.5}, 0.1), Error);
  }

  TEST_CASE("gaussian fourth moment") {
    CHECK(gaussian_fourth_moment(Eigen::Matrix4d::Ones()) == doctest::Approx(3.0));
    Eigen::Matrix4d c = Eigen::Matrix4d::Identity();
    c(0, 1) = c(1, 0) = 0.3;
    c(2, 3) = c(3, 2) = -0.6;
    CHECK(gaussian_fourth_moment(c) == doctest::Approx(0.3 * -0.6));
    Eigen::Matrix4d bad = Eigen::Matrix4d::Identity();
    bad(0, 1) = 1.0;
    CHECK_THROWS_AS(gaussian_fourth_moment(bad), Error);
  }

  TEST_CASE("fourth moment is invariant under relabeling") {
    RandomStream rng({77, 0, StreamRole::process_noise});
    Eigen::Matrix4d a;
    for (int i = 0; i < 16; ++i) a.data()[i] = rng.normal();
    const Eigen::Matrix4d cov = a * a.transpose();
    const double base = gaussian_fourth_moment(cov);
    std::array<int, 4> perm{0, 1, 2, 3};
    do {
      Eigen::Matrix4d p;
      for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) p(i, j) = cov(perm[i], perm[j]);
      CHECK(gaussian_fourth_moment(p) == doctest::Approx(base).epsilon(1e-12));
    } while (std::next_permutation(perm.begin(), perm.end()));
  }

  TEST_CASE("OU product decorrelation: pairing formula against Monte Carlo") {
    // Stationary OU, unit variance and rate; G = X_0 X_t, H = X_u X_v with gap
    // T = u - t. Cov(G, H) = K(u) K(v - t) + K(v) K(u - t).
    const double t = 0.3, u = 1.3, v = 1.8;
    auto k = [](double h) { return std::exp(-std::abs(h)); };
    const double times[4] = {0.0, t, u, v};
    Eigen::Matrix4d cov;
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) cov(i, j) = k(times[i] - times[j]);
    const double pairing = gaussian_fourth_moment(cov) - k(t) * k(v - u);
    CHECK(pairing == doctest::Approx(k(u) * k(v - t) + k(v) * k(u - t)));
    // Each cross-pairing product is at most sigma0^4 e^{-gamma T}.
    CHECK(k(u) * k(v - t) <= std::exp(-(u - t)));
    CHECK(k(v) * k(u - t) <= std::exp(-(u - t)));

    const Eigen::Matrix4d chol = Eigen::LLT<Eigen::Matrix4d>(cov).matrixL();
    RandomStream rng({78, 0, StreamRole::process_noise});
    const int n = 400000;
    double sg = 0, sh = 0, sgh = 0;
    for (int i = 0; i < n; ++i) {
      Eigen::Vector4d z;
      for (int j = 0; j < 4; ++j) z(j) = rng.normal();
      const Eigen::Vector4d x = chol * z;
      const double g = x(0) * x(1), h = x(2) * x(3);
      sg += g;
      sh += h;
      sgh += g * h;
    }
    const double mc = sgh / n - (sg / n) * (sh / n);
    CHECK(mc == doctest::Approx(pairing).epsilon(0.05));
  }

  TEST_CASE("gaussian helpers") {
    CHECK(gaussian_l4_norm(0.0, 1.0) == doctest::Approx(std::pow(3.0, 0.25)));
    CHECK(gaussian_l4_norm(2.0, 0.0) == doctest::Approx(2.0));
    const auto f = gaussian_exponential_profile(1.0, 2.0);
    CHECK(f.rate() == doctest::Approx(2.0));
    CHECK(f.coefficient() == doctest::Approx(2.0));
    CHECK(gaussian_exponential_profile(0.25, 1.0).coefficient() == doctest::Approx(0.25));
  }
}
