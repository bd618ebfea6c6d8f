#include <doctest.h>

#include <cmath>
#include <vector>

#include "ioest/error.hpp"
#include "ioest/moment_estimators.hpp"
#include "ioest/process_models.hpp"
#include "ioest/random_stream.hpp"

using namespace ioest;

namespace {

TrajectoryGrid random_grid(std::size_t dim, std::size_t len, std::uint64_t seed) {
  RandomStream rng({seed, 0, StreamRole::process_noise});
  std::vector<double> v(dim * len);
  for (double& x : v) x = rng.normal();
  return TrajectoryGrid(dim, 1.0, v);
}

// Textbook double loop, kept deliberately naive.
Eigen::MatrixXd brute_covariance(const TrajectoryGrid& g, std::size_t n, std::size_t kappa) {
  const std::size_t r = g.dim();
  Eigen::VectorXd m = Eigen::VectorXd::Zero(r), ms = Eigen::VectorXd::Zero(r);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t a = 0; a < r; ++a) {
      m(a) += g.at(i, a) / n;
      ms(a) += g.at(i + kappa, a) / n;
    }
  }
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(r, r);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t a = 0; a < r; ++a)
      for (std::size_t b = 0; b < r; ++b)
        k(a, b) += (g.at(i, a) - m(a)) * (g.at(i + kappa, b) - ms(b)) / n;
  return k;
}

}  // namespace

TEST_SUITE("moment_estimators") {
  TEST_CASE("lag_index rounds to the nearest sub-sampling step") {
    CHECK(lag_index(0.0, 0.1) == 0);
    CHECK(lag_index(1.0, 0.3) == 3);
    CHECK(lag_index(0.5, 0.2) == 2);
    CHECK(lag_index(0.75, 0.25) == 3);
    CHECK_THROWS_AS(lag_index(-1.0, 0.1), Error);
    CHECK_THROWS_AS(lag_index(1.0, 0.0), Error);
  }

  TEST_CASE("empirical mean and shifted mean") {
    const auto g = TrajectoryGrid::scalar(1.0, {1, 2, 3, 4});
    const auto m = empirical_mean(SampleView(g), 2, 2);
    CHECK(m.vector(0) == doctest::Approx(1.5));
    CHECK(m.shifted_vector(0) == doctest::Approx(3.5));
    CHECK_THROWS_AS(empirical_mean(SampleView(g), 3, 2), Error);
  }

  TEST_CASE("alternating and constant sequences") {
    std::vector<double> alt(11);
    for (std::size_t i = 0; i < alt.size(); ++i) alt[i] = i % 2 ? -1.0 : 1.0;
    const auto g = TrajectoryGrid::scalar(1.0, alt);
    // Ten terms: the means are exactly 0.
    CHECK(lagged_covariance(SampleView(g), 10, 0, 1.0, 0.0).matrix(0, 0) == doctest::Approx(1.0));
    CHECK(lagged_covariance(SampleView(g), 10, 1, 1.0, 1.0).matrix(0, 0) == doctest::Approx(-1.0));

    const auto c = TrajectoryGrid::scalar(1.0, std::vector<double>(30, 4.2));
    CHECK(lagged_covariance(SampleView(c), 20, 2, 1.0, 2.0).matrix(0, 0) ==
          doctest::Approx(0.0).epsilon(1e-12));
  }

  TEST_CASE("matches the brute-force double loop") {
    for (std::size_t r : {1u, 3u}) {
      const auto g = random_grid(r, 300, 7 + r);
      for (std::size_t kappa : {0u, 1u, 5u, 20u}) {
        const auto est = lagged_covariance(SampleView(g), 200, kappa, 1.0, double(kappa));
        const Eigen::MatrixXd expect = brute_covariance(g, 200, kappa);
        CHECK((est.matrix - expect).cwiseAbs().maxCoeff() < 1e-12);
        const Eigen::MatrixXd prod = lagged_covariance_product_form(SampleView(g), 200, kappa);
        CHECK((est.matrix - prod).cwiseAbs().maxCoeff() < 1e-12);
        CHECK(est.kappa == kappa);
        CHECK(est.n_obs == 200);
      }
    }
  }

  TEST_CASE("shift invariance and quadratic scaling") {
    const auto g = random_grid(2, 120, 3);
    std::vector<double> shifted(g.values().begin(), g.values().end());
    std::vector<double> scaled = shifted;
    for (std::size_t i = 0; i < shifted.size(); ++i) {
      shifted[i] += i % 2 ? -7.0 : 100.0;
      scaled[i] *= 3.0;
    }
    const auto base = lagged_covariance(SampleView(g), 100, 4, 1.0, 4.0).matrix;
    const auto s = lagged_covariance(SampleView(TrajectoryGrid(2, 1.0, shifted)), 100, 4, 1.0, 4.0);
    const auto c = lagged_covariance(SampleView(TrajectoryGrid(2, 1.0, scaled)), 100, 4, 1.0, 4.0);
    CHECK((s.matrix - base).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((c.matrix - 9.0 * base).cwiseAbs().maxCoeff() < 1e-12);
  }

  TEST_CASE("lag-zero estimate is symmetric positive semidefinite") {
    const auto g = random_grid(4, 500, 11);
    const auto k = lagged_covariance(SampleView(g), 500, 0, 1.0, 0.0).matrix;
    CHECK((k - k.transpose()).cwiseAbs().maxCoeff() < 1e-14);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(k);
    CHECK(es.eigenvalues().minCoeff() >= -1e-12);
  }

  TEST_CASE("N must dominate kappa") {
    const auto g = random_grid(1, 100, 1);
    CHECK_THROWS_AS(lagged_covariance(SampleView(g), 50, 6, 1.0, 6.0), Error);
    try {
      lagged_covariance(SampleView(g), 50, 6, 1.0, 6.0);
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::SchemeTooShortForLag);
    }
    CHECK_THROWS_AS(lagged_covariance(SampleView(g), 1, 0, 1.0, 0.0), Error);
    CHECK_THROWS_AS(lagged_covariance(SampleView(g), 95, 9, 1.0, 9.0), Error);
  }

  TEST_CASE("covariance curve") {
    const auto g = random_grid(1, 2000, 5);
    const auto scheme = make_scheme(1900, 1, 0.5);
    CHECK(covariance_curve(SampleView(g), scheme, {}).empty());

    const std::vector<LagRequest> lags{{0.0}, {1.0}, {1.0}, {2.4}};
    const auto curve = covariance_curve(SampleView(g), scheme, lags);
    REQUIRE(curve.size() == 4);
    CHECK(curve[1].matrix == curve[2].matrix);
    CHECK(curve[3].kappa == 5);
    CHECK(curve[3].lag_used == doctest::Approx(2.5));
    CHECK(curve[3].lag_requested == doctest::Approx(2.4));
    // White noise: variance near 1, lagged values near 0.
    CHECK(curve[0].matrix(0, 0) == doctest::Approx(1.0).epsilon(0.1));
    CHECK(std::abs(curve[1].matrix(0, 0)) < 4.0 / std::sqrt(1900.0));
    CHECK_THROWS_AS(covariance_curve(SampleView(g), scheme, lags, 2.0), Error);
  }

  TEST_CASE("OU covariance is recovered on a long path") {
    const auto g = simulate_ou({}, 400000, 0.05, {17, 0, StreamRole::process_noise});
    const auto scheme = make_scheme(390000, 1, 0.05);
    const auto view = subsample_view(g, scheme, 0, 20);
    const std::vector<LagRequest> lags{{0.0}, {1.0}};
    const auto curve = covariance_curve(view, scheme, lags);
    CHECK(curve[0].matrix(0, 0) == doctest::Approx(1.0).epsilon(0.05));
    CHECK(curve[1].matrix(0, 0) == doctest::Approx(std::exp(-1.0)).epsilon(0.1));
  }

  TEST_CASE("sup norm and csv output") {
    Eigen::MatrixXd m(2, 2);
    m << 1, -3, 2, 0.5;
    CHECK(sup_norm(m) == 3.0);
    CHECK(sup_norm(Eigen::MatrixXd()) == 0.0);
    CHECK(covariance_csv_header(2).find("lag_requested") != std::string::npos);
    LaggedCovarianceEstimate e{m, 0.4, 2, 0.5, 10, 0.25};
    const auto row = to_csv_row(e);
    CHECK(row.find("-3") != std::string::npos);
  }
}
