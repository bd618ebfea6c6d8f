#include <doctest.h>

#include <cmath>
#include <vector>

#include "ioest/error.hpp"
#include "ioest/parameter_inversion.hpp"
#include "ioest/process_models.hpp"

using namespace ioest;

namespace {

const std::vector<MomentDescriptor> kOuDescriptors{MomentDescriptor::mean(0),
                                                   MomentDescriptor::covariance(0, 0, 0.0),
                                                   MomentDescriptor::covariance(0, 0, 1.0)};

MomentVector psi3(double a, double b, double c, double u1 = 1.0) {
  return MomentVector({MomentDescriptor::mean(0), MomentDescriptor::covariance(0, 0, 0.0),
                       MomentDescriptor::covariance(0, 0, u1)},
                      {a, b, c});
}

MomentVector from_forward(const MomentModel& m, const Eigen::VectorXd& theta, double u1) {
  const Eigen::VectorXd f = m.forward(theta);
  return psi3(f(0), f(1), f(2), u1);
}

ErrorKind kind_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an ioest::Error");
  return ErrorKind::Io;
}

}  // namespace

TEST_SUITE("parameter_inversion") {
  TEST_CASE("OU closed form examples") {
    const auto a = invert_ou(psi3(0, 1, std::exp(-1.0)), 1.0);
    CHECK(a.theta(0) == doctest::Approx(0.0));
    CHECK(a.theta(1) == doctest::Approx(1.0));
    CHECK(a.theta(2) * a.theta(2) == doctest::Approx(2.0));

    const auto b = invert_ou(psi3(5, 2, 2 * std::exp(-3.0)), 1.0);
    CHECK(b.theta(0) == doctest::Approx(5.0));
    CHECK(b.theta(1) == doctest::Approx(3.0));
    CHECK(b.theta(2) * b.theta(2) == doctest::Approx(12.0));

    // The recovered parameters reproduce the covariance through the model oracle.
    const OUParams p{b.theta(0), b.theta(1), b.theta(2)};
    CHECK(ou_true_covariance(p, 1.0) == doctest::Approx(2 * std::exp(-3.0)));

    CHECK(kind_of([] { invert_ou(psi3(0, 1, 1), 1.0); }) == ErrorKind::MomentsOutsideModelRange);
    CHECK(kind_of([] { invert_ou(psi3(0, 1, -0.1), 1.0); }) == ErrorKind::MomentsOutsideModelRange);
  }

  TEST_CASE("CIR closed form example") {
    const auto e = invert_cir(psi3(0.04, 0.002, 0.002 * std::exp(-2.0)), 1.0);
    CHECK(e.theta(0) == doctest::Approx(2.0));
    CHECK(e.theta(1) == doctest::Approx(0.04));
    CHECK(e.theta(2) * e.theta(2) == doctest::Approx(0.2));
    CHECK(kind_of([] { invert_cir(psi3(0.04, 0.002, 0.002), 1.0); }) ==
          ErrorKind::MomentsOutsideModelRange);
    CHECK(kind_of([] { invert_cir(psi3(0.04, 0.002, 0.003), 1.0); }) ==
          ErrorKind::MomentsOutsideModelRange);
  }

  TEST_CASE("two-lag CIR ignores the lag-zero moment") {
    const HestonParams h;
    const MomentVector psi({MomentDescriptor::mean(0), MomentDescriptor::covariance(0, 0, 0.5),
                            MomentDescriptor::covariance(0, 0, 1.0)},
                           {h.vol_mean, cir_true_covariance(h, 0.5), cir_true_covariance(h, 1.0)});
    const auto e = invert_cir_two_lag(psi, 0.5, 1.0);
    CHECK(e.theta(0) == doctest::Approx(h.vol_reversion));
    CHECK(e.theta(1) == doctest::Approx(h.vol_mean));
    CHECK(e.theta(2) == doctest::Approx(h.vol_of_vol));
    CHECK_THROWS_AS(invert_cir_two_lag(psi, 1.0, 0.5), Error);
  }

  TEST_CASE("closed forms invert the forward maps") {
    int checked = 0;
    for (double mu : {-2.0, 0.0, 3.5}) {
      for (double gamma : {0.2, 1.0, 4.0}) {
        for (double sigma : {0.3, 1.0, 2.5}) {
          for (double u1 : {0.25, 1.0}) {
            const Eigen::Vector3d t(mu, gamma, sigma);
            const auto e = invert_ou(from_forward(ou_moment_model(u1), t, u1), u1);
            CHECK((e.theta - t).cwiseAbs().maxCoeff() < 1e-9 * (1 + t.cwiseAbs().maxCoeff()));
            ++checked;
          }
        }
      }
    }
    for (double kappa : {0.5, 2.0, 6.0}) {
      for (double theta : {0.01, 0.04, 0.2}) {
        for (double sigma : {0.1, 0.3}) {
          const Eigen::Vector3d t(kappa, theta, sigma);
          const auto e = invert_cir(from_forward(cir_moment_model(0.5), t, 0.5), 0.5);
          CHECK((e.theta - t).cwiseAbs().maxCoeff() < 1e-9);
          ++checked;
        }
      }
    }
    CHECK(checked == 72);
  }

  TEST_CASE("least squares recovers an exact moment vector") {
    const Eigen::Vector3d truth(1.0, 2.0, 1.5);
    const auto model = ou_moment_model(0.5);
    const auto psi = from_forward(model, truth, 0.5);
    ParameterBall ball{Eigen::Vector3d(1.0, 2.0, 1.5), 5.0};
    const auto e = invert_least_squares(model, psi, Eigen::Vector3d(0.5, 1.0, 1.0), ball);
    CHECK((e.theta - truth).cwiseAbs().maxCoeff() < 1e-6);
    CHECK_FALSE(e.truncated);
    CHECK(e.diagnostics.converged);
    CHECK(e.names == model.parameter_names);

    // A 1% moment perturbation moves theta by a few percent at most.
    const Eigen::VectorXd f = model.forward(truth);
    const auto pert = psi3(f(0) * 1.01, f(1) * 1.01, f(2) * 0.99, 0.5);
    const auto p = invert_least_squares(model, pert, Eigen::Vector3d(0.5, 1.0, 1.0), ball);
    const Eigen::Vector3d rel = ((p.theta - truth).array() / truth.array()).abs();
    CHECK(rel.maxCoeff() < 0.1);
  }

  TEST_CASE("least squares held on the ball boundary is flagged") {
    const Eigen::Vector3d truth(10.0, 2.0, 1.5);
    const auto model = ou_moment_model(0.5);
    const auto psi = from_forward(model, truth, 0.5);
    ParameterBall ball{Eigen::Vector3d(0.0, 2.0, 1.5), 1.0};
    const auto e = invert_least_squares(model, psi, Eigen::Vector3d(1.0, 2.0, 1.5), ball);
    CHECK(e.truncated);
    CHECK((e.theta - ball.center).norm() == doctest::Approx(1.0).epsilon(1e-6));
    CHECK_THROWS_AS(invert_least_squares(model, psi, Eigen::Vector3d(5.0, 2.0, 1.5), ball), Error);
  }

  TEST_CASE("truncation to the ball") {
    const ParameterBall ball{Eigen::Vector2d(0.0, 0.0), 1.0};
    const Eigen::Vector2d inside(0.3, 0.4);
    const auto a = truncate_to_ball(inside, ball);
    CHECK(a.theta == Eigen::VectorXd(inside));
    CHECK_FALSE(a.truncated);

    const auto b = truncate_to_ball(Eigen::Vector2d(3.0, 0.0), ball);
    CHECK(b.theta == Eigen::VectorXd::Zero(2));
    CHECK(b.truncated);

    const auto c = truncate_to_ball(Eigen::Vector2d(0.6, 0.8), ball);
    CHECK_FALSE(c.truncated);

    const auto again = truncate_to_ball(a.theta, ball);
    CHECK(again.theta == a.theta);
    CHECK_THROWS_AS(truncate_to_ball(inside, ParameterBall{Eigen::Vector2d(0, 0), 0.0}), Error);
  }

  TEST_CASE("descriptor text form") {
    CHECK(MomentDescriptor::parse("mean(1)") == MomentDescriptor::mean(0));
    CHECK(MomentDescriptor::parse("cov(1,2)@0.5") == MomentDescriptor::covariance(0, 1, 0.5));
    CHECK(MomentDescriptor::covariance(1, 1, 2.0).to_string() ==
          MomentDescriptor::parse(MomentDescriptor::covariance(1, 1, 2.0).to_string()).to_string());
    CHECK_THROWS_AS(MomentDescriptor::parse("mean(0)"), Error);
    CHECK_THROWS_AS(MomentDescriptor::parse("variance"), Error);
    CHECK_THROWS_AS(MomentVector({MomentDescriptor::mean(0), MomentDescriptor::mean(0)}, {1, 1}),
                    Error);
    CHECK_THROWS_AS(MomentVector({MomentDescriptor::mean(0)}, {1, 2}), Error);
  }

  TEST_CASE("moment extraction") {
    const auto flat = TrajectoryGrid::scalar(0.1, std::vector<double>(100, 2.5));
    const std::vector<MomentDescriptor> mean_only{MomentDescriptor::mean(0)};
    const auto m = extract_moment_vector(flat, make_scheme(50, 2, 0.1), mean_only);
    CHECK(m[0] == doctest::Approx(2.5));

    const OUParams p{0.0, 1.0, std::sqrt(2.0)};
    const auto g = simulate_ou(p, 400000, 0.05, {88, 0, StreamRole::process_noise});
    const auto psi = extract_moment_vector(g, SubsamplingScheme{19000, 0, 1.0}, kOuDescriptors);
    CHECK(psi[1] == doctest::Approx(1.0).epsilon(0.1));
    CHECK(psi[2] == doctest::Approx(std::exp(-1.0)).epsilon(0.15));
    CHECK(psi.lags_used()[2] == doctest::Approx(1.0));

    CHECK_THROWS_AS(extract_moment_vector(flat, make_scheme(80, 2, 0.1), mean_only), Error);
    const std::vector<MomentDescriptor> bad{MomentDescriptor::covariance(0, 1, 0.0)};
    CHECK_THROWS_AS(extract_moment_vector(flat, make_scheme(50, 2, 0.1), bad), Error);
  }
}
