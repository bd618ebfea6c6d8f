#include "ioest/moment_estimators.hpp"

#include <cmath>
#include <map>
#include <sstream>

#include "ioest/error.hpp"

namespace ioest {
namespace {

/// Neumaier summation, or plain summation when `compensated` is false.
class Accumulator {
 public:
  explicit Accumulator(bool compensated) : compensated_(compensated) {}

  void add(double v) noexcept {
    if (!compensated_) {
      sum_ += v;
      return;
    }
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v)) {
      comp_ += (sum_ - t) + v;
    } else {
      comp_ += (v - t) + sum_;
    }
    sum_ = t;
  }
  double value() const noexcept { return sum_ + comp_; }

 private:
  bool compensated_;
  double sum_ = 0.0;
  double comp_ = 0.0;
};

void check_supply(const SampleView& samples, std::size_t n_obs, std::size_t kappa) {
  if (n_obs == 0) throw Error(ErrorKind::ParameterDomain, "n_obs must be >= 1");
  if (samples.size() < n_obs + kappa) {
    throw Error(ErrorKind::InsufficientData,
                "need N + kappa = " + std::to_string(n_obs + kappa) + " samples, have " +
                    std::to_string(samples.size()));
  }
}

std::vector<double> column_means(const SampleView& samples, std::size_t first, std::size_t count) {
  const std::size_t r = samples.dim();
  const bool compensated = count >= kCompensatedSummationThreshold;
  std::vector<Accumulator> acc(r, Accumulator(compensated));
  for (std::size_t n = 0; n < count; ++n) {
    const auto s = samples[first + n];
    for (std::size_t i = 0; i < r; ++i) acc[i].add(s[i]);
  }
  std::vector<double> out(r);
  for (std::size_t i = 0; i < r; ++i) out[i] = acc[i].value() / static_cast<double>(count);
  return out;
}

Eigen::VectorXd to_eigen(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

std::size_t lag_index(double lag_u, double big_delta) {
  if (!(lag_u >= 0.0) || !std::isfinite(lag_u)) {
    throw Error(ErrorKind::ParameterDomain, "lag must be finite and >= 0");
  }
  if (!(big_delta > 0.0)) throw Error(ErrorKind::ParameterDomain, "big_delta must be > 0");
  // nearbyint under the default rounding mode rounds half to even.
  return static_cast<std::size_t>(std::nearbyint(lag_u / big_delta));
}

MeanEstimate empirical_mean(const SampleView& samples, std::size_t n_obs, std::size_t kappa,
                            double big_delta) {
  check_supply(samples, n_obs, kappa);
  MeanEstimate out;
  out.vector = to_eigen(column_means(samples, 0, n_obs));
  out.shifted_vector = kappa == 0 ? out.vector : to_eigen(column_means(samples, kappa, n_obs));
  out.n_obs = n_obs;
  out.big_delta = big_delta;
  out.kappa = kappa;
  return out;
}

LaggedCovarianceEstimate lagged_covariance(const SampleView& samples, std::size_t n_obs,
                                           std::size_t kappa, double big_delta, double lag_u) {
  if (n_obs < 2) throw Error(ErrorKind::ParameterDomain, "lagged covariance needs N >= 2");
  check_supply(samples, n_obs, kappa);
  if (n_obs < kMinObsPerLagStep * kappa) {
    throw Error(ErrorKind::SchemeTooShortForLag,
                "N = " + std::to_string(n_obs) + " < 10 * kappa = " +
                    std::to_string(kMinObsPerLagStep * kappa));
  }

  const std::size_t r = samples.dim();
  const std::vector<double> mean = column_means(samples, 0, n_obs);
  const std::vector<double> shifted = kappa == 0 ? mean : column_means(samples, kappa, n_obs);

  const bool compensated = n_obs >= kCompensatedSummationThreshold;
  std::vector<Accumulator> acc(r * r, Accumulator(compensated));
  if (r == 1) {
    const double m = mean[0];
    const double ms = shifted[0];
    for (std::size_t n = 0; n < n_obs; ++n) {
      acc[0].add((samples[n][0] - m) * (samples[n + kappa][0] - ms));
    }
  } else {
    std::vector<double> a(r), b(r);
    for (std::size_t n = 0; n < n_obs; ++n) {
      const auto s = samples[n];
      const auto t = samples[n + kappa];
      for (std::size_t i = 0; i < r; ++i) {
        a[i] = s[i] - mean[i];
        b[i] = t[i] - shifted[i];
      }
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < r; ++j) acc[i * r + j].add(a[i] * b[j]);
      }
    }
  }

  LaggedCovarianceEstimate out;
  const auto rr = static_cast<Eigen::Index>(r);
  out.matrix.resize(rr, rr);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < r; ++j) {
      out.matrix(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          acc[i * r + j].value() / static_cast<double>(n_obs);
    }
  }
  if (!out.matrix.allFinite()) {
    throw Error(ErrorKind::InsufficientData, "covariance estimate is not finite");
  }
  out.lag_requested = lag_u;
  out.kappa = kappa;
  out.lag_used = static_cast<double>(kappa) * big_delta;
  out.n_obs = n_obs;
  out.big_delta = big_delta;
  return out;
}

Eigen::MatrixXd lagged_covariance_product_form(const SampleView& samples, std::size_t n_obs,
                                               std::size_t kappa) {
  check_supply(samples, n_obs, kappa);
  const auto r = static_cast<Eigen::Index>(samples.dim());
  Eigen::MatrixXd cross = Eigen::MatrixXd::Zero(r, r);
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(r);
  Eigen::VectorXd shifted = Eigen::VectorXd::Zero(r);
  for (std::size_t n = 0; n < n_obs; ++n) {
    const Eigen::Map<const Eigen::VectorXd> s(samples[n].data(), r);
    const Eigen::Map<const Eigen::VectorXd> t(samples[n + kappa].data(), r);
    cross += s * t.transpose();
    mean += s;
    shifted += t;
  }
  const double inv_n = 1.0 / static_cast<double>(n_obs);
  return cross * inv_n - (mean * inv_n) * (shifted * inv_n).transpose();
}

std::vector<LaggedCovarianceEstimate> covariance_curve(const SampleView& samples,
                                                       const SubsamplingScheme& scheme,
                                                       std::span<const LagRequest> lags,
                                                       double horizon) {
  std::vector<LaggedCovarianceEstimate> out;
  out.reserve(lags.size());
  std::map<std::size_t, LaggedCovarianceEstimate> by_kappa;
  for (const LagRequest& lag : lags) {
    if (lag.lag_u > horizon) {
      throw Error(ErrorKind::ParameterDomain, "lag " + std::to_string(lag.lag_u) +
                                                  " exceeds the configured horizon");
    }
    const std::size_t kappa = lag_index(lag.lag_u, scheme.big_delta);
    auto it = by_kappa.find(kappa);
    if (it == by_kappa.end()) {
      it = by_kappa
               .emplace(kappa, lagged_covariance(samples, scheme.n_obs, kappa, scheme.big_delta,
                                                 lag.lag_u))
               .first;
    }
    LaggedCovarianceEstimate estimate = it->second;
    estimate.lag_requested = lag.lag_u;
    out.push_back(std::move(estimate));
  }
  return out;
}

double sup_norm(const Eigen::MatrixXd& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

std::string covariance_csv_header(std::size_t dim) {
  std::ostringstream out;
  out << "lag_requested,lag_used,n_obs,big_delta";
  for (std::size_t i = 1; i <= dim; ++i) {
    for (std::size_t j = 1; j <= dim; ++j) out << ",k" << i << '_' << j;
  }
  return out.str();
}

std::string to_csv_row(const LaggedCovarianceEstimate& estimate) {
  std::ostringstream out;
  out.precision(17);
  out << estimate.lag_requested << ',' << estimate.lag_used << ',' << estimate.n_obs << ','
      << estimate.big_delta;
  for (Eigen::Index i = 0; i < estimate.matrix.rows(); ++i) {
    for (Eigen::Index j = 0; j < estimate.matrix.cols(); ++j) out << ',' << estimate.matrix(i, j);
  }
  return out.str();
}

}  // namespace ioest
