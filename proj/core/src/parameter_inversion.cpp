#include "ioest/parameter_inversion.hpp"

#include <cmath>
#include <map>
#include <regex>
#include <set>
#include <sstream>

#include "ioest/error.hpp"
#include "ioest/moment_estimators.hpp"

namespace ioest {
namespace {

void require(bool condition, ErrorKind kind, const std::string& what) {
  if (!condition) throw Error(kind, what);
}

double lag_of(const MomentVector& psi, std::size_t k, double fallback) {
  return psi.lags_used().empty() ? fallback : psi.lags_used()[k];
}

}  // namespace

// --- descriptors ------------------------------------------------------------

MomentDescriptor MomentDescriptor::parse(const std::string& text) {
  static const std::regex mean_re(R"(\s*mean\((\d+)\)\s*)");
  static const std::regex cov_re(R"(\s*cov\((\d+),(\d+)\)@([0-9.eE+\-]+)\s*)");
  std::smatch m;
  try {
    if (std::regex_match(text, m, mean_re)) {
      const auto i = std::stoul(m[1]);
      require(i >= 1, ErrorKind::ParameterDomain, "descriptor indices are 1-based");
      return mean(i - 1);
    }
    if (std::regex_match(text, m, cov_re)) {
      const auto i = std::stoul(m[1]);
      const auto j = std::stoul(m[2]);
      const double lag = std::stod(m[3]);
      require(i >= 1 && j >= 1, ErrorKind::ParameterDomain, "descriptor indices are 1-based");
      require(lag >= 0.0, ErrorKind::ParameterDomain, "descriptor lag must be >= 0");
      return covariance(i - 1, j - 1, lag);
    }
  } catch (const std::logic_error&) {
    // fall through to the error below
  }
  throw Error(ErrorKind::ParameterDomain, "cannot parse moment descriptor '" + text + "'");
}

std::string MomentDescriptor::to_string() const {
  std::ostringstream out;
  if (kind == Kind::mean) {
    out << "mean(" << i + 1 << ")";
  } else {
    out.precision(17);
    out << "cov(" << i + 1 << "," << j + 1 << ")@" << lag;
  }
  return out.str();
}

MomentVector::MomentVector(std::vector<MomentDescriptor> descriptors, std::vector<double> entries,
                           std::vector<double> lags_used)
    : descriptors_(std::move(descriptors)),
      entries_(std::move(entries)),
      lags_used_(std::move(lags_used)) {
  require(!entries_.empty(), ErrorKind::ParameterDomain, "moment vector needs p >= 1 entries");
  require(descriptors_.size() == entries_.size(), ErrorKind::ParameterDomain,
          "one descriptor per moment entry");
  require(lags_used_.empty() || lags_used_.size() == entries_.size(), ErrorKind::ParameterDomain,
          "lags_used must match the entries");
  std::set<std::string> seen;
  for (const auto& d : descriptors_) {
    require(d.lag >= 0.0 && std::isfinite(d.lag), ErrorKind::ParameterDomain,
            "descriptor lags must be >= 0");
    require(seen.insert(d.to_string()).second, ErrorKind::ParameterDomain,
            "duplicate moment descriptor " + d.to_string());
  }
}

Eigen::VectorXd MomentVector::as_vector() const {
  return Eigen::Map<const Eigen::VectorXd>(entries_.data(),
                                           static_cast<Eigen::Index>(entries_.size()));
}

// --- ball -------------------------------------------------------------------

void ParameterBall::validate() const {
  require(radius > 0.0 && std::isfinite(radius), ErrorKind::ParameterDomain,
          "ball radius must be positive and finite");
  require(center.size() > 0 && center.allFinite(), ErrorKind::ParameterDomain,
          "ball center must be a finite vector");
}

bool ParameterBall::contains(const Eigen::VectorXd& theta) const {
  return theta.size() == center.size() && (theta - center).norm() <= radius;
}

Eigen::VectorXd ParameterBall::project(const Eigen::VectorXd& theta) const {
  const Eigen::VectorXd d = theta - center;
  const double n = d.norm();
  return n <= radius ? theta : Eigen::VectorXd(center + d * (radius / n));
}

// --- moment extraction --------------------------------------------------------

MomentVector extract_moment_vector(const TrajectoryGrid& grid, const SubsamplingScheme& scheme,
                                   std::span<const MomentDescriptor> descriptors) {
  require(!descriptors.empty(), ErrorKind::ParameterDomain, "no moment descriptors given");
  const SubsamplingScheme bound =
      scheme.resolved() ? scheme : resolve_on_grid(scheme, grid.delta());
  std::size_t max_kappa = 0;
  for (const auto& d : descriptors) {
    require(d.i < grid.dim() && (d.kind == MomentDescriptor::Kind::mean || d.j < grid.dim()),
            ErrorKind::ParameterDomain,
            "descriptor " + d.to_string() + " out of range for dim " + std::to_string(grid.dim()));
    if (d.kind == MomentDescriptor::Kind::covariance) {
      max_kappa = std::max(max_kappa, lag_index(d.lag, bound.big_delta));
    }
  }
  const SampleView view = subsample_view(grid, bound, 0, max_kappa);

  std::vector<double> entries, lags_used;
  std::optional<MeanEstimate> mean;
  std::map<std::size_t, LaggedCovarianceEstimate> by_kappa;
  for (const auto& d : descriptors) {
    if (d.kind == MomentDescriptor::Kind::mean) {
      if (!mean) mean = empirical_mean(view, bound.n_obs, 0, bound.big_delta);
      entries.push_back(mean->vector(static_cast<Eigen::Index>(d.i)));
      lags_used.push_back(0.0);
      continue;
    }
    const std::size_t kappa = lag_index(d.lag, bound.big_delta);
    auto it = by_kappa.find(kappa);
    if (it == by_kappa.end()) {
      it = by_kappa
               .emplace(kappa, lagged_covariance(view, bound.n_obs, kappa, bound.big_delta, d.lag))
               .first;
    }
    entries.push_back(
        it->second.matrix(static_cast<Eigen::Index>(d.i), static_cast<Eigen::Index>(d.j)));
    lags_used.push_back(it->second.lag_used);
  }
  return MomentVector({descriptors.begin(), descriptors.end()}, std::move(entries),
                      std::move(lags_used));
}

// --- closed-form inverses -------------------------------------------------------

ParameterEstimate invert_ou(const MomentVector& psi, double u1) {
  require(psi.size() == 3, ErrorKind::ParameterDomain, "OU inversion needs [mean, K(0), K(u1)]");
  const double lag = lag_of(psi, 2, u1);
  require(lag > 0.0, ErrorKind::ParameterDomain, "OU inversion needs a positive lag u1");
  const double mean = psi[0];
  const double k0 = psi[1];
  const double k1 = psi[2];
  if (!(k0 > 0.0) || !(k1 > 0.0) || !(k1 < k0)) {
    throw Error(ErrorKind::MomentsOutsideModelRange,
                "OU needs 0 < K(u1) < K(0); got K(0) = " + std::to_string(k0) +
                    ", K(u1) = " + std::to_string(k1));
  }
  const double gamma = std::log(k0 / k1) / lag;
  ParameterEstimate out;
  out.theta = Eigen::Vector3d(mean, gamma, std::sqrt(2.0 * gamma * k0));
  out.names = {"mean", "reversion", "noise"};
  out.moment_input = psi;
  return out;
}

ParameterEstimate invert_cir(const MomentVector& psi, double u1) {
  require(psi.size() == 3, ErrorKind::ParameterDomain,
          "CIR inversion needs [E V, Var V, K_V(u1)]");
  const double lag = lag_of(psi, 2, u1);
  require(lag > 0.0, ErrorKind::ParameterDomain, "CIR inversion needs a positive lag u1");
  const double mean = psi[0];
  const double var = psi[1];
  const double k1 = psi[2];
  if (!(mean > 0.0) || !(var > 0.0) || !(k1 > 0.0) || !(k1 < var)) {
    throw Error(ErrorKind::MomentsOutsideModelRange,
                "CIR needs E V > 0 and 0 < K_V(u1) < Var V");
  }
  const double kappa = std::log(var / k1) / lag;
  ParameterEstimate out;
  out.theta = Eigen::Vector3d(kappa, mean, std::sqrt(2.0 * kappa * var / mean));
  out.names = {"vol_reversion", "vol_mean", "vol_of_vol"};
  out.moment_input = psi;
  return out;
}

ParameterEstimate invert_cir_two_lag(const MomentVector& psi, double u1, double u2) {
  require(psi.size() == 3, ErrorKind::ParameterDomain,
          "two-lag CIR inversion needs [E V, K_V(u1), K_V(u2)]");
  const double lag1 = lag_of(psi, 1, u1);
  const double lag2 = lag_of(psi, 2, u2);
  require(lag1 > 0.0 && lag2 > lag1, ErrorKind::ParameterDomain,
          "two-lag CIR inversion needs 0 < u1 < u2");
  const double mean = psi[0];
  const double k1 = psi[1];
  const double k2 = psi[2];
  if (!(mean > 0.0) || !(k1 > 0.0) || !(k2 > 0.0) || !(k2 < k1)) {
    throw Error(ErrorKind::MomentsOutsideModelRange,
                "CIR needs E V > 0 and 0 < K_V(u2) < K_V(u1)");
  }
  const double kappa = std::log(k1 / k2) / (lag2 - lag1);
  const double var = k1 * std::exp(kappa * lag1);
  ParameterEstimate out;
  out.theta = Eigen::Vector3d(kappa, mean, std::sqrt(2.0 * kappa * var / mean));
  out.names = {"vol_reversion", "vol_mean", "vol_of_vol"};
  out.moment_input = psi;
  return out;
}

MomentModel ou_moment_model(double u1) {
  return {"ou",
          {"mean", "reversion", "noise"},
          [u1](const Eigen::VectorXd& t) {
            const double var = t(2) * t(2) / (2.0 * t(1));
            return Eigen::Vector3d(t(0), var, var * std::exp(-t(1) * u1)).eval();
          }};
}

MomentModel cir_moment_model(double u1) {
  return {"cir",
          {"vol_reversion", "vol_mean", "vol_of_vol"},
          [u1](const Eigen::VectorXd& t) {
            const double var = t(2) * t(2) * t(1) / (2.0 * t(0));
            return Eigen::Vector3d(t(1), var, var * std::exp(-t(0) * u1)).eval();
          }};
}

// --- numerical inverse --------------------------------------------------------

ParameterEstimate invert_least_squares(const MomentModel& model, const MomentVector& psi_hat,
                                       const Eigen::VectorXd& init, const ParameterBall& bounds,
                                       const LeastSquaresOptions& options) {
  bounds.validate();
  require(init.size() == bounds.center.size(), ErrorKind::ParameterDomain,
          "init and ball dimensions differ");
  require(bounds.contains(bounds.project(init)) && (init - bounds.center).norm() <=
                                                       bounds.radius * (1.0 + 1e-12),
          ErrorKind::ParameterDomain, "init must lie inside the parameter ball");

  const Eigen::VectorXd target = psi_hat.as_vector();
  const auto residual = [&](const Eigen::VectorXd& theta) -> Eigen::VectorXd {
    Eigen::VectorXd f = model.forward(theta);
    require(f.size() == target.size(), ErrorKind::ParameterDomain,
            "forward map output size differs from the moment vector");
    return f - target;
  };

  Eigen::VectorXd theta = bounds.project(init);
  Eigen::VectorXd r = residual(theta);
  double cost = r.allFinite() ? r.squaredNorm() : std::numeric_limits<double>::infinity();
  double damping = 1e-3;
  bool clipped = false;

  ParameterEstimate out;
  out.names = model.parameter_names;
  out.moment_input = psi_hat;
  out.diagnostics.converged = false;

  const auto n = theta.size();
  int it = 0;
  for (; it < options.max_iterations; ++it) {
    Eigen::MatrixXd jac(target.size(), n);
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::VectorXd probe = theta;
      const double h = 1e-6 * (1.0 + std::abs(theta(i)));
      probe(i) += h;
      jac.col(i) = (residual(probe) - r) / h;
    }
    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    const Eigen::VectorXd grad = jac.transpose() * r;

    bool accepted = false;
    while (damping < 1e12) {
      Eigen::MatrixXd lhs = jtj;
      lhs.diagonal() += damping * jtj.diagonal().cwiseMax(1e-12);
      const Eigen::VectorXd step = lhs.ldlt().solve(-grad);
      const Eigen::VectorXd raw = theta + step;
      const Eigen::VectorXd candidate = bounds.project(raw);
      const Eigen::VectorXd rc = residual(candidate);
      const double cand_cost =
          rc.allFinite() ? rc.squaredNorm() : std::numeric_limits<double>::infinity();
      if (cand_cost < cost) {
        const double moved = (candidate - theta).norm();
        clipped = (raw - candidate).norm() > 0.0;
        theta = candidate;
        r = rc;
        cost = cand_cost;
        damping = std::max(damping / 10.0, 1e-12);
        accepted = true;
        if (moved < options.step_tolerance * (1.0 + theta.norm())) {
          out.diagnostics.converged = true;
        }
        break;
      }
      damping *= 10.0;
    }
    if (!accepted) {
      // No descent direction left: the residual has stalled.
      out.diagnostics.converged = true;
    }
    if (out.diagnostics.converged) {
      ++it;
      break;
    }
  }

  out.theta = theta;
  out.truncated = clipped || (theta - bounds.center).norm() >= bounds.radius * (1.0 - 1e-9);
  out.diagnostics.iterations = it;
  out.diagnostics.residual_norm = std::sqrt(cost);
  return out;
}

ParameterEstimate truncate_to_ball(const Eigen::VectorXd& theta, const ParameterBall& ball) {
  ball.validate();
  ParameterEstimate out;
  if (ball.contains(theta)) {
    out.theta = theta;
  } else {
    out.theta = Eigen::VectorXd::Zero(theta.size());
    out.truncated = true;
  }
  return out;
}

}  // namespace ioest
