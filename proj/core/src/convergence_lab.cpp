#include "ioest/convergence_lab.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <numeric>
#include <thread>

#include "ioest/error.hpp"
#include "ioest/moment_estimators.hpp"
#include "ioest/parameter_inversion.hpp"

namespace ioest {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

SubsamplingScheme nominal_scheme(const ExperimentConfig& cfg, std::size_t e, double rho) {
  switch (cfg.scheme_family) {
    case SchemeFamily::from_rho: {
      const double n = std::ceil(cfg.c_n / (rho * rho * rho) * (1.0 - 1e-12));
      return {static_cast<std::size_t>(n), 0, cfg.c_delta * rho};
    }
    case SchemeFamily::from_n: return scheme_from_n(cfg.n_values[e], cfg.c_delta);
    case SchemeFamily::custom: return {cfg.n_values[e], 0, cfg.delta_values[e]};
  }
  return {};
}

std::size_t path_count(const ExperimentConfig& cfg) {
  switch (cfg.observable) {
    case ObservableKind::identity: return cfg.model == ModelKind::heston ? 2 : 1;
    case ObservableKind::multiplicative:
    case ObservableKind::smoothing: return cfg.model == ModelKind::heston ? 3 : 2;
    case ObservableKind::realized_volatility: return 3;
    case ObservableKind::slow_fast: return 2;
  }
  return 2;
}

std::size_t resolve_workers(std::size_t requested, std::size_t tasks) {
  std::size_t w = requested;
  if (w == 0) w = std::max(1u, std::thread::hardware_concurrency());
  return std::max<std::size_t>(1, std::min(w, tasks));
}

/// X and Y paths of one replication, with Y[i] aligned to X[i + lead].
struct PathPair {
  TrajectoryGrid x;
  std::optional<TrajectoryGrid> y;  // empty: Y = X
};

PathPair simulate_pair(const ExperimentConfig& cfg, const EpsilonSetup& setup,
                       const RandomStreamSpec& stream) {
  PathPair out;
  const std::size_t len = setup.fine_length;
  const double delta = setup.fine_delta;
  TrajectoryGrid returns;
  switch (cfg.model) {
    case ModelKind::ou: out.x = simulate_ou(cfg.ou, len, delta, stream); break;
    case ModelKind::gradient: {
      const std::size_t burn =
          static_cast<std::size_t>(std::ceil(cfg.gradient_burn_in_time / delta));
      out.x = simulate_gradient_diffusion(cfg.gradient, len, delta, stream, burn);
      break;
    }
    case ModelKind::heston: {
      auto paths = simulate_heston(cfg.heston, len, delta, stream);
      out.x = std::move(paths.variance);
      returns = std::move(paths.returns);
      break;
    }
    case ModelKind::slow_fast: {
      auto paths = simulate_slow_fast({setup.eps, cfg.slow_fast}, len, delta, stream);
      out.x = std::move(paths.reduced);
      out.y = std::move(paths.slow);
      return out;
    }
  }
  switch (cfg.observable) {
    case ObservableKind::identity: break;
    case ObservableKind::multiplicative:
      out.y = multiplicative_perturbation_observable(out.x, setup.rho);
      break;
    case ObservableKind::smoothing: out.y = smoothing_observable(out.x, setup.eps).path; break;
    case ObservableKind::realized_volatility: {
      const std::size_t window =
          cfg.realized_window.value_or(default_realized_window(setup.eps));
      out.y = realized_volatility_observable(returns, setup.eps, window).path;
      break;
    }
    case ObservableKind::slow_fast: break;
  }
  return out;
}

ReplicationRecord run_one(const ExperimentConfig& cfg, const EpsilonSetup& setup,
                          const std::vector<LagRequest>& lags, std::size_t e, std::size_t m) {
  const RandomStreamSpec stream{cfg.master_seed, replication_stream_index(e, m),
                                StreamRole::process_noise};
  const PathPair paths = simulate_pair(cfg, setup, stream);
  const std::size_t n = setup.scheme.n_obs;

  const SampleView xv = subsample_view(paths.x, setup.scheme, setup.lead, setup.max_kappa);
  const auto kx = covariance_curve(xv, setup.scheme, lags);
  ReplicationRecord rec;
  rec.eps_index = e;
  rec.replication = m;
  rec.mean_x = empirical_mean(xv, n, 0, setup.scheme.big_delta).vector;

  std::vector<LaggedCovarianceEstimate> ky;
  if (paths.y) {
    const SampleView yv = subsample_view(*paths.y, setup.scheme, 0, setup.max_kappa);
    ky = covariance_curve(yv, setup.scheme, lags);
    rec.mean_y = empirical_mean(yv, n, 0, setup.scheme.big_delta).vector;
  } else {
    ky = kx;
    rec.mean_y = rec.mean_x;
  }
  rec.lags.reserve(lags.size());
  for (std::size_t l = 0; l < lags.size(); ++l) {
    rec.lags.push_back({kx[l].lag_requested, kx[l].lag_used, kx[l].kappa, std::move(ky[l].matrix),
                        kx[l].matrix});
  }
  return rec;
}

LpError summarize_powers(const std::vector<double>& powered, int p) {
  const double m = static_cast<double>(powered.size());
  double mean = 0.0;
  for (double v : powered) mean += v;
  mean /= m;
  double var = 0.0;
  for (double v : powered) var += (v - mean) * (v - mean);
  var = powered.size() > 1 ? var / (m - 1.0) : 0.0;
  LpError out;
  out.value = std::pow(mean, 1.0 / p);
  const double se_mean = std::sqrt(var / m);
  out.standard_error = out.value > 0.0 ? se_mean / (p * std::pow(out.value, p - 1)) : 0.0;
  return out;
}

double max_abs(const Eigen::VectorXd& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

std::optional<SlopeFit> try_fit(const std::vector<std::pair<double, double>>& points) {
  if (points.size() < 3) return std::nullopt;
  for (const auto& [x, y] : points) {
    if (!(x > 0.0) || !(y > 0.0) || !std::isfinite(x) || !std::isfinite(y)) return std::nullopt;
  }
  bool distinct = false;
  for (const auto& pt : points) distinct = distinct || pt.first != points.front().first;
  if (!distinct) return std::nullopt;
  return fit_rate_slope(points);
}

}  // namespace

std::uint64_t replication_stream_index(std::size_t eps_index, std::size_t replication) {
  return (static_cast<std::uint64_t>(eps_index) << 32) | static_cast<std::uint64_t>(replication);
}

std::size_t Ensemble::replications() const noexcept {
  return setups.empty() ? 0 : records.size() / setups.size();
}

std::span<const ReplicationRecord> Ensemble::records_for(std::size_t eps_index) const {
  const std::size_t m = replications();
  if (eps_index >= setups.size()) throw Error(ErrorKind::ParameterDomain, "eps index out of range");
  return std::span<const ReplicationRecord>(records).subspan(eps_index * m, m);
}

std::vector<EpsilonSetup> plan_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  std::vector<EpsilonSetup> out;
  for (std::size_t e = 0; e < cfg.epsilon_grid.size(); ++e) {
    EpsilonSetup s;
    s.eps = cfg.epsilon_grid[e];
    s.rho = cfg.rho_of(e);
    const SubsamplingScheme nominal = nominal_scheme(cfg, e, s.rho);
    const double big = nominal.big_delta;
    std::size_t stride = cfg.stride_resolution;
    double delta = big / static_cast<double>(stride);
    switch (cfg.observable) {
      case ObservableKind::smoothing:
        delta = s.eps / static_cast<double>(cfg.smoothing_substeps);
        stride = std::max<std::size_t>(1, static_cast<std::size_t>(std::nearbyint(big / delta)));
        s.lead = cfg.smoothing_substeps;
        break;
      case ObservableKind::realized_volatility:
        delta = s.eps;
        stride = std::max<std::size_t>(1, static_cast<std::size_t>(std::nearbyint(big / delta)));
        s.lead = cfg.realized_window.value_or(default_realized_window(s.eps));
        break;
      case ObservableKind::slow_fast:
        stride = std::max(stride, static_cast<std::size_t>(std::ceil(10.0 * big / s.eps - 1e-9)));
        delta = big / static_cast<double>(stride);
        break;
      default: break;
    }
    s.fine_delta = delta;
    s.scheme = make_scheme(nominal.n_obs, stride, delta);
    for (double u : cfg.lags) s.max_kappa = std::max(s.max_kappa, lag_index(u, s.scheme.big_delta));
    if (s.scheme.n_obs < kMinObsPerLagStep * s.max_kappa) {
      throw Error(ErrorKind::SchemeTooShortForLag,
                  "eps=" + std::to_string(s.eps) + ": N = " + std::to_string(s.scheme.n_obs) +
                      " is below 10 kappa = " + std::to_string(kMinObsPerLagStep * s.max_kappa));
    }
    s.fine_length = s.lead + (s.scheme.n_obs + s.max_kappa) * stride;
    out.push_back(s);
  }
  return out;
}

double replication_memory_bytes(const ExperimentConfig& cfg, const EpsilonSetup& setup) {
  const double dim = cfg.model == ModelKind::gradient ? static_cast<double>(cfg.gradient.dim()) : 1.0;
  return static_cast<double>(setup.fine_length) * dim * 8.0 * static_cast<double>(path_count(cfg));
}

Ensemble run_replications(const ExperimentConfig& cfg) {
  Ensemble ens;
  ens.setups = plan_experiment(cfg);
  ens.config_hash = cfg.hash();
  ens.dim = cfg.model == ModelKind::gradient ? cfg.gradient.dim() : 1;
  ens.lags = cfg.lags;

  const std::size_t n_eps = ens.setups.size();
  const std::size_t m = cfg.replications;
  const std::size_t tasks = n_eps * m;
  const std::size_t workers = resolve_workers(cfg.workers, tasks);

  double peak = 0.0;
  for (const auto& s : ens.setups) peak = std::max(peak, replication_memory_bytes(cfg, s));
  const double needed_mb = peak * static_cast<double>(workers) / (1024.0 * 1024.0);
  if (needed_mb > cfg.memory_cap_mb) {
    throw Error(ErrorKind::ResourceLimit,
                "estimated working memory " + std::to_string(needed_mb) + " MB with " +
                    std::to_string(workers) + " workers exceeds the cap of " +
                    std::to_string(cfg.memory_cap_mb) + " MB");
  }

  std::vector<LagRequest> lags;
  for (double u : cfg.lags) lags.push_back({u});

  ens.records.resize(tasks);
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::mutex error_mutex;
  std::size_t error_task = tasks;
  std::exception_ptr error;

  auto worker = [&] {
    for (;;) {
      const std::size_t t = next.fetch_add(1);
      if (t >= tasks || failed.load()) return;
      const std::size_t e = t / m;
      const std::size_t rep = t % m;
      try {
        ens.records[t] = run_one(cfg, ens.setups[e], lags, e, rep);
      } catch (const Error& err) {
        std::lock_guard lock(error_mutex);
        if (t < error_task) {
          error_task = t;
          error = std::make_exception_ptr(
              Error(err.kind(), "eps=" + std::to_string(ens.setups[e].eps) +
                                    ", replication=" + std::to_string(rep) + ": " + err.detail()));
        }
        failed = true;
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (t < error_task) {
          error_task = t;
          error = std::current_exception();
        }
        failed = true;
      }
    }
  };

  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (error) std::rethrow_exception(error);
  return ens;
}

std::optional<Oracle> model_oracle(const ExperimentConfig& cfg) {
  switch (cfg.model) {
    case ModelKind::ou: {
      const OUParams p = cfg.ou;
      Oracle o;
      o.description = "exact OU stationary moments";
      o.mean = Eigen::VectorXd::Constant(1, p.mean);
      o.covariance = [p](double u) { return Eigen::MatrixXd::Constant(1, 1, ou_true_covariance(p, u)); };
      o.gaussian_variance = p.stationary_variance();
      o.gaussian_rate = p.reversion;
      return o;
    }
    case ModelKind::gradient: {
      const auto& c = cfg.gradient.potential.coefficients;
      for (std::size_t k = 3; k < c.size(); ++k) {
        if (c[k] != 0.0) return std::nullopt;
      }
      if (c.size() < 3 || !(c[2] > 0.0)) return std::nullopt;
      const Eigen::MatrixXd& s = cfg.gradient.diffusion;
      if (!s.isDiagonal()) return std::nullopt;
      const double rate = 2.0 * c[2];
      const double c1 = c.size() > 1 ? c[1] : 0.0;
      const Eigen::Index r = s.rows();
      Eigen::VectorXd var(r);
      for (Eigen::Index i = 0; i < r; ++i) var(i) = s(i, i) * s(i, i) / (2.0 * rate);
      Oracle o;
      o.description = "quadratic potential: independent OU coordinates";
      o.mean = Eigen::VectorXd::Constant(r, -c1 / rate);
      o.covariance = [var, rate](double u) {
        return Eigen::MatrixXd((var * std::exp(-rate * u)).asDiagonal());
      };
      o.gaussian_variance = var.maxCoeff();
      o.gaussian_rate = rate;
      return o;
    }
    case ModelKind::heston: {
      const HestonParams p = cfg.heston;
      Oracle o;
      o.description = "exact CIR stationary moments of the variance";
      o.mean = Eigen::VectorXd::Constant(1, p.vol_mean);
      o.covariance = [p](double u) { return Eigen::MatrixXd::Constant(1, 1, cir_true_covariance(p, u)); };
      return o;
    }
    case ModelKind::slow_fast: {
      if (cfg.slow_fast == SlowFastEntry::state_dependent_mean) return std::nullopt;
      const auto coeffs = slow_fast_coefficients(cfg.slow_fast);
      const double b = coeffs.averaged_diffusion(0.0);
      const OUParams p{0.0, 1.0, b};
      Oracle o;
      o.description = "averaged dynamics dX = -X dt + B dW";
      o.mean = Eigen::VectorXd::Zero(1);
      o.covariance = [p](double u) { return Eigen::MatrixXd::Constant(1, 1, ou_true_covariance(p, u)); };
      o.gaussian_variance = p.stationary_variance();
      o.gaussian_rate = 1.0;
      return o;
    }
  }
  return std::nullopt;
}

std::vector<std::vector<LpError>> empirical_lp_error(
    const Ensemble& ens, int p, EstimatorSide side,
    const std::function<Eigen::MatrixXd(double)>& target) {
  if (p != 2 && p != 4) throw Error(ErrorKind::ParameterDomain, "p must be 2 or 4");
  if (ens.records.empty()) throw Error(ErrorKind::InsufficientData, "empty ensemble");
  std::vector<std::vector<LpError>> out(ens.setups.size());
  for (std::size_t e = 0; e < ens.setups.size(); ++e) {
    const auto recs = ens.records_for(e);
    for (std::size_t l = 0; l < ens.lags.size(); ++l) {
      const Eigen::MatrixXd k = target(ens.lags[l]);
      std::vector<double> powered;
      powered.reserve(recs.size());
      for (const auto& r : recs) {
        const auto& est = side == EstimatorSide::observable ? r.lags[l].k_y : r.lags[l].k_x;
        powered.push_back(std::pow(sup_norm(est - k), p));
      }
      out[e].push_back(summarize_powers(powered, p));
    }
  }
  return out;
}

std::vector<std::vector<LpError>> empirical_gap(const Ensemble& ens, int p) {
  if (ens.records.empty()) throw Error(ErrorKind::InsufficientData, "empty ensemble");
  std::vector<std::vector<LpError>> out(ens.setups.size());
  for (std::size_t e = 0; e < ens.setups.size(); ++e) {
    const auto recs = ens.records_for(e);
    for (std::size_t l = 0; l < ens.lags.size(); ++l) {
      std::vector<double> powered;
      for (const auto& r : recs) powered.push_back(std::pow(sup_norm(r.lags[l].k_y - r.lags[l].k_x), p));
      out[e].push_back(summarize_powers(powered, p));
    }
  }
  return out;
}

std::vector<LpError> mean_lp_error(const Ensemble& ens, int p, EstimatorSide side,
                                   const Eigen::VectorXd& target) {
  if (ens.records.empty()) throw Error(ErrorKind::InsufficientData, "empty ensemble");
  std::vector<LpError> out;
  for (std::size_t e = 0; e < ens.setups.size(); ++e) {
    std::vector<double> powered;
    for (const auto& r : ens.records_for(e)) {
      const auto& m = side == EstimatorSide::observable ? r.mean_y : r.mean_x;
      powered.push_back(std::pow(max_abs(m - target), p));
    }
    out.push_back(summarize_powers(powered, p));
  }
  return out;
}

std::vector<LpError> mean_gap(const Ensemble& ens, int p) {
  if (ens.records.empty()) throw Error(ErrorKind::InsufficientData, "empty ensemble");
  std::vector<LpError> out;
  for (std::size_t e = 0; e < ens.setups.size(); ++e) {
    std::vector<double> powered;
    for (const auto& r : ens.records_for(e)) powered.push_back(std::pow(max_abs(r.mean_y - r.mean_x), p));
    out.push_back(summarize_powers(powered, p));
  }
  return out;
}

SlopeFit fit_rate_slope(std::span<const std::pair<double, double>> points) {
  if (points.size() < 3) throw Error(ErrorKind::InsufficientData, "slope fit needs at least 3 points");
  double sx = 0, sy = 0;
  for (const auto& [x, y] : points) {
    if (!(x > 0.0) || !(y > 0.0)) {
      throw Error(ErrorKind::ParameterDomain, "slope fit needs positive coordinates");
    }
    sx += std::log(x);
    sy += std::log(y);
  }
  const double n = static_cast<double>(points.size());
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (const auto& [x, y] : points) {
    const double dx = std::log(x) - mx, dy = std::log(y) - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (sxx <= 0.0) throw Error(ErrorKind::ParameterDomain, "slope fit needs distinct x values");
  SlopeFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  const double ss_res = std::max(0.0, syy - f.slope * sxy);
  f.r_squared = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
  return f;
}

std::vector<GapCheck> perturbation_gap_check(const Ensemble& ens, double nu,
                                             std::span<const double> rho_values) {
  if (!ens.paired) {
    throw Error(ErrorKind::ParameterDomain, "gap check needs K_Y and K_X from the same X path");
  }
  if (rho_values.size() != ens.setups.size()) {
    throw Error(ErrorKind::ParameterDomain, "need one rho value per eps");
  }
  if (!(nu >= 0.0)) throw Error(ErrorKind::ParameterDomain, "nu must be non-negative");
  const auto gaps = empirical_gap(ens, 2);
  const auto mgap = mean_gap(ens, 4);
  std::vector<GapCheck> out;
  for (std::size_t e = 0; e < ens.setups.size(); ++e) {
    GapCheck g;
    g.eps = ens.setups[e].eps;
    g.rho = rho_values[e];
    for (const auto& v : gaps[e]) g.covariance_gap = std::max(g.covariance_gap, v.value);
    g.covariance_bound = 4.0 * nu * g.rho;
    g.covariance_pass = g.covariance_gap <= g.covariance_bound;
    g.mean_gap = mgap[e].value;
    g.mean_pass = g.mean_gap <= g.rho;
    out.push_back(g);
  }
  return out;
}

DecorrelationTable decorrelation_probe(const TrajectoryGrid& path, std::span<const double> gaps,
                                       const ProbeOptions& options) {
  if (gaps.empty()) throw Error(ErrorKind::ParameterDomain, "probe needs at least one gap");
  for (std::size_t i = 0; i < gaps.size(); ++i) {
    if (!(gaps[i] > 0.0) || (i > 0 && gaps[i] <= gaps[i - 1])) {
      throw Error(ErrorKind::ParameterDomain, "probe gaps must be positive and increasing");
    }
  }
  if (!(options.design_offset > 0.0) || options.blocks < 2) {
    throw Error(ErrorKind::ParameterDomain, "probe needs a positive offset and >= 2 blocks");
  }
  const double delta = path.delta();
  const std::size_t r = std::min<std::size_t>(path.dim(), 3);
  const std::size_t a = std::max<std::size_t>(1, static_cast<std::size_t>(std::nearbyint(options.design_offset / delta)));
  const std::size_t t_max = static_cast<std::size_t>(std::nearbyint(gaps.back() / delta));
  const std::size_t min_count = 100 * options.blocks;
  if (path.length() < 2 * a + t_max + min_count) {
    throw Error(ErrorKind::InsufficientData, "path too short for the largest probe gap");
  }

  // Design: members at in-interval offsets {0, a}. Singles X(i) at either
  // offset, products X(i) X(j) at equal offsets or across the interval.
  struct Term {
    std::size_t c1, o1;
    std::optional<std::pair<std::size_t, std::size_t>> second;  // (coordinate, offset)
  };
  std::vector<Term> terms;
  for (std::size_t i = 0; i < r; ++i) {
    terms.push_back({i, 0, std::nullopt});
    terms.push_back({i, a, std::nullopt});
    for (std::size_t j = i; j < r; ++j) {
      terms.push_back({i, 0, std::make_pair(j, std::size_t{0})});
      terms.push_back({i, 0, std::make_pair(j, a)});
      if (j != i) terms.push_back({j, 0, std::make_pair(i, a)});
    }
  }
  auto eval = [&](const Term& t, std::size_t s) {
    double v = path.at(s + t.o1, t.c1);
    if (t.second) v *= path.at(s + t.second->second, t.second->first);
    return v;
  };

  DecorrelationTable table;
  table.design = "G, H in {X(i) at offset 0 or " + std::to_string(a * delta) +
                 "} and products X(i) X(j) at offsets (0,0) and (0," +
                 std::to_string(a * delta) + "); H starts T after G's interval ends; " +
                 std::to_string(options.blocks) + " blocks";
  for (double gap : gaps) {
    const std::size_t t = static_cast<std::size_t>(std::nearbyint(gap / delta));
    const std::size_t shift = a + t;  // H's interval start relative to G's
    const std::size_t count = path.length() - shift - a;
    const std::size_t block_len = count / options.blocks;
    double best = 0.0, best_se = 0.0;
    for (const auto& g : terms) {
      for (const auto& h : terms) {
        double sg = 0, sh = 0, sgh = 0;
        std::vector<double> block_cov;
        double bg = 0, bh = 0, bgh = 0;
        std::size_t in_block = 0;
        for (std::size_t s = 0; s < block_len * options.blocks; ++s) {
          const double gv = eval(g, s);
          const double hv = eval(h, s + shift);
          sg += gv;
          sh += hv;
          sgh += gv * hv;
          bg += gv;
          bh += hv;
          bgh += gv * hv;
          if (++in_block == block_len) {
            const double bl = static_cast<double>(block_len);
            block_cov.push_back(bgh / bl - (bg / bl) * (bh / bl));
            bg = bh = bgh = 0.0;
            in_block = 0;
          }
        }
        const double n = static_cast<double>(block_len * options.blocks);
        const double cov = std::abs(sgh / n - (sg / n) * (sh / n));
        if (cov > best) {
          double mean = 0, var = 0;
          for (double b : block_cov) mean += b;
          mean /= static_cast<double>(block_cov.size());
          for (double b : block_cov) var += (b - mean) * (b - mean);
          var /= static_cast<double>(block_cov.size() - 1);
          best = cov;
          best_se = std::sqrt(var / static_cast<double>(block_cov.size()));
        }
      }
    }
    table.gaps.push_back(gap);
    table.values.push_back(best);
    table.standard_errors.push_back(best_se);
  }

  // Log-linear fit over the entries that stand clear of sampling noise.
  std::vector<std::pair<double, double>> pts;
  for (std::size_t i = 0; i < table.gaps.size(); ++i) {
    if (table.values[i] > 3.0 * table.standard_errors[i] && table.values[i] > 0.0) {
      pts.emplace_back(table.gaps[i], std::log(table.values[i]));
    }
  }
  if (pts.size() >= 2) {
    double mx = 0, my = 0;
    for (const auto& [x, y] : pts) {
      mx += x;
      my += y;
    }
    mx /= static_cast<double>(pts.size());
    my /= static_cast<double>(pts.size());
    double sxx = 0, sxy = 0;
    for (const auto& [x, y] : pts) {
      sxx += (x - mx) * (x - mx);
      sxy += (x - mx) * (y - my);
    }
    if (sxx > 0.0) {
      const double slope = sxy / sxx;
      table.fitted_rate = -slope;
      table.fitted_coefficient = std::exp(my - slope * mx);
    }
  }
  return table;
}

DecorrelationTable decorrelation_probe(const ExperimentConfig& model, std::span<const double> gaps,
                                       const RandomStreamSpec& stream, double path_time,
                                       double fine_delta, const ProbeOptions& options) {
  if (!(path_time > 0.0) || !(fine_delta > 0.0)) {
    throw Error(ErrorKind::ParameterDomain, "probe needs positive path time and step");
  }
  const std::size_t len = static_cast<std::size_t>(std::ceil(path_time / fine_delta));
  TrajectoryGrid path;
  switch (model.model) {
    case ModelKind::ou: path = simulate_ou(model.ou, len, fine_delta, stream); break;
    case ModelKind::gradient:
      path = simulate_gradient_diffusion(
          model.gradient, len, fine_delta, stream,
          static_cast<std::size_t>(std::ceil(model.gradient_burn_in_time / fine_delta)));
      break;
    case ModelKind::heston:
      path = simulate_heston(model.heston, len, fine_delta, stream).variance;
      break;
    case ModelKind::slow_fast: {
      const double eps = model.epsilon_grid.empty() ? 10.0 * fine_delta : model.epsilon_grid.back();
      path = simulate_slow_fast({eps, model.slow_fast}, len, fine_delta, stream).slow;
      break;
    }
  }
  return decorrelation_probe(path, gaps, options);
}

std::optional<BoundInputs> derive_bound_inputs(const ExperimentConfig& cfg) {
  switch (cfg.bounds) {
    case BoundsMode::none: return std::nullopt;
    case BoundsMode::manual: return cfg.manual_bounds;
    case BoundsMode::automatic: break;
  }
  const auto oracle = model_oracle(cfg);
  if (!oracle || !oracle->gaussian_variance || !oracle->gaussian_rate) return std::nullopt;
  const double var = *oracle->gaussian_variance;
  const double rate = *oracle->gaussian_rate;
  BoundInputs in;
  in.nu = gaussian_l4_norm(0.0, var);
  in.horizon_A = *std::max_element(cfg.lags.begin(), cfg.lags.end());
  in.dim_r = static_cast<std::size_t>(oracle->mean.size());
  in.profile = gaussian_exponential_profile(var, rate);
  in.lipschitz_lambda = var * rate;
  in.convention = cfg.convention;
  return in;
}

std::pair<std::vector<std::string>, Eigen::VectorXd> estimation_truth(const ExperimentConfig& cfg) {
  switch (cfg.estimation) {
    case EstimationMethod::none:
      throw Error(ErrorKind::ParameterDomain, "no estimation method configured");
    case EstimationMethod::ou: {
      const auto oracle = model_oracle(cfg);
      if (!oracle || !oracle->gaussian_variance || oracle->mean.size() != 1) {
        throw Error(ErrorKind::ParameterDomain, "OU estimation needs a scalar OU-type model");
      }
      const double rate = *oracle->gaussian_rate;
      Eigen::VectorXd t(3);
      t << oracle->mean(0), rate, std::sqrt(2.0 * rate * *oracle->gaussian_variance);
      return {{"mu", "gamma", "sigma"}, t};
    }
    case EstimationMethod::cir:
    case EstimationMethod::cir_two_lag: {
      Eigen::VectorXd t(3);
      t << cfg.heston.vol_reversion, cfg.heston.vol_mean, cfg.heston.vol_of_vol;
      return {{"kappa", "theta", "sigma"}, t};
    }
  }
  return {};
}

std::vector<std::vector<std::optional<Eigen::VectorXd>>> estimate_parameters(
    const ExperimentConfig& cfg, const Ensemble& ens) {
  if (cfg.estimation == EstimationMethod::none) {
    throw Error(ErrorKind::ParameterDomain, "no estimation method configured");
  }
  auto lag_slot = [&](double u) -> std::size_t {
    for (std::size_t l = 0; l < ens.lags.size(); ++l) {
      if (ens.lags[l] == u) return l;
    }
    throw Error(ErrorKind::ParameterDomain, "ensemble lacks lag " + std::to_string(u));
  };
  const bool obs = cfg.estimation_side == EstimatorSide::observable;
  std::vector<std::vector<std::optional<Eigen::VectorXd>>> out(ens.setups.size());
  for (std::size_t e = 0; e < ens.setups.size(); ++e) {
    for (const auto& rec : ens.records_for(e)) {
      const double mean = obs ? rec.mean_y(0) : rec.mean_x(0);
      auto k = [&](std::size_t slot) {
        return obs ? rec.lags[slot].k_y(0, 0) : rec.lags[slot].k_x(0, 0);
      };
      std::optional<Eigen::VectorXd> theta;
      try {
        if (cfg.estimation == EstimationMethod::cir_two_lag) {
          const std::size_t s1 = lag_slot(cfg.estimation_u1), s2 = lag_slot(cfg.estimation_u2);
          const MomentVector psi({MomentDescriptor::mean(0),
                                  MomentDescriptor::covariance(0, 0, cfg.estimation_u1),
                                  MomentDescriptor::covariance(0, 0, cfg.estimation_u2)},
                                 {mean, k(s1), k(s2)},
                                 {0.0, rec.lags[s1].lag_used, rec.lags[s2].lag_used});
          theta = invert_cir_two_lag(psi, cfg.estimation_u1, cfg.estimation_u2).theta;
        } else {
          const std::size_t s0 = lag_slot(0.0), s1 = lag_slot(cfg.estimation_u1);
          const MomentVector psi({MomentDescriptor::mean(0), MomentDescriptor::covariance(0, 0, 0.0),
                                  MomentDescriptor::covariance(0, 0, cfg.estimation_u1)},
                                 {mean, k(s0), k(s1)},
                                 {0.0, rec.lags[s0].lag_used, rec.lags[s1].lag_used});
          theta = cfg.estimation == EstimationMethod::ou ? invert_ou(psi, cfg.estimation_u1).theta
                                                         : invert_cir(psi, cfg.estimation_u1).theta;
        }
      } catch (const Error&) {
        theta.reset();
      }
      out[e].push_back(std::move(theta));
    }
  }
  return out;
}

std::size_t ConvergenceReport::fitted_slope_count() const noexcept {
  std::size_t n = 0;
  for (const auto& s : lag_slopes) n += s.kx_vs_n.has_value() + s.ky_vs_n.has_value() +
                                       s.ky_vs_rho.has_value() + s.gap_vs_rho.has_value();
  n += mean_x_l2_vs_span.has_value() + mean_x_l4_vs_span.has_value() +
       mean_y_l2_vs_span.has_value() + mean_y_l4_vs_span.has_value();
  return n;
}

ConvergenceReport build_report(const ExperimentConfig& cfg, const Ensemble& ens,
                               const std::optional<BoundInputs>& bounds) {
  ConvergenceReport rep;
  rep.name = cfg.name;
  rep.config_hash = ens.config_hash;
  rep.replications = ens.replications();
  const auto oracle = model_oracle(cfg);
  rep.has_oracle = oracle.has_value();
  rep.oracle = oracle ? oracle->description : "none";

  const std::size_t n_eps = ens.setups.size();
  const std::size_t n_lags = ens.lags.size();
  std::vector<std::vector<LpError>> ky, kx;
  std::vector<LpError> my2, my4, mx2, mx4;
  if (oracle) {
    ky = empirical_lp_error(ens, 2, EstimatorSide::observable, oracle->covariance);
    kx = empirical_lp_error(ens, 2, EstimatorSide::unobservable, oracle->covariance);
    my2 = mean_lp_error(ens, 2, EstimatorSide::observable, oracle->mean);
    my4 = mean_lp_error(ens, 4, EstimatorSide::observable, oracle->mean);
    mx2 = mean_lp_error(ens, 2, EstimatorSide::unobservable, oracle->mean);
    mx4 = mean_lp_error(ens, 4, EstimatorSide::unobservable, oracle->mean);
  }
  const auto gap = empirical_gap(ens, 2);
  const auto mgap = mean_gap(ens, 4);
  const LpError missing{kNaN, kNaN};

  const bool multiplicative = cfg.observable == ObservableKind::multiplicative;
  auto inputs_for = [&](double rho) {
    BoundInputs in = *bounds;
    if (multiplicative) in.nu *= 1.0 + rho;
    return in;
  };

  std::size_t unob_total = 0, unob_in = 0, obs_total = 0, obs_in = 0;
  for (std::size_t e = 0; e < n_eps; ++e) {
    const auto& s = ens.setups[e];
    std::optional<UnobservableBound> ub;
    double obs_bound = kNaN;
    if (bounds) {
      const BoundInputs in = inputs_for(s.rho);
      ub = error_bound_unobservable(in, s.scheme);
      const double k = s.scheme.big_delta * std::cbrt(static_cast<double>(s.scheme.n_obs));
      obs_bound = error_bound_observable(in, s.scheme, s.rho, k);
    }
    const auto recs = ens.records_for(e);
    for (std::size_t l = 0; l < n_lags; ++l) {
      ReportCell c;
      c.eps_index = e;
      c.eps = s.eps;
      c.rho = s.rho;
      c.n_obs = s.scheme.n_obs;
      c.big_delta = s.scheme.big_delta;
      c.span = s.scheme.span();
      c.lag_requested = ens.lags[l];
      c.lag_used = recs.empty() ? kNaN : recs.front().lags[l].lag_used;
      c.ky_l2 = oracle ? ky[e][l] : missing;
      c.kx_l2 = oracle ? kx[e][l] : missing;
      c.gap_l2 = gap[e][l];
      c.bound_unobservable = ub ? ub->covariance_bound : kNaN;
      c.bound_observable = obs_bound;
      if (oracle && ub) {
        c.kx_within_bound = c.kx_l2.value <= c.bound_unobservable;
        c.ky_within_bound = c.ky_l2.value <= c.bound_observable;
        ++unob_total;
        ++obs_total;
        unob_in += c.kx_within_bound;
        obs_in += c.ky_within_bound;
      }
      rep.cells.push_back(c);
    }
    MeanCell mc;
    mc.eps_index = e;
    mc.eps = s.eps;
    mc.rho = s.rho;
    mc.span = s.scheme.span();
    mc.y_l2 = oracle ? my2[e] : missing;
    mc.y_l4 = oracle ? my4[e] : missing;
    mc.x_l2 = oracle ? mx2[e] : missing;
    mc.x_l4 = oracle ? mx4[e] : missing;
    mc.gap_l4 = mgap[e];
    mc.bound_l2 = ub ? ub->mean_l2_bound : kNaN;
    mc.bound_l4 = ub ? ub->mean_l4_bound : kNaN;
    rep.mean_cells.push_back(mc);
  }
  if (unob_total > 0) {
    rep.bound_fraction_unobservable = static_cast<double>(unob_in) / static_cast<double>(unob_total);
    rep.bound_fraction_observable = static_cast<double>(obs_in) / static_cast<double>(obs_total);
  }

  bool rho_positive = true;
  for (const auto& s : ens.setups) rho_positive = rho_positive && s.rho > 0.0;
  for (std::size_t l = 0; l < n_lags; ++l) {
    LagSlopes ls;
    ls.lag = ens.lags[l];
    std::vector<std::pair<double, double>> kxn, kyn, kyr, gr;
    for (std::size_t e = 0; e < n_eps; ++e) {
      const auto& c = rep.cells[e * n_lags + l];
      const double n = static_cast<double>(c.n_obs);
      kxn.emplace_back(n, c.kx_l2.value);
      kyn.emplace_back(n, c.ky_l2.value);
      kyr.emplace_back(c.rho, c.ky_l2.value);
      gr.emplace_back(c.rho, c.gap_l2.value);
    }
    if (oracle) {
      ls.kx_vs_n = try_fit(kxn);
      ls.ky_vs_n = try_fit(kyn);
      if (rho_positive) ls.ky_vs_rho = try_fit(kyr);
    }
    if (rho_positive) ls.gap_vs_rho = try_fit(gr);
    rep.lag_slopes.push_back(ls);
  }
  if (oracle) {
    std::vector<std::pair<double, double>> x2, x4, y2, y4;
    for (const auto& mc : rep.mean_cells) {
      x2.emplace_back(mc.span, mc.x_l2.value);
      x4.emplace_back(mc.span, mc.x_l4.value);
      y2.emplace_back(mc.span, mc.y_l2.value);
      y4.emplace_back(mc.span, mc.y_l4.value);
    }
    rep.mean_x_l2_vs_span = try_fit(x2);
    rep.mean_x_l4_vs_span = try_fit(x4);
    rep.mean_y_l2_vs_span = try_fit(y2);
    rep.mean_y_l4_vs_span = try_fit(y4);
  }

  if (bounds) {
    double max_rho = 0.0;
    std::vector<double> rhos;
    for (const auto& s : ens.setups) {
      rhos.push_back(s.rho);
      max_rho = std::max(max_rho, s.rho);
    }
    rep.nu = inputs_for(max_rho).nu;
    rep.gap_checks = perturbation_gap_check(ens, *rep.nu, rhos);
  }

  if (cfg.estimation != EstimationMethod::none) {
    const auto [names, truth] = estimation_truth(cfg);
    const auto estimates = estimate_parameters(cfg, ens);
    const std::size_t p = names.size();
    std::vector<double> tol(p, 0.1);
    const auto& spec_tol = cfg.assertions.estimate_tolerance;
    if (spec_tol.size() == 1) tol.assign(p, spec_tol[0]);
    if (spec_tol.size() == p) tol = spec_tol;
    for (std::size_t e = 0; e < n_eps; ++e) {
      ParameterSummary ps;
      ps.eps = ens.setups[e].eps;
      ps.names = names;
      ps.truth.assign(truth.data(), truth.data() + p);
      ps.tolerance = tol;
      ps.mean_estimate.assign(p, 0.0);
      ps.rms_relative_error.assign(p, 0.0);
      ps.fraction_within_tolerance.assign(p, 0.0);
      std::size_t ok = 0, all_within = 0;
      for (const auto& est : estimates[e]) {
        if (!est) {
          ++ps.failures;
          continue;
        }
        ++ok;
        bool all = true;
        for (std::size_t i = 0; i < p; ++i) {
          const double rel = std::abs((*est)(i) - truth(i)) / std::abs(truth(i));
          ps.mean_estimate[i] += (*est)(i);
          ps.rms_relative_error[i] += rel * rel;
          const bool within = rel <= tol[i];
          ps.fraction_within_tolerance[i] += within;
          all = all && within;
        }
        all_within += all;
      }
      const double total = static_cast<double>(estimates[e].size());
      for (std::size_t i = 0; i < p; ++i) {
        ps.mean_estimate[i] = ok > 0 ? ps.mean_estimate[i] / static_cast<double>(ok) : kNaN;
        ps.rms_relative_error[i] =
            ok > 0 ? std::sqrt(ps.rms_relative_error[i] / static_cast<double>(ok)) : kNaN;
        ps.fraction_within_tolerance[i] /= total;
      }
      ps.fraction_all_within_tolerance = static_cast<double>(all_within) / total;
      rep.estimation.push_back(std::move(ps));
    }
  }
  return rep;
}

std::vector<AssertionOutcome> evaluate_assertions(const ConvergenceReport& rep,
                                                  const AssertionSpec& spec) {
  std::vector<AssertionOutcome> out;
  auto range = [&](const std::string& name, const std::optional<double>& lo,
                   const std::optional<double>& hi, const std::optional<SlopeFit>& fit) {
    if (!lo && !hi) return;
    AssertionOutcome a{name, false, "no fit available"};
    if (fit) {
      a.pass = (!lo || fit->slope >= *lo) && (!hi || fit->slope <= *hi);
      a.detail = "slope " + std::to_string(fit->slope) + " in [" +
                 (lo ? std::to_string(*lo) : "-inf") + ", " + (hi ? std::to_string(*hi) : "inf") + "]";
    }
    out.push_back(a);
  };
  for (const auto& ls : rep.lag_slopes) {
    const std::string at = " at lag " + std::to_string(ls.lag);
    range("kx_slope" + at, spec.kx_slope_min, spec.kx_slope_max, ls.kx_vs_n);
    range("ky_rho_slope" + at, spec.ky_rho_slope_min, spec.ky_rho_slope_max, ls.ky_vs_rho);
    range("gap_rho_slope" + at, spec.gap_rho_slope_min, spec.gap_rho_slope_max, ls.gap_vs_rho);
  }
  auto fraction = [&](const std::string& name, const std::optional<double>& min,
                      const std::optional<double>& value) {
    if (!min) return;
    AssertionOutcome a{name, false, "no bound available"};
    if (value) {
      a.pass = *value >= *min;
      a.detail = std::to_string(*value) + " >= " + std::to_string(*min);
    }
    out.push_back(a);
  };
  fraction("bound_fraction", spec.bound_fraction_min, rep.bound_fraction_unobservable);
  fraction("observable_bound_fraction", spec.observable_bound_fraction_min,
           rep.bound_fraction_observable);
  if (spec.gap_within_bound) {
    AssertionOutcome a{"gap_within_bound", !rep.gap_checks.empty(), "no gap checks"};
    std::string detail;
    for (const auto& g : rep.gap_checks) {
      a.pass = a.pass && (g.covariance_pass == *spec.gap_within_bound);
      detail += (detail.empty() ? "" : "; ") + std::string("rho ") + std::to_string(g.rho) +
                ": gap " + std::to_string(g.covariance_gap) + " vs " +
                std::to_string(g.covariance_bound);
    }
    if (!detail.empty()) a.detail = detail;
    out.push_back(a);
  }
  if (spec.ky_ratio_band) {
    const std::size_t n_lags = rep.lag_slopes.size();
    for (std::size_t l = 0; l < n_lags; ++l) {
      double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
      for (std::size_t c = l; c < rep.cells.size(); c += n_lags) {
        const double ratio = rep.cells[c].ky_l2.value / rep.cells[c].rho;
        lo = std::min(lo, ratio);
        hi = std::max(hi, ratio);
      }
      const double band = hi / lo;
      out.push_back({"ky_ratio_band at lag " + std::to_string(rep.lag_slopes[l].lag),
                     std::isfinite(band) && band <= *spec.ky_ratio_band,
                     "max/min " + std::to_string(band) + " <= " + std::to_string(*spec.ky_ratio_band)});
    }
  }
  range("mean_l2_slope", spec.mean_l2_slope_min, spec.mean_l2_slope_max, rep.mean_x_l2_vs_span);
  range("mean_l4_slope", spec.mean_l4_slope_min, spec.mean_l4_slope_max, rep.mean_x_l4_vs_span);

  const bool wants_estimation = spec.estimate_fraction_min || !spec.estimate_rms_max.empty() ||
                                spec.estimate_rms_non_increasing;
  if (wants_estimation && rep.estimation.empty()) {
    out.push_back({"estimation", false, "no estimation in the report"});
    return out;
  }
  if (spec.estimate_fraction_min) {
    const auto& last = rep.estimation.back();
    out.push_back({"estimate_fraction", last.fraction_all_within_tolerance >= *spec.estimate_fraction_min,
                   std::to_string(last.fraction_all_within_tolerance) + " >= " +
                       std::to_string(*spec.estimate_fraction_min)});
  }
  if (!spec.estimate_rms_max.empty()) {
    const auto& last = rep.estimation.back();
    for (std::size_t i = 0; i < last.names.size(); ++i) {
      const double lim = spec.estimate_rms_max.size() == 1 ? spec.estimate_rms_max[0]
                                                           : spec.estimate_rms_max.at(i);
      out.push_back({"estimate_rms " + last.names[i], last.rms_relative_error[i] <= lim,
                     std::to_string(last.rms_relative_error[i]) + " <= " + std::to_string(lim)});
    }
  }
  if (spec.estimate_rms_non_increasing && *spec.estimate_rms_non_increasing) {
    const auto& names = rep.estimation.front().names;
    for (std::size_t i = 0; i < names.size(); ++i) {
      bool ok = true;
      std::string detail;
      for (std::size_t e = 0; e < rep.estimation.size(); ++e) {
        const double v = rep.estimation[e].rms_relative_error[i];
        if (e > 0) ok = ok && v <= rep.estimation[e - 1].rms_relative_error[i];
        detail += (detail.empty() ? "" : " -> ") + std::to_string(v);
      }
      out.push_back({"estimate_rms_non_increasing " + names[i], ok, detail});
    }
  }
  return out;
}

}  // namespace ioest
