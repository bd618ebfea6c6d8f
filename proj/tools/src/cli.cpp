#include "cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <optional>
#include <ostream>
#include <sstream>

#include "ioest/config.hpp"
#include "ioest/convergence_lab.hpp"
#include "ioest/error.hpp"
#include "ioest/moment_estimators.hpp"
#include "ioest/parameter_inversion.hpp"
#include "ioest/process_models.hpp"
#include "ioest/subsampling_scheduler.hpp"
#include "ioest/trajectory.hpp"

namespace ioest::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

constexpr const char* kVersion = "0.1.0";

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct GlobalOptions {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::string output;
  bool assert_thresholds = false;
};

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw Error(ErrorKind::Io, "failed writing '" + path + "'");
}

/// Run manifest: enough to reproduce the command without the original files.
struct Manifest {
  json body;
  std::string started = utc_now();

  Manifest(const std::string& command, const std::vector<std::string>& args) {
    body["tool"] = "ioest";
    body["artifact_version"] = kVersion;
    body["command"] = command;
    body["arguments"] = args;
  }
  void config(const std::string& path, const std::string& text) {
    body["config_path"] = path;
    body["config_hash"] = config::content_hash(text);
    body["config_text"] = text;
  }
  void write(const std::string& path, const std::vector<std::string>& outputs) {
    body["master_seed"] = body.contains("master_seed") ? body["master_seed"] : json(nullptr);
    body["outputs"] = outputs;
    body["started_at"] = started;
    body["finished_at"] = utc_now();
    write_text(path, body.dump(2) + "\n");
  }
};

std::string sibling(const std::string& path, const std::string& tag) {
  const fs::path p(path);
  return (p.parent_path() / (p.stem().string() + "." + tag + p.extension().string())).string();
}

json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

json vector_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

json scheme_json(const SubsamplingScheme& s) {
  json j{{"n_obs", s.n_obs}, {"big_delta", s.big_delta}, {"span", s.span()}};
  if (s.resolved()) j["stride"] = s.stride;
  return j;
}

// --- simulate -------------------------------------------------------------------

struct SimulateSpec {
  std::string model = "ou";
  std::size_t length = 0;
  double delta = 0.0;
  std::uint64_t seed = 1;
  std::uint64_t replication = 0;
  std::string observable = "none";
  double eps = 0.0;
  double rho = 0.0;
  std::optional<std::size_t> window;
  double burn_in_time = 10.0;
  OUParams ou;
  GradientDiffusionParams gradient;
  HestonParams heston;
  SlowFastParams slow_fast;
};

SimulateSpec parse_simulate(const config::Document& doc) {
  doc.reject_unknown_sections({"simulate", "ou", "gradient", "heston", "slow_fast"});
  SimulateSpec s;
  const auto& sim = doc.require_section("simulate");
  sim.reject_unknown({"model", "length", "delta", "seed", "replication", "observable", "eps",
                      "rho", "window", "burn_in_time"});
  s.model = sim.get_string("model", s.model);
  s.length = sim.get_u64("length");
  s.delta = sim.get_double("delta");
  s.seed = sim.get_u64("seed", s.seed);
  s.replication = sim.get_u64("replication", s.replication);
  s.observable = sim.get_string("observable", s.observable);
  s.eps = sim.get_double("eps", s.eps);
  s.rho = sim.get_double("rho", s.rho);
  if (sim.has("window")) s.window = sim.get_u64("window");
  s.burn_in_time = sim.get_double("burn_in_time", s.burn_in_time);

  const auto& ou = doc.section("ou");
  ou.reject_unknown({"mean", "reversion", "noise"});
  s.ou.mean = ou.get_double("mean", s.ou.mean);
  s.ou.reversion = ou.get_double("reversion", s.ou.reversion);
  s.ou.noise = ou.get_double("noise", s.ou.noise);

  const auto& gr = doc.section("gradient");
  gr.reject_unknown({"potential", "diffusion", "dim"});
  if (gr.has("potential")) s.gradient.potential = PolynomialPotential::from_name(gr.get_string("potential"));
  const auto dim = static_cast<Eigen::Index>(gr.get_u64("dim", 1));
  s.gradient.diffusion = gr.get_double("diffusion", 1.4142135623730951) * Eigen::MatrixXd::Identity(dim, dim);

  const auto& he = doc.section("heston");
  he.reject_unknown({"drift", "vol_reversion", "vol_mean", "vol_of_vol"});
  s.heston.drift = he.get_double("drift", s.heston.drift);
  s.heston.vol_reversion = he.get_double("vol_reversion", s.heston.vol_reversion);
  s.heston.vol_mean = he.get_double("vol_mean", s.heston.vol_mean);
  s.heston.vol_of_vol = he.get_double("vol_of_vol", s.heston.vol_of_vol);

  const auto& sf = doc.section("slow_fast");
  sf.reject_unknown({"entry", "scale"});
  if (sf.has("entry")) s.slow_fast.entry = slow_fast_entry_from_name(sf.get_string("entry"));
  s.slow_fast.scale = sf.get_double("scale", s.slow_fast.scale);

  const std::vector<std::string> models{"ou", "gradient", "heston", "slow_fast"};
  if (std::find(models.begin(), models.end(), s.model) == models.end()) {
    throw Error(ErrorKind::InvalidConfig, "simulate.model must be ou | gradient | heston | slow_fast");
  }
  const std::vector<std::string> observables{"none", "multiplicative", "smoothing",
                                             "realized_volatility"};
  if (std::find(observables.begin(), observables.end(), s.observable) == observables.end()) {
    throw Error(ErrorKind::InvalidConfig,
                "simulate.observable must be none | multiplicative | smoothing | realized_volatility");
  }
  if (s.length == 0) throw Error(ErrorKind::InvalidConfig, "simulate.length must be positive");
  if (!(s.delta > 0.0)) throw Error(ErrorKind::InvalidConfig, "simulate.delta must be positive");
  return s;
}

int cmd_simulate(const std::string& config_path, const GlobalOptions& g,
                 const std::vector<std::string>& args, std::ostream& out) {
  const auto doc = config::Document::load_file(config_path);
  SimulateSpec s = parse_simulate(doc);
  if (g.seed) s.seed = *g.seed;
  const std::string output = g.output.empty() ? "trajectory.csv" : g.output;
  const RandomStreamSpec stream{s.seed, s.replication, StreamRole::process_noise};

  std::vector<std::pair<std::string, TrajectoryGrid>> files;
  TrajectoryGrid primary, returns;
  if (s.model == "ou") {
    primary = simulate_ou(s.ou, s.length, s.delta, stream);
  } else if (s.model == "gradient") {
    primary = simulate_gradient_diffusion(
        s.gradient, s.length, s.delta, stream,
        static_cast<std::size_t>(std::ceil(s.burn_in_time / s.delta)));
  } else if (s.model == "heston") {
    auto paths = simulate_heston(s.heston, s.length, s.delta, stream);
    primary = std::move(paths.variance);
    returns = std::move(paths.returns);
  } else {
    auto paths = simulate_slow_fast(s.slow_fast, s.length, s.delta, stream);
    primary = std::move(paths.slow);
    files.emplace_back(sibling(output, "reduced"), std::move(paths.reduced));
  }

  if (s.observable == "multiplicative") {
    files.emplace_back(sibling(output, "observable"),
                       multiplicative_perturbation_observable(primary, s.rho));
  } else if (s.observable == "smoothing") {
    files.emplace_back(sibling(output, "observable"), smoothing_observable(primary, s.eps).path);
  } else if (s.observable == "realized_volatility") {
    if (s.model != "heston") {
      throw Error(ErrorKind::InvalidConfig, "realized_volatility needs simulate.model = heston");
    }
    files.emplace_back(
        sibling(output, "observable"),
        realized_volatility_observable(returns, s.eps, s.window.value_or(default_realized_window(s.eps)))
            .path);
  }
  if (!returns.empty()) files.emplace_back(sibling(output, "returns"), std::move(returns));
  files.insert(files.begin(), {output, std::move(primary)});

  std::vector<std::string> written;
  for (const auto& [path, grid] : files) {
    write_trajectory_file(grid, path);
    written.push_back(path);
  }
  Manifest m("simulate", args);
  m.config(config_path, doc.text());
  m.body["master_seed"] = s.seed;
  const std::string manifest_path = output + ".manifest.json";
  m.write(manifest_path, written);
  for (const auto& p : written) out << p << "\n";
  out << manifest_path << "\n";
  return exit_codes::kSuccess;
}

// --- estimate -------------------------------------------------------------------

struct EstimateOptions {
  std::string trajectory;
  std::optional<std::size_t> n_obs;
  std::optional<double> big_delta;
  std::optional<double> rho;
  double c_n = 1.0;
  double c_delta = 1.0;
  std::vector<double> lags;
  std::string model = "none";
  std::optional<double> u1, u2;
  std::vector<double> ball_center;
  std::optional<double> ball_radius;
};

int cmd_estimate(const EstimateOptions& o, const GlobalOptions& g,
                 const std::vector<std::string>& args, std::ostream& out) {
  if (o.lags.empty()) throw UsageError("--lags needs at least one lag");
  if (o.n_obs.has_value() == o.rho.has_value()) {
    throw UsageError("give exactly one of --n-obs or --rho");
  }
  if (o.rho && o.big_delta) throw UsageError("--big-delta goes with --n-obs, not --rho");
  if (o.ball_center.empty() != !o.ball_radius.has_value()) {
    throw UsageError("--ball-center and --ball-radius go together");
  }

  const TrajectoryGrid grid = read_trajectory_file(o.trajectory);
  if (auto v = validate_grid(grid); !v) throw Error(ErrorKind::InsufficientData, v.message);

  SubsamplingScheme scheme;
  if (o.rho) {
    if (!(*o.rho > 0.0 && *o.rho < 1.0)) throw Error(ErrorKind::ParameterDomain, "rho must lie in (0, 1)");
    scheme = {static_cast<std::size_t>(std::ceil(o.c_n / std::pow(*o.rho, 3) * (1.0 - 1e-12))), 0,
              o.c_delta * *o.rho};
  } else if (o.big_delta) {
    scheme = {*o.n_obs, 0, *o.big_delta};
  } else {
    scheme = scheme_from_n(*o.n_obs, o.c_delta);
  }
  scheme = resolve_on_grid(scheme, grid.delta());

  std::vector<LagRequest> lags;
  std::size_t max_kappa = 0;
  for (double u : o.lags) {
    lags.push_back({u});
    max_kappa = std::max(max_kappa, lag_index(u, scheme.big_delta));
  }
  const SampleView view = subsample_view(grid, scheme, 0, max_kappa);
  const auto curve = covariance_curve(view, scheme, lags);
  const auto mean = empirical_mean(view, scheme.n_obs, 0, scheme.big_delta);

  json result;
  result["trajectory"] = o.trajectory;
  result["scheme"] = scheme_json(scheme);
  result["mean"] = vector_json(mean.vector);
  json cov = json::array();
  for (const auto& k : curve) {
    cov.push_back({{"lag_requested", k.lag_requested},
                   {"lag_used", k.lag_used},
                   {"kappa", k.kappa},
                   {"matrix", matrix_json(k.matrix)}});
  }
  result["covariances"] = cov;
  result["model"] = o.model;

  if (o.model != "none") {
    if (grid.dim() != 1) throw Error(ErrorKind::ParameterDomain, "model inversion needs a scalar trajectory");
    double first_positive = 0.0;
    for (double u : o.lags) {
      if (u > 0.0) {
        first_positive = u;
        break;
      }
    }
    const double u1 = o.u1.value_or(first_positive);
    if (!(u1 > 0.0)) throw UsageError("model inversion needs a positive lag (--u1 or in --lags)");
    std::vector<MomentDescriptor> desc;
    ParameterEstimate est;
    if (o.model == "cir_two_lag") {
      const double u2 = o.u2.value_or(2.0 * u1);
      desc = {MomentDescriptor::mean(0), MomentDescriptor::covariance(0, 0, u1),
              MomentDescriptor::covariance(0, 0, u2)};
      est = invert_cir_two_lag(extract_moment_vector(grid, scheme, desc), u1, u2);
    } else {
      desc = {MomentDescriptor::mean(0), MomentDescriptor::covariance(0, 0, 0.0),
              MomentDescriptor::covariance(0, 0, u1)};
      const MomentVector psi = extract_moment_vector(grid, scheme, desc);
      if (o.model == "ou") {
        est = invert_ou(psi, u1);
      } else if (o.model == "cir") {
        est = invert_cir(psi, u1);
      } else if (o.model == "ou_ls") {
        if (o.ball_center.size() != 3) {
          throw UsageError("ou_ls needs --ball-center mu,gamma,sigma and --ball-radius");
        }
        const ParameterBall ball{Eigen::Map<const Eigen::VectorXd>(o.ball_center.data(), 3),
                                 *o.ball_radius};
        est = invert_least_squares(ou_moment_model(u1), psi, ball.center, ball);
      } else {
        throw UsageError("--model must be none | ou | cir | cir_two_lag | ou_ls");
      }
    }
    if (!o.ball_center.empty() && o.model != "ou_ls") {
      if (o.ball_center.size() != static_cast<std::size_t>(est.theta.size())) {
        throw UsageError("--ball-center needs one value per parameter");
      }
      const ParameterBall ball{Eigen::Map<const Eigen::VectorXd>(o.ball_center.data(),
                                                                 est.theta.size()),
                               *o.ball_radius};
      auto truncated = truncate_to_ball(est.theta, ball);
      est.theta = truncated.theta;
      est.truncated = truncated.truncated;
    }
    json e;
    e["names"] = est.names;
    e["theta"] = vector_json(est.theta);
    e["truncated"] = est.truncated;
    e["diagnostics"] = {{"residual_norm", est.diagnostics.residual_norm},
                        {"iterations", est.diagnostics.iterations},
                        {"converged", est.diagnostics.converged}};
    if (est.moment_input) {
      json mi = json::array();
      const auto& psi = *est.moment_input;
      for (std::size_t k = 0; k < psi.size(); ++k) {
        mi.push_back({{"moment", psi.descriptors()[k].to_string()},
                      {"value", psi[k]},
                      {"lag_used", psi.lags_used().empty() ? psi.descriptors()[k].lag : psi.lags_used()[k]}});
      }
      e["moment_input"] = mi;
    }
    result["estimate"] = e;
  }

  const std::string text = result.dump(2) + "\n";
  if (g.output.empty()) {
    out << text;
  } else {
    write_text(g.output, text);
    Manifest m("estimate", args);
    m.body["trajectory"] = o.trajectory;
    m.write(g.output + ".manifest.json", {g.output});
    out << g.output << "\n";
  }
  return exit_codes::kSuccess;
}

// --- scheme ---------------------------------------------------------------------

struct SchemeOptions {
  std::optional<double> rho;
  std::optional<std::size_t> n_obs;
  double c_n = 1.0;
  double c_delta = 1.0;
  std::optional<double> nu;
  double horizon = 1.0;
  std::size_t dim = 1;
  double variance = 1.0;
  double rate = 1.0;
  std::optional<double> decay_c;
  std::optional<double> lambda;
  std::string convention = "from_one";
};

int cmd_scheme(const SchemeOptions& o, const GlobalOptions& g, std::ostream& out) {
  if (o.rho.has_value() == o.n_obs.has_value()) {
    throw UsageError("give exactly one of --rho or --n-obs");
  }
  BoundInputs in;
  in.nu = o.nu.value_or(gaussian_l4_norm(0.0, o.variance));
  in.horizon_A = o.horizon;
  in.dim_r = o.dim;
  in.profile = o.decay_c ? DecorrelationProfile::exponential(*o.decay_c, o.rate)
                         : gaussian_exponential_profile(o.variance, o.rate);
  in.lipschitz_lambda = o.lambda.value_or(o.variance * o.rate);
  if (o.convention == "from_one") {
    in.convention = IntegralConvention::from_one;
  } else if (o.convention == "from_zero") {
    in.convention = IntegralConvention::from_zero;
  } else {
    throw UsageError("--convention must be from_one or from_zero");
  }
  in.validate();

  json j;
  SubsamplingScheme scheme;
  if (o.rho) {
    const auto rec = scheme_from_rho(*o.rho, in, o.c_n, o.c_delta);
    scheme = rec.scheme;
    j["rho"] = rec.rho;
    j["scheme"] = scheme_json(scheme);
    j["predicted_error"] = rec.predicted_error;
  } else {
    scheme = scheme_from_n(*o.n_obs, o.c_delta);
    j["scheme"] = scheme_json(scheme);
  }
  const auto ub = error_bound_unobservable(in, scheme);
  j["unobservable_bound"] = {{"gamma_app", ub.gamma_app},
                             {"covariance_bound", ub.covariance_bound},
                             {"mean_constant_C", ub.mean_constant_C},
                             {"mean_l4_bound", ub.mean_l4_bound},
                             {"mean_l2_bound", ub.mean_l2_bound}};
  j["bound_inputs"] = {{"nu", in.nu},
                       {"horizon_A", in.horizon_A},
                       {"dim_r", in.dim_r},
                       {"profile", in.profile.describe()},
                       {"integral", in.integral()},
                       {"lipschitz_lambda", in.lipschitz_lambda},
                       {"convention", o.convention}};
  const std::string text = j.dump(2) + "\n";
  if (g.output.empty()) {
    out << text;
  } else {
    write_text(g.output, text);
    out << g.output << "\n";
  }
  return exit_codes::kSuccess;
}

// --- lab ------------------------------------------------------------------------

struct LabOptions {
  std::string preset;
  std::string config;
  std::string resume;
  bool list = false;
  std::vector<double> probe_gaps;
  double probe_time = 20000.0;
};

int cmd_lab(const LabOptions& o, const GlobalOptions& g, const std::vector<std::string>& args,
            std::ostream& out, std::ostream& err) {
  if (o.list) {
    for (const auto& name : preset_names()) out << name << "\n";
    return exit_codes::kSuccess;
  }
  if (o.preset.empty() == o.config.empty()) throw UsageError("give exactly one of --preset or --config");
  const std::string text = o.preset.empty() ? config::Document::load_file(o.config).text()
                                            : preset_text(o.preset);
  const std::string source = o.preset.empty() ? o.config : "preset:" + o.preset;
  ExperimentConfig cfg = parse_experiment_config_text(text, source);
  if (g.seed) cfg.master_seed = *g.seed;
  if (g.workers) cfg.workers = *g.workers;

  const std::string dir = g.output.empty() ? "lab-" + cfg.name : g.output;
  fs::create_directories(dir);
  const std::string ensemble_path = (fs::path(dir) / "ensemble.bin").string();
  const std::string json_path = (fs::path(dir) / "report.json").string();
  const std::string csv_path = (fs::path(dir) / "report.csv").string();

  Ensemble ens;
  if (!o.resume.empty()) {
    ens = read_ensemble_file(o.resume);
    if (ens.config_hash != cfg.hash()) {
      throw Error(ErrorKind::InvalidConfig, "ensemble '" + o.resume +
                                                "' was produced by a different configuration");
    }
  } else {
    ens = run_replications(cfg);
  }
  std::vector<std::string> written;
  if (o.resume.empty() || fs::absolute(o.resume) != fs::absolute(ensemble_path)) {
    write_ensemble_file(ens, ensemble_path);
  }
  written.push_back(ensemble_path);
  const auto report = build_report(cfg, ens, derive_bound_inputs(cfg));
  write_text(json_path, report_to_json(report));
  write_text(csv_path, report_to_csv(report));
  written.push_back(json_path);
  written.push_back(csv_path);

  if (!o.probe_gaps.empty()) {
    const auto plan = plan_experiment(cfg);
    const double fine = plan.back().fine_delta;
    const auto table = decorrelation_probe(
        cfg, o.probe_gaps, {cfg.master_seed, std::uint64_t{1} << 62, StreamRole::process_noise},
        o.probe_time, fine);
    const std::string probe_path = (fs::path(dir) / "decorrelation.json").string();
    write_text(probe_path, decorrelation_to_json(table));
    written.push_back(probe_path);
  }

  Manifest m("lab", args);
  m.config(source, text);
  m.body["experiment_hash"] = cfg.hash();
  m.body["master_seed"] = cfg.master_seed;
  m.body["workers"] = cfg.workers;
  if (!o.resume.empty()) m.body["resumed_from"] = o.resume;
  const std::string manifest_path = (fs::path(dir) / "manifest.json").string();
  m.write(manifest_path, written);
  for (const auto& p : written) out << p << "\n";
  out << manifest_path << "\n";

  if (g.assert_thresholds) {
    if (cfg.assertions.empty()) throw UsageError("--assert given but the config has no [assert] section");
    bool all = true;
    for (const auto& a : evaluate_assertions(report, cfg.assertions)) {
      out << (a.pass ? "PASS " : "FAIL ") << a.name << ": " << a.detail << "\n";
      all = all && a.pass;
    }
    if (!all) {
      err << "ioest: assertion thresholds failed\n";
      return exit_codes::kAssertionFailed;
    }
  }
  return exit_codes::kSuccess;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Moment estimators for indirectly observed stationary processes", "ioest"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", kVersion);

  GlobalOptions g;
  std::uint64_t seed = 0;
  std::size_t workers = 0;
  auto* seed_opt = app.add_option("--seed", seed, "Master seed (overrides the config)");
  auto* workers_opt = app.add_option("--workers", workers, "Worker threads for lab runs (0: all cores)");
  app.add_option("--output", g.output, "Output file, or directory for lab");
  app.add_flag("--assert", g.assert_thresholds, "Exit non-zero when lab thresholds fail");

  std::string sim_config;
  auto* sim = app.add_subcommand("simulate", "Simulate a model from a config file");
  sim->add_option("config", sim_config, "Simulation config file")->required();

  EstimateOptions eo;
  std::size_t e_n = 0;
  double e_big = 0, e_rho = 0, e_u1 = 0, e_u2 = 0, e_radius = 0;
  auto* est = app.add_subcommand("estimate", "Estimate moments and parameters from a trajectory");
  est->add_option("--trajectory", eo.trajectory, "Trajectory file (.csv or binary)")->required();
  auto* e_n_opt = est->add_option("--n-obs", e_n, "Number of sub-sampled observations N");
  auto* e_big_opt = est->add_option("--big-delta", e_big, "Sub-sampling step (default c_delta N^-1/3)");
  auto* e_rho_opt = est->add_option("--rho", e_rho, "Use the optimized scheme for this rho");
  est->add_option("--c-n", eo.c_n, "Constant in N = c_n rho^-3");
  est->add_option("--c-delta", eo.c_delta, "Constant in Delta = c_delta rho or c_delta N^-1/3");
  std::vector<std::string> e_lags;
  est->add_option("--lags", e_lags, "Comma-separated lags")->delimiter(',')->required();
  est->add_option("--model", eo.model, "none | ou | cir | cir_two_lag | ou_ls");
  auto* e_u1_opt = est->add_option("--u1", e_u1, "First positive lag used by the inverse");
  auto* e_u2_opt = est->add_option("--u2", e_u2, "Second lag for cir_two_lag");
  est->add_option("--ball-center", eo.ball_center, "Parameter ball center")->delimiter(',');
  auto* e_radius_opt = est->add_option("--ball-radius", e_radius, "Parameter ball radius");

  SchemeOptions so;
  double s_rho = 0, s_nu = 0, s_c = 0, s_lambda = 0;
  std::size_t s_n = 0;
  auto* sch = app.add_subcommand("scheme", "Recommend a sub-sampling scheme with error bounds");
  auto* s_rho_opt = sch->add_option("--rho", s_rho, "Observation accuracy rho(eps)");
  auto* s_n_opt = sch->add_option("--n-obs", s_n, "Number of observations N");
  sch->add_option("--c-n", so.c_n, "Constant in N = c_n rho^-3");
  sch->add_option("--c-delta", so.c_delta, "Constant in Delta");
  auto* s_nu_opt = sch->add_option("--nu", s_nu, "L4 bound on X (default Gaussian with --variance)");
  sch->add_option("--horizon", so.horizon, "Largest lag A");
  sch->add_option("--dim", so.dim, "Process dimension r");
  sch->add_option("--variance", so.variance, "Stationary variance for the Gaussian defaults");
  sch->add_option("--decay-rate", so.rate, "Exponential decorrelation rate");
  auto* s_c_opt = sch->add_option("--decay-c", s_c, "Decorrelation coefficient (default from pairing)");
  auto* s_lambda_opt = sch->add_option("--lambda", s_lambda, "Lipschitz constant of K on [0, A]");
  sch->add_option("--convention", so.convention, "from_one | from_zero");

  LabOptions lo;
  auto* lab = app.add_subcommand("lab", "Run a Monte Carlo convergence experiment");
  lab->add_option("--preset", lo.preset, "Bundled experiment name");
  lab->add_option("--config", lo.config, "Experiment config file");
  lab->add_option("--resume", lo.resume, "Rebuild the report from a saved ensemble");
  lab->add_flag("--list-presets", lo.list, "Print the bundled experiment names");
  lab->add_option("--probe-gaps", lo.probe_gaps, "Also tabulate the decorrelation probe")->delimiter(',');
  lab->add_option("--probe-time", lo.probe_time, "Probe path length in time units");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? exit_codes::kSuccess : exit_codes::kUsage;
  }
  if (*seed_opt) g.seed = seed;
  if (*workers_opt) g.workers = workers;

  try {
    if (*sim) return cmd_simulate(sim_config, g, args, out);
    if (*est) {
      if (*e_n_opt) eo.n_obs = e_n;
      if (*e_big_opt) eo.big_delta = e_big;
      if (*e_rho_opt) eo.rho = e_rho;
      if (*e_u1_opt) eo.u1 = e_u1;
      if (*e_u2_opt) eo.u2 = e_u2;
      if (*e_radius_opt) eo.ball_radius = e_radius;
      for (const auto& item : e_lags) {
        if (item.empty()) continue;
        try {
          std::size_t used = 0;
          eo.lags.push_back(std::stod(item, &used));
          if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
          throw UsageError("--lags: '" + item + "' is not a number");
        }
      }
      return cmd_estimate(eo, g, args, out);
    }
    if (*sch) {
      if (*s_rho_opt) so.rho = s_rho;
      if (*s_n_opt) so.n_obs = s_n;
      if (*s_nu_opt) so.nu = s_nu;
      if (*s_c_opt) so.decay_c = s_c;
      if (*s_lambda_opt) so.lambda = s_lambda;
      return cmd_scheme(so, g, out);
    }
    if (*lab) return cmd_lab(lo, g, args, out, err);
  } catch (const UsageError& e) {
    err << "ioest: usage: " << e.what() << "\n";
    return exit_codes::kUsage;
  } catch (const Error& e) {
    err << "ioest: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    err << "ioest: Io: " << e.what() << "\n";
    return exit_codes::kData;
  }
  return exit_codes::kUsage;
}

}  // namespace ioest::cli
