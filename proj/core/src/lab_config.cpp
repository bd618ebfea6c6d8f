#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "ioest/config.hpp"
#include "ioest/convergence_lab.hpp"
#include "ioest/error.hpp"
#include "ioest/moment_estimators.hpp"

namespace ioest {
namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorKind::InvalidConfig, what);
}

template <typename Enum, std::size_t K>
Enum parse_enum(const config::Section& s, std::string_view key, Enum fallback,
                const std::pair<const char*, Enum> (&names)[K]) {
  if (!s.has(key)) return fallback;
  const std::string raw = s.get_string(key);
  for (const auto& [name, value] : names) {
    if (raw == name) return value;
  }
  std::string expected;
  for (const auto& [name, value] : names) expected += (expected.empty() ? "" : " | ") + std::string(name);
  throw Error(ErrorKind::InvalidConfig, "key '" + s.name() + "." + std::string(key) +
                                            "' must be one of " + expected + ", got '" + raw +
                                            "'");
}

const std::pair<const char*, ModelKind> kModels[] = {{"ou", ModelKind::ou},
                                                     {"gradient", ModelKind::gradient},
                                                     {"heston", ModelKind::heston},
                                                     {"slow_fast", ModelKind::slow_fast}};
const std::pair<const char*, ObservableKind> kObservables[] = {
    {"identity", ObservableKind::identity},
    {"multiplicative", ObservableKind::multiplicative},
    {"smoothing", ObservableKind::smoothing},
    {"realized_volatility", ObservableKind::realized_volatility},
    {"slow_fast", ObservableKind::slow_fast}};
const std::pair<const char*, RhoFunction> kRho[] = {{"identity", RhoFunction::identity},
                                                    {"sqrt", RhoFunction::sqrt},
                                                    {"zero", RhoFunction::zero},
                                                    {"table", RhoFunction::table}};
const std::pair<const char*, SchemeFamily> kFamilies[] = {{"from_rho", SchemeFamily::from_rho},
                                                          {"from_n", SchemeFamily::from_n},
                                                          {"custom", SchemeFamily::custom}};
const std::pair<const char*, EstimationMethod> kMethods[] = {
    {"none", EstimationMethod::none},
    {"ou", EstimationMethod::ou},
    {"cir", EstimationMethod::cir},
    {"cir_two_lag", EstimationMethod::cir_two_lag}};
const std::pair<const char*, EstimatorSide> kSides[] = {
    {"observable", EstimatorSide::observable}, {"unobservable", EstimatorSide::unobservable}};
const std::pair<const char*, BoundsMode> kBounds[] = {
    {"auto", BoundsMode::automatic}, {"manual", BoundsMode::manual}, {"none", BoundsMode::none}};
const std::pair<const char*, IntegralConvention> kConventions[] = {
    {"from_one", IntegralConvention::from_one}, {"from_zero", IntegralConvention::from_zero}};

template <typename Enum, std::size_t K>
std::string enum_name(Enum v, const std::pair<const char*, Enum> (&names)[K]) {
  for (const auto& [name, value] : names) {
    if (value == v) return name;
  }
  return "?";
}

std::optional<double> opt_double(const config::Section& s, std::string_view key) {
  if (!s.has(key)) return std::nullopt;
  return s.get_double(key);
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <typename T>
std::string fmt_list(const std::vector<T>& values) {
  std::string out;
  for (const auto& v : values) {
    if (!out.empty()) out += ",";
    if constexpr (std::is_floating_point_v<T>) {
      out += fmt(v);
    } else {
      out += std::to_string(v);
    }
  }
  return out;
}

}  // namespace

std::string to_string(ModelKind kind) { return enum_name(kind, kModels); }
std::string to_string(ObservableKind kind) { return enum_name(kind, kObservables); }
std::string to_string(RhoFunction kind) { return enum_name(kind, kRho); }
std::string to_string(SchemeFamily kind) { return enum_name(kind, kFamilies); }
std::string to_string(EstimationMethod kind) { return enum_name(kind, kMethods); }

bool AssertionSpec::empty() const noexcept {
  return !kx_slope_min && !kx_slope_max && !ky_rho_slope_min && !ky_rho_slope_max &&
         !gap_rho_slope_min && !gap_rho_slope_max && !bound_fraction_min &&
         !observable_bound_fraction_min && !gap_within_bound && !ky_ratio_band &&
         !mean_l2_slope_min && !mean_l2_slope_max && !mean_l4_slope_min &&
         !mean_l4_slope_max && estimate_tolerance.empty() && !estimate_fraction_min &&
         estimate_rms_max.empty() && !estimate_rms_non_increasing;
}

double ExperimentConfig::rho_of(std::size_t eps_index) const {
  const double eps = epsilon_grid.at(eps_index);
  switch (rho) {
    case RhoFunction::identity: return rho_scale * eps;
    case RhoFunction::sqrt: return rho_scale * std::sqrt(eps);
    case RhoFunction::zero: return 0.0;
    case RhoFunction::table: return rho_scale * rho_table.at(eps_index);
  }
  return 0.0;
}

void ExperimentConfig::validate() const {
  require(epsilon_grid.size() >= 3, "epsilon grid needs at least 3 values");
  for (std::size_t e = 0; e < epsilon_grid.size(); ++e) {
    require(epsilon_grid[e] > 0.0, "epsilon values must be positive");
    if (e > 0) require(epsilon_grid[e] < epsilon_grid[e - 1], "epsilon grid must be strictly decreasing");
  }
  require(replications >= 30, "replications must be at least 30");
  require(stride_resolution >= 1, "stride_resolution must be at least 1");
  require(memory_cap_mb > 0.0, "memory_cap_mb must be positive");
  require(!lags.empty(), "at least one lag is required");
  for (double u : lags) require(u >= 0.0, "lags must be non-negative");
  require(rho_scale >= 0.0, "rho_scale must be non-negative");
  if (rho == RhoFunction::table) {
    require(rho_table.size() == epsilon_grid.size(), "rho table needs one value per epsilon");
    for (double r : rho_table) require(r >= 0.0, "rho table values must be non-negative");
  }

  const std::size_t n_eps = epsilon_grid.size();
  switch (scheme_family) {
    case SchemeFamily::from_rho:
      require(c_n > 0.0 && c_delta > 0.0, "c_n and c_delta must be positive");
      for (std::size_t e = 0; e < n_eps; ++e) {
        const double r = rho_of(e);
        require(r > 0.0 && r < 1.0, "scheme family from_rho needs 0 < rho(eps) < 1");
      }
      break;
    case SchemeFamily::from_n:
      require(c_delta > 0.0, "c_delta must be positive");
      require(n_values.size() == n_eps, "scheme.n_obs needs one value per epsilon");
      for (auto n : n_values) require(n >= 8, "scheme.n_obs values must be at least 8");
      break;
    case SchemeFamily::custom:
      require(n_values.size() == n_eps && delta_values.size() == n_eps,
              "custom schemes need n_obs and big_delta lists with one value per epsilon");
      for (auto n : n_values) require(n >= 2, "scheme.n_obs values must be at least 2");
      for (double d : delta_values) require(d > 0.0, "scheme.big_delta values must be positive");
      break;
  }

  switch (model) {
    case ModelKind::ou: ou.validate(); break;
    case ModelKind::gradient:
      gradient.validate();
      require(gradient_burn_in_time >= 0.0, "gradient.burn_in_time must be non-negative");
      break;
    case ModelKind::heston: heston.validate(); break;
    case ModelKind::slow_fast: break;
  }

  const bool heston_obs = observable == ObservableKind::realized_volatility;
  require(!heston_obs || model == ModelKind::heston,
          "the realized_volatility observable needs the heston model");
  require((observable == ObservableKind::slow_fast) == (model == ModelKind::slow_fast),
          "the slow_fast model and observable go together");
  if (observable == ObservableKind::smoothing) {
    require(smoothing_substeps >= 1, "observable.substeps must be at least 1");
  }
  if (realized_window) require(*realized_window >= 1, "observable.window must be at least 1");

  auto has_lag = [&](double u) {
    return std::any_of(lags.begin(), lags.end(), [&](double l) { return l == u; });
  };
  switch (estimation) {
    case EstimationMethod::none: break;
    case EstimationMethod::ou:
    case EstimationMethod::cir:
      require(estimation_u1 > 0.0, "estimation.u1 must be positive");
      require(has_lag(0.0) && has_lag(estimation_u1),
              "estimation needs lags 0 and u1 in the lag list");
      break;
    case EstimationMethod::cir_two_lag:
      require(estimation_u1 > 0.0 && estimation_u2 > estimation_u1,
              "estimation needs 0 < u1 < u2");
      require(has_lag(estimation_u1) && has_lag(estimation_u2),
              "estimation needs lags u1 and u2 in the lag list");
      break;
  }
  if (estimation == EstimationMethod::cir || estimation == EstimationMethod::cir_two_lag) {
    require(model == ModelKind::heston, "CIR estimation needs the heston model");
  }
  if (bounds == BoundsMode::manual) manual_bounds.validate();
}

std::string ExperimentConfig::hash() const {
  std::ostringstream c;
  c << "model=" << to_string(model) << "\n";
  switch (model) {
    case ModelKind::ou:
      c << "ou=" << fmt(ou.mean) << "," << fmt(ou.reversion) << "," << fmt(ou.noise) << "\n";
      break;
    case ModelKind::gradient: {
      c << "potential=" << fmt_list(gradient.potential.coefficients) << "\ndiffusion=";
      for (Eigen::Index i = 0; i < gradient.diffusion.size(); ++i) {
        c << fmt(gradient.diffusion.data()[i]) << ",";
      }
      c << "\nburn_in=" << fmt(gradient_burn_in_time) << "\n";
      break;
    }
    case ModelKind::heston:
      c << "heston=" << fmt(heston.drift) << "," << fmt(heston.vol_reversion) << ","
        << fmt(heston.vol_mean) << "," << fmt(heston.vol_of_vol) << "\n";
      break;
    case ModelKind::slow_fast: c << "entry=" << to_string(slow_fast) << "\n"; break;
  }
  c << "observable=" << to_string(observable) << "," << smoothing_substeps << ","
    << (realized_window ? std::to_string(*realized_window) : "default") << "\n";
  c << "rho=" << to_string(rho) << "," << fmt(rho_scale) << "," << fmt_list(rho_table) << "\n";
  c << "eps=" << fmt_list(epsilon_grid) << "\n";
  c << "scheme=" << to_string(scheme_family) << "," << fmt(c_n) << "," << fmt(c_delta) << ";"
    << fmt_list(n_values) << ";" << fmt_list(delta_values) << "\n";
  c << "lags=" << fmt_list(lags) << "\nreplications=" << replications
    << "\nseed=" << master_seed << "\nstride_resolution=" << stride_resolution << "\n";
  return config::content_hash(c.str());
}

ExperimentConfig parse_experiment_config(const config::Document& doc) {
  doc.reject_unknown_sections({"experiment", "scheme", "ou", "gradient", "heston", "slow_fast",
                               "observable", "estimation", "bounds", "assert"});
  ExperimentConfig cfg;
  cfg.source_text = doc.text();

  const auto& ex = doc.require_section("experiment");
  ex.reject_unknown({"name", "model", "observable", "rho", "rho_scale", "rho_table", "epsilons",
                     "lags", "replications", "seed", "stride_resolution", "workers",
                     "memory_cap_mb"});
  cfg.name = ex.get_string("name", cfg.name);
  cfg.model = parse_enum(ex, "model", cfg.model, kModels);
  cfg.observable = parse_enum(ex, "observable",
                              cfg.model == ModelKind::slow_fast ? ObservableKind::slow_fast
                                                                : ObservableKind::identity,
                              kObservables);
  cfg.rho = parse_enum(ex, "rho", cfg.rho, kRho);
  cfg.rho_scale = ex.get_double("rho_scale", cfg.rho_scale);
  if (ex.has("rho_table")) cfg.rho_table = ex.get_doubles("rho_table");
  cfg.epsilon_grid = ex.get_doubles("epsilons");
  if (ex.has("lags")) cfg.lags = ex.get_doubles("lags");
  cfg.replications = ex.get_u64("replications", cfg.replications);
  cfg.master_seed = ex.get_u64("seed", cfg.master_seed);
  cfg.stride_resolution = ex.get_u64("stride_resolution", cfg.stride_resolution);
  cfg.workers = ex.get_u64("workers", cfg.workers);
  cfg.memory_cap_mb = ex.get_double("memory_cap_mb", cfg.memory_cap_mb);

  const auto& sc = doc.section("scheme");
  sc.reject_unknown({"family", "c_n", "c_delta", "n_obs", "big_delta"});
  cfg.scheme_family = parse_enum(sc, "family", cfg.scheme_family, kFamilies);
  cfg.c_n = sc.get_double("c_n", cfg.c_n);
  cfg.c_delta = sc.get_double("c_delta", cfg.c_delta);
  if (sc.has("n_obs")) {
    for (auto n : sc.get_u64s("n_obs")) cfg.n_values.push_back(static_cast<std::size_t>(n));
  }
  if (sc.has("big_delta")) cfg.delta_values = sc.get_doubles("big_delta");

  const auto& ou = doc.section("ou");
  ou.reject_unknown({"mean", "reversion", "noise"});
  cfg.ou.mean = ou.get_double("mean", cfg.ou.mean);
  cfg.ou.reversion = ou.get_double("reversion", cfg.ou.reversion);
  cfg.ou.noise = ou.get_double("noise", cfg.ou.noise);

  const auto& gr = doc.section("gradient");
  gr.reject_unknown({"potential", "coefficients", "diffusion", "dim", "burn_in_time"});
  if (gr.has("potential") && gr.has("coefficients")) {
    throw Error(ErrorKind::InvalidConfig,
                "gradient.potential and gradient.coefficients are mutually exclusive");
  }
  if (gr.has("potential")) {
    try {
      cfg.gradient.potential = PolynomialPotential::from_name(gr.get_string("potential"));
    } catch (const Error& e) {
      throw Error(ErrorKind::InvalidConfig, "gradient.potential: " + e.detail());
    }
  } else if (gr.has("coefficients")) {
    cfg.gradient.potential.name = "polynomial";
    cfg.gradient.potential.coefficients = gr.get_doubles("coefficients");
  }
  {
    const auto dim = static_cast<Eigen::Index>(gr.get_u64("dim", 1));
    require(dim >= 1, "gradient.dim must be at least 1");
    const double sigma = gr.get_double("diffusion", 1.4142135623730951);
    cfg.gradient.diffusion = sigma * Eigen::MatrixXd::Identity(dim, dim);
  }
  cfg.gradient_burn_in_time = gr.get_double("burn_in_time", cfg.gradient_burn_in_time);

  const auto& he = doc.section("heston");
  he.reject_unknown({"drift", "vol_reversion", "vol_mean", "vol_of_vol"});
  cfg.heston.drift = he.get_double("drift", cfg.heston.drift);
  cfg.heston.vol_reversion = he.get_double("vol_reversion", cfg.heston.vol_reversion);
  cfg.heston.vol_mean = he.get_double("vol_mean", cfg.heston.vol_mean);
  cfg.heston.vol_of_vol = he.get_double("vol_of_vol", cfg.heston.vol_of_vol);

  const auto& sf = doc.section("slow_fast");
  sf.reject_unknown({"entry"});
  if (sf.has("entry")) {
    try {
      cfg.slow_fast = slow_fast_entry_from_name(sf.get_string("entry"));
    } catch (const Error& e) {
      throw Error(ErrorKind::InvalidConfig, "slow_fast.entry: " + e.detail());
    }
  }

  const auto& ob = doc.section("observable");
  ob.reject_unknown({"substeps", "window"});
  cfg.smoothing_substeps = ob.get_u64("substeps", cfg.smoothing_substeps);
  if (ob.has("window")) cfg.realized_window = ob.get_u64("window");

  const auto& es = doc.section("estimation");
  es.reject_unknown({"method", "side", "u1", "u2"});
  cfg.estimation = parse_enum(es, "method", cfg.estimation, kMethods);
  cfg.estimation_side = parse_enum(es, "side", cfg.estimation_side, kSides);
  cfg.estimation_u1 = es.get_double("u1", cfg.estimation_u1);
  cfg.estimation_u2 = es.get_double("u2", cfg.estimation_u2);

  const auto& bo = doc.section("bounds");
  bo.reject_unknown({"mode", "nu", "horizon", "decay_c", "decay_rate", "lambda", "convention"});
  cfg.bounds = parse_enum(bo, "mode", cfg.bounds, kBounds);
  cfg.convention = parse_enum(bo, "convention", cfg.convention, kConventions);
  if (cfg.bounds == BoundsMode::manual) {
    BoundInputs in;
    in.nu = bo.get_double("nu");
    in.horizon_A = bo.get_double(
        "horizon", cfg.lags.empty() ? 1.0 : *std::max_element(cfg.lags.begin(), cfg.lags.end()));
    in.lipschitz_lambda = bo.get_double("lambda");
    try {
      in.profile = DecorrelationProfile::exponential(bo.get_double("decay_c"),
                                                     bo.get_double("decay_rate"));
    } catch (const Error& e) {
      throw Error(ErrorKind::InvalidConfig, "bounds: " + e.detail());
    }
    in.convention = cfg.convention;
    cfg.manual_bounds = in;
  }

  const auto& as = doc.section("assert");
  as.reject_unknown({"kx_slope_min", "kx_slope_max", "ky_rho_slope_min", "ky_rho_slope_max",
                     "gap_rho_slope_min", "gap_rho_slope_max", "bound_fraction_min",
                     "observable_bound_fraction_min", "gap_within_bound", "ky_ratio_band",
                     "mean_l2_slope_min", "mean_l2_slope_max", "mean_l4_slope_min",
                     "mean_l4_slope_max", "estimate_tolerance", "estimate_fraction_min",
                     "estimate_rms_max", "estimate_rms_non_increasing"});
  auto& a = cfg.assertions;
  a.kx_slope_min = opt_double(as, "kx_slope_min");
  a.kx_slope_max = opt_double(as, "kx_slope_max");
  a.ky_rho_slope_min = opt_double(as, "ky_rho_slope_min");
  a.ky_rho_slope_max = opt_double(as, "ky_rho_slope_max");
  a.gap_rho_slope_min = opt_double(as, "gap_rho_slope_min");
  a.gap_rho_slope_max = opt_double(as, "gap_rho_slope_max");
  a.bound_fraction_min = opt_double(as, "bound_fraction_min");
  a.observable_bound_fraction_min = opt_double(as, "observable_bound_fraction_min");
  if (as.has("gap_within_bound")) a.gap_within_bound = as.get_bool("gap_within_bound", true);
  a.ky_ratio_band = opt_double(as, "ky_ratio_band");
  a.mean_l2_slope_min = opt_double(as, "mean_l2_slope_min");
  a.mean_l2_slope_max = opt_double(as, "mean_l2_slope_max");
  a.mean_l4_slope_min = opt_double(as, "mean_l4_slope_min");
  a.mean_l4_slope_max = opt_double(as, "mean_l4_slope_max");
  if (as.has("estimate_tolerance")) a.estimate_tolerance = as.get_doubles("estimate_tolerance");
  a.estimate_fraction_min = opt_double(as, "estimate_fraction_min");
  if (as.has("estimate_rms_max")) a.estimate_rms_max = as.get_doubles("estimate_rms_max");
  if (as.has("estimate_rms_non_increasing")) {
    a.estimate_rms_non_increasing = as.get_bool("estimate_rms_non_increasing", true);
  }

  try {
    cfg.validate();
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::InvalidConfig) {
      throw Error(ErrorKind::InvalidConfig, doc.source() + ": " + e.detail());
    }
    throw Error(ErrorKind::InvalidConfig, doc.source() + ": " + std::string(e.what()));
  }
  return cfg;
}

ExperimentConfig parse_experiment_config_text(const std::string& text, const std::string& source) {
  return parse_experiment_config(config::Document::parse(text, source));
}

ExperimentConfig load_experiment_config(const std::string& path) {
  return parse_experiment_config(config::Document::load_file(path));
}

}  // namespace ioest
