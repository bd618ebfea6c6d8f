#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ioest/process_models.hpp"
#include "ioest/random_stream.hpp"
#include "ioest/subsampling_scheduler.hpp"
#include "ioest/trajectory.hpp"

namespace ioest {

namespace config {
class Document;
}

enum class ModelKind { ou, gradient, heston, slow_fast };
enum class ObservableKind { identity, multiplicative, smoothing, realized_volatility, slow_fast };
/// rho(eps) = scale * f(eps) with f from this catalog, or a user table.
enum class RhoFunction { identity, sqrt, zero, table };
enum class SchemeFamily { from_rho, from_n, custom };
enum class EstimationMethod { none, ou, cir, cir_two_lag };
enum class EstimatorSide { observable, unobservable };
enum class BoundsMode { automatic, manual, none };

std::string to_string(ModelKind kind);
std::string to_string(ObservableKind kind);
std::string to_string(RhoFunction kind);
std::string to_string(SchemeFamily kind);
std::string to_string(EstimationMethod kind);

/// Thresholds checked by evaluate_assertions(); unset entries are skipped.
struct AssertionSpec {
  std::optional<double> kx_slope_min, kx_slope_max;
  std::optional<double> ky_rho_slope_min, ky_rho_slope_max;
  std::optional<double> gap_rho_slope_min, gap_rho_slope_max;
  std::optional<double> bound_fraction_min;             // unobservable bound
  std::optional<double> observable_bound_fraction_min;
  std::optional<bool> gap_within_bound;
  std::optional<double> ky_ratio_band;  // max / min of (error of K_Y) / rho, per lag
  std::optional<double> mean_l2_slope_min, mean_l2_slope_max;
  std::optional<double> mean_l4_slope_min, mean_l4_slope_max;
  /// Relative tolerance per parameter (one value broadcasts).
  std::vector<double> estimate_tolerance;
  /// Fraction of replications at the smallest eps with every parameter
  /// within tolerance.
  std::optional<double> estimate_fraction_min;
  /// RMS relative error per parameter at the smallest eps.
  std::vector<double> estimate_rms_max;
  std::optional<bool> estimate_rms_non_increasing;
  bool empty() const noexcept;
};

struct ExperimentConfig {
  std::string name = "experiment";

  ModelKind model = ModelKind::ou;
  OUParams ou;
  GradientDiffusionParams gradient;
  double gradient_burn_in_time = 10.0;
  HestonParams heston;
  SlowFastEntry slow_fast = SlowFastEntry::linear_ou;

  ObservableKind observable = ObservableKind::identity;
  std::size_t smoothing_substeps = 10;          // fine steps per eps
  std::optional<std::size_t> realized_window;   // default ceil(eps^-1/2)

  RhoFunction rho = RhoFunction::identity;
  double rho_scale = 1.0;
  std::vector<double> rho_table;

  std::vector<double> epsilon_grid;

  SchemeFamily scheme_family = SchemeFamily::from_rho;
  double c_n = 1.0;
  double c_delta = 1.0;
  std::vector<std::size_t> n_values;   // from_n and custom
  std::vector<double> delta_values;    // custom

  std::vector<double> lags{0.0};
  std::size_t replications = 200;
  std::uint64_t master_seed = 1;
  std::size_t stride_resolution = 10;
  std::size_t workers = 0;             // 0: hardware concurrency
  double memory_cap_mb = 2048.0;

  EstimationMethod estimation = EstimationMethod::none;
  EstimatorSide estimation_side = EstimatorSide::observable;
  double estimation_u1 = 0.5;
  double estimation_u2 = 1.0;

  BoundsMode bounds = BoundsMode::automatic;
  BoundInputs manual_bounds;
  IntegralConvention convention = IntegralConvention::from_one;

  AssertionSpec assertions;

  /// Canonical text of the source document; hashed into ensembles.
  std::string source_text;

  void validate() const;
  double rho_of(std::size_t eps_index) const;
  /// Hash identifying the experiment (covers every field that shapes the
  /// ensemble, not the worker count).
  std::string hash() const;
};

ExperimentConfig parse_experiment_config(const config::Document& doc);
ExperimentConfig load_experiment_config(const std::string& path);
ExperimentConfig parse_experiment_config_text(const std::string& text,
                                              const std::string& source = "<config>");

/// Bundled experiment files, one per acceptance experiment.
std::vector<std::string> preset_names();
/// Throws InvalidConfig for unknown names.
const std::string& preset_text(const std::string& name);
ExperimentConfig preset_config(const std::string& name);

/// How one eps value is realized: the scheme, its grid binding and the fine
/// path length needed.
struct EpsilonSetup {
  double eps = 0.0;
  double rho = 0.0;
  SubsamplingScheme scheme;   // resolved on the fine grid
  double fine_delta = 0.0;
  std::size_t lead = 0;       // observable alignment
  std::size_t max_kappa = 0;
  std::size_t fine_length = 0;
};

std::vector<EpsilonSetup> plan_experiment(const ExperimentConfig& config);
/// Peak working memory of one replication task, in bytes.
double replication_memory_bytes(const ExperimentConfig& config, const EpsilonSetup& setup);

struct LagRecord {
  double lag_requested = 0.0;
  double lag_used = 0.0;
  std::size_t kappa = 0;
  Eigen::MatrixXd k_y;
  Eigen::MatrixXd k_x;
};

struct ReplicationRecord {
  std::size_t eps_index = 0;
  std::size_t replication = 0;
  Eigen::VectorXd mean_y;
  Eigen::VectorXd mean_x;
  std::vector<LagRecord> lags;
};

struct Ensemble {
  std::string config_hash;
  std::size_t dim = 1;
  /// K_Y and K_X of a record come from one X path.
  bool paired = true;
  std::vector<EpsilonSetup> setups;
  std::vector<double> lags;
  /// Sorted by (eps_index, replication).
  std::vector<ReplicationRecord> records;

  std::size_t replications() const noexcept;
  /// Records for one eps, in replication order.
  std::span<const ReplicationRecord> records_for(std::size_t eps_index) const;
};

/// Replication index of (eps, m) in the random stream space.
std::uint64_t replication_stream_index(std::size_t eps_index, std::size_t replication);

/// Simulates every (eps, replication) pair, in parallel over `workers`
/// threads. The result does not depend on scheduling order.
Ensemble run_replications(const ExperimentConfig& config);

/// True stationary mean and lagged covariance of the unobservable process.
struct Oracle {
  std::string description;
  Eigen::VectorXd mean;
  std::function<Eigen::MatrixXd(double)> covariance;
  /// Present when the process is Gaussian with K(u) = variance e^{-rate u}.
  std::optional<double> gaussian_variance;
  std::optional<double> gaussian_rate;
};

std::optional<Oracle> model_oracle(const ExperimentConfig& config);

/// Monte Carlo L^p norm with its standard error (delta method).
struct LpError {
  double value = 0.0;
  double standard_error = 0.0;
};

/// (mean over replications of |K_hat - K(u)|_sup^p)^(1/p), indexed
/// [eps][lag]. The target is evaluated at the requested lag.
std::vector<std::vector<LpError>> empirical_lp_error(const Ensemble& ensemble, int p,
                                                     EstimatorSide side,
                                                     const std::function<Eigen::MatrixXd(double)>& target);
/// ||K_Y - K_X||_p per [eps][lag].
std::vector<std::vector<LpError>> empirical_gap(const Ensemble& ensemble, int p);
/// ||mean - target||_p per eps.
std::vector<LpError> mean_lp_error(const Ensemble& ensemble, int p, EstimatorSide side,
                                   const Eigen::VectorXd& target);
/// ||Ybar - Xbar||_p per eps.
std::vector<LpError> mean_gap(const Ensemble& ensemble, int p);

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 1.0;
};

/// Least-squares line through (ln x, ln y). Needs >= 3 positive points.
SlopeFit fit_rate_slope(std::span<const std::pair<double, double>> points);

struct GapCheck {
  double eps = 0.0;
  double rho = 0.0;
  double covariance_gap = 0.0;    // max over lags of ||K_Y - K_X||_2
  double covariance_bound = 0.0;  // 4 nu rho
  bool covariance_pass = true;
  double mean_gap = 0.0;          // ||Ybar - Xbar||_4
  bool mean_pass = true;          // mean_gap <= rho
};

std::vector<GapCheck> perturbation_gap_check(const Ensemble& ensemble, double nu,
                                             std::span<const double> rho_values);

struct DecorrelationTable {
  std::vector<double> gaps;
  std::vector<double> values;
  std::vector<double> standard_errors;
  std::optional<double> fitted_rate;
  std::optional<double> fitted_coefficient;
  std::string design;
};

struct ProbeOptions {
  /// In-interval offset of the product members, in time units.
  double design_offset = 0.5;
  std::size_t blocks = 20;
};

/// Empirical f(T) on one long path: the maximum over a fixed design of
/// |E(GH) - E(G)E(H)| with G, H single coordinates or products at offsets
/// {0, design_offset}, H starting T after the end of G's interval.
DecorrelationTable decorrelation_probe(const TrajectoryGrid& path, std::span<const double> gaps,
                                       const ProbeOptions& options = {});
/// Simulates a path of `path_time` time units from the model spec first.
DecorrelationTable decorrelation_probe(const ExperimentConfig& model,
                                       std::span<const double> gaps,
                                       const RandomStreamSpec& stream, double path_time,
                                       double fine_delta, const ProbeOptions& options = {});

struct ReportCell {
  std::size_t eps_index = 0;
  double eps = 0.0;
  double rho = 0.0;
  std::size_t n_obs = 0;
  double big_delta = 0.0;
  double span = 0.0;
  double lag_requested = 0.0;
  double lag_used = 0.0;
  LpError ky_l2, kx_l2, gap_l2;
  double bound_unobservable = 0.0;  // NaN when unavailable
  double bound_observable = 0.0;
  bool kx_within_bound = false;
  bool ky_within_bound = false;
};

struct MeanCell {
  std::size_t eps_index = 0;
  double eps = 0.0;
  double rho = 0.0;
  double span = 0.0;
  LpError y_l2, y_l4, x_l2, x_l4, gap_l4;
  double bound_l2 = 0.0;  // NaN when unavailable
  double bound_l4 = 0.0;
};

struct LagSlopes {
  double lag = 0.0;
  std::optional<SlopeFit> kx_vs_n;
  std::optional<SlopeFit> ky_vs_n;
  std::optional<SlopeFit> ky_vs_rho;
  std::optional<SlopeFit> gap_vs_rho;
};

struct ParameterSummary {
  double eps = 0.0;
  std::vector<std::string> names;
  std::vector<double> truth;
  std::vector<double> mean_estimate;
  std::vector<double> rms_relative_error;
  std::vector<double> tolerance;
  std::vector<double> fraction_within_tolerance;
  double fraction_all_within_tolerance = 0.0;
  std::size_t failures = 0;
};

struct ConvergenceReport {
  std::string name;
  std::string config_hash;
  bool has_oracle = false;
  std::string oracle;
  std::size_t replications = 0;
  std::vector<ReportCell> cells;
  std::vector<MeanCell> mean_cells;
  std::vector<LagSlopes> lag_slopes;
  std::optional<SlopeFit> mean_x_l2_vs_span, mean_x_l4_vs_span;
  std::optional<SlopeFit> mean_y_l2_vs_span, mean_y_l4_vs_span;
  std::optional<double> bound_fraction_unobservable;
  std::optional<double> bound_fraction_observable;
  std::optional<double> nu;
  std::vector<GapCheck> gap_checks;
  std::vector<ParameterSummary> estimation;

  std::size_t fitted_slope_count() const noexcept;
};

/// Bound inputs derived from the config: manual values, or for Gaussian
/// oracles the exponential profile, nu = ||X - EX||_4, lambda = variance *
/// rate and A = largest lag. nullopt when neither applies.
std::optional<BoundInputs> derive_bound_inputs(const ExperimentConfig& config);

ConvergenceReport build_report(const ExperimentConfig& config, const Ensemble& ensemble,
                               const std::optional<BoundInputs>& bounds);

/// Per-replication parameter estimates, indexed [eps][replication]; failed
/// inversions are nullopt.
std::vector<std::vector<std::optional<Eigen::VectorXd>>> estimate_parameters(
    const ExperimentConfig& config, const Ensemble& ensemble);
/// Parameter names and true values for the configured method.
std::pair<std::vector<std::string>, Eigen::VectorXd> estimation_truth(
    const ExperimentConfig& config);

struct AssertionOutcome {
  std::string name;
  bool pass = false;
  std::string detail;
};

std::vector<AssertionOutcome> evaluate_assertions(const ConvergenceReport& report,
                                                  const AssertionSpec& spec);

// Persistence: binary ensemble file carrying the config hash.
void write_ensemble(const Ensemble& ensemble, std::ostream& out);
Ensemble read_ensemble(std::istream& in);
void write_ensemble_file(const Ensemble& ensemble, const std::string& path);
Ensemble read_ensemble_file(const std::string& path);

// Report serialization.
std::string report_to_json(const ConvergenceReport& report);
/// One row per (eps, lag).
std::string report_to_csv(const ConvergenceReport& report);
std::string decorrelation_to_json(const DecorrelationTable& table);

}  // namespace ioest
