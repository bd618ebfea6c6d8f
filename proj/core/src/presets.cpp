#include <map>

#include "ioest/convergence_lab.hpp"
#include "ioest/error.hpp"

namespace ioest {
namespace {

const std::map<std::string, std::string>& presets() {
  static const std::map<std::string, std::string> table = {
      {"ou-rate", R"(# Unobservable OU estimators along Delta = N^(-1/3).
[experiment]
name = ou-rate
model = ou
observable = identity
rho = zero
; labels only: eps = N^(-1/3)
epsilons = 0.1, 0.046415888336127795, 0.021544346900318846, 0.01
lags = 0, 0.5, 1
replications = 200
seed = 1001

[scheme]
family = from_n
c_delta = 1
n_obs = 1000, 10000, 100000, 1000000

[ou]
mean = 0
reversion = 1
noise = 1.4142135623730951

[assert]
kx_slope_min = -0.43
kx_slope_max = -0.23
bound_fraction_min = 0.95
)"},
      {"perturbation-gap", R"(# Paired K_Y, K_X with Y = (1 + rho) X on a fixed scheme.
[experiment]
name = perturbation-gap
model = ou
observable = multiplicative
rho = identity
epsilons = 0.2, 0.1, 0.05
lags = 0, 0.5, 1
replications = 200
seed = 1002

[scheme]
family = custom
n_obs = 10000, 10000, 10000
big_delta = 0.05, 0.05, 0.05

[ou]
mean = 0
reversion = 1
noise = 1.4142135623730951

[assert]
gap_within_bound = true
gap_rho_slope_min = 0.9
gap_rho_slope_max = 1.1
)"},
      {"rho-tracking", R"(# Optimized scheme N = rho^-3, Delta = rho on a multiplicative observable.
[experiment]
name = rho-tracking
model = ou
observable = multiplicative
rho = identity
epsilons = 0.2, 0.1, 0.05, 0.025
lags = 0, 0.5, 1
replications = 200
seed = 1003

[scheme]
family = from_rho
c_n = 1
c_delta = 1

[ou]
mean = 0
reversion = 1
noise = 1.4142135623730951

[assert]
ky_ratio_band = 3
ky_rho_slope_min = 0.8
ky_rho_slope_max = 1.2
)"},
      {"ou-recovery", R"(# OU parameters from the moment vector [mean, K(0), K(u1)].
[experiment]
name = ou-recovery
model = ou
observable = multiplicative
rho = identity
epsilons = 0.2, 0.1, 0.05
lags = 0, 0.2
replications = 200
seed = 1004

[scheme]
family = from_rho
c_n = 1
c_delta = 1

[ou]
mean = 2
reversion = 5
noise = 3.1622776601683795

[estimation]
method = ou
side = observable
u1 = 0.2

[assert]
estimate_tolerance = 0.1
estimate_fraction_min = 0.9
)"},
      {"heston", R"(# CIR parameters of the Heston variance from realized volatility.
[experiment]
name = heston
model = heston
observable = realized_volatility
rho = sqrt
epsilons = 0.02, 0.01, 0.005
lags = 0, 0.5, 1
replications = 200
seed = 1005

[scheme]
family = from_rho
c_n = 16
c_delta = 1

[heston]
drift = 0.05
vol_reversion = 2
vol_mean = 0.04
vol_of_vol = 0.3

[estimation]
method = cir_two_lag
side = observable
u1 = 0.5
u2 = 1

[bounds]
mode = none

[assert]
estimate_tolerance = 0.3, 0.1, 0.3
estimate_rms_max = 0.3, 0.1, 0.3
estimate_rms_non_increasing = true
)"},
      {"mean-rates", R"(# Empirical-mean errors against the span N Delta.
[experiment]
name = mean-rates
model = ou
observable = identity
rho = zero
; labels only
epsilons = 0.3, 0.2, 0.1
lags = 0
replications = 200
seed = 1006

[scheme]
family = custom
n_obs = 100, 1000, 10000
big_delta = 0.1, 0.1, 0.1

[ou]
mean = 0
reversion = 1
noise = 1.4142135623730951

[assert]
mean_l2_slope_min = -0.6
mean_l2_slope_max = -0.4
mean_l4_slope_min = -0.35
mean_l4_slope_max = -0.15
)"},
  };
  return table;
}

}  // namespace

std::vector<std::string> preset_names() {
  std::vector<std::string> out;
  for (const auto& [name, text] : presets()) out.push_back(name);
  return out;
}

const std::string& preset_text(const std::string& name) {
  const auto it = presets().find(name);
  if (it == presets().end()) throw Error(ErrorKind::InvalidConfig, "unknown preset '" + name + "'");
  return it->second;
}

ExperimentConfig preset_config(const std::string& name) {
  return parse_experiment_config_text(preset_text(name), "preset:" + name);
}

}  // namespace ioest
