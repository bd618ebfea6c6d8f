#include <cmath>
#include <cstdio>
#include <json.hpp>
#include <sstream>

#include "ioest/convergence_lab.hpp"

namespace ioest {
namespace {

using json = nlohmann::ordered_json;

json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json lp(const LpError& e) { return {{"value", num(e.value)}, {"standard_error", num(e.standard_error)}}; }

json fit(const std::optional<SlopeFit>& f) {
  if (!f) return nullptr;
  return {{"slope", f->slope}, {"intercept", f->intercept}, {"r_squared", f->r_squared}};
}

json opt(const std::optional<double>& v) { return v ? num(*v) : json(nullptr); }

json nums(const std::vector<double>& v) {
  json out = json::array();
  for (double x : v) out.push_back(num(x));
  return out;
}

std::string csv_num(double v) {
  if (!std::isfinite(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string report_to_json(const ConvergenceReport& rep) {
  json j;
  j["name"] = rep.name;
  j["config_hash"] = rep.config_hash;
  j["replications"] = rep.replications;
  j["oracle"] = rep.oracle;
  json cells = json::array();
  for (const auto& c : rep.cells) {
    cells.push_back({{"eps", c.eps},
                     {"rho", c.rho},
                     {"n_obs", c.n_obs},
                     {"big_delta", c.big_delta},
                     {"span", c.span},
                     {"lag_requested", c.lag_requested},
                     {"lag_used", num(c.lag_used)},
                     {"ky_l2", lp(c.ky_l2)},
                     {"kx_l2", lp(c.kx_l2)},
                     {"gap_l2", lp(c.gap_l2)},
                     {"bound_unobservable", num(c.bound_unobservable)},
                     {"bound_observable", num(c.bound_observable)},
                     {"kx_within_bound", c.kx_within_bound},
                     {"ky_within_bound", c.ky_within_bound}});
  }
  j["cells"] = cells;
  json means = json::array();
  for (const auto& m : rep.mean_cells) {
    means.push_back({{"eps", m.eps},
                     {"rho", m.rho},
                     {"span", m.span},
                     {"y_l2", lp(m.y_l2)},
                     {"y_l4", lp(m.y_l4)},
                     {"x_l2", lp(m.x_l2)},
                     {"x_l4", lp(m.x_l4)},
                     {"gap_l4", lp(m.gap_l4)},
                     {"bound_l2", num(m.bound_l2)},
                     {"bound_l4", num(m.bound_l4)}});
  }
  j["means"] = means;
  json slopes = json::array();
  for (const auto& s : rep.lag_slopes) {
    slopes.push_back({{"lag", s.lag},
                      {"kx_vs_n", fit(s.kx_vs_n)},
                      {"ky_vs_n", fit(s.ky_vs_n)},
                      {"ky_vs_rho", fit(s.ky_vs_rho)},
                      {"gap_vs_rho", fit(s.gap_vs_rho)}});
  }
  j["slopes"] = slopes;
  j["mean_slopes"] = {{"x_l2_vs_span", fit(rep.mean_x_l2_vs_span)},
                      {"x_l4_vs_span", fit(rep.mean_x_l4_vs_span)},
                      {"y_l2_vs_span", fit(rep.mean_y_l2_vs_span)},
                      {"y_l4_vs_span", fit(rep.mean_y_l4_vs_span)}};
  j["bound_fraction"] = {{"unobservable", opt(rep.bound_fraction_unobservable)},
                         {"observable", opt(rep.bound_fraction_observable)}};
  j["nu"] = opt(rep.nu);
  json gaps = json::array();
  for (const auto& g : rep.gap_checks) {
    gaps.push_back({{"eps", g.eps},
                    {"rho", g.rho},
                    {"covariance_gap", g.covariance_gap},
                    {"covariance_bound", g.covariance_bound},
                    {"covariance_pass", g.covariance_pass},
                    {"mean_gap", g.mean_gap},
                    {"mean_pass", g.mean_pass}});
  }
  j["gap_checks"] = gaps;
  json est = json::array();
  for (const auto& p : rep.estimation) {
    est.push_back({{"eps", p.eps},
                   {"names", p.names},
                   {"truth", nums(p.truth)},
                   {"mean_estimate", nums(p.mean_estimate)},
                   {"rms_relative_error", nums(p.rms_relative_error)},
                   {"tolerance", nums(p.tolerance)},
                   {"fraction_within_tolerance", nums(p.fraction_within_tolerance)},
                   {"fraction_all_within_tolerance", p.fraction_all_within_tolerance},
                   {"failures", p.failures}});
  }
  j["estimation"] = est;
  return j.dump(2) + "\n";
}

std::string report_to_csv(const ConvergenceReport& rep) {
  std::ostringstream out;
  out << "eps,rho,n_obs,big_delta,span,lag_requested,lag_used,ky_l2,ky_l2_se,kx_l2,kx_l2_se,"
         "gap_l2,gap_l2_se,bound_unobservable,bound_observable\n";
  for (const auto& c : rep.cells) {
    out << csv_num(c.eps) << ',' << csv_num(c.rho) << ',' << c.n_obs << ',' << csv_num(c.big_delta)
        << ',' << csv_num(c.span) << ',' << csv_num(c.lag_requested) << ',' << csv_num(c.lag_used)
        << ',' << csv_num(c.ky_l2.value) << ',' << csv_num(c.ky_l2.standard_error) << ','
        << csv_num(c.kx_l2.value) << ',' << csv_num(c.kx_l2.standard_error) << ','
        << csv_num(c.gap_l2.value) << ',' << csv_num(c.gap_l2.standard_error) << ','
        << csv_num(c.bound_unobservable) << ',' << csv_num(c.bound_observable) << '\n';
  }
  return out.str();
}

std::string decorrelation_to_json(const DecorrelationTable& t) {
  json j;
  j["design"] = t.design;
  j["gaps"] = nums(t.gaps);
  j["values"] = nums(t.values);
  j["standard_errors"] = nums(t.standard_errors);
  j["fitted_rate"] = opt(t.fitted_rate);
  j["fitted_coefficient"] = opt(t.fitted_coefficient);
  return j.dump(2) + "\n";
}

}  // namespace ioest
