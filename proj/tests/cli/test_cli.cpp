#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "../../tools/src/cli.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
  int code = 0;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = ioest::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

fs::path workdir() {
  static const fs::path dir = [] {
    const fs::path d = fs::current_path() / "cli_work";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string path(const std::string& name) { return (workdir() / name).string(); }

const char* kOuSim = R"([simulate]
model = ou
length = 20000
delta = 0.05
seed = 12

[ou]
mean = 2
reversion = 5
noise = 3.1622776601683795
)";

const char* kSmallLab = R"([experiment]
name = cli-small
model = ou
observable = multiplicative
rho = identity
epsilons = 0.2, 0.1, 0.05
lags = 0, 0.5
replications = 30
seed = 4

[scheme]
family = custom
n_obs = 200, 400, 800
big_delta = 0.1, 0.1, 0.1

[assert]
gap_rho_slope_min = 0.9
gap_rho_slope_max = 1.1
)";

}  // namespace

TEST_CASE("usage errors") {
  CHECK(run({}).code == 2);
  CHECK(run({"frobnicate"}).code == 2);
  CHECK(run({"--help"}).code == 0);
  CHECK(run({"scheme"}).code == 2);
  CHECK(run({"scheme", "--rho", "0.1", "--n-obs", "1000"}).code == 2);
  CHECK(run({"estimate", "--trajectory", "x.csv"}).code == 2);
}

TEST_CASE("scheme") {
  const auto r = run({"scheme", "--rho", "0.1"});
  REQUIRE(r.code == 0);
  const auto j = json::parse(r.out);
  CHECK(j["scheme"]["n_obs"] == 1000);
  CHECK(j["scheme"]["big_delta"].get<double>() == doctest::Approx(0.1));
  CHECK(j["scheme"]["span"].get<double>() == doctest::Approx(100.0));
  CHECK(j["predicted_error"].get<double>() > 0.4);

  const auto n = json::parse(run({"scheme", "--n-obs", "1000"}).out);
  CHECK(n["scheme"]["big_delta"].get<double>() == doctest::Approx(0.1));

  CHECK(run({"scheme", "--rho", "2"}).code == 3);
}

TEST_CASE("simulate is reproducible and writes a manifest") {
  spit(path("ou.ini"), kOuSim);
  const auto a = run({"simulate", path("ou.ini"), "--output", path("a.csv")});
  REQUIRE(a.code == 0);
  const auto b = run({"simulate", path("ou.ini"), "--output", path("b.csv")});
  REQUIRE(b.code == 0);
  CHECK(slurp(path("a.csv")) == slurp(path("b.csv")));
  const std::string csv = slurp(path("a.csv"));
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 20001);
  const auto manifest = json::parse(slurp(path("a.csv.manifest.json")));
  CHECK(manifest["command"] == "simulate");
  CHECK(manifest["master_seed"] == 12);
  CHECK(manifest["config_hash"].get<std::string>().size() == 16);

  const auto c = run({"--seed", "13", "simulate", path("ou.ini"), "--output", path("c.csv")});
  REQUIRE(c.code == 0);
  CHECK(slurp(path("a.csv")) != slurp(path("c.csv")));
}

TEST_CASE("simulate rejects a misspelled key") {
  std::string text = kOuSim;
  text.replace(text.find("length"), 6, "lenght");
  spit(path("typo.ini"), text);
  const auto r = run({"simulate", path("typo.ini"), "--output", path("typo.csv")});
  CHECK(r.code == 3);
  CHECK(r.err.find("simulate.lenght") != std::string::npos);
  CHECK(run({"simulate", path("missing.ini")}).code == 4);
}

TEST_CASE("estimate recovers OU parameters") {
  spit(path("ou.ini"), kOuSim);
  REQUIRE(run({"simulate", path("ou.ini"), "--output", path("ou.csv")}).code == 0);
  const auto r = run({"estimate", "--trajectory", path("ou.csv"), "--n-obs", "19000",
                      "--big-delta", "0.05", "--lags", "0,0.2", "--model", "ou", "--u1", "0.2"});
  REQUIRE(r.code == 0);
  const auto j = json::parse(r.out);
  const auto theta = j["estimate"]["theta"];
  CHECK(theta[0].get<double>() == doctest::Approx(2.0).epsilon(0.05));
  CHECK(theta[1].get<double>() == doctest::Approx(5.0).epsilon(0.3));
  CHECK(theta[2].get<double>() == doctest::Approx(3.1623).epsilon(0.15));
  CHECK(j["covariances"].size() == 2);

  CHECK(run({"estimate", "--trajectory", path("ou.csv"), "--n-obs", "50000", "--big-delta",
             "0.05", "--lags", "0"})
            .code == 4);
  CHECK(run({"estimate", "--trajectory", path("ou.csv"), "--n-obs", "1000", "--lags", ""}).code ==
        2);
  CHECK(run({"estimate", "--trajectory", path("ou.csv"), "--n-obs", "1000", "--lags", "a"}).code ==
        2);
}

TEST_CASE("lab run, assertions and resume") {
  spit(path("lab.ini"), kSmallLab);
  const std::string dir = path("lab-out");
  const auto r = run({"lab", "--config", path("lab.ini"), "--output", dir, "--assert"});
  CHECK(r.code == 0);
  CHECK(r.out.find("PASS") != std::string::npos);
  const std::string report = slurp(fs::path(dir) / "report.json");
  CHECK(json::parse(report)["name"] == "cli-small");
  CHECK(fs::exists(fs::path(dir) / "report.csv"));
  CHECK(fs::exists(fs::path(dir) / "manifest.json"));

  const std::string dir2 = path("lab-resumed");
  const auto again = run({"lab", "--config", path("lab.ini"), "--output", dir2, "--resume",
                          (fs::path(dir) / "ensemble.bin").string()});
  REQUIRE(again.code == 0);
  CHECK(slurp(fs::path(dir2) / "report.json") == report);

  // A different seed changes the hash, so the saved ensemble no longer matches.
  CHECK(run({"--seed", "99", "lab", "--config", path("lab.ini"), "--output", dir2, "--resume",
             (fs::path(dir) / "ensemble.bin").string()})
            .code == 3);

  std::string failing = kSmallLab;
  failing.replace(failing.find("gap_rho_slope_min = 0.9"), 23, "gap_rho_slope_min = 3.0");
  failing.replace(failing.find("gap_rho_slope_max = 1.1"), 23, "gap_rho_slope_max = 4.0");
  spit(path("lab-fail.ini"), failing);
  const auto f = run({"lab", "--config", path("lab-fail.ini"), "--output", path("lab-fail"),
                      "--assert"});
  CHECK(f.code == 1);
  CHECK(f.out.find("FAIL") != std::string::npos);
}

TEST_CASE("lab presets are listed") {
  const auto r = run({"lab", "--list-presets"});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("ou-rate") != std::string::npos);
  CHECK(r.out.find("heston") != std::string::npos);
  CHECK(run({"lab", "--preset", "nope"}).code == 3);
  CHECK(run({"lab"}).code == 2);
}
