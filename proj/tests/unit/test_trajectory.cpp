#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <limits>
#include <numeric>
#include <sstream>

#include "ioest/error.hpp"
#include "ioest/process_models.hpp"
#include "ioest/trajectory.hpp"

using namespace ioest;

namespace {

TrajectoryGrid one_to(std::size_t n, double delta = 0.1) {
  std::vector<double> v(n);
  std::iota(v.begin(), v.end(), 1.0);
  return TrajectoryGrid::scalar(delta, v);
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

TEST_SUITE("trajectory") {
  TEST_CASE("subsample_view picks 1-based indices offset + n stride") {
    const auto grid = one_to(10);
    const auto view = subsample_view(grid, make_scheme(5, 2, 0.1));
    CHECK(view.to_vector() == std::vector<double>{2, 4, 6, 8, 10});

    const auto shifted = subsample_view(grid, make_scheme(3, 3, 0.1), 1);
    CHECK(shifted.to_vector() == std::vector<double>{4, 7, 10});
  }

  TEST_CASE("stride 1 over the whole grid is the identity") {
    const auto grid = one_to(10);
    CHECK(subsample_view(grid, make_scheme(10, 1, 0.1)).to_vector() ==
          std::vector<double>(grid.values().begin(), grid.values().end()));
  }

  TEST_CASE("too few samples for the scheme") {
    const auto grid = one_to(10);
    CHECK(kind_of([&] { subsample_view(grid, make_scheme(4, 3, 0.1)); }) ==
          ErrorKind::InsufficientData);
  }

  TEST_CASE("stride and delta must agree") {
    const auto grid = one_to(10, 0.1);
    CHECK(kind_of([&] { subsample_view(grid, SubsamplingScheme{3, 2, 0.3}); }) ==
          ErrorKind::SchemeGridMismatch);
    CHECK(kind_of([&] { subsample_view(grid, SubsamplingScheme{3, 0, 0.2}); }) ==
          ErrorKind::SchemeGridMismatch);
  }

  TEST_CASE("composition of strides") {
    const auto grid = one_to(60);
    for (std::size_t a : {1u, 2u, 3u}) {
      for (std::size_t b : {1u, 2u, 4u}) {
        const std::size_t count = 60 / (a * b);
        const auto inner = SampleView(grid).subsample(a, 60 / a).subsample(b, count);
        const auto direct = SampleView(grid).subsample(a * b, count);
        CHECK(inner.to_vector() == direct.to_vector());
      }
    }
  }

  TEST_CASE("vector samples are strided as whole r-vectors") {
    std::vector<double> data;
    for (int i = 1; i <= 6; ++i) {
      data.push_back(i);
      data.push_back(-i);
    }
    const TrajectoryGrid grid(2, 0.5, data);
    const auto view = subsample_view(grid, make_scheme(3, 2, 0.5));
    CHECK(view.to_vector() == std::vector<double>{2, -2, 4, -4, 6, -6});
    CHECK(view.dim() == 2);
  }

  TEST_CASE("validate_grid") {
    CHECK(validate_grid(one_to(5)).ok);
    auto bad = one_to(5);
    bad.mutable_values()[3] = std::numeric_limits<double>::quiet_NaN();
    const auto r = validate_grid(bad);
    CHECK_FALSE(r.ok);
    REQUIRE(r.offending_index.has_value());
    CHECK(*r.offending_index == 4);
    CHECK_FALSE(validate_grid(TrajectoryGrid::scalar(0.0, {1.0, 2.0})).ok);
    CHECK_FALSE(validate_grid(TrajectoryGrid::scalar(0.1, {})).ok);
    CHECK_FALSE(validate_grid(TrajectoryGrid()).ok);
    CHECK_THROWS_AS(TrajectoryGrid(2, 0.1, {1.0, 2.0, 3.0}), Error);
  }

  TEST_CASE("scheme helpers") {
    const auto s = make_scheme(100, 4, 0.025);
    CHECK(s.big_delta == 4 * 0.025);
    CHECK(s.span() == doctest::Approx(10.0));
    CHECK(s.valid());
    CHECK_FALSE(SubsamplingScheme{0, 1, 0.1}.valid());
    CHECK_FALSE(SubsamplingScheme{10, 1, 0.0}.valid());
    const auto r = resolve_on_grid({100, 0, 0.104}, 0.01);
    CHECK(r.stride == 10);
    CHECK(r.big_delta == 10 * 0.01);
    CHECK(resolve_on_grid({100, 0, 0.001}, 0.01).stride == 1);
  }

  TEST_CASE("binary and csv round trips") {
    const auto grid = simulate_ou({}, 257, 0.01, {3, 0, StreamRole::process_noise});
    std::stringstream bin;
    write_binary(grid, bin);
    CHECK(read_binary(bin) == grid);

    std::stringstream csv;
    write_csv(grid, csv);
    const auto back = read_csv(csv);
    CHECK(back.dim() == 1);
    CHECK(back.length() == grid.length());
    CHECK(back.delta() == doctest::Approx(grid.delta()).epsilon(1e-12));
    for (std::size_t i = 0; i < grid.length(); ++i) REQUIRE(back.at(i, 0) == grid.at(i, 0));

    std::vector<double> vec{1, 2, 3, 4, 5, 6};
    const TrajectoryGrid g2(3, 0.25, vec);
    const auto dir = std::filesystem::temp_directory_path();
    const auto bin_path = (dir / "ioest_traj_test.bin").string();
    const auto csv_path = (dir / "ioest_traj_test.csv").string();
    write_trajectory_file(g2, bin_path);
    write_trajectory_file(g2, csv_path);
    CHECK(read_trajectory_file(bin_path) == g2);
    CHECK(read_trajectory_file(csv_path).values().size() == 6);
    std::filesystem::remove(bin_path);
    std::filesystem::remove(csv_path);
  }

  TEST_CASE("binary layout is column-major after the header") {
    const TrajectoryGrid g(2, 0.5, {1, 10, 2, 20});
    std::stringstream out;
    write_binary(g, out);
    const std::string bytes = out.str();
    REQUIRE(bytes.size() == 8 * 3 + 8 * 4);
    double values[4];
    std::memcpy(values, bytes.data() + 24, sizeof values);
    CHECK(values[0] == 1);
    CHECK(values[1] == 2);
    CHECK(values[2] == 10);
    CHECK(values[3] == 20);
  }

  TEST_CASE("reading missing or corrupt files") {
    CHECK(kind_of([] { read_trajectory_file("/nonexistent/ioest.bin"); }) == ErrorKind::Io);
    std::stringstream truncated(std::string(10, '\0'));
    CHECK(kind_of([&] { read_binary(truncated); }) == ErrorKind::Io);
  }
}
