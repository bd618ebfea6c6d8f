#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ioest {

/// A uniformly sampled realization of an r-dimensional process.
///
/// Sample n (1-based) sits at time n * delta. Storage is dense and
/// time-major: element [i] (0-based) is the r-vector at time (i + 1) * delta.
/// The constructor only checks that the buffer is a whole number of
/// samples; use validate_grid() for the full invariant set.
class TrajectoryGrid {
 public:
  TrajectoryGrid() = default;
  TrajectoryGrid(std::size_t dim, double delta, std::vector<double> samples);

  static TrajectoryGrid scalar(double delta, std::vector<double> values);

  std::size_t dim() const noexcept { return dim_; }
  double delta() const noexcept { return delta_; }
  std::size_t length() const noexcept { return dim_ == 0 ? 0 : data_.size() / dim_; }
  bool empty() const noexcept { return data_.empty(); }

  std::span<const double> operator[](std::size_t i) const noexcept {
    return {data_.data() + i * dim_, dim_};
  }
  std::span<const double> values() const noexcept { return data_; }
  std::span<double> mutable_values() noexcept { return data_; }

  /// Coordinate `c` of the sample at 0-based position `i`.
  double at(std::size_t i, std::size_t c) const noexcept { return data_[i * dim_ + c]; }

  friend bool operator==(const TrajectoryGrid&, const TrajectoryGrid&) = default;

 private:
  std::size_t dim_ = 0;
  double delta_ = 0.0;
  std::vector<double> data_;
};

struct ValidationResult {
  bool ok = true;
  std::string message;
  std::optional<std::size_t> offending_index;

  static ValidationResult accept() { return {}; }
  static ValidationResult reject(std::string why, std::optional<std::size_t> index = std::nullopt) {
    return {false, std::move(why), index};
  }
  explicit operator bool() const noexcept { return ok; }
};

ValidationResult validate_grid(const TrajectoryGrid& grid);

/// Sub-sampling scheme (N, Delta). `stride` is the number of fine steps per
/// sub-sampling step once the scheme is bound to a grid; 0 means unbound.
struct SubsamplingScheme {
  std::size_t n_obs = 0;
  std::size_t stride = 0;
  double big_delta = 0.0;

  bool valid() const noexcept;
  bool resolved() const noexcept { return stride > 0; }
  /// Observational time span S = N * Delta.
  double span() const noexcept { return static_cast<double>(n_obs) * big_delta; }
};

/// Exact scheme on a grid of step `delta`: big_delta = stride * delta.
SubsamplingScheme make_scheme(std::size_t n_obs, std::size_t stride, double delta);

/// Binds a scheme to a grid step: stride = round(big_delta / delta) (at least
/// 1) and big_delta is recomputed as stride * delta.
SubsamplingScheme resolve_on_grid(const SubsamplingScheme& scheme, double delta);

/// Strided read-only window over a TrajectoryGrid. Element i of the view is
/// grid element first + i * step (0-based on both sides).
class SampleView {
 public:
  SampleView() = default;
  SampleView(const TrajectoryGrid& grid);  // NOLINT: whole-grid view

  std::size_t size() const noexcept { return count_; }
  std::size_t dim() const noexcept { return dim_; }

  std::span<const double> operator[](std::size_t i) const noexcept {
    return {data_ + (first_ + i * step_) * dim_, dim_};
  }

  /// Elements offset + n * stride for n = 1..count, in view coordinates.
  SampleView subsample(std::size_t stride, std::size_t count, std::size_t offset = 0) const;

  std::vector<double> to_vector() const;

 private:
  SampleView(const double* data, std::size_t dim, std::size_t first, std::size_t step,
             std::size_t count)
      : data_(data), dim_(dim), first_(first), step_(step), count_(count) {}

  const double* data_ = nullptr;
  std::size_t dim_ = 0;
  std::size_t first_ = 0;
  std::size_t step_ = 1;
  std::size_t count_ = 0;
};

/// The N samples at 1-based grid indices offset + n * stride, n = 1..N,
/// plus `extra` further samples on the same stride (lagged estimators need
/// N + kappa points).
SampleView subsample_view(const TrajectoryGrid& grid, const SubsamplingScheme& scheme,
                          std::size_t offset = 0, std::size_t extra = 0);

// Serialization. Binary layout: little-endian u64 dim, f64 delta, u64 L,
// then L * dim f64 values column-major (all of coordinate 1 first).
void write_binary(const TrajectoryGrid& grid, std::ostream& out);
TrajectoryGrid read_binary(std::istream& in);
void write_binary_file(const TrajectoryGrid& grid, const std::string& path);
TrajectoryGrid read_binary_file(const std::string& path);

// CSV: header "time,x1,...,xr", one row per time point, time = n * delta.
void write_csv(const TrajectoryGrid& grid, std::ostream& out);
TrajectoryGrid read_csv(std::istream& in);
void write_csv_file(const TrajectoryGrid& grid, const std::string& path);
TrajectoryGrid read_csv_file(const std::string& path);

/// Dispatches on extension: ".csv" is text, anything else binary.
TrajectoryGrid read_trajectory_file(const std::string& path);
void write_trajectory_file(const TrajectoryGrid& grid, const std::string& path);

}  // namespace ioest
