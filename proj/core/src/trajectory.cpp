#include "ioest/trajectory.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "ioest/error.hpp"

namespace ioest {

static_assert(std::endian::native == std::endian::little,
              "binary trajectory I/O assumes a little-endian host");

TrajectoryGrid::TrajectoryGrid(std::size_t dim, double delta, std::vector<double> samples)
    : dim_(dim), delta_(delta), data_(std::move(samples)) {
  if (dim_ == 0 && !data_.empty()) {
    throw Error(ErrorKind::ParameterDomain, "trajectory with dim 0 cannot hold samples");
  }
  if (dim_ != 0 && data_.size() % dim_ != 0) {
    throw Error(ErrorKind::ParameterDomain, "sample buffer size is not a multiple of dim");
  }
}

TrajectoryGrid TrajectoryGrid::scalar(double delta, std::vector<double> values) {
  return TrajectoryGrid(1, delta, std::move(values));
}

ValidationResult validate_grid(const TrajectoryGrid& grid) {
  if (grid.dim() < 1) return ValidationResult::reject("dim must be >= 1");
  if (!(grid.delta() > 0.0) || !std::isfinite(grid.delta())) {
    return ValidationResult::reject("delta must be positive and finite");
  }
  if (grid.length() < 1) return ValidationResult::reject("trajectory has no samples");
  for (std::size_t i = 0; i < grid.length(); ++i) {
    for (double v : grid[i]) {
      if (!std::isfinite(v)) {
        return ValidationResult::reject("non-finite coordinate in sample " + std::to_string(i + 1),
                                        i + 1);
      }
    }
  }
  return ValidationResult::accept();
}

bool SubsamplingScheme::valid() const noexcept {
  return n_obs > 0 && big_delta > 0.0 && std::isfinite(big_delta);
}

SubsamplingScheme make_scheme(std::size_t n_obs, std::size_t stride, double delta) {
  if (n_obs == 0 || stride == 0 || !(delta > 0.0)) {
    throw Error(ErrorKind::ParameterDomain, "scheme needs n_obs >= 1, stride >= 1, delta > 0");
  }
  return {n_obs, stride, static_cast<double>(stride) * delta};
}

SubsamplingScheme resolve_on_grid(const SubsamplingScheme& scheme, double delta) {
  if (!scheme.valid() || !(delta > 0.0)) {
    throw Error(ErrorKind::ParameterDomain, "cannot resolve an invalid scheme");
  }
  const double ratio = scheme.big_delta / delta;
  const auto stride = static_cast<std::size_t>(std::max(1.0, std::nearbyint(ratio)));
  return make_scheme(scheme.n_obs, stride, delta);
}

SampleView::SampleView(const TrajectoryGrid& grid)
    : data_(grid.values().data()), dim_(grid.dim()), first_(0), step_(1), count_(grid.length()) {}

SampleView SampleView::subsample(std::size_t stride, std::size_t count, std::size_t offset) const {
  if (stride == 0) throw Error(ErrorKind::ParameterDomain, "stride must be >= 1");
  if (count == 0) return SampleView(data_, dim_, first_, step_ * stride, 0);
  if (offset + count * stride > count_) {
    throw Error(ErrorKind::InsufficientData,
                "need index " + std::to_string(offset + count * stride) + " but only " +
                    std::to_string(count_) + " samples available");
  }
  return SampleView(data_, dim_, first_ + (offset + stride - 1) * step_, step_ * stride, count);
}

std::vector<double> SampleView::to_vector() const {
  std::vector<double> out;
  out.reserve(count_ * dim_);
  for (std::size_t i = 0; i < count_; ++i) {
    const auto s = (*this)[i];
    out.insert(out.end(), s.begin(), s.end());
  }
  return out;
}

SampleView subsample_view(const TrajectoryGrid& grid, const SubsamplingScheme& scheme,
                          std::size_t offset, std::size_t extra) {
  if (!scheme.resolved()) {
    throw Error(ErrorKind::SchemeGridMismatch, "scheme has no stride bound to a grid");
  }
  const double expected = static_cast<double>(scheme.stride) * grid.delta();
  if (std::abs(scheme.big_delta - expected) > 1e-9 * std::max(1.0, expected)) {
    throw Error(ErrorKind::SchemeGridMismatch,
                "big_delta " + std::to_string(scheme.big_delta) + " != stride * delta " +
                    std::to_string(expected));
  }
  return SampleView(grid).subsample(scheme.stride, scheme.n_obs + extra, offset);
}

namespace {

void put_u64(std::ostream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
void put_f64(std::ostream& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

std::uint64_t get_u64(std::istream& in) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw Error(ErrorKind::Io, "truncated binary trajectory");
  return v;
}
double get_f64(std::istream& in) { return std::bit_cast<double>(get_u64(in)); }

std::ofstream open_out(const std::string& path, std::ios::openmode mode) {
  std::ofstream out(path, mode);
  if (!out) throw Error(ErrorKind::Io, "cannot open '" + path + "' for writing");
  return out;
}
std::ifstream open_in(const std::string& path, std::ios::openmode mode) {
  std::ifstream in(path, mode);
  if (!in) throw Error(ErrorKind::Io, "cannot open '" + path + "'");
  return in;
}

bool has_csv_extension(const std::string& path) {
  return path.size() >= 4 && path.compare(path.size() - 4, 4, ".csv") == 0;
}

}  // namespace

void write_binary(const TrajectoryGrid& grid, std::ostream& out) {
  put_u64(out, grid.dim());
  put_f64(out, grid.delta());
  put_u64(out, grid.length());
  for (std::size_t c = 0; c < grid.dim(); ++c) {
    for (std::size_t i = 0; i < grid.length(); ++i) put_f64(out, grid.at(i, c));
  }
  if (!out) throw Error(ErrorKind::Io, "failed writing binary trajectory");
}

TrajectoryGrid read_binary(std::istream& in) {
  const std::uint64_t dim = get_u64(in);
  const double delta = get_f64(in);
  const std::uint64_t length = get_u64(in);
  if (dim == 0 || dim > (1u << 20) || length > (std::uint64_t{1} << 40) / dim) {
    throw Error(ErrorKind::Io, "implausible binary trajectory header");
  }
  std::vector<double> data(dim * length);
  for (std::uint64_t c = 0; c < dim; ++c) {
    for (std::uint64_t i = 0; i < length; ++i) data[i * dim + c] = get_f64(in);
  }
  return TrajectoryGrid(dim, delta, std::move(data));
}

void write_binary_file(const TrajectoryGrid& grid, const std::string& path) {
  auto out = open_out(path, std::ios::binary | std::ios::trunc);
  write_binary(grid, out);
}

TrajectoryGrid read_binary_file(const std::string& path) {
  auto in = open_in(path, std::ios::binary);
  return read_binary(in);
}

void write_csv(const TrajectoryGrid& grid, std::ostream& out) {
  out << "time";
  for (std::size_t c = 0; c < grid.dim(); ++c) out << ",x" << (c + 1);
  out << '\n' << std::setprecision(17);
  for (std::size_t i = 0; i < grid.length(); ++i) {
    out << static_cast<double>(i + 1) * grid.delta();
    for (double v : grid[i]) out << ',' << v;
    out << '\n';
  }
  if (!out) throw Error(ErrorKind::Io, "failed writing CSV trajectory");
}

TrajectoryGrid read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::Io, "empty CSV trajectory");
  std::size_t dim = 0;
  for (char ch : line) dim += (ch == ',');
  if (dim == 0) throw Error(ErrorKind::Io, "CSV header needs a time column and >= 1 coordinate");

  std::vector<double> data;
  double first_time = 0.0;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++row;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> cells;
    while (std::getline(ss, cell, ',')) {
      try {
        cells.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw Error(ErrorKind::Io, "CSV line " + std::to_string(row + 1) + ": bad number '" +
                                       cell + "'");
      }
    }
    if (cells.size() != dim + 1) {
      throw Error(ErrorKind::Io, "CSV line " + std::to_string(row + 1) + ": expected " +
                                     std::to_string(dim + 1) + " columns");
    }
    if (row == 1) first_time = cells[0];
    data.insert(data.end(), cells.begin() + 1, cells.end());
  }
  if (row == 0) throw Error(ErrorKind::Io, "CSV trajectory has no rows");
  // Sample 1 sits at time delta.
  return TrajectoryGrid(dim, first_time, std::move(data));
}

void write_csv_file(const TrajectoryGrid& grid, const std::string& path) {
  auto out = open_out(path, std::ios::trunc);
  write_csv(grid, out);
}

TrajectoryGrid read_csv_file(const std::string& path) {
  auto in = open_in(path, std::ios::in);
  return read_csv(in);
}

TrajectoryGrid read_trajectory_file(const std::string& path) {
  return has_csv_extension(path) ? read_csv_file(path) : read_binary_file(path);
}

void write_trajectory_file(const TrajectoryGrid& grid, const std::string& path) {
  if (has_csv_extension(path)) {
    write_csv_file(grid, path);
  } else {
    write_binary_file(grid, path);
  }
}

}  // namespace ioest
