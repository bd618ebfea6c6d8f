#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "ioest/convergence_lab.hpp"
#include "ioest/error.hpp"

namespace ioest {
namespace {

static_assert(std::endian::native == std::endian::little,
              "ensemble files are written in native little-endian order");

constexpr char kMagic[8] = {'I', 'O', 'E', 'S', 'T', 'E', 'N', 'S'};
constexpr std::uint64_t kVersion = 1;

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}
  void u64(std::uint64_t v) { raw(&v, sizeof v); }
  void f64(double v) { raw(&v, sizeof v); }
  void str(const std::string& s) {
    u64(s.size());
    raw(s.data(), s.size());
  }
  void matrix(const Eigen::MatrixXd& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) f64(m.data()[i]);
  }
  void raw(const void* p, std::size_t n) {
    out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
  }

 private:
  std::ostream& out_;
};

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}
  std::uint64_t u64() {
    std::uint64_t v;
    raw(&v, sizeof v);
    return v;
  }
  double f64() {
    double v;
    raw(&v, sizeof v);
    return v;
  }
  std::string str() {
    const auto n = u64();
    if (n > (1u << 20)) throw Error(ErrorKind::Io, "corrupt ensemble file: oversized string");
    std::string s(n, '\0');
    raw(s.data(), n);
    return s;
  }
  Eigen::MatrixXd matrix(std::size_t r, std::size_t c) {
    Eigen::MatrixXd m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = f64();
    return m;
  }
  void raw(void* p, std::size_t n) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (!in_) throw Error(ErrorKind::Io, "truncated ensemble file");
  }

 private:
  std::istream& in_;
};

}  // namespace

void write_ensemble(const Ensemble& ens, std::ostream& out) {
  Writer w(out);
  w.raw(kMagic, sizeof kMagic);
  w.u64(kVersion);
  w.str(ens.config_hash);
  w.u64(ens.dim);
  w.u64(ens.paired ? 1 : 0);
  w.u64(ens.lags.size());
  for (double u : ens.lags) w.f64(u);
  w.u64(ens.setups.size());
  for (const auto& s : ens.setups) {
    w.f64(s.eps);
    w.f64(s.rho);
    w.u64(s.scheme.n_obs);
    w.u64(s.scheme.stride);
    w.f64(s.scheme.big_delta);
    w.f64(s.fine_delta);
    w.u64(s.lead);
    w.u64(s.max_kappa);
    w.u64(s.fine_length);
  }
  w.u64(ens.records.size());
  for (const auto& r : ens.records) {
    w.u64(r.eps_index);
    w.u64(r.replication);
    w.matrix(r.mean_y);
    w.matrix(r.mean_x);
    for (const auto& l : r.lags) {
      w.f64(l.lag_requested);
      w.f64(l.lag_used);
      w.u64(l.kappa);
      w.matrix(l.k_y);
      w.matrix(l.k_x);
    }
  }
  if (!out) throw Error(ErrorKind::Io, "failed to write ensemble");
}

Ensemble read_ensemble(std::istream& in) {
  Reader r(in);
  char magic[8];
  r.raw(magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw Error(ErrorKind::Io, "not an ensemble file");
  }
  if (r.u64() != kVersion) throw Error(ErrorKind::Io, "unsupported ensemble file version");
  Ensemble ens;
  ens.config_hash = r.str();
  ens.dim = r.u64();
  ens.paired = r.u64() != 0;
  const auto n_lags = r.u64();
  if (ens.dim == 0 || ens.dim > 64 || n_lags > 4096) {
    throw Error(ErrorKind::Io, "corrupt ensemble header");
  }
  for (std::uint64_t i = 0; i < n_lags; ++i) ens.lags.push_back(r.f64());
  const auto n_setups = r.u64();
  if (n_setups > 4096) throw Error(ErrorKind::Io, "corrupt ensemble header");
  for (std::uint64_t i = 0; i < n_setups; ++i) {
    EpsilonSetup s;
    s.eps = r.f64();
    s.rho = r.f64();
    s.scheme.n_obs = r.u64();
    s.scheme.stride = r.u64();
    s.scheme.big_delta = r.f64();
    s.fine_delta = r.f64();
    s.lead = r.u64();
    s.max_kappa = r.u64();
    s.fine_length = r.u64();
    ens.setups.push_back(s);
  }
  const auto n_records = r.u64();
  if (n_setups == 0 || n_records % n_setups != 0 || n_records > (1u << 26)) {
    throw Error(ErrorKind::Io, "corrupt ensemble record count");
  }
  ens.records.reserve(n_records);
  for (std::uint64_t i = 0; i < n_records; ++i) {
    ReplicationRecord rec;
    rec.eps_index = r.u64();
    rec.replication = r.u64();
    rec.mean_y = r.matrix(ens.dim, 1);
    rec.mean_x = r.matrix(ens.dim, 1);
    for (std::uint64_t l = 0; l < n_lags; ++l) {
      LagRecord lr;
      lr.lag_requested = r.f64();
      lr.lag_used = r.f64();
      lr.kappa = r.u64();
      lr.k_y = r.matrix(ens.dim, ens.dim);
      lr.k_x = r.matrix(ens.dim, ens.dim);
      rec.lags.push_back(std::move(lr));
    }
    ens.records.push_back(std::move(rec));
  }
  return ens;
}

void write_ensemble_file(const Ensemble& ens, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot open '" + path + "' for writing");
  write_ensemble(ens, out);
}

Ensemble read_ensemble_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open ensemble '" + path + "'");
  return read_ensemble(in);
}

}  // namespace ioest
