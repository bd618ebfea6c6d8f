#pragma once

#include <array>
#include <cstdint>

namespace ioest {

enum class StreamRole : std::uint32_t {
  process_noise = 0,
  auxiliary_noise = 1,
};

/// Identifies one reproducible random stream. Equal triples give
/// bit-identical streams; distinct triples map to distinct Philox counter
/// ranges, so replications can be generated in any order.
struct RandomStreamSpec {
  std::uint64_t master_seed = 0;
  std::uint64_t replication_index = 0;
  StreamRole role = StreamRole::process_noise;

  friend bool operator==(const RandomStreamSpec&, const RandomStreamSpec&) = default;
};

/// Philox4x32-10 block function (Salmon et al., SC'11).
using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;
PhiloxCounter philox4x32_10(PhiloxCounter counter, PhiloxKey key) noexcept;

/// Counter-based generator bound to one RandomStreamSpec.
///
/// Key = master seed. Counter words 2-3 hold the replication index (63 bits)
/// and the stream role (top bit); words 0-1 are the block index. Each block
/// yields two 64-bit draws.
class RandomStream {
 public:
  explicit RandomStream(const RandomStreamSpec& spec) noexcept;

  const RandomStreamSpec& spec() const noexcept { return spec_; }

  std::uint64_t next_u64() noexcept;
  /// Uniform on the open interval (0, 1) with 53 random bits.
  double uniform() noexcept;
  /// Standard normal via Box-Muller; the second variate is cached.
  double normal() noexcept;
  /// Gamma(shape, 1) via Marsaglia-Tsang.
  double gamma(double shape) noexcept;

 private:
  void refill() noexcept;

  RandomStreamSpec spec_;
  PhiloxKey key_{};
  std::uint64_t block_ = 0;
  std::array<std::uint64_t, 2> buffer_{};
  int buffered_ = 0;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

}  // namespace ioest
