#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ioest {

/// Failure categories shared by every module. The CLI maps them onto stable
/// exit codes (see exit_code()).
enum class ErrorKind {
  ParameterDomain,
  InsufficientData,
  SchemeGridMismatch,
  SchemeTooShortForLag,
  SimulationDiverged,
  MomentsOutsideModelRange,
  SolverDidNotConverge,
  ResourceLimit,
  InvalidConfig,
  Io,
};

std::string_view to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what);

  ErrorKind kind() const noexcept { return kind_; }
  /// The message without the kind prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorKind kind_;
  std::string detail_;
};

/// Process exit codes: 0 success, 2 usage, 3 validation, 4 data, 5 numerical.
/// 1 is reserved for a completed run whose --assert thresholds failed.
namespace exit_codes {
inline constexpr int kSuccess = 0;
inline constexpr int kAssertionFailed = 1;
inline constexpr int kUsage = 2;
inline constexpr int kValidation = 3;
inline constexpr int kData = 4;
inline constexpr int kNumerical = 5;
}  // namespace exit_codes

int exit_code(ErrorKind kind) noexcept;

}  // namespace ioest
