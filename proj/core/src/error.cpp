#include "ioest/error.hpp"

namespace ioest {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::ParameterDomain: return "ParameterDomain";
    case ErrorKind::InsufficientData: return "InsufficientData";
    case ErrorKind::SchemeGridMismatch: return "SchemeGridMismatch";
    case ErrorKind::SchemeTooShortForLag: return "SchemeTooShortForLag";
    case ErrorKind::SimulationDiverged: return "SimulationDiverged";
    case ErrorKind::MomentsOutsideModelRange: return "MomentsOutsideModelRange";
    case ErrorKind::SolverDidNotConverge: return "SolverDidNotConverge";
    case ErrorKind::ResourceLimit: return "ResourceLimit";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& what)
    : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind), detail_(what) {}

int exit_code(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::ParameterDomain:
    case ErrorKind::SchemeGridMismatch:
    case ErrorKind::InvalidConfig:
    case ErrorKind::ResourceLimit:
      return exit_codes::kValidation;
    case ErrorKind::InsufficientData:
    case ErrorKind::SchemeTooShortForLag:
    case ErrorKind::Io:
      return exit_codes::kData;
    case ErrorKind::SimulationDiverged:
    case ErrorKind::MomentsOutsideModelRange:
    case ErrorKind::SolverDidNotConverge:
      return exit_codes::kNumerical;
  }
  return exit_codes::kNumerical;
}

}  // namespace ioest
