#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mcf {

enum class ErrorKind {
  InvalidParameter,
  InvalidTime,
  DomainError,
  LinearSolveFailure,
  ShootingFailure,
  FitFailure,
  RegionError,
  ConstantSearchFailure,
  InvalidInitialData,
  GlueFailure,
  SingularProfile,
  SandwichViolation,
  MeshResolutionError,
  IoError,
  ConfigError,
};

constexpr std::string_view to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::InvalidParameter: return "InvalidParameter";
    case ErrorKind::InvalidTime: return "InvalidTime";
    case ErrorKind::DomainError: return "DomainError";
    case ErrorKind::LinearSolveFailure: return "LinearSolveFailure";
    case ErrorKind::ShootingFailure: return "ShootingFailure";
    case ErrorKind::FitFailure: return "FitFailure";
    case ErrorKind::RegionError: return "RegionError";
    case ErrorKind::ConstantSearchFailure: return "ConstantSearchFailure";
    case ErrorKind::InvalidInitialData: return "InvalidInitialData";
    case ErrorKind::GlueFailure: return "GlueFailure";
    case ErrorKind::SingularProfile: return "SingularProfile";
    case ErrorKind::SandwichViolation: return "SandwichViolation";
    case ErrorKind::MeshResolutionError: return "MeshResolutionError";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace mcf
