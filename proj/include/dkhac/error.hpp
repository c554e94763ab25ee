#pragma once

#include <stdexcept>
#include <string>

namespace dkhac {

enum class ErrorCode {
  InvalidArgument,
  DegenerateWindow,
  UnsupportedKernel,
  Nonstationary,
  SingularDesign,
  SingularBread,
  SingularZX,
  NonPositiveVariance,
  UndefinedStatistic,
  CacheFailure,
  ParseError,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DegenerateWindow: return "DegenerateWindow";
    case ErrorCode::UnsupportedKernel: return "UnsupportedKernel";
    case ErrorCode::Nonstationary: return "Nonstationary";
    case ErrorCode::SingularDesign: return "SingularDesign";
    case ErrorCode::SingularBread: return "SingularBread";
    case ErrorCode::SingularZX: return "SingularZX";
    case ErrorCode::NonPositiveVariance: return "NonPositiveVariance";
    case ErrorCode::UndefinedStatistic: return "UndefinedStatistic";
    case ErrorCode::CacheFailure: return "CacheFailure";
    case ErrorCode::ParseError: return "ParseError";
  }
  return "Unknown";
}

/// Exception carrying a machine-readable code. All library failures go
/// through this type so callers can branch on `code()`.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) throw Error(code, what);
}

}  // namespace dkhac
