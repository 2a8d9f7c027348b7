#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace handy {

enum class ErrorCode {
  // Parameter validation.
  NonPositiveParameter,
  KappaNotGreaterThanOne,
  XiSignsWrong,
  ScheduleInfimumViolation,
  // Model evaluation.
  NegativeZ,
  VariantParameterMismatch,
  // Integration.
  NonFiniteState,
  InvalidConfig,
  KinkCrossedDuringSegment,
  // Hypothesis checks.
  PopulationZeroAtSample,
  HorizonTooShort,
  // Equilibria.
  NegativeRadicand,
  MobilityZero,
  NoConvergence,
  BranchViolated,
  // Harness input.
  ConfigParse,
  MissingColumn,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonPositiveParameter: return "NonPositiveParameter";
    case ErrorCode::KappaNotGreaterThanOne: return "KappaNotGreaterThanOne";
    case ErrorCode::XiSignsWrong: return "XiSignsWrong";
    case ErrorCode::ScheduleInfimumViolation: return "ScheduleInfimumViolation";
    case ErrorCode::NegativeZ: return "NegativeZ";
    case ErrorCode::VariantParameterMismatch: return "VariantParameterMismatch";
    case ErrorCode::NonFiniteState: return "NonFiniteState";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::KinkCrossedDuringSegment: return "KinkCrossedDuringSegment";
    case ErrorCode::PopulationZeroAtSample: return "PopulationZeroAtSample";
    case ErrorCode::HorizonTooShort: return "HorizonTooShort";
    case ErrorCode::NegativeRadicand: return "NegativeRadicand";
    case ErrorCode::MobilityZero: return "MobilityZero";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::BranchViolated: return "BranchViolated";
    case ErrorCode::ConfigParse: return "ConfigParse";
    case ErrorCode::MissingColumn: return "MissingColumn";
  }
  return "Unknown";
}

/// Base exception for every failure the library reports. The code names the
/// failure kind; the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// One rejected field from parameter validation.
struct Diagnostic {
  ErrorCode code;
  std::string field;
  std::string message;
};

/// Thrown by validate_params; carries every violation, not just the first.
/// code() is the first diagnostic's code.
class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<Diagnostic> diagnostics)
      : Error(diagnostics.front().code, summarize(diagnostics)),
        diagnostics_(std::move(diagnostics)) {}

  const std::vector<Diagnostic>& diagnostics() const noexcept {
    return diagnostics_;
  }

  bool has(ErrorCode code) const {
    for (const auto& d : diagnostics_) {
      if (d.code == code) return true;
    }
    return false;
  }

 private:
  static std::string summarize(const std::vector<Diagnostic>& diagnostics) {
    std::string out;
    for (const auto& d : diagnostics) {
      if (!out.empty()) out += "; ";
      out += d.field + ": " + d.message;
    }
    return out;
  }

  std::vector<Diagnostic> diagnostics_;
};

/// Integration hit an overflow or NaN. last_good_time is the time of the last
/// state that was finite.
class NonFiniteStateError : public Error {
 public:
  NonFiniteStateError(double last_good_time, const std::string& message)
      : Error(ErrorCode::NonFiniteState, message),
        last_good_time_(last_good_time) {}

  double last_good_time() const noexcept { return last_good_time_; }

 private:
  double last_good_time_;
};

}  // namespace handy
