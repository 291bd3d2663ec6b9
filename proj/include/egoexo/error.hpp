#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace egoexo {

enum class ErrorCode {
  kInvalidArgument,
  kNotFound,
  kConvention,
  kParse,
  kValidation,
  kDegenerate,
  kState,
  kSpawn,
  kIo,
  kBackendUnavailable,
  kIncompatible,
  kHoldout,
};

std::string_view to_string(ErrorCode code);

// Single exception type for the library; callers switch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Validation failures carry every offending item, not just the first.
class ValidationError : public Error {
 public:
  ValidationError(const std::string& message, std::vector<std::string> problems)
      : Error(ErrorCode::kValidation, message + ": " + join(problems)),
        problems_(std::move(problems)) {}

  const std::vector<std::string>& problems() const noexcept { return problems_; }

 private:
  static std::string join(const std::vector<std::string>& items) {
    std::string out;
    for (const auto& item : items) {
      if (!out.empty()) out += "; ";
      out += item;
    }
    return out;
  }

  std::vector<std::string> problems_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kNotFound: return "not-found";
    case ErrorCode::kConvention: return "convention-error";
    case ErrorCode::kParse: return "parse-error";
    case ErrorCode::kValidation: return "validation-error";
    case ErrorCode::kDegenerate: return "degenerate-error";
    case ErrorCode::kState: return "state-error";
    case ErrorCode::kSpawn: return "spawn-error";
    case ErrorCode::kIo: return "io-error";
    case ErrorCode::kBackendUnavailable: return "backend-unavailable";
    case ErrorCode::kIncompatible: return "incompatible";
    case ErrorCode::kHoldout: return "holdout-violation";
  }
  return "unknown";
}

}  // namespace egoexo
