#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace semflow {

enum class ErrorKind {
  kInvalidArgument,
  kIo,
  kFormat,
  kDomain,
  kAllDocumentsEmpty,
  kDimMismatch,
  kMissingTerm,
  kSolverFailure,
  kCorpusTooSmall,
  kEmptyQuery,
};

inline std::string_view error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument: return "InvalidArgument";
    case ErrorKind::kIo: return "IoError";
    case ErrorKind::kFormat: return "FormatError";
    case ErrorKind::kDomain: return "DomainError";
    case ErrorKind::kAllDocumentsEmpty: return "AllDocumentsEmpty";
    case ErrorKind::kDimMismatch: return "DimMismatch";
    case ErrorKind::kMissingTerm: return "MissingTerm";
    case ErrorKind::kSolverFailure: return "SolverFailure";
    case ErrorKind::kCorpusTooSmall: return "CorpusTooSmall";
    case ErrorKind::kEmptyQuery: return "EmptyQuery";
  }
  return "Unknown";
}

// All library failures are reported through this exception; `kind()` lets
// callers (the CLI in particular) map them onto exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(error_kind_name(kind)) + ": " + message),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Parse failures carry the offending line (1-based; 0 when not line-bound).
class FormatError : public Error {
 public:
  FormatError(const std::string& source, std::size_t line,
              const std::string& message)
      : Error(ErrorKind::kFormat,
              source + (line > 0 ? ":" + std::to_string(line) : "") + ": " +
                  message),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace semflow
