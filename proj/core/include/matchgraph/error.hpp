#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace matchgraph {

/// Broad failure category. The CLI maps each category onto an exit code.
enum class ErrorCategory {
  usage,    // bad arguments or configuration
  parse,    // malformed input file or stream
  compute,  // input parsed but a computation precondition failed
};

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, std::string kind, const std::string& message)
      : std::runtime_error(message), category_(category), kind_(std::move(kind)) {}

  ErrorCategory category() const noexcept { return category_; }
  /// Short machine-readable name, e.g. "TruncatedPayload".
  const std::string& kind() const noexcept { return kind_; }

 private:
  ErrorCategory category_;
  std::string kind_;
};

/// Stream-level parse failure. Carries the byte offset where decoding stopped
/// (or the 1-based line number for text formats, in which case
/// offset() == npos and line() is set).
class ParseError : public Error {
 public:
  static constexpr std::uint64_t npos = ~std::uint64_t{0};

  ParseError(std::string kind, const std::string& message, std::uint64_t offset,
             std::uint64_t line = 0)
      : Error(ErrorCategory::parse, std::move(kind), decorate(message, offset, line)),
        offset_(offset),
        line_(line) {}

  std::uint64_t offset() const noexcept { return offset_; }
  std::uint64_t line() const noexcept { return line_; }

 private:
  static std::string decorate(const std::string& message, std::uint64_t offset,
                              std::uint64_t line) {
    if (offset != npos) return message + " (at byte " + std::to_string(offset) + ")";
    if (line != 0) return message + " (at line " + std::to_string(line) + ")";
    return message;
  }

  std::uint64_t offset_;
  std::uint64_t line_;
};

#define MATCHGRAPH_PARSE_ERROR(Name)                                              \
  class Name : public ParseError {                                                \
   public:                                                                        \
    Name(const std::string& message, std::uint64_t offset, std::uint64_t line = 0) \
        : ParseError(#Name, message, offset, line) {}                             \
  }

MATCHGRAPH_PARSE_ERROR(MalformedHeader);
MATCHGRAPH_PARSE_ERROR(TruncatedPayload);
MATCHGRAPH_PARSE_ERROR(NonFiniteValue);
MATCHGRAPH_PARSE_ERROR(DuplicateId);
MATCHGRAPH_PARSE_ERROR(VersionMismatch);
MATCHGRAPH_PARSE_ERROR(ShapeCorruption);
MATCHGRAPH_PARSE_ERROR(MalformedRecord);

#undef MATCHGRAPH_PARSE_ERROR

#define MATCHGRAPH_COMPUTE_ERROR(Name)                                                   \
  class Name : public Error {                                                            \
   public:                                                                               \
    explicit Name(const std::string& message) : Error(ErrorCategory::compute, #Name, message) {} \
  }

MATCHGRAPH_COMPUTE_ERROR(DegenerateVector);
MATCHGRAPH_COMPUTE_ERROR(DimensionError);
MATCHGRAPH_COMPUTE_ERROR(UnknownImage);
MATCHGRAPH_COMPUTE_ERROR(InvalidAdjacency);
MATCHGRAPH_COMPUTE_ERROR(EmptyLossSet);
MATCHGRAPH_COMPUTE_ERROR(NoTrainingData);
MATCHGRAPH_COMPUTE_ERROR(InvalidArgument);

#undef MATCHGRAPH_COMPUTE_ERROR

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& message)
      : Error(ErrorCategory::usage, "UsageError", message) {}
};

}  // namespace matchgraph
