#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace llmtaxo {

/// Broad error classes. The numeric values double as CLI exit codes.
enum class ErrorClass : int {
  config = 2,
  provider = 3,
  data = 4,
  missing_artifact = 5,
};

/// Base of every error raised by the library. `code()` is a stable identifier
/// such as "DuplicateId" that tests and the CLI can match on.
class Error : public std::runtime_error {
 public:
  Error(ErrorClass cls, std::string code, const std::string& message)
      : std::runtime_error(code + ": " + message), cls_(cls), code_(std::move(code)) {}

  ErrorClass error_class() const noexcept { return cls_; }
  const std::string& code() const noexcept { return code_; }
  int exit_code() const noexcept { return static_cast<int>(cls_); }

 private:
  ErrorClass cls_;
  std::string code_;
};

#define LLMTAXO_DEFINE_ERROR(Name, Class)                                        \
  class Name : public Error {                                                    \
   public:                                                                       \
    explicit Name(const std::string& message) : Error(Class, #Name, message) {} \
  };

LLMTAXO_DEFINE_ERROR(ConfigError, ErrorClass::config)
LLMTAXO_DEFINE_ERROR(UnsupportedFormat, ErrorClass::config)
LLMTAXO_DEFINE_ERROR(ProviderUnavailable, ErrorClass::provider)
LLMTAXO_DEFINE_ERROR(LengthMismatch, ErrorClass::data)
LLMTAXO_DEFINE_ERROR(DimensionMismatch, ErrorClass::data)
LLMTAXO_DEFINE_ERROR(NonFiniteValue, ErrorClass::data)
LLMTAXO_DEFINE_ERROR(TooFewPoints, ErrorClass::data)
LLMTAXO_DEFINE_ERROR(NotEnoughClusters, ErrorClass::data)
LLMTAXO_DEFINE_ERROR(InvalidTriple, ErrorClass::data)
LLMTAXO_DEFINE_ERROR(SchemaViolation, ErrorClass::data)
LLMTAXO_DEFINE_ERROR(EmptyExamples, ErrorClass::data)
LLMTAXO_DEFINE_ERROR(EmptyScores, ErrorClass::data)

#undef LLMTAXO_DEFINE_ERROR

class MalformedRecord : public Error {
 public:
  MalformedRecord(std::size_t line, const std::string& message)
      : Error(ErrorClass::data, "MalformedRecord",
              "line " + std::to_string(line) + ": " + message),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class DuplicateId : public Error {
 public:
  explicit DuplicateId(const std::string& id)
      : Error(ErrorClass::data, "DuplicateId", "duplicate post id \"" + id + "\""), id_(id) {}
  const std::string& id() const noexcept { return id_; }

 private:
  std::string id_;
};

/// The provider answered, but the body could not be interpreted. The raw body
/// is kept for diagnostics.
class ProviderMalformedResponse : public Error {
 public:
  ProviderMalformedResponse(const std::string& message, std::string raw_body)
      : Error(ErrorClass::provider, "ProviderMalformedResponse", message),
        raw_body_(std::move(raw_body)) {}
  const std::string& raw_body() const noexcept { return raw_body_; }

 private:
  std::string raw_body_;
};

class MissingArtifact : public Error {
 public:
  explicit MissingArtifact(const std::string& artifact)
      : Error(ErrorClass::missing_artifact, "MissingArtifact",
              "required artifact \"" + artifact + "\" not found; run the producing stage first"),
        artifact_(artifact) {}
  const std::string& artifact() const noexcept { return artifact_; }

 private:
  std::string artifact_;
};

}  // namespace llmtaxo
