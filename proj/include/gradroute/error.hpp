#pragma once

#include <stdexcept>
#include <string>

namespace gradroute {

// Every failure surfaced by the library derives from Error. The category
// decides the CLI exit code.
enum class ErrorCategory { usage, validation, io };

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what) : Error(category, "", what) {}
  Error(ErrorCategory category, const std::string& prefix, const std::string& detail)
      : std::runtime_error(prefix + detail), category_(category), detail_(detail) {}
  ErrorCategory category() const noexcept { return category_; }
  // Message without the category prefix, for rewrapping with a location.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCategory category_;
  std::string detail_;
};

// Invalid ProbeModelConfig / PipelineConfig field.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& field, const std::string& what)
      : Error(ErrorCategory::validation, "config error [" + field + "]: ", what),
        field_(field) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

// Bad operand to an operator (negative norm, vocab overflow, zero step ...).
class InputError : public Error {
 public:
  explicit InputError(const std::string& what)
      : Error(ErrorCategory::validation, "input error: ", what) {}
};

// A trajectory whose response is empty after truncation.
class EmptyResponseError : public InputError {
 public:
  explicit EmptyResponseError(const std::string& what) : InputError(what) {}
};

// Parameters of a routing/analysis operation out of range.
class ParameterError : public Error {
 public:
  explicit ParameterError(const std::string& what)
      : Error(ErrorCategory::validation, "parameter error: ", what) {}
};

// Two collections that must describe the same corpus do not.
class ConsistencyError : public Error {
 public:
  explicit ConsistencyError(const std::string& what)
      : Error(ErrorCategory::validation, "consistency error: ", what) {}
};

class EmptyCorpusError : public Error {
 public:
  explicit EmptyCorpusError(const std::string& what)
      : Error(ErrorCategory::validation, "empty corpus: ", what) {}
};

// Malformed or invariant-violating file content. Carries the 1-based line.
class ParseError : public Error {
 public:
  ParseError(const std::string& path, std::size_t line, const std::string& what)
      : Error(ErrorCategory::validation,
              path + ":" + std::to_string(line) + ": " + what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class CorruptedManifestError : public Error {
 public:
  explicit CorruptedManifestError(const std::string& what)
      : Error(ErrorCategory::validation, "corrupted manifest: ", what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorCategory::io, "i/o error: ", what) {}
};

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error(ErrorCategory::usage, what) {}
};

}  // namespace gradroute
