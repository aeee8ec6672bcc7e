#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace sdg {

// Every failure the library raises carries one of these codes so callers
// (CLI exit mapping, HTTP status mapping, tests) can branch without parsing
// message text.
enum class Errc {
  // configuration
  MissingField,
  TypeMismatch,
  CrossFieldViolation,
  UnknownPath,
  UnknownKey,
  InvalidValue,
  // samples and files
  EmptyInput,
  EmptyOutput,
  BadSource,
  DanglingImageRef,
  IoError,
  MalformedLine,
  SchemaViolation,
  // generic
  Precondition,
  Cancelled,
  NotFound,
  // llm gateway
  AuthError,
  TransportError,
  ResponseFormatError,
  NoJsonFound,
  UnbalancedJson,
  // retrieval
  EmptyCorpus,
  EmptyQueryAfterTokenization,
  // hub
  NoCandidates,
  DatasetGated,
  SplitNotFound,
  // executors
  KeywordExtractionEmpty,
  SeedFileInvalid,
  TeacherUnreachable,
  NoPassagesFound,
  FieldSelectionFailed,
  PatternExtractionFailed,
  GenerationParseFailure,
  AllSamplesInvalid,
  // parallel
  CheckpointCorrupt,
  RunIdMismatch,
  // adapters
  UnreadableImage,
  // quality / evaluation
  EvaluationFailed,
  JudgeParseError,
  EmptyDataset,
  SpawnFailure,
  NonZeroExit,
  // service
  IllegalTransition,
};

std::string_view to_string(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message);

  Errc code() const noexcept { return code_; }

  // Name of the pipeline step that raised the error, empty if not attached.
  const std::string& step() const noexcept { return step_; }
  void set_step(std::string step) { step_ = std::move(step); }

 private:
  Errc code_;
  std::string step_;
};

// Raised by transports; `transient` marks failures worth retrying
// (HTTP 429/5xx, timeouts, refused connections).
class TransportFailure : public Error {
 public:
  TransportFailure(const std::string& message, bool transient, int http_status = 0)
      : Error(Errc::TransportError, message), transient_(transient), http_status_(http_status) {}

  bool transient() const noexcept { return transient_; }
  int http_status() const noexcept { return http_status_; }

 private:
  bool transient_;
  int http_status_;
};

// JSONL reader failures point at the 1-based line that broke.
class LineError : public Error {
 public:
  LineError(Errc code, std::size_t line_no, const std::string& message)
      : Error(code, "line " + std::to_string(line_no) + ": " + message), line_no_(line_no) {}

  std::size_t line_no() const noexcept { return line_no_; }

 private:
  std::size_t line_no_;
};

}  // namespace sdg
