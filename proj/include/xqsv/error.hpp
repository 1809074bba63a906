#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace xqsv {

enum class ErrorCode {
  InvalidState,
  IllegalMove,
  IllegalSequence,
  UnknownToken,
  IndexOutOfRange,
  Unresolvable,
  Ambiguous,
  LocallyIllegal,
  Unrepresentable,
  ParseError,
  FramingError,
  InvalidConfig,
  NoLegalMove,
  DivergenceDetected,
  ChecksumMismatch,
  VocabularyMismatch,
  FormatError,
  UnknownModel,
  UnknownSession,
  NotYourTurn,
  SessionFinished,
  IoError,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidState: return "InvalidState";
    case ErrorCode::IllegalMove: return "IllegalMove";
    case ErrorCode::IllegalSequence: return "IllegalSequence";
    case ErrorCode::UnknownToken: return "UnknownToken";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::Unresolvable: return "Unresolvable";
    case ErrorCode::Ambiguous: return "Ambiguous";
    case ErrorCode::LocallyIllegal: return "LocallyIllegal";
    case ErrorCode::Unrepresentable: return "Unrepresentable";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::FramingError: return "FramingError";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::NoLegalMove: return "NoLegalMove";
    case ErrorCode::DivergenceDetected: return "DivergenceDetected";
    case ErrorCode::ChecksumMismatch: return "ChecksumMismatch";
    case ErrorCode::VocabularyMismatch: return "VocabularyMismatch";
    case ErrorCode::FormatError: return "FormatError";
    case ErrorCode::UnknownModel: return "UnknownModel";
    case ErrorCode::UnknownSession: return "UnknownSession";
    case ErrorCode::NotYourTurn: return "NotYourTurn";
    case ErrorCode::SessionFinished: return "SessionFinished";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries a machine-readable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Replay failure pointing at the first offending move (0-based).
class IllegalSequenceError : public Error {
 public:
  IllegalSequenceError(std::size_t index, const std::string& message)
      : Error(ErrorCode::IllegalSequence, "move " + std::to_string(index) + ": " + message),
        index_(index) {}

  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

/// Malformed text; offset is the byte position where parsing stopped.
class ParseError : public Error {
 public:
  ParseError(std::size_t offset, const std::string& message)
      : Error(ErrorCode::ParseError, message + " (at offset " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

}  // namespace xqsv
