#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace stabaudit {

// Every failure the library can signal, grouped by the exit-code class the
// CLI maps it to: Usage (1), Data (2), Provider (3).
enum class ErrorCode {
  // usage / configuration
  InvalidArgument,
  UnknownMode,
  UnknownProvider,
  UnwritablePath,

  // data
  MalformedRubricJson,
  UnknownCategory,
  MissingDecision,
  EditBreaksInvariant,
  UnvalidatedRubric,
  MalformedJson,
  MissingQuestion,
  InventedQuestion,
  InvalidAnswer,
  EmptyCorpus,
  MissingField,
  MissingOutput,
  InsufficientRaters,
  RaggedMatrix,
  EmptyRubric,
  ErrorAnswerPresent,
  InsufficientRuns,
  EmptyJustification,
  EmptyInput,
  MixedScope,
  MissingStratum,
  NoCheckerForQuestion,
  EmptyStore,

  // provider / transport
  Transport,
  Auth,
  Provider,
  ProviderUnavailable,
};

inline std::string_view code_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::UnknownMode: return "UnknownMode";
    case ErrorCode::UnknownProvider: return "UnknownProvider";
    case ErrorCode::UnwritablePath: return "UnwritablePath";
    case ErrorCode::MalformedRubricJson: return "MalformedRubricJson";
    case ErrorCode::UnknownCategory: return "UnknownCategory";
    case ErrorCode::MissingDecision: return "MissingDecision";
    case ErrorCode::EditBreaksInvariant: return "EditBreaksInvariant";
    case ErrorCode::UnvalidatedRubric: return "UnvalidatedRubric";
    case ErrorCode::MalformedJson: return "MalformedJson";
    case ErrorCode::MissingQuestion: return "MissingQuestion";
    case ErrorCode::InventedQuestion: return "InventedQuestion";
    case ErrorCode::InvalidAnswer: return "InvalidAnswer";
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::MissingField: return "MissingField";
    case ErrorCode::MissingOutput: return "MissingOutput";
    case ErrorCode::InsufficientRaters: return "InsufficientRaters";
    case ErrorCode::RaggedMatrix: return "RaggedMatrix";
    case ErrorCode::EmptyRubric: return "EmptyRubric";
    case ErrorCode::ErrorAnswerPresent: return "ErrorAnswerPresent";
    case ErrorCode::InsufficientRuns: return "InsufficientRuns";
    case ErrorCode::EmptyJustification: return "EmptyJustification";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::MixedScope: return "MixedScope";
    case ErrorCode::MissingStratum: return "MissingStratum";
    case ErrorCode::NoCheckerForQuestion: return "NoCheckerForQuestion";
    case ErrorCode::EmptyStore: return "EmptyStore";
    case ErrorCode::Transport: return "Transport";
    case ErrorCode::Auth: return "Auth";
    case ErrorCode::Provider: return "Provider";
    case ErrorCode::ProviderUnavailable: return "ProviderUnavailable";
  }
  return "Unknown";
}

// Exit-code class for the CLI contract: 1 usage, 2 data, 3 provider.
inline int exit_class(ErrorCode c) {
  switch (c) {
    case ErrorCode::InvalidArgument:
    case ErrorCode::UnknownMode:
    case ErrorCode::UnknownProvider:
    case ErrorCode::UnwritablePath:
      return 1;
    case ErrorCode::Transport:
    case ErrorCode::Auth:
    case ErrorCode::Provider:
    case ErrorCode::ProviderUnavailable:
      return 3;
    default:
      return 2;
  }
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(code_name(code)) + ": " + message),
        code_(code),
        detail_(message) {}

  ErrorCode code() const { return code_; }
  const std::string& detail() const { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace stabaudit
