#pragma once

#include <stdexcept>
#include <string>

namespace auditfair {

// Every error the library raises. Grouped by how the CLI maps them to
// exit codes: configuration/usage (1), data problems (2), infeasible
// interventions (3).
enum class Errc {
  // configuration / usage
  InvalidConfig,
  // data
  MissingColumn,
  InvalidValue,
  EmptyFile,
  EmptyDataset,
  TooFewRecords,
  ShapeMismatch,
  EmptyTrainingSet,
  LengthMismatch,
  EmptyScores,
  SingleClass,
  SingleArm,
  UndefinedFPR,
  NonFiniteLoss,
  IoError,
  // infeasible interventions
  InfeasibleDelta,
  InfeasibleTarget,
  ExhaustedCandidates,
};

const char* errc_name(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message),
        code_(code) {}

  Errc code() const { return code_; }

  // CLI exit code category: 1 config, 2 data, 3 infeasible.
  int exit_code() const {
    switch (code_) {
      case Errc::InvalidConfig:
        return 1;
      case Errc::InfeasibleDelta:
      case Errc::InfeasibleTarget:
      case Errc::ExhaustedCandidates:
        return 3;
      default:
        return 2;
    }
  }

 private:
  Errc code_;
};

[[noreturn]] inline void raise(Errc code, const std::string& message) {
  throw Error(code, message);
}

inline const char* errc_name(Errc code) {
  switch (code) {
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::MissingColumn: return "MissingColumn";
    case Errc::InvalidValue: return "InvalidValue";
    case Errc::EmptyFile: return "EmptyFile";
    case Errc::EmptyDataset: return "EmptyDataset";
    case Errc::TooFewRecords: return "TooFewRecords";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::EmptyTrainingSet: return "EmptyTrainingSet";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::EmptyScores: return "EmptyScores";
    case Errc::SingleClass: return "SingleClass";
    case Errc::SingleArm: return "SingleArm";
    case Errc::UndefinedFPR: return "UndefinedFPR";
    case Errc::NonFiniteLoss: return "NonFiniteLoss";
    case Errc::IoError: return "IoError";
    case Errc::InfeasibleDelta: return "InfeasibleDelta";
    case Errc::InfeasibleTarget: return "InfeasibleTarget";
    case Errc::ExhaustedCandidates: return "ExhaustedCandidates";
  }
  return "UnknownError";
}

}  // namespace auditfair
