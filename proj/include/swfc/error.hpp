#pragma once

#include <stdexcept>
#include <string>

namespace swfc {

enum class ErrorCode {
  Parse,
  InvalidArgument,
  EigenvalueOnBoundary,
  InvalidBump,
  StepUnderflow,
  GridTooLarge,
  IsolationFailure,
  HypothesisViolationI,
  HypothesisViolationII,
  ConstructionFailure,
  NotRegularLevel,
  NotGoodPerturbation,
  AmbiguousMatching,
  CrossingOnEndpoint,
  ExtrapolationDiverged,
  NotNearLattice,
  SearchSpaceTooLarge,
  Overflow,
  Internal,
};

inline const char* to_string(ErrorCode c) {
  switch (c) {
    case ErrorCode::Parse: return "Parse";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::EigenvalueOnBoundary: return "EigenvalueOnBoundary";
    case ErrorCode::InvalidBump: return "InvalidBump";
    case ErrorCode::StepUnderflow: return "StepUnderflow";
    case ErrorCode::GridTooLarge: return "GridTooLarge";
    case ErrorCode::IsolationFailure: return "IsolationFailure";
    case ErrorCode::HypothesisViolationI: return "HypothesisViolation(i)";
    case ErrorCode::HypothesisViolationII: return "HypothesisViolation(ii)";
    case ErrorCode::ConstructionFailure: return "ConstructionFailure";
    case ErrorCode::NotRegularLevel: return "NotRegularLevel";
    case ErrorCode::NotGoodPerturbation: return "NotGoodPerturbation";
    case ErrorCode::AmbiguousMatching: return "AmbiguousMatching";
    case ErrorCode::CrossingOnEndpoint: return "CrossingOnEndpoint";
    case ErrorCode::ExtrapolationDiverged: return "ExtrapolationDiverged";
    case ErrorCode::NotNearLattice: return "NotNearLattice";
    case ErrorCode::SearchSpaceTooLarge: return "SearchSpaceTooLarge";
    case ErrorCode::Overflow: return "Overflow";
    case ErrorCode::Internal: return "Internal";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace swfc
