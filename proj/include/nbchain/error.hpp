#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace nbchain {

enum class ErrorKind {
  NotSquare,
  RowSumViolation,
  NegativeEntry,
  InvalidDistribution,
  NotInvariant,
  DimensionMismatch,
  NonUniqueStationary,
  NumericalFailure,
  ZeroTargetProbability,
  SingularSystem,
  NotIrreducible,
  InvalidInit,
  InvalidArgument,
  NotReversible,
  KernelConditionViolation,
  DominationViolation,
  NotElementaryPair,
  DeltaImbalance,
  EmptySubset,
  RhoAsymmetric,
  DeltaOutOfRange,
  ParseError,
  UnknownTarget,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NotSquare: return "NotSquare";
    case ErrorKind::RowSumViolation: return "RowSumViolation";
    case ErrorKind::NegativeEntry: return "NegativeEntry";
    case ErrorKind::InvalidDistribution: return "InvalidDistribution";
    case ErrorKind::NotInvariant: return "NotInvariant";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::NonUniqueStationary: return "NonUniqueStationary";
    case ErrorKind::NumericalFailure: return "NumericalFailure";
    case ErrorKind::ZeroTargetProbability: return "ZeroTargetProbability";
    case ErrorKind::SingularSystem: return "SingularSystem";
    case ErrorKind::NotIrreducible: return "NotIrreducible";
    case ErrorKind::InvalidInit: return "InvalidInit";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::NotReversible: return "NotReversible";
    case ErrorKind::KernelConditionViolation: return "KernelConditionViolation";
    case ErrorKind::DominationViolation: return "DominationViolation";
    case ErrorKind::NotElementaryPair: return "NotElementaryPair";
    case ErrorKind::DeltaImbalance: return "DeltaImbalance";
    case ErrorKind::EmptySubset: return "EmptySubset";
    case ErrorKind::RhoAsymmetric: return "RhoAsymmetric";
    case ErrorKind::DeltaOutOfRange: return "DeltaOutOfRange";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::UnknownTarget: return "UnknownTarget";
  }
  return "Unknown";
}

/// All library failures are reported as this exception; `kind()` carries the
/// machine-readable category and `what()` starts with its name.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& detail)
      : std::runtime_error(std::string(to_string(kind)) + ": " + detail), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace nbchain
