#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace probo {

enum class ErrorKind {
  // ledger
  NonCanonicalizable,
  InvalidConfig,
  TimestampRegression,
  InvalidPayload,
  InvalidChain,
  // tokenomics
  DuplicateAccount,
  PostGenesisMint,
  InsufficientFunds,
  UnknownAccount,
  DepositBelowMinimum,
  DuplicateRequest,
  UnknownEscrow,
  AlreadySettled,
  EmptyVerifierSet,
  InvalidDecision,
  InvalidAmount,
  // studies
  InvalidPartition,
  InvalidDescriptor,
  // verification
  UnknownMetric,
  MixedRequestIds,
  UnorderedReports,
  // simnet
  NoEscrow,
  HorizonExceeded,
  InvalidScenario,
  // file formats
  ParseError,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NonCanonicalizable: return "NonCanonicalizable";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::TimestampRegression: return "TimestampRegression";
    case ErrorKind::InvalidPayload: return "InvalidPayload";
    case ErrorKind::InvalidChain: return "InvalidChain";
    case ErrorKind::DuplicateAccount: return "DuplicateAccount";
    case ErrorKind::PostGenesisMint: return "PostGenesisMint";
    case ErrorKind::InsufficientFunds: return "InsufficientFunds";
    case ErrorKind::UnknownAccount: return "UnknownAccount";
    case ErrorKind::DepositBelowMinimum: return "DepositBelowMinimum";
    case ErrorKind::DuplicateRequest: return "DuplicateRequest";
    case ErrorKind::UnknownEscrow: return "UnknownEscrow";
    case ErrorKind::AlreadySettled: return "AlreadySettled";
    case ErrorKind::EmptyVerifierSet: return "EmptyVerifierSet";
    case ErrorKind::InvalidDecision: return "InvalidDecision";
    case ErrorKind::InvalidAmount: return "InvalidAmount";
    case ErrorKind::InvalidPartition: return "InvalidPartition";
    case ErrorKind::InvalidDescriptor: return "InvalidDescriptor";
    case ErrorKind::UnknownMetric: return "UnknownMetric";
    case ErrorKind::MixedRequestIds: return "MixedRequestIds";
    case ErrorKind::UnorderedReports: return "UnorderedReports";
    case ErrorKind::NoEscrow: return "NoEscrow";
    case ErrorKind::HorizonExceeded: return "HorizonExceeded";
    case ErrorKind::InvalidScenario: return "InvalidScenario";
    case ErrorKind::ParseError: return "ParseError";
  }
  return "Unknown";
}

// Every failure raised by the library carries a kind so callers (and the CLI)
// can branch without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace probo
