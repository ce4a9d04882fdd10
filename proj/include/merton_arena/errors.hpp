#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace merton_arena {

enum class ValidationKind {
  NonPositiveParameter,
  ThetaOutOfRange,
  DegenerateVolatility,
  TooFewAgents,
  BadWeights,
  NotSingleStock,
  NonReplicableWeights,
  InvalidGrid,
  NonPositiveConsumption,
  OutOfDomain,
  BadConfig,
};

enum class NumericalKind {
  DegenerateAggregate,
  DivisionByZero,
  IdentityViolation,
  CorollaryMismatch,
  NonPositiveSolution,
  DomainError,
};

inline const char* to_string(ValidationKind k) {
  switch (k) {
    case ValidationKind::NonPositiveParameter: return "NonPositiveParameter";
    case ValidationKind::ThetaOutOfRange: return "ThetaOutOfRange";
    case ValidationKind::DegenerateVolatility: return "DegenerateVolatility";
    case ValidationKind::TooFewAgents: return "TooFewAgents";
    case ValidationKind::BadWeights: return "BadWeights";
    case ValidationKind::NotSingleStock: return "NotSingleStock";
    case ValidationKind::NonReplicableWeights: return "NonReplicableWeights";
    case ValidationKind::InvalidGrid: return "InvalidGrid";
    case ValidationKind::NonPositiveConsumption: return "NonPositiveConsumption";
    case ValidationKind::OutOfDomain: return "OutOfDomain";
    case ValidationKind::BadConfig: return "BadConfig";
  }
  return "Unknown";
}

inline const char* to_string(NumericalKind k) {
  switch (k) {
    case NumericalKind::DegenerateAggregate: return "DegenerateAggregate";
    case NumericalKind::DivisionByZero: return "DivisionByZero";
    case NumericalKind::IdentityViolation: return "IdentityViolation";
    case NumericalKind::CorollaryMismatch: return "CorollaryMismatch";
    case NumericalKind::NonPositiveSolution: return "NonPositiveSolution";
    case NumericalKind::DomainError: return "DomainError";
  }
  return "Unknown";
}

// Bad input: a parameter, config or request outside the model's domain.
class ValidationError : public std::invalid_argument {
 public:
  ValidationError(ValidationKind kind, std::string field,
                  std::optional<std::size_t> index, const std::string& what)
      : std::invalid_argument(what), kind_(kind), field_(std::move(field)),
        index_(index) {}

  ValidationError(ValidationKind kind, const std::string& what)
      : ValidationError(kind, "", std::nullopt, what) {}

  ValidationKind kind() const noexcept { return kind_; }
  const std::string& field() const noexcept { return field_; }
  std::optional<std::size_t> index() const noexcept { return index_; }

 private:
  ValidationKind kind_;
  std::string field_;
  std::optional<std::size_t> index_;
};

// Numerical breakdown. For valid inputs this indicates a bug, not bad data.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(NumericalKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  NumericalKind kind() const noexcept { return kind_; }

 private:
  NumericalKind kind_;
};

}  // namespace merton_arena
