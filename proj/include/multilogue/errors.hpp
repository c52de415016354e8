#pragma once

#include <stdexcept>
#include <string>

namespace multilogue {

// Shape or extent disagreement between operands.
struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Value outside the mathematical domain of an operation.
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

// API misuse: a precondition the caller is responsible for was violated.
struct ContractError : std::logic_error {
  using std::logic_error::logic_error;
};

// Bad user-supplied value (speaker slot out of range, unknown label, ...).
struct InputError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Structurally valid file whose content violates the dataset schema.
struct SchemaError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// File content that cannot be parsed at all.
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Corrupt, truncated, or version-incompatible binary artifact.
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Inconsistent or incomplete run configuration.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Statistic undefined for the given sample (single-class golds, constant input).
struct DegenerateError : std::domain_error {
  using std::domain_error::domain_error;
};

}  // namespace multilogue
