#pragma once

#include <stdexcept>
#include <string>

namespace mfscale {

// Input outside the physical or mathematical domain of an operation.
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

// Bad or inconsistent configuration (mesh bounds, sweep config, CLI flags).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Caller broke a shape or size contract.
struct ContractError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct PoolError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ParseError : std::runtime_error {
  ParseError(const std::string& what, long line_number)
      : std::runtime_error(what + " (line " + std::to_string(line_number) + ")"), line(line_number) {}
  long line;
};

}  // namespace mfscale
