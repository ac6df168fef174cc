#pragma once

#include <stdexcept>
#include <string>

namespace cmggib {

// Schema violation while reading a structured-text record.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A structurally well-formed record that breaks a data invariant.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Missing region, out-of-range span and similar shape problems at embedding time.
class StructuralError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericDomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Caller broke a precondition (wrong label index, non-edge gate, length mismatch).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace cmggib
