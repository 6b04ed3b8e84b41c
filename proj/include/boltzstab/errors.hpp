#pragma once

#include <stdexcept>
#include <string>

namespace boltzstab {

/// Argument outside the mathematical domain of a function.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Kernel evaluated where it is infinite (e.g. r = 0 with gamma < 0).
class SingularPointError : public DomainError {
 public:
  using DomainError::DomainError;
};

/// Degenerate collision geometry (v == v_star, sigma orthogonal to z, ...).
class DegenerateGeometryError : public DomainError {
 public:
  using DomainError::DomainError;
};

/// Point lies outside the angular support of a map.
class OutOfSupportError : public DomainError {
 public:
  using DomainError::DomainError;
};

/// API misuse that is not a domain question (double symmetrization, bad sizes).
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Invalid or inconsistent configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A check was asked for outside the hypotheses it is stated under.
class InapplicableError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Run stopped by a guard (CFL breach, excessive clipping, non-finite state).
class RunAbort : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace boltzstab
