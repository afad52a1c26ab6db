#pragma once

#include <stdexcept>
#include <string>

namespace microtube {

/// Bad configuration file or violated parameter invariant.
class ConfigError : public std::runtime_error {
public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed or inconsistent input data (profiles, CSV rows).
class DataError : public std::runtime_error {
public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
public:
  explicit DomainError(const std::string& what) : std::domain_error(what) {}
};

/// A constraint that must hold by construction was violated beyond tolerance.
class ConstraintViolation : public std::runtime_error {
public:
  explicit ConstraintViolation(const std::string& what) : std::runtime_error(what) {}
};

/// An optimization problem has an empty feasible set.
class InfeasibleError : public std::runtime_error {
public:
  explicit InfeasibleError(const std::string& what) : std::runtime_error(what) {}
};

/// The embedded solver failed to produce a usable answer.
class SolverError : public std::runtime_error {
public:
  explicit SolverError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace microtube
