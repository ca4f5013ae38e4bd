#pragma once

#include <stdexcept>
#include <string>

namespace pbandit {

// Invalid parameters supplied by the caller (bad config file, B > T, delta > 1/A, ...).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Argument outside a function's mathematical domain.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Iterative routine failed to converge.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Violation of the round/feedback protocol (out-of-order queries, double delivery).
class ProtocolError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Input does not satisfy a documented precondition of a construction.
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A simulated learner asked for feedback the simulator could not have had.
class IntegrityError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace pbandit
