#pragma once

#include <stdexcept>
#include <string>

namespace roost {

/// Invalid argument to a public operation (bad parameter, out-of-range index).
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An operation was called in a state its contract does not allow.
class PreconditionError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// An MCMC kernel or acceptance computation hit a pathological target.
class KernelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Peers disagreed about the message protocol (unexpected tag, double write).
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A receive waited longer than its epoch timeout.
class DeadlockError : public TransportError {
 public:
  using TransportError::TransportError;
};

/// A foreign-process target returned something that is not a log density.
class EvaluationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TimeoutError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace roost
