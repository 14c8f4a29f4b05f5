#pragma once

#include <stdexcept>
#include <string>

namespace upacrl {

/// Malformed or out-of-domain run configuration (CLI exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A model instance failed one of its structural checks (CLI exit code 4).
class CertificationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A runtime invariant of an algorithm was breached (CLI exit code 3).
class InvariantViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Round-off corrupted a quantity that must be nonnegative, and recomputing
/// from scratch did not repair it.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace upacrl
