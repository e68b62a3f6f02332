#ifndef CSA_ERRORS_HPP
#define CSA_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace csa {

/// Shapes that do not conform for the requested operation.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A documented precondition of an operation was violated by the caller.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Class index outside [0, classes).
class IndexError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Invalid user-facing configuration (unknown names, empty pools, bad ranges).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input files.
class LoadError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Output files or directories that cannot be written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace csa

#endif  // CSA_ERRORS_HPP
