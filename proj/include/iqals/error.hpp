#ifndef IQALS_ERROR_HPP
#define IQALS_ERROR_HPP

#include <stdexcept>
#include <string>

namespace iqals {

// Every failure raised by the library derives from Error. The CLI maps the
// three families onto its exit codes (usage 1, data 2, runtime 3).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad configuration or arguments supplied by the caller.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Missing, truncated or corrupt input data.
class DataError : public Error {
 public:
  using Error::Error;
};

// Out-of-range parameter passed to a numeric routine.
class ParameterError : public Error {
 public:
  using Error::Error;
};

// Shape or bookkeeping mismatch inside the network.
class StructuralError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace iqals

#endif  // IQALS_ERROR_HPP
