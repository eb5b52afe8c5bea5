#pragma once

#include <stdexcept>
#include <string>

namespace stcov {

// Numerical failure modes are exceptions; optimizers that probe invalid
// parameter points catch NotPositiveDefinite and map it to a rejection
// sentinel instead of unwinding further.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NotPositiveDefinite : Error {
  using Error::Error;
};

struct NotPositiveSemidefinite : Error {
  using Error::Error;
};

struct DimensionMismatch : Error {
  using Error::Error;
};

struct DomainError : Error {
  using Error::Error;
};

struct SingularDesign : Error {
  using Error::Error;
};

struct IrregularTimeGrid : Error {
  using Error::Error;
};

struct NotLagrangian : Error {
  using Error::Error;
};

struct WrongModel : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

}  // namespace stcov
