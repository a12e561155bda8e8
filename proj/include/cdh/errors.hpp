#pragma once

#include <stdexcept>
#include <string>

namespace cdh {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct LevelMismatch : Error {
  using Error::Error;
};
struct DimensionMismatch : Error {
  using Error::Error;
};
struct DivisionByZero : Error {
  using Error::Error;
};
struct DomainError : Error {
  using Error::Error;
};
struct AmbiguousBranch : Error {
  using Error::Error;
};
struct UnsupportedLevel : Error {
  using Error::Error;
};
struct Unsupported : Error {
  using Error::Error;
};
struct SingularKernel : Error {
  using Error::Error;
};
struct ConvergenceError : Error {
  using Error::Error;
};
struct MalformedIntegrand : Error {
  using Error::Error;
};
struct IllConditioned : Error {
  using Error::Error;
};
struct ParseError : Error {
  using Error::Error;
};

}  // namespace cdh
