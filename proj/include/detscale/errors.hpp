#pragma once

#include <stdexcept>
#include <string>

namespace detscale {

/// Singular block, failed pivot, non-SPD input, rank-deficient regression.
class NumericalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Not-SPD failure raised by the Cholesky paths.
class NotSpdError : public NumericalError {
public:
  using NumericalError::NumericalError;
};

/// Short reads, bad headers, unwritable destinations.
class IoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Arguments outside an operation's defined domain.
class DomainError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace detscale
