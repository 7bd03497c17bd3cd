#pragma once

#include <stdexcept>
#include <string>

namespace deepgnn {

// Bad arguments or violated preconditions (shape mismatch, out-of-range ids).
struct InvalidArgument : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Malformed or inconsistent input files, failed I/O.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Divergence, non-finite values, iteration caps, failed verifications.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace deepgnn
