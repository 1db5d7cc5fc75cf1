#ifndef SEMPARSE_ERRORS_HPP
#define SEMPARSE_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace semparse {

// Malformed input: logical forms, corpus files, model dumps, bad arguments
// to data-level operations.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite values during training or factorization.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace semparse

#endif
