#pragma once

#include <stdexcept>
#include <string>

namespace lottery {

// Malformed or out-of-contract input (bad file, wrong dimension, bad config).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A numeric procedure could not produce a finite or well-posed result.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Network transfer failed and nothing usable was cached.
class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace lottery
