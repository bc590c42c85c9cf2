#pragma once

#include <stdexcept>
#include <string>

namespace spmseg {

// Base for every error the library raises on bad input.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A parameter or precondition was violated by the caller.
class ParameterError : public Error {
 public:
  using Error::Error;
};

// Input data could not be read, decoded or matched against an expected
// layout (files, manifests, tensor shapes).
class DataError : public Error {
 public:
  using Error::Error;
};

}  // namespace spmseg
