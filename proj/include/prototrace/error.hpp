#pragma once

#include <stdexcept>
#include <string>

namespace prototrace {

/// Base for every data or validation failure raised by the library.
/// The command-line driver maps these to exit status 2.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed or unreadable input file.
class LoadError : public Error {
public:
  using Error::Error;
};

/// Vector or model dimensions that do not line up.
class DimensionError : public Error {
public:
  using Error::Error;
};

/// Argument outside an operation's domain (empty set, bad count, unknown id).
class InvalidArgument : public Error {
public:
  using Error::Error;
};

}  // namespace prototrace
