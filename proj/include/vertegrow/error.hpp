#pragma once

#include <stdexcept>
#include <string>

namespace vertegrow {

/// Base class for every error raised by the library. Anything derived from
/// this is a problem with the caller's data, not an internal fault.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or unsupported file contents.
class FormatError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

/// Seeds missing or inconsistent with what an operation needs.
class SeedError : public Error {
public:
    using Error::Error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

} // namespace vertegrow
