#pragma once

#include <stdexcept>
#include <string>

namespace edgesnn {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Tensor or layer dimensions do not line up.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// A value is outside its admissible domain (NaN weight, input outside [0, 1], ...).
class ValueError : public Error {
public:
    using Error::Error;
};

/// The chip model cannot hold the network.
class CapacityError : public Error {
public:
    using Error::Error;
};

/// Bad user input: configuration keys, command-line usage, missing files.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// A file could not be parsed. Carries the file name and line number in the message.
class ParseError : public ConfigError {
public:
    ParseError(const std::string& file, std::size_t line, const std::string& what)
        : ConfigError(file + ":" + std::to_string(line) + ": " + what) {}
    explicit ParseError(const std::string& what) : ConfigError(what) {}
};

} // namespace edgesnn
