#pragma once

#include <stdexcept>
#include <string>

namespace cmsent {

// Base for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input file (embedding text, TSV dataset, dictionary, checkpoint).
class FormatError : public Error {
 public:
  using Error::Error;
};

// Vector or matrix dimensions that do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration or arguments.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace cmsent
