#pragma once

#include <stdexcept>
#include <string>

namespace nsspectra {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid user-facing configuration: shapes, variances, sweep settings.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

// Input the math is undefined for, e.g. normalizing the zero matrix.
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

// Non-finite data or an iterative kernel that failed to converge.
class NumericError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  IoError(const std::string& path, const std::string& what)
      : Error(path + ": " + what), path_(path) {}

  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

}  // namespace nsspectra
