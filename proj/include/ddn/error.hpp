#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace ddn {

using Shape = std::vector<std::size_t>;

std::string to_string(const Shape& shape);

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes disagree; the message names every shape involved.
class ShapeError : public Error {
public:
  using Error::Error;
  ShapeError(const std::string& op, const std::string& what, const Shape& a, const Shape& b);
};

/// A computation produced NaN or Inf from finite inputs.
class NumericError : public Error {
public:
  using Error::Error;
};

/// Training loss became non-finite.
class DivergenceError : public NumericError {
public:
  using NumericError::NumericError;
};

/// Invalid configuration or API misuse (bad extents, empty predicate match, ...).
class ConfigError : public Error {
public:
  using Error::Error;
};

/// Filesystem failure: missing file, unreadable directory, failed write.
class IoError : public Error {
public:
  IoError(const std::string& path, const std::string& what)
      : Error(path + ": " + what), path_(path) {}
  const std::string& path() const noexcept { return path_; }

private:
  std::string path_;
};

/// A file exists but its contents do not parse.
class FormatError : public Error {
public:
  enum class Kind {
    bad_magic,
    unsupported_format,
    bad_header,
    bad_maxval,
    truncated,
    corrupt,
    version_mismatch,
    shape_mismatch,
  };

  FormatError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

private:
  Kind kind_;
};

}  // namespace ddn
