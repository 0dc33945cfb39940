#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace roadtex {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Mismatched or out-of-range image dimensions.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// An argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration or scene description.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Degenerate polyline geometry that resampling could not repair.
class GeometryError : public Error {
 public:
  using Error::Error;
};

/// Malformed or unsupported file. `offset()` is the byte position where
/// parsing stopped, or npos when unknown.
class IoError : public Error {
 public:
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  explicit IoError(const std::string& what, std::size_t offset = npos)
      : Error(offset == npos ? what : what + " (at byte " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

}  // namespace roadtex
