#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace twin_ident {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller supplied something that violates a documented precondition.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// A text file could not be parsed. `line()` is 1-based; 0 when unknown.
class ParseError : public InvalidInput {
 public:
  ParseError(std::string source, std::size_t line, const std::string& what)
      : InvalidInput(source + ":" + std::to_string(line) + ": " + what),
        source_(std::move(source)),
        line_(line) {}

  const std::string& source() const noexcept { return source_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string source_;
  std::size_t line_;
};

/// Integration diverged or an optimization produced no finite value.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace twin_ident
