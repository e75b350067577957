#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace periop {

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : Error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class SchemaError : public Error { using Error::Error; };
class IntegrityError : public Error { using Error::Error; };
class SizingError : public Error { using Error::Error; };
class FitError : public Error { using Error::Error; };
class ShapeError : public Error { using Error::Error; };
class UndefinedMetricError : public Error { using Error::Error; };
class AlignmentError : public Error { using Error::Error; };
class ConfigError : public Error { using Error::Error; };

}  // namespace periop
