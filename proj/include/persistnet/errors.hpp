#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace persistnet {

/// Root of every error the library raises. Each subclass names one failure
/// mode so callers (and the CLI's exit-code mapping) can dispatch on type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A vector whose Euclidean norm is below the zero-norm epsilon was handed to a
/// cosine computation. Usually means an embedding collapsed during training.
class ZeroNormInput : public Error {
 public:
  using Error::Error;
};

class DimMismatch : public Error {
 public:
  DimMismatch(std::size_t expected, std::size_t actual, const std::string& what)
      : Error(what + ": expected dim " + std::to_string(expected) + ", got " +
              std::to_string(actual)),
        expected_(expected),
        actual_(actual) {}
  explicit DimMismatch(const std::string& what) : Error(what) {}

  std::size_t expected() const noexcept { return expected_; }
  std::size_t actual() const noexcept { return actual_; }

 private:
  std::size_t expected_ = 0;
  std::size_t actual_ = 0;
};

class InsufficientViews : public Error {
 public:
  using Error::Error;
};

class InsufficientObjects : public Error {
 public:
  using Error::Error;
};

class InsufficientCategories : public Error {
 public:
  using Error::Error;
};

class NoValidNegatives : public Error {
 public:
  using Error::Error;
};

class SplitInfeasible : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file. `line()` is 1-based; 0 when the problem is not tied to a line.
class FormatError : public Error {
 public:
  FormatError(std::size_t line, const std::string& what)
      : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class NoRelevant : public Error {
 public:
  using Error::Error;
};

/// Rank statistics on a constant (or too short) sequence.
class DegenerateInput : public Error {
 public:
  using Error::Error;
};

/// Intra-object spread is zero, so the compactness ratio is undefined.
class DegenerateIntra : public Error {
 public:
  using Error::Error;
};

class NonFiniteValue : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace persistnet
