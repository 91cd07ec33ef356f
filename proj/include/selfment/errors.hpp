#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace selfment {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An argument or value violates a documented invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A file does not follow its on-disk layout.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}
  explicit FormatError(const std::string& what) : Error(what) {}

  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_ = 0;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// The input is well-formed but numerically degenerate (zero-norm patch,
/// single-class mask, fewer than two nodes, ...).
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double best_residual)
      : Error(what), best_residual_(best_residual) {}

  double best_residual() const { return best_residual_; }

 private:
  double best_residual_;
};

}  // namespace selfment
