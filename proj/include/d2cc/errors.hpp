#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace d2cc {

/// Base class of every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input data (bad syntax, inconsistent trees, misaligned corpora).
/// The CLI maps these to exit code 2.
class DataError : public Error {
 public:
  using Error::Error;
};

class ParseError : public DataError {
 public:
  ParseError(const std::string& what, std::size_t position)
      : DataError(what + " (at offset " + std::to_string(position) + ")"),
        position_(position) {}
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

/// A symbol (category, label) is not in the inventory it must belong to.
class VocabularyError : public DataError {
 public:
  using DataError::DataError;
};

/// The decoder exhausted its agenda without reaching a goal item.
class NoParseError : public Error {
 public:
  enum class Cause { Grammar, Constraints, Unknown };
  NoParseError(const std::string& what, Cause cause) : Error(what), cause_(cause) {}
  Cause cause() const { return cause_; }

 private:
  Cause cause_;
};

/// A configured resource limit (item budget) was exceeded.
class ResourceError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace d2cc
