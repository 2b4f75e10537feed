#pragma once

#include <stdexcept>
#include <string>

namespace tag {

/// Base of every error raised by the engine. The CLI maps the concrete
/// subclass onto a process exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Missing or unusable input (paths, shapes, non-finite values).
class InputError : public Error {
 public:
  using Error::Error;
};

/// A file that exists but does not follow its declared layout.
class FormatError : public Error {
 public:
  FormatError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)) {}

  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

/// Two files that should describe the same rows disagree on the row count.
class AlignmentError : public FormatError {
 public:
  AlignmentError(std::size_t records, std::size_t rows)
      : FormatError("alignment", std::to_string(records) + " records but " +
                                     std::to_string(rows) + " embedding rows"),
        records_(records),
        rows_(rows) {}

  std::size_t records() const { return records_; }
  std::size_t rows() const { return rows_; }

 private:
  std::size_t records_;
  std::size_t rows_;
};

/// A numeric knob outside its admissible range.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Raised by the evaluator when a word has no sentence embedding.
class EvaluationError : public InputError {
 public:
  explicit EvaluationError(std::string word)
      : InputError("no sentence embedding for '" + word + "'"),
        word_(std::move(word)) {}

  const std::string& word() const { return word_; }

 private:
  std::string word_;
};

/// Broken internal invariant; never expected on valid inputs.
class InternalError : public Error {
 public:
  using Error::Error;
};

}  // namespace tag
