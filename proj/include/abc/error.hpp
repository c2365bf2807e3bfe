#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace abc {

/// 1-based location of a diagnostic inside a source document. A default
/// constructed span (line 0) means "no location available".
struct SourceSpan {
  std::size_t line = 0;
  std::size_t column = 0;
  std::size_t length = 0;

  bool valid() const { return line > 0; }
  std::string str() const {
    if (!valid()) return "<unknown>";
    return std::to_string(line) + ":" + std::to_string(column);
  }
  bool operator==(const SourceSpan&) const = default;
};

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Contract document diagnostics

class ParseError : public Error {
 public:
  ParseError(const std::string& kind, const std::string& message, SourceSpan span)
      : Error(kind + " at " + span.str() + ": " + message),
        kind_(kind),
        message_(message),
        span_(span) {}

  const std::string& kind() const { return kind_; }
  const std::string& message() const { return message_; }
  const SourceSpan& span() const { return span_; }

 private:
  std::string kind_;
  std::string message_;
  SourceSpan span_;
};

class SyntaxError : public ParseError {
 public:
  SyntaxError(const std::string& message, SourceSpan span) : ParseError("SyntaxError", message, span) {}
};

class SchemaError : public ParseError {
 public:
  SchemaError(const std::string& message, SourceSpan span) : ParseError("SchemaError", message, span) {}
};

class SemanticError : public ParseError {
 public:
  SemanticError(const std::string& message, SourceSpan span) : ParseError("SemanticError", message, span) {}
};

// ---------------------------------------------------------------------------
// Expression language

class ExprError : public Error {
 public:
  ExprError(const std::string& what, std::size_t column) : Error(what), column_(column) {}
  std::size_t column() const { return column_; }

 private:
  std::size_t column_;
};

class ExprSyntaxError : public ExprError {
 public:
  using ExprError::ExprError;
};

class ForbiddenConstruct : public ExprError {
 public:
  using ExprError::ExprError;
};

// Raised while evaluating a predicate against a state. Never escapes
// constraint evaluation: the engine turns these into violations.
class EvalError : public Error {
 public:
  using Error::Error;
};

class FieldResolutionError : public EvalError {
 public:
  explicit FieldResolutionError(const std::string& path)
      : EvalError("field '" + path + "' does not resolve"), path_(path) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

class TypeMismatch : public EvalError {
 public:
  using EvalError::EvalError;
};

// ---------------------------------------------------------------------------
// Numeric and runtime errors

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

class NotNormalized : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

class EmptyInput : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

class ZeroBaseline : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

class ZeroSeverity : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

class InvalidStep : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

class EmptyEnsemble : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

class InsufficientSamples : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

class BadBoundaries : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

class DegenerateInput : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

class AlreadyDecided : public Error {
 public:
  using Error::Error;
};

class SessionTerminated : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class DanglingConstraintRef : public FormatError {
 public:
  using FormatError::FormatError;
};

}  // namespace abc
