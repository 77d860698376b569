#ifndef PERFEXP_ERROR_HPP
#define PERFEXP_ERROR_HPP

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace perfexp {

enum class ErrorKind {
  parse,
  validation,
  size,
  degenerate_performance,
  coverage,
  empty_melody,
  configuration,
  training,
  model,
  combination,
  domain,
  shape,
  divergence,
  undefined_metric,
  undefined_test,
  io,
  usage,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
  case ErrorKind::parse: return "parse";
  case ErrorKind::validation: return "validation";
  case ErrorKind::size: return "size";
  case ErrorKind::degenerate_performance: return "degenerate_performance";
  case ErrorKind::coverage: return "coverage";
  case ErrorKind::empty_melody: return "empty_melody";
  case ErrorKind::configuration: return "configuration";
  case ErrorKind::training: return "training";
  case ErrorKind::model: return "model";
  case ErrorKind::combination: return "combination";
  case ErrorKind::domain: return "domain";
  case ErrorKind::shape: return "shape";
  case ErrorKind::divergence: return "divergence";
  case ErrorKind::undefined_metric: return "undefined_metric";
  case ErrorKind::undefined_test: return "undefined_test";
  case ErrorKind::io: return "io";
  case ErrorKind::usage: return "usage";
  }
  return "unknown";
}

// Base of every error thrown by the library. kind() is what the CLI reports
// in its machine-readable error record.
class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string &msg)
      : std::runtime_error(msg), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

class ParseError : public Error {
public:
  ParseError(const std::string &msg, std::size_t line, std::size_t column,
             std::size_t offset)
      : Error(ErrorKind::parse, msg), line_(line), column_(column),
        offset_(offset) {}
  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }
  std::size_t offset() const noexcept { return offset_; }

private:
  std::size_t line_, column_, offset_;
};

class ValidationError : public Error {
public:
  ValidationError(const std::string &piece_id, const std::string &field,
                  const std::string &msg)
      : Error(ErrorKind::validation,
              "piece '" + piece_id + "', " + field + ": " + msg),
        piece_id_(piece_id), field_(field) {}
  const std::string &piece_id() const noexcept { return piece_id_; }
  const std::string &field() const noexcept { return field_; }

private:
  std::string piece_id_, field_;
};

class DivergenceError : public Error {
public:
  explicit DivergenceError(int epoch)
      : Error(ErrorKind::divergence,
              "non-finite loss at epoch " + std::to_string(epoch)),
        epoch_(epoch) {}
  int epoch() const noexcept { return epoch_; }

private:
  int epoch_;
};

} // namespace perfexp

#endif
