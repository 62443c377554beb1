#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace trustagg {

/// Failure categories. The numeric value doubles as the CLI exit code.
enum class ErrorKind : int {
  config = 2,
  data = 3,
  numeric = 4,
  verification = 5,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  int exit_code() const noexcept { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorKind::config, what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorKind::data, what) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(ErrorKind::numeric, what) {}
};

/// Malformed CSV input. Rows are 1-based file lines (the header is row 1);
/// columns are 0-based positions.
class CsvError : public DataError {
 public:
  enum class Reason {
    empty_file,
    missing_column,
    ragged_row,
    non_numeric,
    non_finite,
    bad_label,
  };

  CsvError(Reason reason, std::size_t row, std::size_t column, const std::string& what)
      : DataError(what), reason_(reason), row_(row), column_(column) {}

  Reason reason() const noexcept { return reason_; }
  std::size_t row() const noexcept { return row_; }
  std::size_t column() const noexcept { return column_; }

 private:
  Reason reason_;
  std::size_t row_;
  std::size_t column_;
};

}  // namespace trustagg
