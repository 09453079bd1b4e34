#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ucov {

enum class ErrorKind {
  Syntax,
  Type,
  UndeclaredName,
  Asm,
  StackDiscipline,
  Format,
  Structure,
  UnknownLabel,
  NotALeader,
  NotAnEdge,
  NotADefSite,
  NotAUseSite,
  Scope,
  UnknownFunction,
  UnknownVariable,
  UnreachableExit,
  OutOfOrderEvent,
  Io,
  Usage,
};

std::string_view error_kind_name(ErrorKind k);

/// Every recoverable failure in the toolkit. `line`/`column` are 1-based and
/// zero when no position applies.
class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, std::string message, int line = 0, int column = 0);

  ErrorKind kind() const { return kind_; }
  int line() const { return line_; }
  int column() const { return column_; }
  const std::string &message() const { return message_; }

private:
  ErrorKind kind_;
  std::string message_;
  int line_;
  int column_;
};

} // namespace ucov
