#pragma once

// MiniLang: a small imperative language compiled to StackIR.
//
//   var limit: int = 200000;          // global scalar (literal initializer)
//   array key: int[16];               // zero-initialized global array
//   fn f(x: int, y: float): bool {    // `: type` omitted means void
//     var t: int = x + 1;             // function-scoped local
//     s1: if (t >= limit || y < 0.5) { return true; }
//     while (t > 0) { t = t - 1; }
//     key[t] = 3;
//     return false;
//   }
//
// A statement may carry a `label:` prefix; the label is attached to the
// first instruction generated for that statement.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ucov/ir.hpp"

namespace ucov::minilang {

struct Pos {
  int line = 0;
  int column = 0;
};

struct Expr {
  enum class Kind { IntLit, FloatLit, BoolLit, Name, Index, Call, Unary, Binary };
  Kind kind = Kind::IntLit;
  Pos pos;
  std::int64_t int_value = 0;
  double float_value = 0.0;
  bool bool_value = false;
  /// Variable, array, callee; operator spelling for Unary/Binary.
  std::string name;
  std::vector<Expr> args;
};

struct Stmt {
  enum class Kind { VarDecl, Assign, AssignIndex, If, While, Return, ExprStmt, Block };
  Kind kind = Kind::Block;
  Pos pos;
  std::optional<std::string> label;
  std::string name;        // VarDecl / Assign / AssignIndex target
  Type decl_type = Type::Int;
  /// VarDecl: [init]; Assign: [value]; AssignIndex: [index, value];
  /// If/While: [cond]; Return: [value?]; ExprStmt: [call].
  std::vector<Expr> exprs;
  std::vector<Stmt> body;
  std::vector<Stmt> else_body;
  bool has_else = false;
};

struct FnDecl {
  Pos pos;
  std::string name;
  std::vector<Var> params;
  Type ret = Type::Void;
  std::vector<Stmt> body;
};

struct GlobalDecl {
  Pos pos;
  std::string name;
  Type type = Type::Int;
  bool is_array = false;
  std::uint32_t length = 0;
  Value init = std::int64_t{0};
};

struct SourceUnit {
  std::vector<GlobalDecl> globals;
  std::vector<FnDecl> functions;
};

/// Throws SyntaxError with line/column.
SourceUnit parse_source(std::string_view text);

/// Type-checks and generates code. Throws TypeError / UndeclaredName /
/// Structure errors with source positions.
ProgramModule compile(const SourceUnit &unit);

inline ProgramModule compile_source(std::string_view text) { return compile(parse_source(text)); }

} // namespace ucov::minilang
