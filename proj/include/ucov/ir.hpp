#pragma once

// StackIR: the stack bytecode shared by the compiler, the assembler, the
// interpreter and the analyses.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "ucov/error.hpp"

namespace ucov {

enum class Type { Int, Float, Bool, Void };

std::string_view type_name(Type t);
std::optional<Type> parse_type(std::string_view s);

/// Runtime scalar. Arrays live in global storage, never on the stack.
using Value = std::variant<std::int64_t, double, bool>;

Type type_of(const Value &v);
/// Typed literal text: `42`, `-3`, `2.5f`, `true`. Floats use the shortest
/// round-tripping decimal form.
std::string format_value(const Value &v);
std::string format_float(double d);

enum class Opcode : std::uint8_t {
  ConstI, ConstF, ConstB,
  Load, GLoad, Store, GStore, ALoad, AStore,
  AddI, SubI, MulI, DivI, ModI,
  AddF, SubF, MulF, DivF,
  NegI, NegF,
  CmpEqI, CmpNeI, CmpLtI, CmpLeI, CmpGtI, CmpGeI,
  CmpEqF, CmpNeF, CmpLtF, CmpLeF, CmpGtF, CmpGeF,
  CmpEqB, CmpNeB,
  Not, I2F, F2I,
  Brt, Brf, Jmp,
  Call, Intr, Ret,
};

/// What the single operand of an opcode denotes.
enum class OperandKind { None, Int, Float, Bool, Local, Global, Array, Target, Callee, Intrinsic };

struct OpcodeInfo {
  std::string_view mnemonic;
  OperandKind operand;
};

const OpcodeInfo &opcode_info(Opcode op);
std::optional<Opcode> parse_opcode(std::string_view mnemonic);

inline bool is_conditional(Opcode op) { return op == Opcode::Brt || op == Opcode::Brf; }
inline bool is_jump(Opcode op) { return is_conditional(op) || op == Opcode::Jmp; }
/// Instructions after which control never falls through.
inline bool ends_flow(Opcode op) { return op == Opcode::Jmp || op == Opcode::Ret; }
inline bool is_definition(Opcode op) {
  return op == Opcode::Store || op == Opcode::GStore || op == Opcode::AStore;
}
inline bool is_use(Opcode op) {
  return op == Opcode::Load || op == Opcode::GLoad || op == Opcode::ALoad;
}

struct Instruction {
  Instruction() = default;
  Instruction(Opcode o) : op(o) {}

  Opcode op = Opcode::Ret;
  std::int64_t int_imm = 0;
  double float_imm = 0.0;
  bool bool_imm = false;
  /// Variable, array, callee or intrinsic name.
  std::string name;
  /// Jump target offset.
  std::uint32_t target = 0;
  /// Source-statement label carried as metadata.
  std::optional<std::string> label;

  bool operator==(const Instruction &) const = default;
};

struct Var {
  std::string name;
  Type type = Type::Int;
  bool operator==(const Var &) const = default;
};

struct Function {
  std::string name;
  std::vector<Var> params;
  std::vector<Var> locals;
  Type ret = Type::Void;
  std::vector<Instruction> code;

  /// label -> offset, derived from the instruction annotations.
  std::map<std::string, std::uint32_t> labels() const;
  std::optional<std::uint32_t> find_label(std::string_view label) const;
  /// Params first, then locals.
  const Var *find_local(std::string_view name) const;

  bool operator==(const Function &) const = default;
};

struct GlobalScalar {
  std::string name;
  Type type = Type::Int;
  Value init = std::int64_t{0};
  bool operator==(const GlobalScalar &) const = default;
};

struct GlobalArray {
  std::string name;
  Type elem = Type::Int;
  std::uint32_t length = 0;
  bool operator==(const GlobalArray &) const = default;
};

struct ProgramModule {
  std::vector<GlobalScalar> globals;
  std::vector<GlobalArray> arrays;
  std::vector<Function> functions;

  const Function *find_function(std::string_view name) const;
  const GlobalScalar *find_global(std::string_view name) const;
  const GlobalArray *find_array(std::string_view name) const;

  bool operator==(const ProgramModule &) const = default;
};

/// A variable as seen by requirements, predicates and the event stream.
struct VarRef {
  enum class Kind { Local, Global, Array };
  Kind kind = Kind::Local;
  std::string fn; // Local only
  std::string name;

  bool operator==(const VarRef &) const = default;
  auto operator<=>(const VarRef &) const = default;
};

std::string format_varref(const VarRef &v);

/// The variable an instruction reads or writes, if any.
std::optional<VarRef> referenced_var(const Function &fn, const Instruction &ins);

} // namespace ucov
