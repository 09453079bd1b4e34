#include "ucov/ir.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <sstream>

namespace ucov {

std::string_view error_kind_name(ErrorKind k) {
  switch (k) {
  case ErrorKind::Syntax: return "SyntaxError";
  case ErrorKind::Type: return "TypeError";
  case ErrorKind::UndeclaredName: return "UndeclaredName";
  case ErrorKind::Asm: return "AsmError";
  case ErrorKind::StackDiscipline: return "StackDisciplineError";
  case ErrorKind::Format: return "FormatError";
  case ErrorKind::Structure: return "StructureError";
  case ErrorKind::UnknownLabel: return "UnknownLabel";
  case ErrorKind::NotALeader: return "NotALeader";
  case ErrorKind::NotAnEdge: return "NotAnEdge";
  case ErrorKind::NotADefSite: return "NotADefSite";
  case ErrorKind::NotAUseSite: return "NotAUseSite";
  case ErrorKind::Scope: return "ScopeError";
  case ErrorKind::UnknownFunction: return "UnknownFunction";
  case ErrorKind::UnknownVariable: return "UnknownVariable";
  case ErrorKind::UnreachableExit: return "UnreachableExit";
  case ErrorKind::OutOfOrderEvent: return "OutOfOrderEvent";
  case ErrorKind::Io: return "IoError";
  case ErrorKind::Usage: return "UsageError";
  }
  return "Error";
}

static std::string compose(ErrorKind kind, const std::string &message, int line, int column) {
  std::ostringstream os;
  os << error_kind_name(kind);
  if (line > 0) {
    os << " at " << line;
    if (column > 0)
      os << ':' << column;
  }
  os << ": " << message;
  return os.str();
}

Error::Error(ErrorKind kind, std::string message, int line, int column)
    : std::runtime_error(compose(kind, message, line, column)), kind_(kind),
      message_(std::move(message)), line_(line), column_(column) {}

std::string_view type_name(Type t) {
  switch (t) {
  case Type::Int: return "int";
  case Type::Float: return "float";
  case Type::Bool: return "bool";
  case Type::Void: return "void";
  }
  return "?";
}

std::optional<Type> parse_type(std::string_view s) {
  if (s == "int") return Type::Int;
  if (s == "float") return Type::Float;
  if (s == "bool") return Type::Bool;
  if (s == "void") return Type::Void;
  return std::nullopt;
}

Type type_of(const Value &v) {
  switch (v.index()) {
  case 0: return Type::Int;
  case 1: return Type::Float;
  default: return Type::Bool;
  }
}

std::string format_float(double d) {
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), d);
  std::string s(buf.data(), end);
  // Keep a float literal recognisable as such.
  if (std::isfinite(d) && s.find_first_of(".eE") == std::string::npos)
    s += ".0";
  return s;
}

std::string format_value(const Value &v) {
  if (auto i = std::get_if<std::int64_t>(&v))
    return std::to_string(*i);
  if (auto d = std::get_if<double>(&v))
    return format_float(*d) + "f";
  return std::get<bool>(v) ? "true" : "false";
}

namespace {

struct OpcodeRow {
  Opcode op;
  OpcodeInfo info;
};

constexpr OperandKind N = OperandKind::None;

const std::array kOpcodes = {
    OpcodeRow{Opcode::ConstI, {"const.i", OperandKind::Int}},
    OpcodeRow{Opcode::ConstF, {"const.f", OperandKind::Float}},
    OpcodeRow{Opcode::ConstB, {"const.b", OperandKind::Bool}},
    OpcodeRow{Opcode::Load, {"load", OperandKind::Local}},
    OpcodeRow{Opcode::GLoad, {"gload", OperandKind::Global}},
    OpcodeRow{Opcode::Store, {"store", OperandKind::Local}},
    OpcodeRow{Opcode::GStore, {"gstore", OperandKind::Global}},
    OpcodeRow{Opcode::ALoad, {"aload", OperandKind::Array}},
    OpcodeRow{Opcode::AStore, {"astore", OperandKind::Array}},
    OpcodeRow{Opcode::AddI, {"add.i", N}},
    OpcodeRow{Opcode::SubI, {"sub.i", N}},
    OpcodeRow{Opcode::MulI, {"mul.i", N}},
    OpcodeRow{Opcode::DivI, {"div.i", N}},
    OpcodeRow{Opcode::ModI, {"mod.i", N}},
    OpcodeRow{Opcode::AddF, {"add.f", N}},
    OpcodeRow{Opcode::SubF, {"sub.f", N}},
    OpcodeRow{Opcode::MulF, {"mul.f", N}},
    OpcodeRow{Opcode::DivF, {"div.f", N}},
    OpcodeRow{Opcode::NegI, {"neg.i", N}},
    OpcodeRow{Opcode::NegF, {"neg.f", N}},
    OpcodeRow{Opcode::CmpEqI, {"cmp.eq.i", N}},
    OpcodeRow{Opcode::CmpNeI, {"cmp.ne.i", N}},
    OpcodeRow{Opcode::CmpLtI, {"cmp.lt.i", N}},
    OpcodeRow{Opcode::CmpLeI, {"cmp.le.i", N}},
    OpcodeRow{Opcode::CmpGtI, {"cmp.gt.i", N}},
    OpcodeRow{Opcode::CmpGeI, {"cmp.ge.i", N}},
    OpcodeRow{Opcode::CmpEqF, {"cmp.eq.f", N}},
    OpcodeRow{Opcode::CmpNeF, {"cmp.ne.f", N}},
    OpcodeRow{Opcode::CmpLtF, {"cmp.lt.f", N}},
    OpcodeRow{Opcode::CmpLeF, {"cmp.le.f", N}},
    OpcodeRow{Opcode::CmpGtF, {"cmp.gt.f", N}},
    OpcodeRow{Opcode::CmpGeF, {"cmp.ge.f", N}},
    OpcodeRow{Opcode::CmpEqB, {"cmp.eq.b", N}},
    OpcodeRow{Opcode::CmpNeB, {"cmp.ne.b", N}},
    OpcodeRow{Opcode::Not, {"not", N}},
    OpcodeRow{Opcode::I2F, {"i2f", N}},
    OpcodeRow{Opcode::F2I, {"f2i", N}},
    OpcodeRow{Opcode::Brt, {"brt", OperandKind::Target}},
    OpcodeRow{Opcode::Brf, {"brf", OperandKind::Target}},
    OpcodeRow{Opcode::Jmp, {"jmp", OperandKind::Target}},
    OpcodeRow{Opcode::Call, {"call", OperandKind::Callee}},
    OpcodeRow{Opcode::Intr, {"intr", OperandKind::Intrinsic}},
    OpcodeRow{Opcode::Ret, {"ret", N}},
};

} // namespace

const OpcodeInfo &opcode_info(Opcode op) {
  return kOpcodes[static_cast<std::size_t>(op)].info;
}

std::optional<Opcode> parse_opcode(std::string_view mnemonic) {
  for (const auto &row : kOpcodes)
    if (row.info.mnemonic == mnemonic)
      return row.op;
  return std::nullopt;
}

std::map<std::string, std::uint32_t> Function::labels() const {
  std::map<std::string, std::uint32_t> out;
  for (std::uint32_t i = 0; i < code.size(); ++i)
    if (code[i].label)
      out.emplace(*code[i].label, i);
  return out;
}

std::optional<std::uint32_t> Function::find_label(std::string_view label) const {
  for (std::uint32_t i = 0; i < code.size(); ++i)
    if (code[i].label && *code[i].label == label)
      return i;
  return std::nullopt;
}

const Var *Function::find_local(std::string_view n) const {
  for (const auto &p : params)
    if (p.name == n)
      return &p;
  for (const auto &l : locals)
    if (l.name == n)
      return &l;
  return nullptr;
}

const Function *ProgramModule::find_function(std::string_view n) const {
  for (const auto &f : functions)
    if (f.name == n)
      return &f;
  return nullptr;
}

const GlobalScalar *ProgramModule::find_global(std::string_view n) const {
  for (const auto &g : globals)
    if (g.name == n)
      return &g;
  return nullptr;
}

const GlobalArray *ProgramModule::find_array(std::string_view n) const {
  for (const auto &a : arrays)
    if (a.name == n)
      return &a;
  return nullptr;
}

std::string format_varref(const VarRef &v) {
  switch (v.kind) {
  case VarRef::Kind::Local: return "local " + v.fn + "." + v.name;
  case VarRef::Kind::Global: return "global " + v.name;
  case VarRef::Kind::Array: return "array " + v.name;
  }
  return {};
}

std::optional<VarRef> referenced_var(const Function &fn, const Instruction &ins) {
  switch (ins.op) {
  case Opcode::Load:
  case Opcode::Store: return VarRef{VarRef::Kind::Local, fn.name, ins.name};
  case Opcode::GLoad:
  case Opcode::GStore: return VarRef{VarRef::Kind::Global, {}, ins.name};
  case Opcode::ALoad:
  case Opcode::AStore: return VarRef{VarRef::Kind::Array, {}, ins.name};
  default: return std::nullopt;
  }
}

} // namespace ucov
