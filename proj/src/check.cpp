#include "ucov/check.hpp"

#include <algorithm>
#include <set>
#include <string>

namespace ucov {

std::vector<std::uint32_t> leaders(const Function &fn) {
  std::set<std::uint32_t> out;
  if (fn.code.empty())
    return {};
  out.insert(0);
  for (std::uint32_t i = 0; i < fn.code.size(); ++i) {
    const auto &ins = fn.code[i];
    if (is_jump(ins.op))
      out.insert(ins.target);
    if ((is_jump(ins.op) || ins.op == Opcode::Ret) && i + 1 < fn.code.size())
      out.insert(i + 1);
  }
  return {out.begin(), out.end()};
}

int stack_pops(const ProgramModule &module, const Function &fn, const Instruction &ins) {
  switch (ins.op) {
  case Opcode::ConstI: case Opcode::ConstF: case Opcode::ConstB:
  case Opcode::Load: case Opcode::GLoad: case Opcode::Jmp:
    return 0;
  case Opcode::Store: case Opcode::GStore: case Opcode::ALoad:
  case Opcode::NegI: case Opcode::NegF: case Opcode::Not:
  case Opcode::I2F: case Opcode::F2I: case Opcode::Brt: case Opcode::Brf:
  case Opcode::Intr:
    return 1;
  case Opcode::Call: {
    const Function *callee = module.find_function(ins.name);
    return callee ? static_cast<int>(callee->params.size()) : 0;
  }
  case Opcode::Ret:
    return fn.ret == Type::Void ? 0 : 1;
  default:
    return 2; // astore, binary arithmetic, comparisons
  }
}

int stack_pushes(const ProgramModule &module, const Instruction &ins) {
  switch (ins.op) {
  case Opcode::Store: case Opcode::GStore: case Opcode::AStore:
  case Opcode::Brt: case Opcode::Brf: case Opcode::Jmp: case Opcode::Ret:
    return 0;
  case Opcode::Call: {
    const Function *callee = module.find_function(ins.name);
    return callee && callee->ret != Type::Void ? 1 : 0;
  }
  case Opcode::Intr:
    return ins.name == "print" ? 0 : 1;
  default:
    return 1;
  }
}

namespace {

struct Slot {
  std::uint32_t producer;
  Type type;
};

[[noreturn]] void stack_error(const Function &fn, std::uint32_t off, const std::string &what) {
  throw Error(ErrorKind::StackDiscipline,
              "function '" + fn.name + "' offset " + std::to_string(off) + ": " + what);
}

[[noreturn]] void type_error(const Function &fn, std::uint32_t off, const std::string &what) {
  throw Error(ErrorKind::Type,
              "function '" + fn.name + "' offset " + std::to_string(off) + ": " + what);
}

// Operand types popped (in push order) and the pushed type, if any.
struct Signature {
  std::vector<Type> pops;
  std::optional<Type> push = std::nullopt;
};

Signature signature_of(const ProgramModule &module, const Function &fn, const Instruction &ins) {
  using T = Type;
  auto local_type = [&]() {
    const Var *v = fn.find_local(ins.name);
    return v ? v->type : T::Void;
  };
  auto global_type = [&]() {
    const GlobalScalar *g = module.find_global(ins.name);
    return g ? g->type : T::Void;
  };
  auto elem_type = [&]() {
    const GlobalArray *a = module.find_array(ins.name);
    return a ? a->elem : T::Void;
  };
  switch (ins.op) {
  case Opcode::ConstI: return {{}, T::Int};
  case Opcode::ConstF: return {{}, T::Float};
  case Opcode::ConstB: return {{}, T::Bool};
  case Opcode::Load: return {{}, local_type()};
  case Opcode::GLoad: return {{}, global_type()};
  case Opcode::Store: return {{local_type()}, std::nullopt};
  case Opcode::GStore: return {{global_type()}, std::nullopt};
  case Opcode::ALoad: return {{T::Int}, elem_type()};
  case Opcode::AStore: return {{T::Int, elem_type()}, std::nullopt};
  case Opcode::AddI: case Opcode::SubI: case Opcode::MulI: case Opcode::DivI: case Opcode::ModI:
    return {{T::Int, T::Int}, T::Int};
  case Opcode::AddF: case Opcode::SubF: case Opcode::MulF: case Opcode::DivF:
    return {{T::Float, T::Float}, T::Float};
  case Opcode::NegI: return {{T::Int}, T::Int};
  case Opcode::NegF: return {{T::Float}, T::Float};
  case Opcode::CmpEqI: case Opcode::CmpNeI: case Opcode::CmpLtI:
  case Opcode::CmpLeI: case Opcode::CmpGtI: case Opcode::CmpGeI:
    return {{T::Int, T::Int}, T::Bool};
  case Opcode::CmpEqF: case Opcode::CmpNeF: case Opcode::CmpLtF:
  case Opcode::CmpLeF: case Opcode::CmpGtF: case Opcode::CmpGeF:
    return {{T::Float, T::Float}, T::Bool};
  case Opcode::CmpEqB: case Opcode::CmpNeB: return {{T::Bool, T::Bool}, T::Bool};
  case Opcode::Not: return {{T::Bool}, T::Bool};
  case Opcode::I2F: return {{T::Int}, T::Float};
  case Opcode::F2I: return {{T::Float}, T::Int};
  case Opcode::Brt: case Opcode::Brf: return {{T::Bool}, std::nullopt};
  case Opcode::Jmp: return {};
  case Opcode::Call: {
    Signature s;
    const Function *callee = module.find_function(ins.name);
    if (!callee)
      return s;
    for (const auto &p : callee->params)
      s.pops.push_back(p.type);
    if (callee->ret != T::Void)
      s.push = callee->ret;
    return s;
  }
  case Opcode::Intr:
    if (ins.name == "print")
      return {{T::Void}, std::nullopt}; // any scalar
    return {{T::Float}, T::Float};
  case Opcode::Ret:
    if (fn.ret == T::Void)
      return {};
    return {{fn.ret}, std::nullopt};
  }
  return {};
}

} // namespace

StackInfo analyze_stack(const ProgramModule &module, const Function &fn) {
  StackInfo info;
  const auto n = static_cast<std::uint32_t>(fn.code.size());
  info.consumer.assign(n, -1);
  info.operands.assign(n, {});
  auto lead = leaders(fn);
  std::vector<bool> is_leader(n, false);
  for (auto l : lead)
    is_leader[l] = true;

  std::vector<Slot> stack;
  for (std::uint32_t i = 0; i < n; ++i) {
    if (is_leader[i] && !stack.empty())
      stack_error(fn, stack.back().producer, "value pushed here is never consumed");
    const auto &ins = fn.code[i];
    Signature sig = signature_of(module, fn, ins);
    if (stack.size() < sig.pops.size())
      stack_error(fn, i, "operand stack underflow");
    const std::size_t base = stack.size() - sig.pops.size();
    for (std::size_t k = 0; k < sig.pops.size(); ++k) {
      const Slot &slot = stack[base + k];
      if (sig.pops[k] != Type::Void && slot.type != sig.pops[k])
        type_error(fn, i,
                   std::string(opcode_info(ins.op).mnemonic) + " expects " +
                       std::string(type_name(sig.pops[k])) + " operand, got " +
                       std::string(type_name(slot.type)));
      info.consumer[slot.producer] = static_cast<std::int32_t>(i);
      info.operands[i].push_back(slot.producer);
    }
    stack.resize(base);
    if (sig.push) {
      if (*sig.push == Type::Void)
        type_error(fn, i, "operand has no value type");
      stack.push_back({i, *sig.push});
    }
  }
  if (!stack.empty())
    stack_error(fn, stack.back().producer, "value pushed here is never consumed");
  return info;
}

namespace {

void check_names(const ProgramModule &module) {
  std::set<std::string> seen;
  auto claim = [&](const std::string &name) {
    if (name.empty())
      throw Error(ErrorKind::Structure, "empty name");
    if (!seen.insert(name).second)
      throw Error(ErrorKind::Structure, "duplicate module-level name '" + name + "'");
  };
  for (const auto &g : module.globals) {
    claim(g.name);
    if (g.type == Type::Void || type_of(g.init) != g.type)
      throw Error(ErrorKind::Type, "global '" + g.name + "' initial value has the wrong type");
  }
  for (const auto &a : module.arrays) {
    claim(a.name);
    if (a.elem == Type::Void)
      throw Error(ErrorKind::Type, "array '" + a.name + "' has void elements");
  }
  for (const auto &f : module.functions)
    claim(f.name);
}

void check_function_shape(const ProgramModule &module, const Function &fn) {
  std::set<std::string> names;
  for (const auto *vars : {&fn.params, &fn.locals})
    for (const auto &v : *vars) {
      if (v.type == Type::Void)
        throw Error(ErrorKind::Type, "variable '" + v.name + "' in '" + fn.name + "' is void");
      if (!names.insert(v.name).second)
        throw Error(ErrorKind::Structure,
                    "duplicate local '" + v.name + "' in function '" + fn.name + "'");
    }
  if (fn.code.empty())
    throw Error(ErrorKind::Structure, "function '" + fn.name + "' has no instructions");
  std::set<std::string> labels;
  const auto n = fn.code.size();
  for (std::uint32_t i = 0; i < n; ++i) {
    const auto &ins = fn.code[i];
    auto where = [&] { return "function '" + fn.name + "' offset " + std::to_string(i) + ": "; };
    if (ins.label && !labels.insert(*ins.label).second)
      throw Error(ErrorKind::Structure, where() + "duplicate label '" + *ins.label + "'");
    switch (opcode_info(ins.op).operand) {
    case OperandKind::Local:
      if (!fn.find_local(ins.name))
        throw Error(ErrorKind::UndeclaredName, where() + "unknown local '" + ins.name + "'");
      break;
    case OperandKind::Global:
      if (!module.find_global(ins.name))
        throw Error(ErrorKind::UndeclaredName, where() + "unknown global '" + ins.name + "'");
      break;
    case OperandKind::Array:
      if (!module.find_array(ins.name))
        throw Error(ErrorKind::UndeclaredName, where() + "unknown array '" + ins.name + "'");
      break;
    case OperandKind::Callee:
      if (!module.find_function(ins.name))
        throw Error(ErrorKind::UndeclaredName, where() + "unknown function '" + ins.name + "'");
      break;
    case OperandKind::Intrinsic:
      if (ins.name != "log" && ins.name != "sqrt" && ins.name != "print")
        throw Error(ErrorKind::UndeclaredName, where() + "unknown intrinsic '" + ins.name + "'");
      break;
    case OperandKind::Target:
      if (ins.target >= n)
        throw Error(ErrorKind::Structure, where() + "jump target out of range");
      break;
    default:
      break;
    }
  }
  if (!ends_flow(fn.code.back().op))
    throw Error(ErrorKind::Structure,
                "function '" + fn.name + "' falls through past its last instruction");
}

// Every instruction must be able to reach a `ret`.
void check_termination(const Function &fn) {
  const auto n = static_cast<std::uint32_t>(fn.code.size());
  std::vector<std::vector<std::uint32_t>> preds(n);
  std::vector<std::uint32_t> work;
  std::vector<bool> reaches(n, false);
  for (std::uint32_t i = 0; i < n; ++i) {
    const auto &ins = fn.code[i];
    if (ins.op == Opcode::Ret) {
      reaches[i] = true;
      work.push_back(i);
      continue;
    }
    if (is_jump(ins.op))
      preds[ins.target].push_back(i);
    if (!ends_flow(ins.op) && i + 1 < n)
      preds[i + 1].push_back(i);
  }
  while (!work.empty()) {
    auto i = work.back();
    work.pop_back();
    for (auto p : preds[i])
      if (!reaches[p]) {
        reaches[p] = true;
        work.push_back(p);
      }
  }
  for (std::uint32_t i = 0; i < n; ++i)
    if (!reaches[i])
      throw Error(ErrorKind::UnreachableExit, "function '" + fn.name + "' offset " +
                                                  std::to_string(i) + " cannot reach a ret");
}

} // namespace

void check_module(const ProgramModule &module) {
  check_names(module);
  for (const auto &fn : module.functions) {
    check_function_shape(module, fn);
    analyze_stack(module, fn);
    check_termination(fn);
  }
}

} // namespace ucov
