#include <map>
#include <set>

#include "ucov/check.hpp"
#include "ucov/minilang.hpp"

namespace ucov::minilang {

namespace {

[[noreturn]] void fail(ErrorKind kind, Pos pos, const std::string &msg) {
  throw Error(kind, msg, pos.line, pos.column);
}

bool is_intrinsic(std::string_view n) { return n == "log" || n == "sqrt" || n == "print"; }
bool is_cast(std::string_view n) { return n == "int" || n == "float"; }
bool is_logical(const Expr &e) {
  return e.kind == Expr::Kind::Binary && (e.name == "&&" || e.name == "||");
}

struct Signature {
  std::vector<Type> params;
  Type ret;
};

class FunctionCompiler {
public:
  FunctionCompiler(const SourceUnit &unit, const std::map<std::string, Signature> &sigs,
                   const FnDecl &decl)
      : unit_(unit), sigs_(sigs), decl_(decl) {
    fn_.name = decl.name;
    fn_.params = decl.params;
    fn_.ret = decl.ret;
    for (const auto &p : decl.params) {
      if (is_reserved(p.name))
        fail(ErrorKind::Structure, decl.pos, "'" + p.name + "' is a reserved name");
      if (!declared_.insert(p.name).second)
        fail(ErrorKind::Structure, decl.pos, "duplicate parameter '" + p.name + "'");
    }
  }

  Function run() {
    bool terminated = statements(decl_.body);
    if (!terminated) {
      if (decl_.ret != Type::Void)
        fail(ErrorKind::Type, decl_.pos, "function '" + decl_.name + "' may end without returning a value");
      emit({Opcode::Ret});
    }
    for (auto &[offset, jump_label] : fixups_)
      fn_.code[offset].target = label_pos_.at(jump_label);
    return std::move(fn_);
  }

private:
  static bool is_reserved(std::string_view n) {
    return parse_type(n).has_value() || is_intrinsic(n);
  }

  // ---- emission helpers ----
  std::uint32_t here() const { return static_cast<std::uint32_t>(fn_.code.size()); }

  void emit(Instruction ins) { fn_.code.push_back(std::move(ins)); }
  void emit_named(Opcode op, std::string name) {
    Instruction ins;
    ins.op = op;
    ins.name = std::move(name);
    emit(std::move(ins));
  }
  int new_label() { return next_label_++; }
  void place(int label) { label_pos_[label] = here(); }
  void emit_jump(Opcode op, int label) {
    fixups_.emplace_back(here(), label);
    emit({op});
  }

  // ---- names ----
  enum class Storage { Local, Global, Array, None };

  Storage lookup(const std::string &name, Type *type) const {
    if (auto it = local_types_.find(name); it != local_types_.end()) {
      *type = it->second;
      return Storage::Local;
    }
    for (const auto &p : decl_.params)
      if (p.name == name) {
        *type = p.type;
        return Storage::Local;
      }
    for (const auto &g : unit_.globals)
      if (g.name == name) {
        *type = g.type;
        return g.is_array ? Storage::Array : Storage::Global;
      }
    return Storage::None;
  }

  // ---- expressions ----
  Type type_of_expr(const Expr &e) {
    switch (e.kind) {
    case Expr::Kind::IntLit: return Type::Int;
    case Expr::Kind::FloatLit: return Type::Float;
    case Expr::Kind::BoolLit: return Type::Bool;
    case Expr::Kind::Name: {
      Type t{};
      auto s = lookup(e.name, &t);
      if (s == Storage::None)
        fail(ErrorKind::UndeclaredName, e.pos, "undeclared name '" + e.name + "'");
      if (s == Storage::Array)
        fail(ErrorKind::Type, e.pos, "array '" + e.name + "' must be indexed");
      return t;
    }
    case Expr::Kind::Index: {
      Type t{};
      if (lookup(e.name, &t) != Storage::Array)
        fail(ErrorKind::UndeclaredName, e.pos, "'" + e.name + "' is not an array");
      if (type_of_expr(e.args[0]) != Type::Int)
        fail(ErrorKind::Type, e.args[0].pos, "array index must be int");
      return t;
    }
    case Expr::Kind::Call: {
      if (is_cast(e.name)) {
        if (e.args.size() != 1)
          fail(ErrorKind::Type, e.pos, "cast takes one argument");
        Type from = type_of_expr(e.args[0]);
        Type to = e.name == "int" ? Type::Int : Type::Float;
        if (from != Type::Int && from != Type::Float)
          fail(ErrorKind::Type, e.pos, "cast operand must be numeric");
        return to;
      }
      if (is_intrinsic(e.name)) {
        if (e.args.size() != 1)
          fail(ErrorKind::Type, e.pos, "intrinsic '" + e.name + "' takes one argument");
        Type a = type_of_expr(e.args[0]);
        if (e.name == "print")
          return Type::Void;
        if (a != Type::Float)
          fail(ErrorKind::Type, e.pos, "intrinsic '" + e.name + "' expects a float");
        return Type::Float;
      }
      auto it = sigs_.find(e.name);
      if (it == sigs_.end())
        fail(ErrorKind::UndeclaredName, e.pos, "undeclared function '" + e.name + "'");
      if (it->second.params.size() != e.args.size())
        fail(ErrorKind::Type, e.pos, "wrong number of arguments to '" + e.name + "'");
      for (std::size_t i = 0; i < e.args.size(); ++i)
        if (type_of_expr(e.args[i]) != it->second.params[i])
          fail(ErrorKind::Type, e.args[i].pos, "argument type mismatch in call to '" + e.name + "'");
      return it->second.ret;
    }
    case Expr::Kind::Unary: {
      Type t = type_of_expr(e.args[0]);
      if (e.name == "!") {
        if (t != Type::Bool)
          fail(ErrorKind::Type, e.pos, "'!' expects bool");
        return Type::Bool;
      }
      if (t != Type::Int && t != Type::Float)
        fail(ErrorKind::Type, e.pos, "unary '-' expects a number");
      return t;
    }
    case Expr::Kind::Binary: {
      Type l = type_of_expr(e.args[0]);
      Type r = type_of_expr(e.args[1]);
      const std::string &op = e.name;
      if (op == "&&" || op == "||") {
        if (l != Type::Bool || r != Type::Bool)
          fail(ErrorKind::Type, e.pos, "'" + op + "' expects bool operands");
        return Type::Bool;
      }
      if (l != r)
        fail(ErrorKind::Type, e.pos,
             "operands of '" + op + "' have different types (" + std::string(type_name(l)) +
                 " and " + std::string(type_name(r)) + ")");
      if (l == Type::Void)
        fail(ErrorKind::Type, e.pos, "void operand");
      if (op == "==" || op == "!=")
        return Type::Bool;
      if (l == Type::Bool)
        fail(ErrorKind::Type, e.pos, "'" + op + "' is not defined on bool");
      if (op == "<" || op == "<=" || op == ">" || op == ">=")
        return Type::Bool;
      if (op == "%" && l != Type::Int)
        fail(ErrorKind::Type, e.pos, "'%' expects int operands");
      return l;
    }
    }
    return Type::Void;
  }

  // Replaces every value-context `&&`/`||` inside `e` by a bool temporary
  // computed with conditional branches, keeping the operand stack empty at
  // every block boundary. Hoisted operators are evaluated before the rest
  // of the expression.
  void hoist(Expr &e) {
    if (is_logical(e)) {
      std::string tmp = "$t" + std::to_string(temp_count_++);
      fn_.locals.push_back({tmp, Type::Bool});
      int on_false = new_label();
      int done = new_label();
      branch(e, false, on_false);
      emit(const_bool(true));
      emit_named(Opcode::Store, tmp);
      emit_jump(Opcode::Jmp, done);
      place(on_false);
      emit(const_bool(false));
      emit_named(Opcode::Store, tmp);
      place(done);
      Expr ref;
      ref.kind = Expr::Kind::Name;
      ref.pos = e.pos;
      ref.name = tmp;
      local_types_[tmp] = Type::Bool;
      e = std::move(ref);
      return;
    }
    for (auto &a : e.args)
      hoist(a);
  }

  static Instruction const_bool(bool b) {
    Instruction ins;
    ins.op = Opcode::ConstB;
    ins.bool_imm = b;
    return ins;
  }

  void value(const Expr &e) {
    switch (e.kind) {
    case Expr::Kind::IntLit: {
      Instruction ins;
      ins.op = Opcode::ConstI;
      ins.int_imm = e.int_value;
      emit(std::move(ins));
      return;
    }
    case Expr::Kind::FloatLit: {
      Instruction ins;
      ins.op = Opcode::ConstF;
      ins.float_imm = e.float_value;
      emit(std::move(ins));
      return;
    }
    case Expr::Kind::BoolLit: emit(const_bool(e.bool_value)); return;
    case Expr::Kind::Name: {
      Type t{};
      emit_named(lookup(e.name, &t) == Storage::Local ? Opcode::Load : Opcode::GLoad, e.name);
      return;
    }
    case Expr::Kind::Index:
      value(e.args[0]);
      emit_named(Opcode::ALoad, e.name);
      return;
    case Expr::Kind::Call:
      for (const auto &a : e.args)
        value(a);
      if (is_cast(e.name)) {
        Type from = type_of_expr(e.args[0]);
        if (e.name == "int" && from == Type::Float)
          emit({Opcode::F2I});
        else if (e.name == "float" && from == Type::Int)
          emit({Opcode::I2F});
        return;
      }
      emit_named(is_intrinsic(e.name) ? Opcode::Intr : Opcode::Call, e.name);
      return;
    case Expr::Kind::Unary:
      value(e.args[0]);
      if (e.name == "!")
        emit({Opcode::Not});
      else
        emit({type_of_expr(e.args[0]) == Type::Int ? Opcode::NegI : Opcode::NegF});
      return;
    case Expr::Kind::Binary: {
      if (is_logical(e))
        fail(ErrorKind::Structure, e.pos, "internal: unhoisted logical operator");
      value(e.args[0]);
      value(e.args[1]);
      emit({binary_opcode(e.name, type_of_expr(e.args[0]))});
      return;
    }
    }
  }

  static Opcode binary_opcode(const std::string &op, Type t) {
    const bool i = t == Type::Int;
    if (t == Type::Bool)
      return op == "==" ? Opcode::CmpEqB : Opcode::CmpNeB;
    if (op == "+") return i ? Opcode::AddI : Opcode::AddF;
    if (op == "-") return i ? Opcode::SubI : Opcode::SubF;
    if (op == "*") return i ? Opcode::MulI : Opcode::MulF;
    if (op == "/") return i ? Opcode::DivI : Opcode::DivF;
    if (op == "%") return Opcode::ModI;
    if (op == "==") return i ? Opcode::CmpEqI : Opcode::CmpEqF;
    if (op == "!=") return i ? Opcode::CmpNeI : Opcode::CmpNeF;
    if (op == "<") return i ? Opcode::CmpLtI : Opcode::CmpLtF;
    if (op == "<=") return i ? Opcode::CmpLeI : Opcode::CmpLeF;
    if (op == ">") return i ? Opcode::CmpGtI : Opcode::CmpGtF;
    return i ? Opcode::CmpGeI : Opcode::CmpGeF;
  }

  // Jumps to `target` when `e` evaluates to `when`; falls through otherwise.
  // `&&`/`||` short-circuit into separate conditional branches.
  void branch(const Expr &e, bool when, int target) {
    if (e.kind == Expr::Kind::Unary && e.name == "!") {
      branch(e.args[0], !when, target);
      return;
    }
    if (is_logical(e)) {
      const bool is_and = e.name == "&&";
      if (is_and != when) {
        // `a && b` jumping on false, `a || b` jumping on true.
        branch(e.args[0], when, target);
        branch(e.args[1], when, target);
      } else {
        int skip = new_label();
        branch(e.args[0], !when, skip);
        branch(e.args[1], when, target);
        place(skip);
      }
      return;
    }
    Expr leaf = e;
    hoist(leaf);
    value(leaf);
    emit_jump(when ? Opcode::Brt : Opcode::Brf, target);
  }

  // ---- statements ----

  // Returns true when control cannot fall out of the statement list.
  bool statements(const std::vector<Stmt> &list) {
    for (std::size_t i = 0; i < list.size(); ++i) {
      if (statement(list[i])) {
        if (i + 1 < list.size())
          fail(ErrorKind::Structure, list[i + 1].pos, "unreachable statement");
        return true;
      }
    }
    return false;
  }

  bool statement(const Stmt &s) {
    const std::uint32_t start = here();
    bool terminates = statement_body(s);
    if (s.label) {
      if (here() == start)
        fail(ErrorKind::Structure, s.pos, "label '" + *s.label + "' is on a statement with no code");
      if (!labels_.insert(*s.label).second)
        fail(ErrorKind::Structure, s.pos, "duplicate label '" + *s.label + "'");
      auto &slot = fn_.code[start].label;
      if (slot)
        fail(ErrorKind::Structure, s.pos,
             "labels '" + *slot + "' and '" + *s.label + "' name the same instruction");
      slot = *s.label;
    }
    return terminates;
  }

  void check_assignable(const Stmt &s, Type expected, const Expr &value_expr) {
    Type t = type_of_expr(value_expr);
    if (t != expected)
      fail(ErrorKind::Type, value_expr.pos,
           "cannot assign " + std::string(type_name(t)) + " to '" + s.name + "' of type " +
               std::string(type_name(expected)));
  }

  bool statement_body(const Stmt &s) {
    switch (s.kind) {
    case Stmt::Kind::Block:
      return statements(s.body);
    case Stmt::Kind::VarDecl: {
      if (is_reserved(s.name))
        fail(ErrorKind::Structure, s.pos, "'" + s.name + "' is a reserved name");
      if (!declared_.insert(s.name).second)
        fail(ErrorKind::Structure, s.pos, "duplicate local '" + s.name + "'");
      if (!s.exprs.empty())
        check_assignable(s, s.decl_type, s.exprs[0]);
      fn_.locals.push_back({s.name, s.decl_type});
      if (!s.exprs.empty()) {
        Expr e = s.exprs[0];
        hoist(e);
        value(e);
      }
      local_types_[s.name] = s.decl_type;
      if (!s.exprs.empty())
        emit_named(Opcode::Store, s.name);
      return false;
    }
    case Stmt::Kind::Assign: {
      Type t{};
      auto storage = lookup(s.name, &t);
      if (storage == Storage::None)
        fail(ErrorKind::UndeclaredName, s.pos, "undeclared name '" + s.name + "'");
      if (storage == Storage::Array)
        fail(ErrorKind::Type, s.pos, "array '" + s.name + "' must be indexed");
      check_assignable(s, t, s.exprs[0]);
      Expr e = s.exprs[0];
      hoist(e);
      value(e);
      emit_named(storage == Storage::Local ? Opcode::Store : Opcode::GStore, s.name);
      return false;
    }
    case Stmt::Kind::AssignIndex: {
      Type t{};
      if (lookup(s.name, &t) != Storage::Array)
        fail(ErrorKind::UndeclaredName, s.pos, "'" + s.name + "' is not an array");
      if (type_of_expr(s.exprs[0]) != Type::Int)
        fail(ErrorKind::Type, s.exprs[0].pos, "array index must be int");
      check_assignable(s, t, s.exprs[1]);
      Expr idx = s.exprs[0];
      Expr val = s.exprs[1];
      hoist(idx);
      hoist(val);
      value(idx);
      value(val);
      emit_named(Opcode::AStore, s.name);
      return false;
    }
    case Stmt::Kind::If: {
      if (type_of_expr(s.exprs[0]) != Type::Bool)
        fail(ErrorKind::Type, s.exprs[0].pos, "condition must be bool");
      int on_false = new_label();
      branch(s.exprs[0], false, on_false);
      bool then_ends = statements(s.body);
      if (!s.has_else) {
        place(on_false);
        return false;
      }
      int done = new_label();
      if (!then_ends)
        emit_jump(Opcode::Jmp, done);
      place(on_false);
      bool else_ends = statements(s.else_body);
      place(done);
      return then_ends && else_ends;
    }
    case Stmt::Kind::While: {
      if (type_of_expr(s.exprs[0]) != Type::Bool)
        fail(ErrorKind::Type, s.exprs[0].pos, "condition must be bool");
      int head = new_label();
      int done = new_label();
      place(head);
      branch(s.exprs[0], false, done);
      if (!statements(s.body))
        emit_jump(Opcode::Jmp, head);
      place(done);
      return false;
    }
    case Stmt::Kind::Return: {
      if (s.exprs.empty()) {
        if (decl_.ret != Type::Void)
          fail(ErrorKind::Type, s.pos, "missing return value");
      } else {
        if (decl_.ret == Type::Void)
          fail(ErrorKind::Type, s.pos, "void function returns a value");
        Type t = type_of_expr(s.exprs[0]);
        if (t != decl_.ret)
          fail(ErrorKind::Type, s.exprs[0].pos,
               "return type mismatch: expected " + std::string(type_name(decl_.ret)) + ", got " +
                   std::string(type_name(t)));
        Expr e = s.exprs[0];
        hoist(e);
        value(e);
      }
      emit({Opcode::Ret});
      return true;
    }
    case Stmt::Kind::ExprStmt: {
      const Expr &e = s.exprs[0];
      if (e.kind != Expr::Kind::Call || is_cast(e.name))
        fail(ErrorKind::Structure, s.pos, "expression statement must be a call");
      if (type_of_expr(e) != Type::Void)
        fail(ErrorKind::Type, s.pos, "value returned by '" + e.name + "' is discarded");
      Expr copy = e;
      hoist(copy);
      value(copy);
      return false;
    }
    }
    return false;
  }

  const SourceUnit &unit_;
  const std::map<std::string, Signature> &sigs_;
  const FnDecl &decl_;
  Function fn_;
  std::set<std::string> declared_;
  std::set<std::string> labels_;
  std::map<std::string, Type> local_types_;
  std::map<int, std::uint32_t> label_pos_;
  std::vector<std::pair<std::uint32_t, int>> fixups_;
  int next_label_ = 0;
  int temp_count_ = 0;
};

} // namespace

ProgramModule compile(const SourceUnit &unit) {
  ProgramModule module;
  std::set<std::string> names;
  for (const auto &g : unit.globals) {
    if (!names.insert(g.name).second)
      fail(ErrorKind::Structure, g.pos, "duplicate global '" + g.name + "'");
    if (g.is_array)
      module.arrays.push_back({g.name, g.type, g.length});
    else
      module.globals.push_back({g.name, g.type, g.init});
  }
  std::map<std::string, Signature> sigs;
  for (const auto &f : unit.functions) {
    if (!names.insert(f.name).second || is_intrinsic(f.name) || is_cast(f.name))
      fail(ErrorKind::Structure, f.pos, "duplicate or reserved function name '" + f.name + "'");
    Signature s;
    for (const auto &p : f.params)
      s.params.push_back(p.type);
    s.ret = f.ret;
    sigs.emplace(f.name, s);
  }
  for (const auto &f : unit.functions)
    module.functions.push_back(FunctionCompiler(unit, sigs, f).run());
  check_module(module);
  return module;
}

} // namespace ucov::minilang
