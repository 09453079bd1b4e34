#include "ucov/asm.hpp"

#include <cctype>
#include <charconv>
#include <sstream>

#include "ucov/check.hpp"

namespace ucov {

namespace {

std::vector<std::string> split_ws(std::string_view line) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r'))
      ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r')
      ++j;
    if (j > i)
      out.emplace_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto nl = text.find('\n', start);
    if (nl == std::string_view::npos) {
      if (start < text.size())
        out.push_back(text.substr(start));
      break;
    }
    out.push_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  return out;
}

std::string_view strip(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
    s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

bool is_identifier(std::string_view s) {
  if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_' || s[0] == '$'))
    return false;
  for (char c : s)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '$'))
      return false;
  return true;
}

class LineError {
public:
  LineError(ErrorKind kind, int line) : kind_(kind), line_(line) {}
  [[noreturn]] void fail(const std::string &msg) const { throw Error(kind_, msg, line_); }
  void set_line(int l) { line_ = l; }
  ErrorKind kind() const { return kind_; }

private:
  ErrorKind kind_;
  int line_;
};

std::optional<std::int64_t> parse_int(std::string_view s) {
  std::int64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    return std::nullopt;
  return v;
}

std::optional<double> parse_double(std::string_view s) {
  double v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    return std::nullopt;
  return v;
}

std::optional<bool> parse_bool(std::string_view s) {
  if (s == "true") return true;
  if (s == "false") return false;
  return std::nullopt;
}

Value parse_typed_value(const LineError &err, Type t, std::string_view s) {
  switch (t) {
  case Type::Int:
    if (auto v = parse_int(s)) return *v;
    break;
  case Type::Float:
    if (auto v = parse_double(s)) return *v;
    break;
  case Type::Bool:
    if (auto v = parse_bool(s)) return *v;
    break;
  case Type::Void:
    break;
  }
  err.fail("bad " + std::string(type_name(t)) + " literal '" + std::string(s) + "'");
}

Type parse_type_or_fail(const LineError &err, std::string_view s) {
  auto t = parse_type(s);
  if (!t || *t == Type::Void)
    err.fail("bad type '" + std::string(s) + "'");
  return *t;
}

Var parse_var_decl(const LineError &err, std::string_view s) {
  s = strip(s);
  auto colon = s.find(':');
  if (colon == std::string_view::npos)
    err.fail("expected name:type, got '" + std::string(s) + "'");
  Var v;
  v.name = std::string(strip(s.substr(0, colon)));
  if (!is_identifier(v.name))
    err.fail("bad variable name '" + v.name + "'");
  v.type = parse_type_or_fail(err, strip(s.substr(colon + 1)));
  return v;
}

std::vector<Var> parse_var_list(const LineError &err, std::string_view s, char sep) {
  std::vector<Var> out;
  s = strip(s);
  if (s.empty())
    return out;
  std::size_t start = 0;
  while (true) {
    auto comma = s.find(sep, start);
    out.push_back(parse_var_decl(err, s.substr(start, comma - start)));
    if (comma == std::string_view::npos)
      break;
    start = comma + 1;
  }
  return out;
}

// `name(a:int, b:int):type` -- return type optional (void).
Function parse_signature(const LineError &err, std::string_view s) {
  s = strip(s);
  auto open = s.find('(');
  auto close = s.rfind(')');
  if (open == std::string_view::npos || close == std::string_view::npos || close < open)
    err.fail("malformed function signature");
  Function fn;
  fn.name = std::string(strip(s.substr(0, open)));
  if (!is_identifier(fn.name))
    err.fail("bad function name '" + fn.name + "'");
  fn.params = parse_var_list(err, s.substr(open + 1, close - open - 1), ',');
  auto rest = strip(s.substr(close + 1));
  if (rest.empty()) {
    fn.ret = Type::Void;
  } else {
    if (rest.front() != ':')
      err.fail("expected ':' before return type");
    auto t = parse_type(strip(rest.substr(1)));
    if (!t)
      err.fail("bad return type");
    fn.ret = *t;
  }
  return fn;
}

// Parses `mnemonic [operand] [@label]`. Jump operands that are not numbers
// are reported back as pending label references when `allow_label_targets`.
Instruction parse_instruction(const LineError &err, const std::vector<std::string> &toks,
                              bool allow_label_targets, std::string *pending_target) {
  if (toks.empty())
    err.fail("empty instruction");
  auto op = parse_opcode(toks[0]);
  if (!op)
    err.fail("unknown opcode '" + toks[0] + "'");
  Instruction ins;
  ins.op = *op;
  std::size_t idx = 1;
  const auto kind = opcode_info(*op).operand;
  if (kind != OperandKind::None) {
    if (idx >= toks.size() || toks[idx].starts_with("@"))
      err.fail("opcode '" + toks[0] + "' requires an operand");
    const std::string &t = toks[idx++];
    switch (kind) {
    case OperandKind::Int:
      if (auto v = parse_int(t)) ins.int_imm = *v;
      else err.fail("bad integer operand '" + t + "'");
      break;
    case OperandKind::Float:
      if (auto v = parse_double(t)) ins.float_imm = *v;
      else err.fail("bad float operand '" + t + "'");
      break;
    case OperandKind::Bool:
      if (auto v = parse_bool(t)) ins.bool_imm = *v;
      else err.fail("bad bool operand '" + t + "'");
      break;
    case OperandKind::Target:
      if (auto v = parse_int(t); v && *v >= 0) {
        ins.target = static_cast<std::uint32_t>(*v);
      } else if (allow_label_targets && is_identifier(t)) {
        *pending_target = t;
      } else {
        err.fail("bad jump target '" + t + "'");
      }
      break;
    default:
      if (!is_identifier(t))
        err.fail("bad name operand '" + t + "'");
      ins.name = t;
      break;
    }
  }
  if (idx < toks.size()) {
    const std::string &t = toks[idx++];
    if (!t.starts_with("@") || !is_identifier(std::string_view(t).substr(1)))
      err.fail("unexpected token '" + t + "'");
    ins.label = t.substr(1);
  }
  if (idx < toks.size())
    err.fail("trailing tokens after instruction");
  return ins;
}

std::string signature_text(const Function &fn, const char *sep) {
  std::string s = fn.name + "(";
  for (std::size_t i = 0; i < fn.params.size(); ++i) {
    if (i)
      s += sep;
    s += fn.params[i].name + ":" + std::string(type_name(fn.params[i].type));
  }
  s += ")";
  return s;
}

} // namespace

std::string format_instruction(const Instruction &ins) {
  const auto &info = opcode_info(ins.op);
  std::string s(info.mnemonic);
  switch (info.operand) {
  case OperandKind::None: break;
  case OperandKind::Int: s += " " + std::to_string(ins.int_imm); break;
  case OperandKind::Float: s += " " + format_float(ins.float_imm); break;
  case OperandKind::Bool: s += ins.bool_imm ? " true" : " false"; break;
  case OperandKind::Target: s += " " + std::to_string(ins.target); break;
  default: s += " " + ins.name; break;
  }
  if (ins.label)
    s += " @" + *ins.label;
  return s;
}

ProgramModule assemble(std::string_view text) {
  ProgramModule module;
  LineError err(ErrorKind::Asm, 0);
  Function *current = nullptr;
  struct Pending {
    std::size_t fn;
    std::uint32_t offset;
    std::string label;
    int line;
  };
  std::vector<Pending> pending;

  auto lines = split_lines(text);
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    err.set_line(static_cast<int>(ln + 1));
    auto line = lines[ln];
    if (auto hash = line.find('#'); hash != std::string_view::npos)
      line = line.substr(0, hash);
    line = strip(line);
    if (line.empty())
      continue;
    auto toks = split_ws(line);
    if (toks[0] == "fn") {
      module.functions.push_back(parse_signature(err, line.substr(2)));
      current = &module.functions.back();
    } else if (toks[0] == "global") {
      // global name:type = value
      auto eq = line.find('=');
      if (eq == std::string_view::npos)
        err.fail("global declaration needs an initial value");
      Var v = parse_var_decl(err, line.substr(6, eq - 6));
      GlobalScalar g{v.name, v.type, parse_typed_value(err, v.type, strip(line.substr(eq + 1)))};
      module.globals.push_back(std::move(g));
    } else if (toks[0] == "array") {
      // array name:type[len]
      auto decl = strip(line.substr(5));
      auto lb = decl.find('[');
      auto rb = decl.rfind(']');
      if (lb == std::string_view::npos || rb == std::string_view::npos || rb != decl.size() - 1)
        err.fail("array declaration must be name:type[length]");
      Var v = parse_var_decl(err, decl.substr(0, lb));
      auto len = parse_int(decl.substr(lb + 1, rb - lb - 1));
      if (!len || *len <= 0 || *len > (1 << 24))
        err.fail("bad array length");
      module.arrays.push_back({v.name, v.type, static_cast<std::uint32_t>(*len)});
    } else if (toks[0] == "local") {
      if (!current)
        err.fail("local declaration outside a function");
      for (auto &v : parse_var_list(err, line.substr(5), ','))
        current->locals.push_back(std::move(v));
    } else {
      if (!current)
        err.fail("instruction outside a function");
      std::string target_label;
      auto ins = parse_instruction(err, toks, true, &target_label);
      if (!target_label.empty())
        pending.push_back({module.functions.size() - 1,
                           static_cast<std::uint32_t>(current->code.size()), target_label,
                           static_cast<int>(ln + 1)});
      current->code.push_back(std::move(ins));
    }
  }
  for (const auto &p : pending) {
    auto &fn = module.functions[p.fn];
    auto off = fn.find_label(p.label);
    if (!off)
      throw Error(ErrorKind::Asm, "unknown jump label '" + p.label + "'", p.line);
    fn.code[p.offset].target = *off;
  }
  check_module(module);
  return module;
}

std::string disassemble(const ProgramModule &module) {
  std::ostringstream os;
  os << "# StackIR assembly\n";
  for (const auto &g : module.globals) {
    std::string v = format_value(g.init);
    if (g.type == Type::Float)
      v.pop_back(); // drop the literal suffix; the declared type disambiguates
    os << "global " << g.name << ":" << type_name(g.type) << " = " << v << "\n";
  }
  for (const auto &a : module.arrays)
    os << "array " << a.name << ":" << type_name(a.elem) << "[" << a.length << "]\n";
  for (const auto &fn : module.functions) {
    os << "\nfn " << signature_text(fn, ", ");
    if (fn.ret != Type::Void)
      os << ":" << type_name(fn.ret);
    os << "\n";
    for (const auto &l : fn.locals)
      os << "  local " << l.name << ":" << type_name(l.type) << "\n";
    for (std::size_t i = 0; i < fn.code.size(); ++i)
      os << "  " << format_instruction(fn.code[i]) << "    # " << i << "\n";
  }
  return os.str();
}

std::string save_module(const ProgramModule &module) {
  std::ostringstream os;
  os << "UBC 1\n";
  for (const auto &g : module.globals) {
    std::string v = format_value(g.init);
    if (g.type == Type::Float)
      v.pop_back();
    os << "global " << g.name << " " << type_name(g.type) << " " << v << "\n";
  }
  for (const auto &a : module.arrays)
    os << "array " << a.name << " " << type_name(a.elem) << " " << a.length << "\n";
  for (const auto &fn : module.functions) {
    os << "fn " << signature_text(fn, ",") << ":" << type_name(fn.ret) << "\n";
    os << "locals";
    for (std::size_t i = 0; i < fn.locals.size(); ++i)
      os << (i ? "," : " ") << fn.locals[i].name << ":" << type_name(fn.locals[i].type);
    os << "\n";
    os << "code " << fn.code.size() << "\n";
    for (std::size_t i = 0; i < fn.code.size(); ++i)
      os << i << ": " << format_instruction(fn.code[i]) << "\n";
  }
  os << "end\n";
  return os.str();
}

ProgramModule load_module(std::string_view bytes) {
  ProgramModule module;
  LineError err(ErrorKind::Format, 1);
  auto lines = split_lines(bytes);
  std::size_t ln = 0;
  auto next = [&]() -> std::string_view {
    if (ln >= lines.size()) {
      err.set_line(static_cast<int>(ln + 1));
      err.fail("unexpected end of file (truncated module)");
    }
    err.set_line(static_cast<int>(ln + 1));
    return lines[ln++];
  };
  if (next() != "UBC 1")
    err.fail("missing 'UBC 1' header");
  bool ended = false;
  while (!ended) {
    auto line = next();
    auto toks = split_ws(line);
    if (toks.empty())
      err.fail("blank line");
    if (toks[0] == "end" && toks.size() == 1) {
      ended = true;
    } else if (toks[0] == "global") {
      if (toks.size() != 4)
        err.fail("global line needs name, type and value");
      Type t = parse_type_or_fail(err, toks[2]);
      module.globals.push_back({toks[1], t, parse_typed_value(err, t, toks[3])});
    } else if (toks[0] == "array") {
      if (toks.size() != 4)
        err.fail("array line needs name, type and length");
      Type t = parse_type_or_fail(err, toks[2]);
      auto len = parse_int(toks[3]);
      if (!len || *len <= 0 || *len > (1 << 24))
        err.fail("bad array length");
      module.arrays.push_back({toks[1], t, static_cast<std::uint32_t>(*len)});
    } else if (toks[0] == "fn") {
      Function fn = parse_signature(err, line.substr(2));
      auto locals = next();
      if (!locals.starts_with("locals"))
        err.fail("expected 'locals' line");
      fn.locals = parse_var_list(err, locals.substr(6), ',');
      auto code = split_ws(next());
      if (code.size() != 2 || code[0] != "code")
        err.fail("expected 'code N' line");
      auto count = parse_int(code[1]);
      if (!count || *count < 0)
        err.fail("bad instruction count");
      for (std::int64_t i = 0; i < *count; ++i) {
        auto text = next();
        auto colon = text.find(':');
        if (colon == std::string_view::npos || parse_int(text.substr(0, colon)) != i)
          err.fail("expected instruction line numbered " + std::to_string(i));
        fn.code.push_back(parse_instruction(err, split_ws(text.substr(colon + 1)), false, nullptr));
      }
      module.functions.push_back(std::move(fn));
    } else {
      err.fail("unexpected line '" + std::string(line) + "'");
    }
  }
  for (; ln < lines.size(); ++ln)
    if (!strip(lines[ln]).empty())
      throw Error(ErrorKind::Format, "content after 'end'", static_cast<int>(ln + 1));
  check_module(module);
  return module;
}

} // namespace ucov
