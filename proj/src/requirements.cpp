#include "ucov/requirements.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <set>
#include <sstream>

#include "ucov/bdt.hpp"
#include "ucov/check.hpp"

namespace ucov {

std::string_view relop_text(RelOp op) {
  switch (op) {
  case RelOp::Eq: return "==";
  case RelOp::Ne: return "!=";
  case RelOp::Lt: return "<";
  case RelOp::Le: return "<=";
  case RelOp::Gt: return ">";
  case RelOp::Ge: return ">=";
  }
  return "?";
}

bool apply_relop(RelOp op, const Value &a, const Value &b) {
  return std::visit(
      [&](const auto &x) -> bool {
        using T = std::decay_t<decltype(x)>;
        const T &y = std::get<T>(b);
        switch (op) {
        case RelOp::Eq: return x == y;
        case RelOp::Ne: return x != y;
        case RelOp::Lt: return x < y;
        case RelOp::Le: return x <= y;
        case RelOp::Gt: return x > y;
        case RelOp::Ge: return x >= y;
        }
        return false;
      },
      a);
}

const NamedRequirement *ReqSet::find(std::string_view name) const {
  for (const auto &r : reqs)
    if (r.name == name)
      return &r;
  return nullptr;
}

namespace {

// ---------------------------------------------------------------- lexing

struct Token {
  enum class Kind { Ident, Number, Punct, End };
  Kind kind = Kind::End;
  std::string text;
  int line = 1;
  int column = 1;
};

std::vector<Token> lex(std::string_view src) {
  std::vector<Token> out;
  std::size_t i = 0;
  int line = 1, col = 1;
  auto advance = [&](std::size_t k) {
    for (std::size_t j = 0; j < k; ++j) {
      if (src[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
      ++i;
    }
  };
  auto is_ident = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; };
  auto is_digit = [](char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; };
  while (i < src.size()) {
    const char c = src[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      advance(1);
      continue;
    }
    if (c == '#' || (c == '/' && i + 1 < src.size() && src[i + 1] == '/')) {
      while (i < src.size() && src[i] != '\n')
        advance(1);
      continue;
    }
    Token t;
    t.line = line;
    t.column = col;
    const std::size_t start = i;
    if (is_digit(c) || (c == '-' && i + 1 < src.size() && is_digit(src[i + 1]))) {
      std::size_t j = i + 1;
      while (j < src.size() && is_digit(src[j]))
        ++j;
      if (j + 1 < src.size() && src[j] == '.' && is_digit(src[j + 1])) {
        ++j;
        while (j < src.size() && is_digit(src[j]))
          ++j;
      }
      if (j < src.size() && (src[j] == 'e' || src[j] == 'E')) {
        std::size_t k = j + 1;
        if (k < src.size() && (src[k] == '+' || src[k] == '-'))
          ++k;
        if (k < src.size() && is_digit(src[k])) {
          j = k;
          while (j < src.size() && is_digit(src[j]))
            ++j;
        }
      }
      if (j < src.size() && src[j] == 'f')
        ++j;
      t.kind = Token::Kind::Number;
      t.text = std::string(src.substr(start, j - start));
      advance(j - start);
    } else if (is_ident(c)) {
      std::size_t j = i;
      while (j < src.size() && is_ident(src[j]))
        ++j;
      t.kind = Token::Kind::Ident;
      t.text = std::string(src.substr(start, j - start));
      advance(j - start);
    } else {
      static const char *two[] = {"&&", "||", "==", "!=", "<=", ">=", "->"};
      std::string p(1, c);
      for (const char *op : two)
        if (src.substr(i, 2) == op)
          p = op;
      if (p.size() == 1 && std::string_view("()@+,;=!<>._").find(c) == std::string_view::npos)
        throw Error(ErrorKind::Syntax, std::string("unexpected character '") + c + "'", line, col);
      t.kind = Token::Kind::Punct;
      t.text = p;
      advance(p.size());
    }
    out.push_back(std::move(t));
  }
  Token end;
  end.line = line;
  end.column = col;
  out.push_back(end);
  return out;
}

// ---------------------------------------------------------------- parsing

class Parser {
public:
  explicit Parser(std::string_view text) : toks_(lex(text)) {}

  ReqSet parse_file() {
    ReqSet set;
    while (peek().kind != Token::Kind::End) {
      NamedRequirement r;
      r.line = peek().line;
      expect_word("req");
      r.name = ident("requirement name");
      expect("=");
      r.tr = requirement();
      expect(";");
      set.reqs.push_back(std::move(r));
    }
    return set;
  }

private:
  const Token &peek(std::size_t k = 0) const { return toks_[std::min(pos_ + k, toks_.size() - 1)]; }
  Token take() {
    Token t = peek();
    if (pos_ < toks_.size() - 1)
      ++pos_;
    return t;
  }
  [[noreturn]] void fail(const std::string &expected) const {
    const Token &t = peek();
    std::string got = t.kind == Token::Kind::End ? "end of input" : "'" + t.text + "'";
    throw Error(ErrorKind::Syntax, "expected " + expected + ", got " + got, t.line, t.column);
  }
  bool at(std::string_view text) const {
    return peek().kind == Token::Kind::Punct && peek().text == text;
  }
  bool at_word(std::string_view w) const {
    return peek().kind == Token::Kind::Ident && peek().text == w;
  }
  void expect(std::string_view text) {
    if (!at(text))
      fail("'" + std::string(text) + "'");
    take();
  }
  void expect_word(std::string_view w) {
    if (!at_word(w))
      fail("'" + std::string(w) + "'");
    take();
  }
  std::string ident(const std::string &what) {
    if (peek().kind != Token::Kind::Ident || peek().text == "_")
      fail(what);
    return take().text;
  }

  TestRequirement requirement() {
    TestRequirement tr;
    const std::string kw = peek().kind == Token::Kind::Ident ? peek().text : "";
    if (kw == "btr") {
      take();
      expect("(");
      tr.kind = TestRequirement::Kind::Btr;
      tr.btr = bool_expr<ElementRef>([this] { return element(); });
      expect(")");
    } else if (kw == "ctr") {
      take();
      expect("(");
      tr.kind = TestRequirement::Kind::Ctr;
      tr.children.push_back(requirement());
      expect(",");
      tr.pred = bool_expr<Clause>([this] { return clause(); });
      expect(")");
    } else if (kw == "str") {
      take();
      expect("(");
      tr.kind = TestRequirement::Kind::Str;
      tr.children.push_back(requirement());
      while (at(",")) {
        take();
        tr.children.push_back(requirement());
      }
      expect(")");
    } else if (kw == "rtr") {
      take();
      expect("(");
      tr.kind = TestRequirement::Kind::Rtr;
      tr.children.push_back(requirement());
      expect(",");
      tr.lo = bound();
      expect(",");
      tr.hi = bound();
      expect(")");
    } else {
      fail("'btr', 'ctr', 'str' or 'rtr'");
    }
    return tr;
  }

  std::optional<std::uint32_t> bound() {
    if (at("_") || at_word("_")) {
      take();
      return std::nullopt;
    }
    return natural("a bound or '_'");
  }

  std::uint32_t natural(const std::string &what) {
    const Token &t = peek();
    std::uint32_t v = 0;
    if (t.kind != Token::Kind::Number)
      fail(what);
    auto [p, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
    if (ec != std::errc() || p != t.text.data() + t.text.size())
      fail(what);
    take();
    return v;
  }

  template <typename A, typename F>
  BoolExpr<A> bool_expr(F &&atom) {
    auto lhs = and_expr<A>(atom);
    while (at("||")) {
      take();
      lhs = BoolExpr<A>::binary(BoolExpr<A>::Kind::Or, std::move(lhs), and_expr<A>(atom));
    }
    return lhs;
  }
  template <typename A, typename F>
  BoolExpr<A> and_expr(F &&atom) {
    auto lhs = unary<A>(atom);
    while (at("&&")) {
      take();
      lhs = BoolExpr<A>::binary(BoolExpr<A>::Kind::And, std::move(lhs), unary<A>(atom));
    }
    return lhs;
  }
  template <typename A, typename F>
  BoolExpr<A> unary(F &&atom) {
    if (at("!")) {
      take();
      return BoolExpr<A>::negate(unary<A>(atom));
    }
    if (at("(")) {
      take();
      auto e = bool_expr<A>(atom);
      expect(")");
      return e;
    }
    return BoolExpr<A>::leaf(atom());
  }

  Anchor anchor() {
    expect("@");
    Anchor a;
    if (at("+")) {
      take();
      a.offset = natural("an instruction offset");
    } else {
      a.label = ident("a label");
    }
    return a;
  }

  Site site() {
    Site s;
    s.fn = ident("a function name");
    s.at = anchor();
    return s;
  }

  ElementRef element() {
    ElementRef e;
    if (at_word("stmt")) {
      take();
      e.kind = ElementRef::Kind::Stmt;
      e.site = site();
    } else if (at_word("branch")) {
      take();
      e.kind = ElementRef::Kind::Branch;
      e.site = site();
      expect("->");
      e.other.fn = e.site.fn;
      e.other.at = anchor();
    } else if (at_word("defuse")) {
      take();
      e.kind = ElementRef::Kind::DefUse;
      e.site = site();
      expect("->");
      e.other = site();
      expect_word("of");
      e.var = var();
    } else {
      fail("'stmt', 'branch' or 'defuse'");
    }
    return e;
  }

  VarRef var() {
    VarRef v;
    if (at_word("local")) {
      take();
      v.kind = VarRef::Kind::Local;
      v.fn = ident("a function name");
      expect(".");
      v.name = ident("a variable name");
    } else if (at_word("global")) {
      take();
      v.kind = VarRef::Kind::Global;
      v.name = ident("a global name");
    } else if (at_word("array")) {
      take();
      v.kind = VarRef::Kind::Array;
      v.name = ident("an array name");
    } else {
      fail("'local', 'global' or 'array'");
    }
    return v;
  }

  Clause clause() {
    Clause c;
    const Token &start = peek();
    c.lhs = var();
    if (c.lhs.kind == VarRef::Kind::Array)
      throw Error(ErrorKind::Structure, "arrays cannot appear in predicates", start.line,
                  start.column);
    static const std::pair<const char *, RelOp> ops[] = {
        {"==", RelOp::Eq}, {"!=", RelOp::Ne}, {"<", RelOp::Lt},
        {"<=", RelOp::Le}, {">", RelOp::Gt},  {">=", RelOp::Ge}};
    bool found = false;
    for (const auto &[text, op] : ops)
      if (at(text)) {
        c.op = op;
        found = true;
      }
    if (!found)
      fail("a comparison operator");
    take();
    if (at_word("local") || at_word("global") || at_word("array")) {
      const Token &rs = peek();
      c.rhs_var = var();
      if (c.rhs_var->kind == VarRef::Kind::Array)
        throw Error(ErrorKind::Structure, "arrays cannot appear in predicates", rs.line, rs.column);
    } else {
      c.rhs_const = constant();
    }
    return c;
  }

  Value constant() {
    const Token &t = peek();
    if (at_word("true") || at_word("false")) {
      take();
      return t.text == "true";
    }
    if (t.kind != Token::Kind::Number)
      fail("a constant");
    std::string text = t.text;
    const bool is_float = text.find_first_of(".eEf") != std::string::npos;
    if (is_float) {
      if (text.back() == 'f')
        text.pop_back();
      double d = 0;
      auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), d);
      if (ec != std::errc() || p != text.data() + text.size())
        fail("a float constant");
      take();
      return d;
    }
    std::int64_t v = 0;
    auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || p != text.data() + text.size())
      fail("an integer constant");
    take();
    return v;
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
};

// ---------------------------------------------------------------- structure

[[noreturn]] void structure_error(const NamedRequirement &r, const std::string &msg) {
  throw Error(ErrorKind::Structure, "requirement '" + r.name + "': " + msg, r.line);
}

void check_tree(const NamedRequirement &r, const TestRequirement &tr, bool root) {
  using K = TestRequirement::Kind;
  switch (tr.kind) {
  case K::Btr: {
    bool positive = false;
    tr.btr.for_each_atom([&](const ElementRef &, bool pos) { positive = positive || pos; });
    if (!positive)
      structure_error(r, "btr needs at least one non-negated element");
    break;
  }
  case K::Ctr:
    if (tr.children.size() != 1)
      structure_error(r, "ctr takes exactly one requirement");
    break;
  case K::Str:
    if (tr.children.size() < 2)
      structure_error(r, "str needs at least two requirements");
    break;
  case K::Rtr:
    if (tr.children.size() != 1)
      structure_error(r, "rtr takes exactly one requirement");
    if (!tr.lo && !tr.hi)
      structure_error(r, "rtr needs at least one finite bound");
    if (tr.lo && tr.hi && *tr.lo > *tr.hi)
      structure_error(r, "rtr lower bound exceeds upper bound");
    if (!root && tr.hi)
      structure_error(r, "a nested rtr must have '_' as upper bound");
    if (!root && (!tr.lo || *tr.lo == 0))
      structure_error(r, "a nested rtr needs a lower bound of at least 1");
    break;
  }
  for (const auto &c : tr.children)
    check_tree(r, c, false);
}

// ---------------------------------------------------------------- formatting

template <typename A, typename F>
std::string format_bool(const BoolExpr<A> &e, F &&atom) {
  using K = typename BoolExpr<A>::Kind;
  auto wrap = [&](const BoolExpr<A> &k, bool paren) {
    std::string s = format_bool(k, atom);
    return paren ? "(" + s + ")" : s;
  };
  switch (e.kind) {
  case K::Atom: return atom(e.atom);
  case K::Not: return "!" + wrap(e.kids[0], e.kids[0].kind == K::And || e.kids[0].kind == K::Or);
  case K::And:
    return wrap(e.kids[0], e.kids[0].kind == K::Or) + " && " +
           wrap(e.kids[1], e.kids[1].kind == K::Or || e.kids[1].kind == K::And);
  case K::Or: return wrap(e.kids[0], false) + " || " + wrap(e.kids[1], e.kids[1].kind == K::Or);
  }
  return {};
}

std::string format_site(const Site &s) { return s.fn + format_anchor(s.at); }

// ---------------------------------------------------------------- validation

class Validator {
public:
  Validator(const ProgramModule &module, const NamedRequirement &req) : m_(module), r_(req) {}

  void requirement(TestRequirement &tr) {
    using K = TestRequirement::Kind;
    switch (tr.kind) {
    case K::Btr: tr.btr.mutate_atoms([&](ElementRef &e) { element(e); }); break;
    case K::Ctr:
      requirement(tr.children[0]);
      tr.pred.mutate_atoms([&](Clause &c) { clause(c); });
      scope(tr);
      break;
    default:
      for (auto &c : tr.children)
        requirement(c);
      break;
    }
  }

private:
  [[noreturn]] void fail(ErrorKind k, const std::string &msg) const {
    throw Error(k, "requirement '" + r_.name + "': " + msg, r_.line);
  }

  const Function &function(const std::string &name) const {
    const Function *f = m_.find_function(name);
    if (!f)
      fail(ErrorKind::UnknownFunction, "unknown function '" + name + "'");
    return *f;
  }

  std::uint32_t resolve(Site &s) const {
    const Function &fn = function(s.fn);
    if (!s.at.label.empty()) {
      auto off = fn.find_label(s.at.label);
      if (!off)
        fail(ErrorKind::UnknownLabel, "no label '" + s.at.label + "' in '" + s.fn + "'");
      s.at.offset = *off;
    } else if (!s.at.offset || *s.at.offset >= fn.code.size()) {
      fail(ErrorKind::UnknownLabel, "offset " + format_anchor(s.at) + " is outside '" + s.fn + "'");
    }
    return *s.at.offset;
  }

  Type var_type(const VarRef &v) const {
    switch (v.kind) {
    case VarRef::Kind::Local: {
      const Function &fn = function(v.fn);
      const Var *var = fn.find_local(v.name);
      if (!var)
        fail(ErrorKind::UnknownVariable, "no variable '" + v.name + "' in '" + v.fn + "'");
      return var->type;
    }
    case VarRef::Kind::Global: {
      const GlobalScalar *g = m_.find_global(v.name);
      if (!g)
        fail(ErrorKind::UnknownVariable, "unknown global '" + v.name + "'");
      return g->type;
    }
    case VarRef::Kind::Array: {
      const GlobalArray *a = m_.find_array(v.name);
      if (!a)
        fail(ErrorKind::UnknownVariable, "unknown array '" + v.name + "'");
      return a->elem;
    }
    }
    return Type::Void;
  }

  void element(ElementRef &e) const {
    switch (e.kind) {
    case ElementRef::Kind::Stmt: resolve(e.site); break;
    case ElementRef::Kind::Branch: {
      const Function &fn = function(e.site.fn);
      const auto src = resolve(e.site);
      e.other.fn = e.site.fn;
      const auto tgt = resolve(e.other);
      Cfg cfg = build_cfg(fn);
      if (cfg.blocks[cfg.block_of[tgt]].leader != tgt)
        fail(ErrorKind::NotALeader, "branch target " + format_anchor(e.other.at) + " in '" +
                                        fn.name + "' is not a basic-block leader");
      if (!cfg.has_edge(cfg.block_of[src], cfg.block_of[tgt]))
        fail(ErrorKind::NotAnEdge, "no control-flow edge " + format_anchor(e.site.at) + " -> " +
                                       format_anchor(e.other.at) + " in '" + fn.name + "'");
      break;
    }
    case ElementRef::Kind::DefUse: {
      var_type(e.var);
      const auto d = resolve(e.site);
      const auto u = resolve(e.other);
      const Function &df = function(e.site.fn);
      const Function &uf = function(e.other.fn);
      const auto &di = df.code[d];
      const auto &ui = uf.code[u];
      if (!is_definition(di.op) || referenced_var(df, di) != e.var)
        fail(ErrorKind::NotADefSite, format_site(e.site) + " does not define " + format_varref(e.var));
      if (!is_use(ui.op) || referenced_var(uf, ui) != e.var)
        fail(ErrorKind::NotAUseSite, format_site(e.other) + " does not use " + format_varref(e.var));
      break;
    }
    }
  }

  void clause(const Clause &c) const {
    const Type lt = var_type(c.lhs);
    const Type rt = c.rhs_var ? var_type(*c.rhs_var) : type_of(c.rhs_const);
    if (lt != rt)
      fail(ErrorKind::Type, "clause '" + format_clause(c) + "' compares " +
                                std::string(type_name(lt)) + " with " + std::string(type_name(rt)));
    if (lt == Type::Bool && c.op != RelOp::Eq && c.op != RelOp::Ne)
      fail(ErrorKind::Type, "clause '" + format_clause(c) + "' orders bool values");
  }

  void scope(const TestRequirement &ctr) const {
    auto atoms = elements_of(ctr.children[0]);
    ctr.pred.for_each_atom([&](const Clause &c, bool) {
      std::vector<VarRef> vars{c.lhs};
      if (c.rhs_var)
        vars.push_back(*c.rhs_var);
      for (const auto &v : vars) {
        if (v.kind != VarRef::Kind::Local)
          continue;
        for (const auto &a : atoms)
          if (a.firing_fn() != v.fn)
            fail(ErrorKind::Scope, format_varref(v) + " is not in scope at " +
                                       format_element(a) + " (function '" + a.firing_fn() + "')");
      }
    });
  }

  const ProgramModule &m_;
  const NamedRequirement &r_;
};

void collect(const TestRequirement &tr, std::vector<ElementRef> &out) {
  if (tr.kind == TestRequirement::Kind::Btr)
    tr.btr.for_each_atom([&](const ElementRef &e, bool) { out.push_back(e); });
  for (const auto &c : tr.children)
    collect(c, out);
}

void collect_vars(const TestRequirement &tr, std::vector<VarRef> &out) {
  if (tr.kind == TestRequirement::Kind::Ctr)
    tr.pred.for_each_atom([&](const Clause &c, bool) {
      out.push_back(c.lhs);
      if (c.rhs_var)
        out.push_back(*c.rhs_var);
    });
  for (const auto &c : tr.children)
    collect_vars(c, out);
}

} // namespace

void check_structure(const ReqSet &reqs) {
  std::set<std::string> names;
  for (const auto &r : reqs.reqs) {
    if (!names.insert(r.name).second)
      structure_error(r, "duplicate requirement name");
    check_tree(r, r.tr, true);
  }
}

ReqSet parse_reqs(std::string_view text) {
  Parser p(text);
  ReqSet set = p.parse_file();
  check_structure(set);
  return set;
}

std::string format_anchor(const Anchor &a) {
  if (!a.label.empty())
    return "@" + a.label;
  return "@+" + std::to_string(a.offset.value_or(0));
}

std::string format_element(const ElementRef &e) {
  switch (e.kind) {
  case ElementRef::Kind::Stmt: return "stmt " + format_site(e.site);
  case ElementRef::Kind::Branch:
    return "branch " + format_site(e.site) + " -> " + format_anchor(e.other.at);
  case ElementRef::Kind::DefUse:
    return "defuse " + format_site(e.site) + " -> " + format_site(e.other) + " of " +
           format_varref(e.var);
  }
  return {};
}

std::string format_clause(const Clause &c) {
  std::string s = format_varref(c.lhs) + " " + std::string(relop_text(c.op)) + " ";
  return s + (c.rhs_var ? format_varref(*c.rhs_var) : format_value(c.rhs_const));
}

std::string format_predicate(const Predicate &p) { return format_bool(p, format_clause); }

std::string format_btr(const BtrExpr &e) { return format_bool(e, format_element); }

std::string format_requirement(const TestRequirement &tr) {
  switch (tr.kind) {
  case TestRequirement::Kind::Btr: return "btr(" + format_btr(tr.btr) + ")";
  case TestRequirement::Kind::Ctr:
    return "ctr(" + format_requirement(tr.children[0]) + ", " + format_predicate(tr.pred) + ")";
  case TestRequirement::Kind::Str: {
    std::string s = "str(";
    for (std::size_t i = 0; i < tr.children.size(); ++i)
      s += (i ? ", " : "") + format_requirement(tr.children[i]);
    return s + ")";
  }
  case TestRequirement::Kind::Rtr: {
    auto b = [](const std::optional<std::uint32_t> &v) { return v ? std::to_string(*v) : "_"; };
    return "rtr(" + format_requirement(tr.children[0]) + ", " + b(tr.lo) + ", " + b(tr.hi) + ")";
  }
  }
  return {};
}

std::string format_reqs(const ReqSet &reqs) {
  std::string out;
  for (const auto &r : reqs.reqs)
    out += "req " + r.name + " = " + format_requirement(r.tr) + ";\n";
  return out;
}

ReqSet validate(const ReqSet &reqs, const ProgramModule &module) {
  check_structure(reqs);
  ReqSet out = reqs;
  for (auto &r : out.reqs)
    Validator(module, r).requirement(r.tr);
  return out;
}

std::vector<ElementRef> elements_of(const TestRequirement &tr) {
  std::vector<ElementRef> out;
  collect(tr, out);
  return out;
}

std::vector<VarRef> predicate_vars(const TestRequirement &tr) {
  std::vector<VarRef> out;
  collect_vars(tr, out);
  return out;
}

std::vector<std::string> functions_of(const TestRequirement &tr) {
  std::set<std::string> names;
  for (const auto &e : elements_of(tr)) {
    names.insert(e.site.fn);
    names.insert(e.other.fn);
  }
  for (const auto &v : predicate_vars(tr))
    if (v.kind == VarRef::Kind::Local)
      names.insert(v.fn);
  names.erase("");
  return {names.begin(), names.end()};
}

} // namespace ucov
