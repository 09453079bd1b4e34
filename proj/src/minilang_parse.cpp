#include <cctype>
#include <charconv>

#include "ucov/minilang.hpp"

namespace ucov::minilang {

namespace {

enum class Tok { Ident, Int, Float, Punct, End };

struct Token {
  Tok kind = Tok::End;
  std::string text;
  Pos pos;
};

class Lexer {
public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    while (true) {
      skip_space();
      Token t;
      t.pos = {line_, col_};
      if (i_ >= src_.size()) {
        t.kind = Tok::End;
        out.push_back(t);
        return out;
      }
      char c = src_[i_];
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        std::size_t j = i_;
        while (j < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[j])) || src_[j] == '_'))
          ++j;
        t.kind = Tok::Ident;
        t.text = std::string(src_.substr(i_, j - i_));
        advance(j - i_);
      } else if (std::isdigit(static_cast<unsigned char>(c))) {
        std::size_t j = i_;
        while (j < src_.size() && std::isdigit(static_cast<unsigned char>(src_[j])))
          ++j;
        t.kind = Tok::Int;
        if (j + 1 < src_.size() && src_[j] == '.' && std::isdigit(static_cast<unsigned char>(src_[j + 1]))) {
          ++j;
          while (j < src_.size() && std::isdigit(static_cast<unsigned char>(src_[j])))
            ++j;
          t.kind = Tok::Float;
        }
        t.text = std::string(src_.substr(i_, j - i_));
        advance(j - i_);
      } else {
        static const char *two[] = {"==", "!=", "<=", ">=", "&&", "||"};
        t.kind = Tok::Punct;
        for (const char *p : two)
          if (src_.substr(i_, 2) == p) {
            t.text = p;
            break;
          }
        if (t.text.empty()) {
          if (std::string_view("(){}[],;:=<>+-*/%!").find(c) == std::string_view::npos)
            throw Error(ErrorKind::Syntax, std::string("unexpected character '") + c + "'", line_, col_);
          t.text = std::string(1, c);
        }
        advance(t.text.size());
      }
      out.push_back(std::move(t));
    }
  }

private:
  void advance(std::size_t n) {
    for (std::size_t k = 0; k < n; ++k, ++i_) {
      if (src_[i_] == '\n') {
        ++line_;
        col_ = 1;
      } else {
        ++col_;
      }
    }
  }

  void skip_space() {
    while (i_ < src_.size()) {
      char c = src_[i_];
      if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        advance(1);
      } else if (src_.substr(i_, 2) == "//") {
        while (i_ < src_.size() && src_[i_] != '\n')
          advance(1);
      } else if (src_.substr(i_, 2) == "/*") {
        Pos start{line_, col_};
        advance(2);
        while (i_ < src_.size() && src_.substr(i_, 2) != "*/")
          advance(1);
        if (i_ >= src_.size())
          throw Error(ErrorKind::Syntax, "unterminated comment", start.line, start.column);
        advance(2);
      } else {
        break;
      }
    }
  }

  std::string_view src_;
  std::size_t i_ = 0;
  int line_ = 1;
  int col_ = 1;
};

class Parser {
public:
  explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

  SourceUnit unit() {
    SourceUnit u;
    while (peek().kind != Tok::End) {
      if (is_word("fn"))
        u.functions.push_back(fn_decl());
      else if (is_word("var") || is_word("array"))
        u.globals.push_back(global_decl());
      else
        fail("expected 'fn', 'var' or 'array' at top level");
    }
    return u;
  }

private:
  const Token &peek(std::size_t k = 0) const {
    return toks_[std::min(pos_ + k, toks_.size() - 1)];
  }
  Token take() {
    Token t = peek();
    if (pos_ < toks_.size() - 1)
      ++pos_;
    return t;
  }
  bool is_word(std::string_view w, std::size_t k = 0) const {
    return peek(k).kind == Tok::Ident && peek(k).text == w;
  }
  bool is_punct(std::string_view p, std::size_t k = 0) const {
    return peek(k).kind == Tok::Punct && peek(k).text == p;
  }
  [[noreturn]] void fail(const std::string &msg) const {
    const Token &t = peek();
    std::string got = t.kind == Tok::End ? "end of input" : "'" + t.text + "'";
    throw Error(ErrorKind::Syntax, msg + ", got " + got, t.pos.line, t.pos.column);
  }
  void expect(std::string_view p) {
    if (!is_punct(p))
      fail("expected '" + std::string(p) + "'");
    take();
  }
  bool accept(std::string_view p) {
    if (!is_punct(p))
      return false;
    take();
    return true;
  }
  static bool keyword(std::string_view s) {
    return s == "fn" || s == "var" || s == "array" || s == "if" || s == "else" || s == "while" ||
           s == "return" || s == "true" || s == "false";
  }
  std::string ident(const char *what) {
    if (peek().kind != Tok::Ident || keyword(peek().text))
      fail(std::string("expected ") + what);
    return take().text;
  }
  Type type_name_tok(bool allow_void = false) {
    if (peek().kind == Tok::Ident) {
      auto t = parse_type(peek().text);
      if (t && (allow_void || *t != Type::Void)) {
        take();
        return *t;
      }
    }
    fail("expected a type");
  }

  Value literal(Type t) {
    bool neg = accept("-");
    const Token &tok = peek();
    if (t == Type::Bool) {
      if (!neg && (is_word("true") || is_word("false")))
        return take().text == "true";
      fail("expected a bool literal");
    }
    if (t == Type::Int && tok.kind == Tok::Int) {
      std::int64_t v = parse_int_text(take());
      return neg ? -v : v;
    }
    if (t == Type::Float && tok.kind == Tok::Float) {
      double v = parse_float_text(take());
      return neg ? -v : v;
    }
    fail("expected a " + std::string(type_name(t)) + " literal");
  }

  std::int64_t parse_int_text(const Token &t) {
    std::int64_t v = 0;
    auto [p, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
    if (ec != std::errc())
      throw Error(ErrorKind::Syntax, "integer literal out of range", t.pos.line, t.pos.column);
    return v;
  }
  double parse_float_text(const Token &t) {
    double v = 0;
    std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
    return v;
  }

  GlobalDecl global_decl() {
    GlobalDecl g;
    g.pos = peek().pos;
    bool array = take().text == "array";
    g.name = ident("global name");
    expect(":");
    g.type = type_name_tok();
    if (array) {
      g.is_array = true;
      expect("[");
      if (peek().kind != Tok::Int)
        fail("expected array length");
      auto len = parse_int_text(take());
      if (len <= 0 || len > (1 << 24))
        throw Error(ErrorKind::Syntax, "bad array length", g.pos.line, g.pos.column);
      g.length = static_cast<std::uint32_t>(len);
      expect("]");
    } else {
      switch (g.type) {
      case Type::Int: g.init = std::int64_t{0}; break;
      case Type::Float: g.init = 0.0; break;
      default: g.init = false; break;
      }
      if (accept("="))
        g.init = literal(g.type);
    }
    expect(";");
    return g;
  }

  FnDecl fn_decl() {
    FnDecl f;
    f.pos = take().pos;
    f.name = ident("function name");
    expect("(");
    if (!is_punct(")")) {
      do {
        Var v;
        v.name = ident("parameter name");
        expect(":");
        v.type = type_name_tok();
        f.params.push_back(std::move(v));
      } while (accept(","));
    }
    expect(")");
    if (accept(":"))
      f.ret = type_name_tok(true);
    f.body = block();
    return f;
  }

  std::vector<Stmt> block() {
    expect("{");
    std::vector<Stmt> out;
    while (!is_punct("}")) {
      if (peek().kind == Tok::End)
        fail("expected '}'");
      out.push_back(statement());
    }
    take();
    return out;
  }

  // A branch/loop body: a block or a single statement.
  std::vector<Stmt> body() {
    if (is_punct("{"))
      return block();
    std::vector<Stmt> out;
    out.push_back(statement());
    return out;
  }

  Stmt statement() {
    std::optional<std::string> label;
    if (peek().kind == Tok::Ident && !keyword(peek().text) && is_punct(":", 1)) {
      label = take().text;
      take();
    }
    Stmt s = core_statement();
    s.label = std::move(label);
    return s;
  }

  Stmt core_statement() {
    Stmt s;
    s.pos = peek().pos;
    if (is_punct("{")) {
      s.kind = Stmt::Kind::Block;
      s.body = block();
      return s;
    }
    if (is_word("var")) {
      take();
      s.kind = Stmt::Kind::VarDecl;
      s.name = ident("variable name");
      expect(":");
      s.decl_type = type_name_tok();
      if (accept("="))
        s.exprs.push_back(expr());
      expect(";");
      return s;
    }
    if (is_word("if")) {
      take();
      s.kind = Stmt::Kind::If;
      expect("(");
      s.exprs.push_back(expr());
      expect(")");
      s.body = body();
      if (is_word("else")) {
        take();
        s.has_else = true;
        s.else_body = body();
      }
      return s;
    }
    if (is_word("while")) {
      take();
      s.kind = Stmt::Kind::While;
      expect("(");
      s.exprs.push_back(expr());
      expect(")");
      s.body = body();
      return s;
    }
    if (is_word("return")) {
      take();
      s.kind = Stmt::Kind::Return;
      if (!is_punct(";"))
        s.exprs.push_back(expr());
      expect(";");
      return s;
    }
    if (peek().kind == Tok::Ident && !keyword(peek().text) && is_punct("=", 1)) {
      s.kind = Stmt::Kind::Assign;
      s.name = take().text;
      take();
      s.exprs.push_back(expr());
      expect(";");
      return s;
    }
    // `a[i] = v;` or an expression statement.
    Expr e = expr();
    if (e.kind == Expr::Kind::Index && accept("=")) {
      s.kind = Stmt::Kind::AssignIndex;
      s.name = e.name;
      s.exprs.push_back(std::move(e.args[0]));
      s.exprs.push_back(expr());
      expect(";");
      return s;
    }
    s.kind = Stmt::Kind::ExprStmt;
    s.exprs.push_back(std::move(e));
    expect(";");
    return s;
  }

  Expr binary(Pos pos, std::string op, Expr l, Expr r) {
    Expr e;
    e.kind = Expr::Kind::Binary;
    e.pos = pos;
    e.name = std::move(op);
    e.args.push_back(std::move(l));
    e.args.push_back(std::move(r));
    return e;
  }

  Expr expr() { return or_expr(); }

  Expr or_expr() {
    Expr l = and_expr();
    while (is_punct("||")) {
      Pos p = take().pos;
      l = binary(p, "||", std::move(l), and_expr());
    }
    return l;
  }
  Expr and_expr() {
    Expr l = eq_expr();
    while (is_punct("&&")) {
      Pos p = take().pos;
      l = binary(p, "&&", std::move(l), eq_expr());
    }
    return l;
  }
  Expr eq_expr() {
    Expr l = rel_expr();
    while (is_punct("==") || is_punct("!=")) {
      Token t = take();
      l = binary(t.pos, t.text, std::move(l), rel_expr());
    }
    return l;
  }
  Expr rel_expr() {
    Expr l = add_expr();
    while (is_punct("<") || is_punct("<=") || is_punct(">") || is_punct(">=")) {
      Token t = take();
      l = binary(t.pos, t.text, std::move(l), add_expr());
    }
    return l;
  }
  Expr add_expr() {
    Expr l = mul_expr();
    while (is_punct("+") || is_punct("-")) {
      Token t = take();
      l = binary(t.pos, t.text, std::move(l), mul_expr());
    }
    return l;
  }
  Expr mul_expr() {
    Expr l = unary();
    while (is_punct("*") || is_punct("/") || is_punct("%")) {
      Token t = take();
      l = binary(t.pos, t.text, std::move(l), unary());
    }
    return l;
  }
  Expr unary() {
    if (is_punct("-") || is_punct("!")) {
      Token t = take();
      Expr operand = unary();
      // Fold negative numeric literals so `-1` is a single constant.
      if (t.text == "-" && operand.kind == Expr::Kind::IntLit) {
        operand.int_value = -operand.int_value;
        operand.pos = t.pos;
        return operand;
      }
      if (t.text == "-" && operand.kind == Expr::Kind::FloatLit) {
        operand.float_value = -operand.float_value;
        operand.pos = t.pos;
        return operand;
      }
      Expr e;
      e.kind = Expr::Kind::Unary;
      e.pos = t.pos;
      e.name = t.text;
      e.args.push_back(std::move(operand));
      return e;
    }
    return primary();
  }
  Expr primary() {
    Expr e;
    e.pos = peek().pos;
    const Token &t = peek();
    if (t.kind == Tok::Int) {
      e.kind = Expr::Kind::IntLit;
      e.int_value = parse_int_text(take());
      return e;
    }
    if (t.kind == Tok::Float) {
      e.kind = Expr::Kind::FloatLit;
      e.float_value = parse_float_text(take());
      return e;
    }
    if (is_word("true") || is_word("false")) {
      e.kind = Expr::Kind::BoolLit;
      e.bool_value = take().text == "true";
      return e;
    }
    if (accept("(")) {
      Expr inner = expr();
      expect(")");
      return inner;
    }
    if (t.kind == Tok::Ident && !keyword(t.text)) {
      e.name = take().text;
      if (accept("(")) {
        e.kind = Expr::Kind::Call;
        if (!is_punct(")")) {
          do
            e.args.push_back(expr());
          while (accept(","));
        }
        expect(")");
        return e;
      }
      if (accept("[")) {
        e.kind = Expr::Kind::Index;
        e.args.push_back(expr());
        expect("]");
        return e;
      }
      e.kind = Expr::Kind::Name;
      return e;
    }
    fail("expected an expression");
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
};

} // namespace

SourceUnit parse_source(std::string_view text) {
  return Parser(Lexer(text).run()).unit();
}

} // namespace ucov::minilang
