#pragma once

// Test requirements: btr/ctr/str/rtr trees over program elements and state
// predicates, their `.ucr` text form, and resolution against a module.
//
//   req trbug = str(ctr(btr(stmt Emp@s1), local Emp.salary == 200000),
//                   btr(stmt Emp@s3));
//   req loop2 = rtr(btr(stmt N@s4), 2, _);
//   req edge  = btr(branch f@+3 -> @+7 && !defuse f@+1 -> f@+9 of local f.x);

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ucov/ir.hpp"

namespace ucov {

/// `@label` or `@+offset`. Validation fills `offset` for labels and keeps
/// the label so the text form survives recompilation.
struct Anchor {
  std::string label;
  std::optional<std::uint32_t> offset;

  bool operator==(const Anchor &) const = default;
  auto operator<=>(const Anchor &) const = default;
};

struct Site {
  std::string fn;
  Anchor at;

  std::uint32_t offset() const { return at.offset.value_or(0); }
  bool operator==(const Site &) const = default;
  auto operator<=>(const Site &) const = default;
};

struct ElementRef {
  enum class Kind { Stmt, Branch, DefUse };
  Kind kind = Kind::Stmt;
  /// Stmt: the statement. Branch: the source. DefUse: the definition.
  Site site;
  /// Branch: the target (same function). DefUse: the use.
  Site other;
  /// DefUse only.
  VarRef var;

  /// Function whose event fires the element.
  const std::string &firing_fn() const { return kind == Kind::DefUse ? other.fn : site.fn; }

  bool operator==(const ElementRef &) const = default;
  auto operator<=>(const ElementRef &) const = default;
};

/// Boolean combination of atoms. Not has one child, And/Or have two.
template <typename A>
struct BoolExpr {
  enum class Kind { Atom, Not, And, Or };
  Kind kind = Kind::Atom;
  A atom{};
  std::vector<BoolExpr> kids;

  static BoolExpr leaf(A a) {
    BoolExpr e;
    e.atom = std::move(a);
    return e;
  }
  static BoolExpr negate(BoolExpr x) {
    BoolExpr e;
    e.kind = Kind::Not;
    e.kids.push_back(std::move(x));
    return e;
  }
  static BoolExpr binary(Kind k, BoolExpr l, BoolExpr r) {
    BoolExpr e;
    e.kind = k;
    e.kids.push_back(std::move(l));
    e.kids.push_back(std::move(r));
    return e;
  }

  template <typename F>
  bool eval(F &&value_of) const {
    switch (kind) {
    case Kind::Atom: return value_of(atom);
    case Kind::Not: return !kids[0].eval(value_of);
    case Kind::And: return kids[0].eval(value_of) && kids[1].eval(value_of);
    case Kind::Or: return kids[0].eval(value_of) || kids[1].eval(value_of);
    }
    return false;
  }

  /// Visits every atom with its polarity (true = under an even number of
  /// negations).
  template <typename F>
  void for_each_atom(F &&f, bool positive = true) const {
    if (kind == Kind::Atom) {
      f(atom, positive);
      return;
    }
    for (const auto &k : kids)
      k.for_each_atom(f, kind == Kind::Not ? !positive : positive);
  }

  template <typename F>
  void mutate_atoms(F &&f) {
    if (kind == Kind::Atom) {
      f(atom);
      return;
    }
    for (auto &k : kids)
      k.mutate_atoms(f);
  }

  bool operator==(const BoolExpr &) const = default;
};

enum class RelOp { Eq, Ne, Lt, Le, Gt, Ge };
std::string_view relop_text(RelOp op);
bool apply_relop(RelOp op, const Value &a, const Value &b);

struct Clause {
  VarRef lhs;
  RelOp op = RelOp::Eq;
  /// Either a variable or a typed constant.
  std::optional<VarRef> rhs_var;
  Value rhs_const = std::int64_t{0};

  bool operator==(const Clause &) const = default;
};

using Predicate = BoolExpr<Clause>;
using BtrExpr = BoolExpr<ElementRef>;

struct TestRequirement {
  enum class Kind { Btr, Ctr, Str, Rtr };
  Kind kind = Kind::Btr;
  BtrExpr btr;                           // Btr
  Predicate pred;                        // Ctr
  std::vector<TestRequirement> children; // Ctr/Rtr: one; Str: two or more
  std::optional<std::uint32_t> lo, hi;   // Rtr; nullopt is `_`

  bool operator==(const TestRequirement &) const = default;
};

struct NamedRequirement {
  std::string name;
  TestRequirement tr;
  int line = 0;

  bool operator==(const NamedRequirement &o) const { return name == o.name && tr == o.tr; }
};

struct ReqSet {
  std::vector<NamedRequirement> reqs;

  const NamedRequirement *find(std::string_view name) const;
  bool operator==(const ReqSet &) const = default;
};

/// Throws Error(Syntax) or Error(Structure).
ReqSet parse_reqs(std::string_view text);
/// Structural rules that do not need a module; parse_reqs applies them.
void check_structure(const ReqSet &reqs);

std::string format_anchor(const Anchor &a);
std::string format_element(const ElementRef &e);
std::string format_clause(const Clause &c);
std::string format_predicate(const Predicate &p);
std::string format_btr(const BtrExpr &e);
std::string format_requirement(const TestRequirement &tr);
/// One `req` per line; empty set gives empty text.
std::string format_reqs(const ReqSet &reqs);

/// Resolves every anchor and checks it against the module. Idempotent.
ReqSet validate(const ReqSet &reqs, const ProgramModule &module);

/// All element atoms of a requirement tree, in textual order.
std::vector<ElementRef> elements_of(const TestRequirement &tr);
/// All predicate variables of a requirement tree.
std::vector<VarRef> predicate_vars(const TestRequirement &tr);
/// Functions named anywhere in the tree.
std::vector<std::string> functions_of(const TestRequirement &tr);

} // namespace ucov
