#include "generators.hpp"

#include <set>
#include <sstream>

#include "ucov/asm.hpp"
#include "ucov/bdt.hpp"
#include "ucov/check.hpp"
#include "ucov/error.hpp"
#include "ucov/minilang.hpp"

namespace ucov::testing {

namespace {

int pick(Rng &rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }
bool chance(Rng &rng, double p) { return std::bernoulli_distribution(p)(rng); }
template <typename T>
const T &one_of(Rng &rng, const std::vector<T> &v) {
  return v[static_cast<std::size_t>(pick(rng, 0, static_cast<int>(v.size()) - 1))];
}

struct SourceGen {
  Rng &rng;
  std::vector<std::string> ints; // int variables in scope
  int loops = 0;
  std::ostringstream out;

  std::string int_expr(int depth) {
    const int k = depth <= 0 ? pick(rng, 0, 1) : pick(rng, 0, 5);
    switch (k) {
    case 0: return std::to_string(pick(rng, -2, 4));
    case 1: return one_of(rng, ints);
    case 2: return "arr[" + one_of(rng, ints) + " % 4]";
    case 3: return "h(" + int_expr(depth - 1) + ")";
    default: {
      static const std::vector<std::string> ops{"+", "-", "*"};
      return "(" + int_expr(depth - 1) + " " + one_of(rng, ops) + " " + int_expr(depth - 1) + ")";
    }
    }
  }
  std::string cond(int depth) {
    static const std::vector<std::string> rel{"<", "<=", "==", "!=", ">", ">="};
    const int k = depth <= 0 ? pick(rng, 0, 1) : pick(rng, 0, 3);
    switch (k) {
    case 0: return one_of(rng, ints) + " " + one_of(rng, rel) + " " + std::to_string(pick(rng, -1, 3));
    case 1: return chance(rng, 0.5) ? "flag" : "!flag";
    case 2: return cond(depth - 1) + (chance(rng, 0.5) ? " && " : " || ") + cond(depth - 1);
    default: return one_of(rng, ints) + " " + one_of(rng, rel) + " " + int_expr(0);
    }
  }
  void stmt(int depth, const std::string &ind) {
    const int k = depth <= 0 ? pick(rng, 0, 2) : pick(rng, 0, 6);
    switch (k) {
    case 0:
    case 1: {
      static const std::vector<std::string> targets{"a", "b", "x", "g"};
      out << ind << one_of(rng, targets) << " = " << int_expr(1) << ";\n";
      break;
    }
    case 2:
      if (chance(rng, 0.5))
        out << ind << "arr[" << one_of(rng, ints) << " % 4] = " << int_expr(0) << ";\n";
      else
        out << ind << "flag = " << cond(0) << ";\n";
      break;
    case 3:
    case 4:
      out << ind << "if (" << cond(1) << ") {\n";
      block(depth - 1, ind + "  ");
      if (chance(rng, 0.5)) {
        out << ind << "} else {\n";
        block(depth - 1, ind + "  ");
      }
      out << ind << "}\n";
      break;
    default: {
      const std::string c = "c" + std::to_string(loops++);
      out << ind << "var " << c << ": int = " << pick(rng, 1, 3) << ";\n";
      out << ind << "while (" << c << " > 0";
      if (chance(rng, 0.3))
        out << " && " << cond(0);
      out << ") {\n";
      out << ind << "  " << c << " = " << c << " - 1;\n";
      block(depth - 1, ind + "  ");
      out << ind << "}\n";
    }
    }
  }
  void block(int depth, const std::string &ind) {
    const int n = pick(rng, 1, 2);
    for (int i = 0; i < n; ++i)
      stmt(depth, ind);
  }
};

} // namespace

std::string random_source(Rng &rng) {
  SourceGen g{rng, {}, 0, {}};
  g.out << "var g: int = " << pick(rng, -2, 3) << ";\n";
  g.out << "var flag: bool = " << (chance(rng, 0.5) ? "true" : "false") << ";\n";
  g.out << "array arr: int[4];\n";
  g.out << "fn h(p: int): int {\n";
  if (chance(rng, 0.5))
    g.out << "  if (p > " << pick(rng, 0, 3) << ") { g = g + 1; return p - 1; }\n";
  g.out << "  return p + " << pick(rng, 0, 2) << ";\n}\n";
  g.out << "fn main(a: int, b: int): int {\n";
  g.out << "  var x: int = " << pick(rng, -1, 2) << ";\n";
  g.ints = {"a", "b", "x", "g"};
  const int n = pick(rng, 2, 4);
  for (int i = 0; i < n; ++i)
    g.stmt(2, "  ");
  g.out << "  return " << g.int_expr(1) << ";\n}\n";
  return g.out.str();
}

ProgramModule random_module(Rng &rng, std::size_t max_instructions) {
  for (;;) {
    ProgramModule m = minilang::compile_source(random_source(rng));
    std::size_t n = 0;
    for (const auto &fn : m.functions)
      n += fn.code.size();
    if (n <= max_instructions)
      return m;
  }
}

ProgramModule random_cfg_module(Rng &rng, std::size_t max_blocks) {
  for (;;) {
    const int nb = pick(rng, 1, static_cast<int>(max_blocks));
    std::ostringstream src;
    src << "fn f(c: bool):int\n  local v:int\n";
    for (int b = 0; b < nb; ++b) {
      const int kind = b == nb - 1 ? pick(rng, 0, 1) * 3 : pick(rng, 0, 3);
      auto target = [&] { return "B" + std::to_string(pick(rng, 0, nb - 1)); };
      const std::string at = " @B" + std::to_string(b);
      switch (kind) {
      case 0: // return
        src << "  const.i " << b << at << "\n  ret\n";
        break;
      case 1: // conditional
        src << "  load c" << at << "\n  " << (chance(rng, 0.5) ? "brt " : "brf ") << target() << "\n";
        break;
      case 2: // jump
        src << "  const.i " << b << at << "\n  store v\n  jmp " << target() << "\n";
        break;
      default: // fall through
        src << "  const.i " << b << at << "\n  store v\n";
        if (b == nb - 1)
          src << "  load v\n  ret\n";
      }
    }
    ProgramModule m;
    try {
      m = assemble(src.str());
      Cfg cfg = build_cfg(m.functions[0]);
      postdominators(cfg);
    } catch (const Error &) {
      continue;
    }
    return m;
  }
}

namespace {

struct Sites {
  struct Fn {
    std::string name;
    std::size_t size = 0;
    std::vector<std::pair<std::uint32_t, std::uint32_t>> edges; // src leader -> tgt leader
  };
  std::vector<Fn> fns;
  struct Du {
    std::string def_fn, use_fn;
    std::uint32_t def = 0, use = 0;
    VarRef var;
  };
  std::vector<Du> dus;

  explicit Sites(const ProgramModule &m) {
    std::vector<std::pair<std::string, std::uint32_t>> defs_all, uses_all;
    std::vector<VarRef> def_vars, use_vars;
    for (const auto &fn : m.functions) {
      Fn f{fn.name, fn.code.size(), {}};
      Cfg cfg = build_cfg(fn);
      for (const auto &b : cfg.blocks)
        for (const auto &e : b.succs)
          if (e.to < cfg.blocks.size())
            f.edges.push_back({b.leader, cfg.blocks[e.to].leader});
      fns.push_back(std::move(f));
      for (std::uint32_t i = 0; i < fn.code.size(); ++i) {
        auto v = referenced_var(fn, fn.code[i]);
        if (!v)
          continue;
        if (is_definition(fn.code[i].op)) {
          defs_all.push_back({fn.name, i});
          def_vars.push_back(*v);
        } else if (is_use(fn.code[i].op)) {
          uses_all.push_back({fn.name, i});
          use_vars.push_back(*v);
        }
      }
    }
    for (std::size_t d = 0; d < defs_all.size(); ++d)
      for (std::size_t u = 0; u < uses_all.size(); ++u)
        if (def_vars[d] == use_vars[u])
          dus.push_back({defs_all[d].first, uses_all[u].first, defs_all[d].second,
                         uses_all[u].second, def_vars[d]});
  }
};

struct ReqGen {
  Rng &rng;
  const ProgramModule &m;
  const Sites &sites;
  const ReqOptions &opts;

  // Returns the text and the firing functions of its atoms.
  std::string atom(std::set<std::string> &fns) {
    const int k = opts.stmt_only ? 0 : pick(rng, 0, 5);
    const auto &f = sites.fns[static_cast<std::size_t>(pick(rng, 0, static_cast<int>(sites.fns.size()) - 1))];
    if (k == 4 && !f.edges.empty()) {
      auto [s, t] = one_of(rng, f.edges);
      fns.insert(f.name);
      return "branch " + f.name + "@+" + std::to_string(s) + " -> @+" + std::to_string(t);
    }
    if (k == 5 && !sites.dus.empty()) {
      const auto &d = one_of(rng, sites.dus);
      fns.insert(d.use_fn);
      return "defuse " + d.def_fn + "@+" + std::to_string(d.def) + " -> " + d.use_fn + "@+" +
             std::to_string(d.use) + " of " + format_varref(d.var);
    }
    fns.insert(f.name);
    return "stmt " + f.name + "@+" + std::to_string(pick(rng, 0, static_cast<int>(f.size) - 1));
  }
  std::string btr_expr(int depth, std::set<std::string> &fns) {
    const int k = depth <= 0 ? 0 : pick(rng, 0, 3);
    if (k <= 1)
      return atom(fns);
    if (k == 2 && opts.allow_not && chance(rng, 0.5))
      return "!(" + btr_expr(depth - 1, fns) + ")";
    return "(" + btr_expr(depth - 1, fns) + (chance(rng, 0.5) ? " && " : " || ") +
           btr_expr(depth - 1, fns) + ")";
  }
  std::string clause(const std::set<std::string> &fns) {
    std::vector<std::pair<std::string, Type>> vars{{"global g", Type::Int}, {"global flag", Type::Bool}};
    if (fns.size() == 1)
      if (const Function *fn = m.find_function(*fns.begin())) {
        for (const auto &p : fn->params)
          vars.push_back({"local " + fn->name + "." + p.name, p.type});
        for (const auto &l : fn->locals)
          vars.push_back({"local " + fn->name + "." + l.name, l.type});
      }
    const auto &[lhs, type] = one_of(rng, vars);
    static const std::vector<std::string> rel{"<", "<=", "==", "!=", ">", ">="};
    static const std::vector<std::string> eq{"==", "!="};
    if (type == Type::Bool)
      return lhs + " " + one_of(rng, eq) + " " + (chance(rng, 0.5) ? "true" : "false");
    if (chance(rng, 0.25)) {
      std::vector<std::string> same;
      for (const auto &[n, t] : vars)
        if (t == type)
          same.push_back(n);
      return lhs + " " + one_of(rng, rel) + " " + one_of(rng, same);
    }
    return lhs + " " + one_of(rng, rel) + " " + std::to_string(pick(rng, -2, 4));
  }
  std::string predicate(int depth, const std::set<std::string> &fns) {
    if (depth <= 0 || chance(rng, 0.6))
      return clause(fns);
    if (opts.allow_not && chance(rng, 0.3))
      return "!(" + predicate(depth - 1, fns) + ")";
    return "(" + predicate(depth - 1, fns) + (chance(rng, 0.5) ? " && " : " || ") +
           predicate(depth - 1, fns) + ")";
  }
  std::string req(int depth, bool root, std::set<std::string> &fns) {
    int k = depth <= 0 ? 0 : pick(rng, 0, 3);
    if (k == 1 && !opts.allow_ctr)
      k = 2;
    if (k == 3 && !opts.allow_rtr)
      k = 2;
    switch (k) {
    case 0:
      return "btr(" + btr_expr(2, fns) + ")";
    case 1: {
      std::set<std::string> inner;
      std::string r = req(depth - 1, false, inner);
      fns.insert(inner.begin(), inner.end());
      return "ctr(" + r + ", " + predicate(1, inner) + ")";
    }
    case 2: {
      const int n = pick(rng, 2, 3);
      std::string s = "str(";
      for (int i = 0; i < n; ++i)
        s += (i ? ", " : "") + req(depth - 1, false, fns);
      return s + ")";
    }
    default: {
      std::string r = "rtr(" + req(depth - 1, false, fns) + ", ";
      if (root) {
        const int lo = pick(rng, 0, 3);
        r += std::to_string(lo) + ", ";
        r += chance(rng, 0.4) ? "_" : std::to_string(lo + pick(rng, 0, 2));
      } else {
        r += std::to_string(pick(rng, 1, 3)) + ", _";
      }
      return r + ")";
    }
    }
  }
};

} // namespace

std::string random_requirement_text(Rng &rng, const ProgramModule &m, const std::string &name,
                                    const ReqOptions &opts) {
  Sites sites(m);
  ReqGen g{rng, m, sites, opts};
  std::set<std::string> fns;
  return "req " + name + " = " + g.req(opts.max_depth, true, fns) + ";\n";
}

ReqSet random_reqs(Rng &rng, const ProgramModule &m, std::size_t count, const ReqOptions &opts) {
  Sites sites(m);
  ReqGen g{rng, m, sites, opts};
  ReqSet out;
  while (out.reqs.size() < count) {
    std::set<std::string> fns;
    const std::string text =
        "req r" + std::to_string(out.reqs.size()) + " = " + g.req(opts.max_depth, true, fns) + ";\n";
    try {
      ReqSet one = validate(parse_reqs(text), m);
      out.reqs.push_back(std::move(one.reqs[0]));
    } catch (const Error &) {
    }
  }
  return out;
}

std::vector<Value> random_args(Rng &rng, const Function &fn) {
  std::vector<Value> out;
  for (const auto &p : fn.params) {
    switch (p.type) {
    case Type::Int: out.emplace_back(std::int64_t{pick(rng, -3, 5)}); break;
    case Type::Float: out.emplace_back(static_cast<double>(pick(rng, -3, 5)) / 2.0); break;
    default: out.emplace_back(chance(rng, 0.5)); break;
    }
  }
  return out;
}

Triple random_triple(Rng &rng, const ReqOptions &opts) {
  Triple t;
  t.module = random_module(rng, 40);
  t.reqs = random_reqs(rng, t.module, static_cast<std::size_t>(pick(rng, 1, 3)), opts);
  t.input.entry = "main";
  t.input.args = random_args(rng, *t.module.find_function("main"));
  if (chance(rng, 0.3))
    t.input.sets.push_back({"g", std::nullopt, std::int64_t{pick(rng, -2, 4)}});
  if (chance(rng, 0.3))
    t.input.sets.push_back({"flag", std::nullopt, chance(rng, 0.5)});
  return t;
}

} // namespace ucov::testing
