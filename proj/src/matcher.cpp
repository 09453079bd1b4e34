#include "ucov/matcher.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <unordered_map>

#include "ucov/bdt.hpp"

namespace ucov {

InstrumentationPlan plan(const ProgramModule &module, const ReqSet &resolved) {
  (void)module;
  InstrumentationPlan p;
  for (const auto &r : resolved.reqs) {
    for (const auto &e : elements_of(r.tr)) {
      switch (e.kind) {
      case ElementRef::Kind::Stmt: p.functions[e.site.fn].statements.insert(e.site.offset()); break;
      case ElementRef::Kind::Branch: p.functions[e.site.fn].all_leaders = true; break;
      case ElementRef::Kind::DefUse:
        p.functions[e.site.fn].statements.insert(e.site.offset());
        p.functions[e.other.fn].statements.insert(e.other.offset());
        p.variables.insert(e.var);
        break;
      }
    }
    for (const auto &v : predicate_vars(r.tr))
      p.variables.insert(v);
    for (const auto &fn : functions_of(r.tr))
      p.functions[fn].report_entry = true;
  }
  return p;
}

namespace {

// ---------------------------------------------------------------- elements

struct ResolvedElement {
  ElementRef ref;
  std::uint32_t fn = 0;     // firing function
  std::uint32_t offset = 0; // stmt offset, branch target leader, or use offset
  std::uint32_t src_leader = 0;
  std::uint32_t def_fn = 0;
  std::uint32_t def_offset = 0;
};

using Key = std::pair<std::uint32_t, std::uint32_t>; // (function index, offset)

struct ElementTable {
  std::vector<ResolvedElement> elements;
  std::map<ElementRef, int> ids;
  std::map<Key, std::vector<int>> on_stmt;  // Stmt and DefUse, by trigger site
  std::map<Key, std::vector<int>> on_block; // Branch, by target leader

  ElementTable(const ProgramModule &module, const ReqSet &reqs) {
    auto fn_index = [&](const std::string &name) {
      return static_cast<std::uint32_t>(module.find_function(name) - module.functions.data());
    };
    for (const auto &r : reqs.reqs)
      for (const auto &e : elements_of(r.tr)) {
        if (ids.count(e))
          continue;
        const int id = static_cast<int>(elements.size());
        ids.emplace(e, id);
        ResolvedElement re;
        re.ref = e;
        switch (e.kind) {
        case ElementRef::Kind::Stmt:
          re.fn = fn_index(e.site.fn);
          re.offset = e.site.offset();
          on_stmt[{re.fn, re.offset}].push_back(id);
          break;
        case ElementRef::Kind::Branch: {
          re.fn = fn_index(e.site.fn);
          re.offset = e.other.offset();
          Cfg cfg = build_cfg(module.functions[re.fn]);
          re.src_leader = cfg.blocks[cfg.block_of[e.site.offset()]].leader;
          on_block[{re.fn, re.offset}].push_back(id);
          break;
        }
        case ElementRef::Kind::DefUse:
          re.fn = fn_index(e.other.fn);
          re.offset = e.other.offset();
          re.def_fn = fn_index(e.site.fn);
          re.def_offset = e.site.offset();
          on_stmt[{re.fn, re.offset}].push_back(id);
          break;
        }
        elements.push_back(re);
      }
  }

  int id(const ElementRef &e) const { return ids.at(e); }
};

// Expression with atoms replaced by element ids.
struct CExpr {
  BtrExpr::Kind kind = BtrExpr::Kind::Atom;
  int id = -1;
  std::vector<CExpr> kids;
};

CExpr compile_expr(const BtrExpr &e, const ElementTable &table) {
  CExpr c;
  c.kind = e.kind;
  if (e.kind == BtrExpr::Kind::Atom)
    c.id = table.id(e.atom);
  for (const auto &k : e.kids)
    c.kids.push_back(compile_expr(k, table));
  return c;
}

template <typename F>
bool eval_expr(const CExpr &e, F &&fired) {
  switch (e.kind) {
  case BtrExpr::Kind::Atom: return fired(e.id);
  case BtrExpr::Kind::Not: return !eval_expr(e.kids[0], fired);
  case BtrExpr::Kind::And: return eval_expr(e.kids[0], fired) && eval_expr(e.kids[1], fired);
  case BtrExpr::Kind::Or: return eval_expr(e.kids[0], fired) || eval_expr(e.kids[1], fired);
  }
  return false;
}

std::vector<int> atom_ids(const BtrExpr &e, const ElementTable &table) {
  std::vector<int> out;
  e.for_each_atom([&](const ElementRef &a, bool) { out.push_back(table.id(a)); });
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// ---------------------------------------------------------------- predicates

// lookup(VarRef) -> optional<Value>; undefined variables make a clause false.
template <typename Lookup>
bool eval_predicate(const Predicate &p, Lookup &&lookup) {
  return p.eval([&](const Clause &c) {
    auto l = lookup(c.lhs);
    if (!l)
      return false;
    std::optional<Value> r = c.rhs_var ? lookup(*c.rhs_var) : std::optional<Value>(c.rhs_const);
    if (!r)
      return false;
    return apply_relop(c.op, *l, *r);
  });
}

template <typename Lookup>
std::string explain_failure(const Predicate &p, Lookup &&lookup, std::uint64_t seq) {
  std::string out;
  p.for_each_atom([&](const Clause &c, bool) {
    if (!out.empty())
      return;
    auto l = lookup(c.lhs);
    std::optional<Value> r = c.rhs_var ? lookup(*c.rhs_var) : std::optional<Value>(c.rhs_const);
    if (!l) {
      out = format_varref(c.lhs) + " undefined at seq " + std::to_string(seq);
    } else if (!r) {
      out = format_varref(*c.rhs_var) + " undefined at seq " + std::to_string(seq);
    } else if (!apply_relop(c.op, *l, *r)) {
      out = "'" + format_clause(c) + "' false at seq " + std::to_string(seq) + " (" +
            format_varref(c.lhs) + " = " + format_value(*l);
      if (c.rhs_var)
        out += ", " + format_varref(*c.rhs_var) + " = " + format_value(*r);
      out += ")";
    }
  });
  if (out.empty())
    out = "predicate '" + format_predicate(p) + "' false at seq " + std::to_string(seq);
  return out;
}

std::optional<std::size_t> param_index(const Function &fn, const std::string &name) {
  for (std::size_t i = 0; i < fn.params.size(); ++i)
    if (fn.params[i].name == name)
      return i;
  return std::nullopt;
}

} // namespace

// ---------------------------------------------------------------- online

struct MatchSession::Impl {
  struct Node {
    const TestRequirement *tr = nullptr;
    std::vector<Node> kids;
    CExpr expr;
    std::vector<int> atoms;  // btr
    std::vector<char> flags; // btr, parallel to atoms
    std::size_t cursor = 0;  // str
    std::uint64_t count = 0; // rtr
    bool reported = false;   // ctr: failure diagnostic emitted
  };

  struct Root {
    const NamedRequirement *req = nullptr;
    Node node;
    bool satisfied = false;
    std::vector<char> latched; // root btr, parallel to node.atoms
    std::vector<std::string> diagnostics;
    std::vector<int> elements;
  };

  const ProgramModule &module;
  ReqSet reqs;
  ElementTable table;
  std::vector<Root> roots;
  std::vector<ElementStats> stats;
  std::uint64_t last_seq = 0;

  std::unordered_map<std::uint64_t, std::uint32_t> last_block;
  std::map<std::pair<std::uint64_t, std::string>, Key> local_def;
  std::map<VarRef, Key> module_def;
  std::map<std::pair<std::uint64_t, std::string>, Value> local_value;
  std::unordered_map<std::uint64_t, std::uint32_t> frame_fn;
  std::map<std::string, Value> global_value;

  Impl(const ProgramModule &m, const ReqSet &r) : module(m), reqs(r), table(m, reqs) {
    stats.resize(table.elements.size());
    for (const auto &nr : reqs.reqs) {
      Root root;
      root.req = &nr;
      root.node = build(nr.tr);
      if (nr.tr.kind == TestRequirement::Kind::Btr)
        root.latched.assign(root.node.atoms.size(), 0);
      else
        open(root.node, 0);
      std::set<int> ids;
      for (const auto &e : elements_of(nr.tr))
        ids.insert(table.id(e));
      root.elements.assign(ids.begin(), ids.end());
      roots.push_back(std::move(root));
    }
  }

  Node build(const TestRequirement &tr) {
    Node n;
    n.tr = &tr;
    if (tr.kind == TestRequirement::Kind::Btr) {
      n.expr = compile_expr(tr.btr, table);
      n.atoms = atom_ids(tr.btr, table);
      n.flags.assign(n.atoms.size(), 0);
    }
    for (const auto &c : tr.children)
      n.kids.push_back(build(c));
    return n;
  }

  static void open(Node &n, std::uint64_t w) {
    (void)w;
    switch (n.tr->kind) {
    case TestRequirement::Kind::Btr: std::fill(n.flags.begin(), n.flags.end(), 0); break;
    case TestRequirement::Kind::Ctr: open(n.kids[0], w); break;
    case TestRequirement::Kind::Str:
      n.cursor = 0;
      open(n.kids[0], w);
      break;
    case TestRequirement::Kind::Rtr:
      n.count = 0;
      open(n.kids[0], w);
      break;
    }
  }

  static bool mark(std::vector<char> &flags, const std::vector<int> &atoms,
                   const std::vector<int> &fired) {
    bool any = false;
    for (std::size_t i = 0; i < atoms.size(); ++i)
      if (std::binary_search(fired.begin(), fired.end(), atoms[i])) {
        flags[i] = 1;
        any = true;
      }
    return any;
  }

  static bool flag_of(const Node &n, const std::vector<char> &flags, int id) {
    auto it = std::lower_bound(n.atoms.begin(), n.atoms.end(), id);
    return flags[static_cast<std::size_t>(it - n.atoms.begin())] != 0;
  }

  std::optional<Value> lookup(const VarRef &v, const Event &e) const {
    if (v.kind == VarRef::Kind::Local) {
      auto it = local_value.find({e.frame, v.name});
      if (it == local_value.end())
        return std::nullopt;
      return it->second;
    }
    auto it = global_value.find(v.name);
    if (it == global_value.end())
      return std::nullopt;
    return it->second;
  }

  bool step(Node &n, const Event &e, const std::vector<int> &fired, Root &root) {
    switch (n.tr->kind) {
    case TestRequirement::Kind::Btr:
      if (!mark(n.flags, n.atoms, fired))
        return false;
      return eval_expr(n.expr, [&](int id) { return flag_of(n, n.flags, id); });
    case TestRequirement::Kind::Ctr: {
      if (!step(n.kids[0], e, fired, root))
        return false;
      auto look = [&](const VarRef &v) { return lookup(v, e); };
      if (eval_predicate(n.tr->pred, look))
        return true;
      if (!n.reported && root.diagnostics.size() < 8) {
        root.diagnostics.push_back(explain_failure(n.tr->pred, look, e.seq));
        n.reported = true;
      }
      return false;
    }
    case TestRequirement::Kind::Str:
      if (!step(n.kids[n.cursor], e, fired, root))
        return false;
      if (n.cursor + 1 < n.kids.size()) {
        ++n.cursor;
        open(n.kids[n.cursor], e.seq);
        return false;
      }
      return true;
    case TestRequirement::Kind::Rtr:
      if (!step(n.kids[0], e, fired, root))
        return false;
      ++n.count;
      open(n.kids[0], e.seq);
      return !n.tr->lo || n.count >= *n.tr->lo;
    }
    return false;
  }

  std::vector<int> fire(const Event &e) {
    std::vector<int> out;
    if (e.kind == Event::Kind::StatementReached) {
      auto it = table.on_stmt.find({e.fn, e.offset});
      if (it != table.on_stmt.end())
        for (int id : it->second) {
          const auto &el = table.elements[static_cast<std::size_t>(id)];
          if (el.ref.kind == ElementRef::Kind::Stmt) {
            out.push_back(id);
            continue;
          }
          std::optional<Key> def;
          if (el.ref.var.kind == VarRef::Kind::Local) {
            auto d = local_def.find({e.frame, el.ref.var.name});
            if (d != local_def.end())
              def = d->second;
          } else {
            auto d = module_def.find(el.ref.var);
            if (d != module_def.end())
              def = d->second;
          }
          if (def && *def == Key{el.def_fn, el.def_offset})
            out.push_back(id);
        }
    } else if (e.kind == Event::Kind::BlockEnter) {
      auto prev = last_block.find(e.frame);
      auto it = table.on_block.find({e.fn, e.offset});
      if (it != table.on_block.end() && prev != last_block.end())
        for (int id : it->second)
          if (table.elements[static_cast<std::size_t>(id)].src_leader == prev->second)
            out.push_back(id);
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  void update_state(const Event &e) {
    switch (e.kind) {
    case Event::Kind::MethodEnter: {
      frame_fn[e.frame] = e.fn;
      const Function &fn = module.functions[e.fn];
      for (std::size_t i = 0; i < e.args.size() && i < fn.params.size(); ++i)
        local_value[{e.frame, fn.params[i].name}] = e.args[i];
      break;
    }
    case Event::Kind::MethodExit: {
      last_block.erase(e.frame);
      auto drop = [&](auto &m) {
        auto lo = m.lower_bound({e.frame, std::string()});
        auto hi = lo;
        while (hi != m.end() && hi->first.first == e.frame)
          ++hi;
        m.erase(lo, hi);
      };
      drop(local_def);
      drop(local_value);
      frame_fn.erase(e.frame);
      break;
    }
    case Event::Kind::BlockEnter: last_block[e.frame] = e.offset; break;
    case Event::Kind::VariableDefined:
      if (e.var.kind == VarRef::Kind::Local) {
        local_def[{e.frame, e.var.name}] = {e.fn, e.offset};
        local_value[{e.frame, e.var.name}] = e.value;
      } else {
        module_def[e.var] = {e.fn, e.offset};
        if (e.var.kind == VarRef::Kind::Global)
          global_value[e.var.name] = e.value;
      }
      break;
    case Event::Kind::StatementReached: break;
    }
  }

  void on_event(const Event &e) {
    if (e.seq <= last_seq)
      throw Error(ErrorKind::OutOfOrderEvent, "event seq " + std::to_string(e.seq) +
                                                  " does not follow seq " + std::to_string(last_seq));
    last_seq = e.seq;
    auto fired = fire(e);
    for (int id : fired) {
      auto &s = stats[static_cast<std::size_t>(id)];
      ++s.count;
      s.last_seq = e.seq;
    }
    if (!fired.empty())
      for (auto &root : roots) {
        if (root.req->tr.kind == TestRequirement::Kind::Btr) {
          mark(root.latched, root.node.atoms, fired);
          continue;
        }
        if (root.req->tr.kind != TestRequirement::Kind::Rtr && root.satisfied)
          continue;
        if (step(root.node, e, fired, root))
          root.satisfied = true;
      }
    update_state(e);
  }

  std::vector<RequirementReport> finalize() {
    std::vector<RequirementReport> out;
    for (auto &root : roots) {
      RequirementReport rep;
      rep.name = root.req->name;
      const auto &tr = root.req->tr;
      switch (tr.kind) {
      case TestRequirement::Kind::Btr:
        rep.satisfied = eval_expr(root.node.expr,
                                  [&](int id) { return flag_of(root.node, root.latched, id); });
        break;
      case TestRequirement::Kind::Rtr:
        rep.rtr_count = root.node.count;
        rep.lo = tr.lo;
        rep.hi = tr.hi;
        rep.satisfied = (!tr.lo || root.node.count >= *tr.lo) && (!tr.hi || root.node.count <= *tr.hi);
        break;
      case TestRequirement::Kind::Str:
        rep.satisfied = root.satisfied;
        rep.str_length = tr.children.size();
        rep.str_progress = root.satisfied ? tr.children.size() : root.node.cursor;
        break;
      case TestRequirement::Kind::Ctr: rep.satisfied = root.satisfied; break;
      }
      if (!rep.satisfied)
        rep.diagnostics = root.diagnostics;
      for (int id : root.elements)
        rep.elements.emplace_back(format_element(table.elements[static_cast<std::size_t>(id)].ref),
                                  stats[static_cast<std::size_t>(id)]);
      out.push_back(std::move(rep));
    }
    return out;
  }
};

MatchSession::MatchSession(const ProgramModule &module, const ReqSet &resolved)
    : impl_(std::make_unique<Impl>(module, resolved)) {}

MatchSession::~MatchSession() = default;

void MatchSession::on_start(const std::map<std::string, Value> &initial_globals) {
  impl_->global_value = initial_globals;
}

void MatchSession::on_event(const Event &e) { impl_->on_event(e); }

std::vector<RequirementReport> MatchSession::finalize() { return impl_->finalize(); }

// ---------------------------------------------------------------- oracle

namespace {

class Oracle {
public:
  Oracle(const ProgramModule &module, const ReqSet &reqs, const std::vector<Event> &trace,
         const std::map<std::string, Value> &globals)
      : module_(module), table_(module, reqs), trace_(trace), globals_(globals) {
    const std::size_t n = trace.size();
    prefix_.assign(table_.elements.size(), std::vector<std::uint32_t>(n + 1, 0));
    fired_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      fired_[i] = fired_at(i);
      for (std::size_t id = 0; id < table_.elements.size(); ++id)
        prefix_[id][i + 1] = prefix_[id][i];
      for (int id : fired_[i])
        ++prefix_[static_cast<std::size_t>(id)][i + 1];
    }
  }

  bool verdict(const TestRequirement &tr) const {
    switch (tr.kind) {
    case TestRequirement::Kind::Btr: {
      CExpr e = compile_expr(tr.btr, table_);
      return eval_expr(e, [&](int id) { return fired_between(id, 0, trace_.size()); });
    }
    case TestRequirement::Kind::Rtr: {
      const auto count = occurrences(tr.children[0], 0).size();
      return (!tr.lo || count >= *tr.lo) && (!tr.hi || count <= *tr.hi);
    }
    default: return !completions(tr, 0).empty();
    }
  }

  /// Ascending completion seqs of `tr` for the window opened at seq w.
  std::vector<std::uint64_t> completions(const TestRequirement &tr, std::uint64_t w) const {
    std::vector<std::uint64_t> out;
    switch (tr.kind) {
    case TestRequirement::Kind::Btr: {
      CExpr e = compile_expr(tr.btr, table_);
      auto atoms = atom_ids(tr.btr, table_);
      for (std::size_t i = static_cast<std::size_t>(w); i < trace_.size(); ++i) {
        bool any = false;
        for (int id : fired_[i])
          any = any || std::binary_search(atoms.begin(), atoms.end(), id);
        if (!any)
          continue;
        if (eval_expr(e, [&](int id) { return fired_between(id, static_cast<std::size_t>(w), i + 1); }))
          out.push_back(trace_[i].seq);
      }
      break;
    }
    case TestRequirement::Kind::Ctr:
      for (auto t : completions(tr.children[0], w)) {
        const auto idx = static_cast<std::size_t>(t - 1);
        if (eval_predicate(tr.pred, [&](const VarRef &v) { return value_before(v, idx); }))
          out.push_back(t);
      }
      break;
    case TestRequirement::Kind::Str: {
      std::uint64_t at = w;
      for (std::size_t k = 0; k + 1 < tr.children.size(); ++k) {
        auto c = completions(tr.children[k], at);
        if (c.empty())
          return {};
        at = c.front();
      }
      return completions(tr.children.back(), at);
    }
    case TestRequirement::Kind::Rtr: {
      auto occ = occurrences(tr.children[0], w);
      const std::size_t lo = tr.lo.value_or(0);
      for (std::size_t k = 0; k < occ.size(); ++k)
        if (k + 1 >= lo)
          out.push_back(occ[k]);
      break;
    }
    }
    return out;
  }

private:
  std::vector<std::uint64_t> occurrences(const TestRequirement &inner, std::uint64_t w) const {
    std::vector<std::uint64_t> occ;
    for (;;) {
      auto c = completions(inner, w);
      if (c.empty())
        return occ;
      w = c.front();
      occ.push_back(w);
    }
  }

  // Trace index range [from, to).
  bool fired_between(int id, std::size_t from, std::size_t to) const {
    const auto &p = prefix_[static_cast<std::size_t>(id)];
    return p[to] > p[from];
  }

  std::vector<int> fired_at(std::size_t i) const {
    const Event &e = trace_[i];
    std::vector<int> out;
    if (e.kind == Event::Kind::StatementReached) {
      auto it = table_.on_stmt.find({e.fn, e.offset});
      if (it == table_.on_stmt.end())
        return out;
      for (int id : it->second) {
        const auto &el = table_.elements[static_cast<std::size_t>(id)];
        if (el.ref.kind == ElementRef::Kind::Stmt) {
          out.push_back(id);
          continue;
        }
        // Nearest preceding definition of the variable.
        const bool local = el.ref.var.kind == VarRef::Kind::Local;
        for (std::size_t j = i; j-- > 0;) {
          const Event &d = trace_[j];
          if (d.kind != Event::Kind::VariableDefined || d.var != el.ref.var)
            continue;
          if (local && d.frame != e.frame)
            continue;
          if (d.fn == el.def_fn && d.offset == el.def_offset)
            out.push_back(id);
          break;
        }
      }
    } else if (e.kind == Event::Kind::BlockEnter) {
      auto it = table_.on_block.find({e.fn, e.offset});
      if (it == table_.on_block.end())
        return out;
      for (std::size_t j = i; j-- > 0;) {
        const Event &b = trace_[j];
        if (b.kind != Event::Kind::BlockEnter || b.frame != e.frame)
          continue;
        for (int id : it->second)
          if (table_.elements[static_cast<std::size_t>(id)].src_leader == b.offset)
            out.push_back(id);
        break;
      }
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  std::optional<Value> value_before(const VarRef &v, std::size_t idx) const {
    const std::uint64_t frame = trace_[idx].frame;
    for (std::size_t j = idx; j-- > 0;) {
      const Event &d = trace_[j];
      if (v.kind == VarRef::Kind::Local) {
        if (d.frame != frame)
          continue;
        if (d.kind == Event::Kind::VariableDefined && d.var == v)
          return d.value;
        if (d.kind == Event::Kind::MethodEnter) {
          auto p = param_index(module_.functions[d.fn], v.name);
          if (p && *p < d.args.size())
            return d.args[*p];
          return std::nullopt;
        }
      } else if (d.kind == Event::Kind::VariableDefined && d.var == v) {
        return d.value;
      }
    }
    if (v.kind == VarRef::Kind::Global) {
      auto it = globals_.find(v.name);
      if (it != globals_.end())
        return it->second;
    }
    return std::nullopt;
  }

  const ProgramModule &module_;
  ElementTable table_;
  const std::vector<Event> &trace_;
  const std::map<std::string, Value> &globals_;
  std::vector<std::vector<std::uint32_t>> prefix_;
  std::vector<std::vector<int>> fired_;
};

} // namespace

std::vector<Verdict> oracle_evaluate(const ProgramModule &module, const ReqSet &resolved,
                                     const std::vector<Event> &trace,
                                     const std::map<std::string, Value> &initial_globals) {
  for (std::size_t i = 0; i < trace.size(); ++i)
    if (trace[i].seq != i + 1)
      throw Error(ErrorKind::OutOfOrderEvent, "oracle needs the full gap-free trace");
  Oracle o(module, resolved, trace, initial_globals);
  std::vector<Verdict> out;
  for (const auto &r : resolved.reqs)
    out.push_back({r.name, o.verdict(r.tr)});
  return out;
}

} // namespace ucov
