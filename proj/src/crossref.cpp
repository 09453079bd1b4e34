#include "ucov/crossref.hpp"

#include <algorithm>
#include <functional>
#include <sstream>

namespace ucov {

bool same_code(const Function &a, const Function &b) {
  if (a.code.size() != b.code.size())
    return false;
  for (std::size_t i = 0; i < a.code.size(); ++i) {
    Instruction x = a.code[i], y = b.code[i];
    x.label.reset();
    y.label.reset();
    if (!(x == y))
      return false;
  }
  return true;
}

FunctionDiff functions_changed(const ProgramModule &old_module, const ProgramModule &new_module) {
  FunctionDiff d;
  for (const auto &f : old_module.functions) {
    const Function *g = new_module.find_function(f.name);
    if (!g)
      d.removed.insert(f.name);
    else if (!same_code(f, *g))
      d.changed.insert(f.name);
  }
  for (const auto &g : new_module.functions)
    if (!old_module.find_function(g.name))
      d.added.insert(g.name);
  return d;
}

std::string format_map_result(const MapResult &r) {
  switch (r.kind) {
  case MapResult::Kind::Mapped: return "Mapped @+" + std::to_string(r.offset);
  case MapResult::Kind::Ambiguous: {
    std::string s = "Ambiguous";
    for (auto c : r.candidates)
      s += " @+" + std::to_string(c);
    if (!r.stage.empty())
      s += " (" + r.stage + " level " + std::to_string(r.level) + ")";
    return s;
  }
  case MapResult::Kind::Unmapped: return "Unmapped (" + r.reason + ")";
  }
  return {};
}

std::vector<std::string> descendant_signature(const Bdt &t, std::int32_t node, int k) {
  std::vector<std::string> out;
  std::function<void(std::int32_t, int)> walk = [&](std::int32_t n, int d) {
    const auto &nd = t.nodes[static_cast<std::size_t>(n)];
    if (d == k) {
      out.push_back(nd.signature);
      return;
    }
    for (auto c : nd.children)
      walk(c, d + 1);
  };
  walk(node, 0);
  return out;
}

std::string expression_signature(const Bdt &t, std::int32_t node) {
  const auto &nd = t.nodes[static_cast<std::size_t>(node)];
  std::string out = nd.signature;
  if (nd.offset < 0)
    return out;
  // Children below the node's own offset are the values it consumes.
  std::string args;
  for (auto c : nd.children)
    if (t.nodes[static_cast<std::size_t>(c)].offset < nd.offset)
      args += (args.empty() ? "" : ",") + expression_signature(t, c);
  return args.empty() ? out : out + "(" + args + ")";
}

std::string ancestor_signature(const Bdt &t, std::int32_t node, int k) {
  for (int i = 0; i < k; ++i) {
    const auto &nd = t.nodes[static_cast<std::size_t>(node)];
    if (nd.parent < 0)
      return "<past-root>";
    node = nd.parent;
  }
  return expression_signature(t, node);
}

namespace {

std::string subtree_signature(const Bdt &t, std::int32_t node) {
  const auto &nd = t.nodes[static_cast<std::size_t>(node)];
  std::string out = nd.signature;
  if (nd.children.empty())
    return out;
  out += "(";
  for (std::size_t i = 0; i < nd.children.size(); ++i)
    out += (i ? "," : "") + subtree_signature(t, nd.children[i]);
  return out + ")";
}

std::int32_t ancestor(const Bdt &t, std::int32_t node, int k) {
  for (int i = 0; i < k && node >= 0; ++i)
    node = t.nodes[static_cast<std::size_t>(node)].parent;
  return node;
}

// Subtree signatures of the left and right neighbours of `node` among its
// parent's children; empty at either end.
std::pair<std::string, std::string> neighbours(const Bdt &t, std::int32_t node) {
  const auto parent = t.nodes[static_cast<std::size_t>(node)].parent;
  if (parent < 0)
    return {};
  const auto &kids = t.nodes[static_cast<std::size_t>(parent)].children;
  const auto it = std::find(kids.begin(), kids.end(), node);
  std::pair<std::string, std::string> out;
  if (it != kids.begin())
    out.first = subtree_signature(t, *(it - 1));
  if (it + 1 != kids.end())
    out.second = subtree_signature(t, *(it + 1));
  return out;
}

// Operand names along the path from the node to the root.
std::vector<std::string> operand_path(const Bdt &t, std::int32_t node) {
  std::vector<std::string> out;
  for (; node >= 0; node = t.nodes[static_cast<std::size_t>(node)].parent)
    out.push_back(t.nodes[static_cast<std::size_t>(node)].operand);
  return out;
}

MapResult mapped(std::int32_t node, int level, std::string stage) {
  MapResult r;
  r.kind = MapResult::Kind::Mapped;
  r.offset = static_cast<std::uint32_t>(node - 1);
  r.level = level;
  r.stage = std::move(stage);
  return r;
}

MapResult ambiguous(const std::vector<std::int32_t> &cands, int level, std::string stage) {
  MapResult r;
  r.kind = MapResult::Kind::Ambiguous;
  for (auto c : cands)
    r.candidates.push_back(static_cast<std::uint32_t>(c - 1));
  r.level = level;
  r.stage = std::move(stage);
  return r;
}

} // namespace

MapResult map_statement(const Bdt &old_bdt, const Bdt &new_bdt, std::uint32_t offset) {
  const std::int32_t o = Bdt::node_of(offset);
  const std::string &sig = old_bdt.nodes[static_cast<std::size_t>(o)].signature;
  std::vector<std::int32_t> cands;
  for (std::size_t n = 1; n < new_bdt.nodes.size(); ++n)
    if (new_bdt.nodes[n].signature == sig)
      cands.push_back(static_cast<std::int32_t>(n));
  if (cands.empty()) {
    MapResult r;
    r.reason = "no opcode-compatible node";
    return r;
  }
  if (cands.size() == 1)
    return mapped(cands[0], 0, "signature");

  // Returns false when the filter would empty the set.
  auto narrow = [&](auto &&same) {
    std::vector<std::int32_t> kept;
    for (auto c : cands)
      if (same(c))
        kept.push_back(c);
    if (kept.empty())
      return false;
    cands = std::move(kept);
    return true;
  };

  // A filter that would empty the set ends the level walk; the sibling and
  // operand tests then decide among the survivors or leave it ambiguous.
  const int height = std::max(old_bdt.height(), new_bdt.height());
  int level = height;
  std::string stage = "siblings";
  for (int k = 1; k <= height; ++k) {
    const auto want_desc = descendant_signature(old_bdt, o, k);
    if (!narrow([&](std::int32_t c) { return descendant_signature(new_bdt, c, k) == want_desc; })) {
      level = k;
      stage = "descendants";
      break;
    }
    if (cands.size() == 1)
      return mapped(cands[0], k, "descendants");
    const auto want_anc = ancestor_signature(old_bdt, o, k);
    if (!narrow([&](std::int32_t c) { return ancestor_signature(new_bdt, c, k) == want_anc; })) {
      level = k;
      stage = "ancestors";
      break;
    }
    if (cands.size() == 1)
      return mapped(cands[0], k, "ancestors");
  }
  // Siblings: at each level from the node up, keep the candidates whose
  // neighbours agree with the most neighbours of the old node's.
  const int depth = old_bdt.depth(o);
  for (int j = 0; j < depth && cands.size() > 1; ++j) {
    const auto want = neighbours(old_bdt, ancestor(old_bdt, o, j));
    std::vector<int> score;
    int best = 0;
    for (auto c : cands) {
      const auto a = ancestor(new_bdt, c, j);
      const auto got = a >= 0 ? neighbours(new_bdt, a) : std::pair<std::string, std::string>{};
      score.push_back((got.first == want.first) + (got.second == want.second));
      best = std::max(best, score.back());
    }
    std::vector<std::int32_t> kept;
    for (std::size_t i = 0; i < cands.size(); ++i)
      if (score[i] == best)
        kept.push_back(cands[i]);
    cands = std::move(kept);
  }
  if (cands.size() == 1)
    return mapped(cands[0], level, "siblings");
  // Last resort: the names the node and its ancestors refer to.
  const auto want_names = operand_path(old_bdt, o);
  if (narrow([&](std::int32_t c) { return operand_path(new_bdt, c) == want_names; }) &&
      cands.size() == 1)
    return mapped(cands[0], level, "operands");
  return ambiguous(cands, level, stage);
}

MapResult map_statement(const ProgramModule &old_module, const Function &old_fn,
                        const ProgramModule &new_module, const Function &new_fn,
                        std::uint32_t offset) {
  return map_statement(build_bdt(old_module, old_fn), build_bdt(new_module, new_fn), offset);
}

// ---------------------------------------------------------------- resolutions

Resolutions parse_resolutions(std::string_view text) {
  Resolutions r;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  auto offset_of = [&](const std::string &tok) -> std::uint32_t {
    if (tok.size() < 3 || tok.compare(0, 2, "@+") != 0)
      throw Error(ErrorKind::Format, "expected '@+offset', got '" + tok + "'", lineno);
    try {
      std::size_t used = 0;
      unsigned long v = std::stoul(tok.substr(2), &used);
      if (used != tok.size() - 2)
        throw std::invalid_argument(tok);
      return static_cast<std::uint32_t>(v);
    } catch (const std::logic_error &) {
      throw Error(ErrorKind::Format, "bad offset '" + tok + "'", lineno);
    }
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos)
      line.erase(hash);
    std::istringstream ls(line);
    std::vector<std::string> toks;
    for (std::string t; ls >> t;)
      toks.push_back(t);
    if (toks.empty())
      continue;
    if (toks.size() != 5 || toks[3] != "->" || (toks[0] != "stmt" && toks[0] != "var"))
      throw Error(ErrorKind::Format,
                  "expected 'stmt fn @+old -> @+new' or 'var scope old -> new'", lineno);
    if (toks[0] == "stmt")
      r.statements[{toks[1], offset_of(toks[2])}] = offset_of(toks[4]);
    else
      r.variables[{toks[1], toks[2]}] = toks[4];
  }
  return r;
}

std::string format_resolutions(const Resolutions &r) {
  std::string out;
  for (const auto &[k, v] : r.statements)
    out += "stmt " + k.first + " @+" + std::to_string(k.second) + " -> @+" + std::to_string(v) + "\n";
  for (const auto &[k, v] : r.variables)
    out += "var " + k.first + " " + k.second + " -> " + v + "\n";
  return out;
}

void check_resolutions(const Resolutions &r, const ProgramModule &new_module) {
  for (const auto &[k, v] : r.statements) {
    const Function *f = new_module.find_function(k.first);
    if (!f || v >= f->code.size())
      throw Error(ErrorKind::Structure, "resolution target " + k.first + "@+" + std::to_string(v) +
                                            " does not exist in the new version");
  }
  for (const auto &[k, v] : r.variables) {
    bool ok = false;
    if (k.first == "global")
      ok = new_module.find_global(v) != nullptr;
    else if (k.first == "array")
      ok = new_module.find_array(v) != nullptr;
    else if (const Function *f = new_module.find_function(k.first))
      ok = f->find_local(v) != nullptr;
    if (!ok)
      throw Error(ErrorKind::Structure,
                  "resolution target variable '" + v + "' does not exist in scope '" + k.first + "'");
  }
}

// ---------------------------------------------------------------- variables

std::string format_var_map_result(const VarMapResult &r) {
  switch (r.kind) {
  case VarMapResult::Kind::Mapped: return "Mapped " + format_varref(r.var);
  case VarMapResult::Kind::Conflict: {
    std::string s = "Conflict";
    for (const auto &e : r.evidence)
      s += " " + e.fn + "@+" + std::to_string(e.old_offset) + "->@+" + std::to_string(e.new_offset) +
           "=" + e.var.name;
    return s;
  }
  case VarMapResult::Kind::Unmapped: return "Unmapped (" + r.reason + ")";
  }
  return {};
}

VersionMapper::VersionMapper(const ProgramModule &old_module, const ProgramModule &new_module)
    : old_(old_module), new_(new_module), diff_(functions_changed(old_module, new_module)) {}

const Bdt &VersionMapper::bdt(const ProgramModule &m, const std::string &fn,
                              std::map<std::string, Bdt> &cache) {
  auto it = cache.find(fn);
  if (it == cache.end())
    it = cache.emplace(fn, build_bdt(m, *m.find_function(fn))).first;
  return it->second;
}

MapResult VersionMapper::map_statement(const std::string &fn, std::uint32_t offset) {
  const Function *of = old_.find_function(fn);
  const Function *nf = new_.find_function(fn);
  if (!of || !nf) {
    MapResult r;
    r.reason = "function '" + fn + "' is not present in both versions";
    return r;
  }
  if (!diff_.changed.count(fn)) {
    MapResult r;
    r.kind = MapResult::Kind::Mapped;
    r.offset = offset;
    return r;
  }
  return ucov::map_statement(bdt(old_, fn, old_bdts_), bdt(new_, fn, new_bdts_), offset);
}

VarMapResult VersionMapper::map_variable(const VarRef &var) {
  VarMapResult r;
  auto exists_in_new = [&](const VarRef &v) {
    switch (v.kind) {
    case VarRef::Kind::Local: {
      const Function *f = new_.find_function(v.fn);
      return f && f->find_local(v.name);
    }
    case VarRef::Kind::Global: return new_.find_global(v.name) != nullptr;
    case VarRef::Kind::Array: return new_.find_array(v.name) != nullptr;
    }
    return false;
  };
  if (var.kind == VarRef::Kind::Local) {
    if (!new_.find_function(var.fn)) {
      r.reason = "function '" + var.fn + "' was removed";
      return r;
    }
    if (!diff_.changed.count(var.fn) && exists_in_new(var)) {
      r.kind = VarMapResult::Kind::Mapped;
      r.var = var;
      return r;
    }
  }

  std::size_t sites = 0;
  for (const auto &f : old_.functions) {
    if (var.kind == VarRef::Kind::Local && f.name != var.fn)
      continue;
    for (std::uint32_t i = 0; i < f.code.size(); ++i) {
      const auto &ins = f.code[i];
      if (!(is_use(ins.op) || is_definition(ins.op)) || referenced_var(f, ins) != var)
        continue;
      ++sites;
      MapResult m = map_statement(f.name, i);
      if (m.kind != MapResult::Kind::Mapped)
        continue;
      const Function *nf = new_.find_function(f.name);
      auto nv = referenced_var(*nf, nf->code[m.offset]);
      if (nv)
        r.evidence.push_back({f.name, i, m.offset, *nv});
    }
  }
  if (sites == 0) {
    if (exists_in_new(var)) {
      r.kind = VarMapResult::Kind::Mapped;
      r.var = var;
    } else {
      r.reason = "no reference sites";
    }
    return r;
  }
  if (r.evidence.empty()) {
    r.reason = "no reference site could be mapped";
    return r;
  }
  for (const auto &e : r.evidence)
    if (e.var != r.evidence.front().var) {
      r.kind = VarMapResult::Kind::Conflict;
      return r;
    }
  r.kind = VarMapResult::Kind::Mapped;
  r.var = r.evidence.front().var;
  return r;
}

VarMapResult map_variable(const ProgramModule &old_module, const ProgramModule &new_module,
                          const VarRef &var) {
  VersionMapper m(old_module, new_module);
  return m.map_variable(var);
}

// ---------------------------------------------------------------- migration

std::string format_issue(const MigrationIssue &i) {
  return i.requirement + "\t" + i.kind + "\t" + i.element + "\t" + i.detail;
}

namespace {

class Migrator {
public:
  Migrator(VersionMapper &mapper, const Resolutions &res, const std::string &req)
      : m_(mapper), res_(res), req_(req) {}

  void requirement(TestRequirement &tr) {
    switch (tr.kind) {
    case TestRequirement::Kind::Btr: tr.btr.mutate_atoms([&](ElementRef &e) { element(e); }); break;
    case TestRequirement::Kind::Ctr:
      requirement(tr.children[0]);
      tr.pred.mutate_atoms([&](Clause &c) {
        var(c.lhs);
        if (c.rhs_var)
          var(*c.rhs_var);
      });
      break;
    default:
      for (auto &c : tr.children)
        requirement(c);
    }
  }

  std::vector<MigrationIssue> issues;

private:
  void issue(std::string kind, std::string element, std::string detail) {
    issues.push_back({req_, std::move(kind), std::move(element), std::move(detail)});
  }

  void site(Site &s, const std::string &element) {
    const auto old_off = s.offset();
    MapResult r = m_.map_statement(s.fn, old_off);
    std::uint32_t target = r.offset;
    if (r.kind != MapResult::Kind::Mapped) {
      auto it = res_.statements.find({s.fn, old_off});
      if (it == res_.statements.end()) {
        issue(r.kind == MapResult::Kind::Ambiguous ? "Ambiguous" : "Unmapped", element,
              s.fn + format_anchor(s.at) + ": " + format_map_result(r));
        return;
      }
      target = it->second;
    }
    const Function *nf = m_.new_module().find_function(s.fn);
    if (!s.at.label.empty()) {
      auto lab = nf ? nf->find_label(s.at.label) : std::nullopt;
      if (!lab || *lab != target)
        s.at.label.clear();
    }
    s.at.offset = target;
  }

  void element(ElementRef &e) {
    const std::string text = format_element(e);
    site(e.site, text);
    if (e.kind != ElementRef::Kind::Stmt)
      site(e.other, text);
    if (e.kind == ElementRef::Kind::DefUse)
      var(e.var);
  }

  void var(VarRef &v) {
    auto key = v.kind == VarRef::Kind::Local
                   ? std::make_pair(v.fn, v.name)
                   : std::make_pair(std::string(v.kind == VarRef::Kind::Global ? "global" : "array"),
                                    v.name);
    VarMapResult r = m_.map_variable(v);
    if (r.kind == VarMapResult::Kind::Mapped) {
      v = r.var;
      return;
    }
    auto it = res_.variables.find(key);
    if (it != res_.variables.end()) {
      v.name = it->second;
      return;
    }
    issue(r.kind == VarMapResult::Kind::Conflict ? "Conflict" : "Unmapped", format_varref(v),
          format_var_map_result(r));
  }

  VersionMapper &m_;
  const Resolutions &res_;
  const std::string &req_;
};

} // namespace

Migration migrate(const ReqSet &reqs, const ProgramModule &old_module,
                  const ProgramModule &new_module, const Resolutions &res) {
  Migration out;
  VersionMapper mapper(old_module, new_module);
  for (const auto &r : reqs.reqs) {
    NamedRequirement moved = r;
    Migrator mig(mapper, res, r.name);
    mig.requirement(moved.tr);
    if (!mig.issues.empty()) {
      out.issues.insert(out.issues.end(), mig.issues.begin(), mig.issues.end());
      continue;
    }
    ReqSet single;
    single.reqs.push_back(moved);
    try {
      out.reqs.reqs.push_back(validate(single, new_module).reqs.front());
    } catch (const Error &e) {
      out.issues.push_back({r.name, std::string(error_kind_name(e.kind())),
                            format_requirement(moved.tr), e.message()});
    }
  }
  return out;
}

} // namespace ucov
