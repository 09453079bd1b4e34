#include "ucov/bdt.hpp"

#include <algorithm>
#include <functional>
#include <sstream>

#include "ucov/asm.hpp"
#include "ucov/check.hpp"

namespace ucov {

bool Cfg::has_edge(std::uint32_t from, std::uint32_t to) const {
  if (from >= blocks.size())
    return false;
  for (const auto &e : blocks[from].succs)
    if (e.to == to)
      return true;
  return false;
}

std::vector<std::vector<std::uint32_t>> Cfg::successors() const {
  std::vector<std::vector<std::uint32_t>> out(blocks.size() + 1);
  for (std::uint32_t b = 0; b < blocks.size(); ++b)
    for (const auto &e : blocks[b].succs)
      out[b].push_back(e.to);
  return out;
}

Cfg build_cfg(const Function &fn) {
  Cfg cfg;
  const auto n = static_cast<std::uint32_t>(fn.code.size());
  auto lead = leaders(fn);
  cfg.block_of.assign(n, 0);
  for (std::size_t k = 0; k < lead.size(); ++k) {
    BasicBlock b;
    b.leader = lead[k];
    b.end = k + 1 < lead.size() ? lead[k + 1] : n;
    for (auto i = b.leader; i < b.end; ++i)
      cfg.block_of[i] = static_cast<std::uint32_t>(k);
    cfg.blocks.push_back(b);
  }
  for (auto &b : cfg.blocks) {
    const auto &ins = fn.code[b.last()];
    auto add = [&](std::uint32_t to, CfgEdge::Kind kind) {
      for (const auto &e : b.succs)
        if (e.to == to)
          return;
      b.succs.push_back({to, kind});
    };
    if (ins.op == Opcode::Ret) {
      add(cfg.exit(), CfgEdge::Kind::Exit);
      continue;
    }
    if (!ends_flow(ins.op) && b.end < n)
      add(cfg.block_of[b.end], CfgEdge::Kind::Fallthrough);
    if (is_jump(ins.op))
      add(cfg.block_of[ins.target], CfgEdge::Kind::Taken);
  }
  return cfg;
}

std::vector<std::vector<bool>> postdominator_sets(const Cfg &cfg) {
  const std::size_t nb = cfg.blocks.size();
  const std::size_t exit = nb;
  auto succ = cfg.successors();

  // Blocks that cannot reach exit have no postdominators.
  std::vector<bool> reaches(nb + 1, false);
  reaches[exit] = true;
  for (bool changed = true; changed;) {
    changed = false;
    for (std::size_t b = 0; b < nb; ++b)
      if (!reaches[b])
        for (auto s : succ[b])
          if (reaches[s]) {
            reaches[b] = true;
            changed = true;
            break;
          }
  }
  for (std::size_t b = 0; b < nb; ++b)
    if (!reaches[b])
      throw Error(ErrorKind::UnreachableExit,
                  "block at offset " + std::to_string(cfg.blocks[b].leader) + " cannot reach exit");

  std::vector<std::vector<bool>> pdom(nb + 1, std::vector<bool>(nb + 1, true));
  pdom[exit].assign(nb + 1, false);
  pdom[exit][exit] = true;
  for (bool changed = true; changed;) {
    changed = false;
    for (std::size_t b = nb; b-- > 0;) {
      std::vector<bool> next(nb + 1, true);
      for (auto s : succ[b])
        for (std::size_t k = 0; k <= nb; ++k)
          next[k] = next[k] && pdom[s][k];
      next[b] = true;
      if (next != pdom[b]) {
        pdom[b] = std::move(next);
        changed = true;
      }
    }
  }
  return pdom;
}

std::vector<std::uint32_t> postdominators(const Cfg &cfg) {
  auto pdom = postdominator_sets(cfg);
  const std::size_t nb = cfg.blocks.size();
  std::vector<std::size_t> size(nb + 1, 0);
  for (std::size_t b = 0; b <= nb; ++b)
    size[b] = static_cast<std::size_t>(std::count(pdom[b].begin(), pdom[b].end(), true));
  std::vector<std::uint32_t> ipdom(nb + 1, static_cast<std::uint32_t>(nb));
  for (std::size_t b = 0; b < nb; ++b) {
    std::size_t best = nb;
    for (std::size_t d = 0; d <= nb; ++d)
      if (d != b && pdom[b][d] && size[d] > size[best])
        best = d;
    ipdom[b] = static_cast<std::uint32_t>(best);
  }
  return ipdom;
}

std::vector<std::vector<std::uint32_t>> control_dependence_sets(const Cfg &cfg) {
  auto pdom = postdominator_sets(cfg);
  const std::size_t nb = cfg.blocks.size();
  std::vector<std::vector<std::uint32_t>> cd(nb);
  for (std::uint32_t a = 0; a < nb; ++a)
    for (const auto &e : cfg.blocks[a].succs)
      for (std::uint32_t b = 0; b < nb; ++b) {
        const bool strictly_pdoms_a = b != a && pdom[a][b];
        if (pdom[e.to][b] && !strictly_pdoms_a)
          cd[b].push_back(a);
      }
  for (auto &v : cd) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  }
  return cd;
}

std::vector<std::int32_t> control_deps(const Function &fn, const Cfg &cfg) {
  auto cd = control_dependence_sets(cfg);
  std::vector<std::int32_t> out(fn.code.size(), -1);
  for (std::uint32_t i = 0; i < fn.code.size(); ++i) {
    for (auto a : cd[cfg.block_of[i]]) {
      const auto c = cfg.blocks[a].last();
      if (is_conditional(fn.code[c].op) && c < i && static_cast<std::int32_t>(c) > out[i])
        out[i] = static_cast<std::int32_t>(c);
    }
  }
  return out;
}

std::vector<std::int32_t> control_deps(const Function &fn) { return control_deps(fn, build_cfg(fn)); }

std::string abstract_signature(const Instruction &ins) {
  std::string s(opcode_info(ins.op).mnemonic);
  switch (opcode_info(ins.op).operand) {
  case OperandKind::Int: return s + " " + std::to_string(ins.int_imm);
  case OperandKind::Float: return s + " " + format_float(ins.float_imm);
  case OperandKind::Bool: return s + (ins.bool_imm ? " true" : " false");
  case OperandKind::Callee:
  case OperandKind::Intrinsic: return s + " " + ins.name;
  default: return s;
  }
}

int Bdt::depth(std::int32_t node) const {
  int d = 0;
  while (nodes[static_cast<std::size_t>(node)].parent >= 0) {
    node = nodes[static_cast<std::size_t>(node)].parent;
    ++d;
  }
  return d;
}

int Bdt::height() const {
  int h = 0;
  for (std::size_t k = 0; k < nodes.size(); ++k)
    h = std::max(h, depth(static_cast<std::int32_t>(k)));
  return h;
}

Bdt build_bdt(const ProgramModule &module, const Function &fn) {
  StackInfo stack = analyze_stack(module, fn);
  auto cd = control_deps(fn);
  Bdt t;
  const auto n = fn.code.size();
  t.nodes.resize(n + 1);
  t.nodes[0].signature = "start";
  for (std::uint32_t i = 0; i < n; ++i) {
    auto &node = t.nodes[i + 1];
    node.offset = static_cast<std::int32_t>(i);
    node.signature = abstract_signature(fn.code[i]);
    node.operand = fn.code[i].name;
    if (stack.consumer[i] >= 0)
      node.parent = Bdt::node_of(static_cast<std::uint32_t>(stack.consumer[i]));
    else if (cd[i] >= 0)
      node.parent = Bdt::node_of(static_cast<std::uint32_t>(cd[i]));
    else
      node.parent = 0;
  }
  for (std::uint32_t i = 0; i < n; ++i)
    t.nodes[static_cast<std::size_t>(t.nodes[i + 1].parent)].children.push_back(Bdt::node_of(i));
  return t;
}

std::string format_bdt(const Function &fn, const Bdt &bdt) {
  std::ostringstream os;
  std::function<void(std::int32_t, int)> walk = [&](std::int32_t id, int depth) {
    const auto &node = bdt.nodes[static_cast<std::size_t>(id)];
    os << std::string(static_cast<std::size_t>(depth) * 2, ' ');
    if (node.offset < 0) {
      os << "start\n";
    } else {
      const auto &parent = bdt.nodes[static_cast<std::size_t>(node.parent)];
      os << node.offset << ' ' << format_instruction(fn.code[static_cast<std::size_t>(node.offset)])
         << " [" << node.signature << "] (parent="
         << (parent.offset < 0 ? std::string("start") : std::to_string(parent.offset)) << ")\n";
    }
    for (auto c : node.children)
      walk(c, depth + 1);
  };
  walk(0, 0);
  return os.str();
}

} // namespace ucov
