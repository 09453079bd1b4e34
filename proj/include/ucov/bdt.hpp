#pragma once

// Control-flow graph, postdominators, direct control dependence and the
// bytecode dependence tree (BDT) of a single function.

#include <cstdint>
#include <string>
#include <vector>

#include "ucov/ir.hpp"

namespace ucov {

struct CfgEdge {
  enum class Kind { Fallthrough, Taken, Exit };
  std::uint32_t to = 0; // block index; Cfg::exit() for the virtual exit
  Kind kind = Kind::Fallthrough;
  bool operator==(const CfgEdge &) const = default;
};

struct BasicBlock {
  std::uint32_t leader = 0;
  std::uint32_t end = 0; // one past the last instruction
  std::vector<CfgEdge> succs;

  std::uint32_t last() const { return end - 1; }
};

struct Cfg {
  std::vector<BasicBlock> blocks;
  std::vector<std::uint32_t> block_of; // per instruction

  std::uint32_t exit() const { return static_cast<std::uint32_t>(blocks.size()); }
  bool has_edge(std::uint32_t from, std::uint32_t to) const;
  std::vector<std::vector<std::uint32_t>> successors() const;
};

Cfg build_cfg(const Function &fn);

/// Immediate postdominator per block; the entry for the virtual exit (index
/// blocks.size()) is the exit itself. Throws Error(UnreachableExit).
std::vector<std::uint32_t> postdominators(const Cfg &cfg);

/// Postdominator sets: pdom[b][a] is true iff a postdominates b (reflexive).
/// Index blocks.size() is the exit.
std::vector<std::vector<bool>> postdominator_sets(const Cfg &cfg);

/// For each block, the blocks it is directly control dependent on (classical
/// definition), ascending.
std::vector<std::vector<std::uint32_t>> control_dependence_sets(const Cfg &cfg);

/// Per instruction: offset of its controlling conditional, or -1 for
/// "start". Among several controllers the nearest one preceding the
/// instruction is taken.
std::vector<std::int32_t> control_deps(const Function &fn, const Cfg &cfg);
std::vector<std::int32_t> control_deps(const Function &fn);

/// Opcode plus the operands that survive renaming: constant values and
/// callee names. Variable names and jump targets are dropped.
std::string abstract_signature(const Instruction &ins);

struct BdtNode {
  std::int32_t offset = -1; // -1 for "start"
  std::string signature;    // "start" for the root
  std::string operand;      // variable, array or callee name; else empty
  std::int32_t parent = -1; // node index; -1 for the root
  std::vector<std::int32_t> children;
};

/// Node 0 is "start"; node i + 1 is the instruction at offset i.
struct Bdt {
  std::vector<BdtNode> nodes;

  static std::int32_t node_of(std::uint32_t offset) { return static_cast<std::int32_t>(offset) + 1; }
  int depth(std::int32_t node) const;
  int height() const;
};

Bdt build_bdt(const ProgramModule &module, const Function &fn);
/// Indented dump, one node per line: `offset opcode [signature] (parent=...)`.
std::string format_bdt(const Function &fn, const Bdt &bdt);

} // namespace ucov
