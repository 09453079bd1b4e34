#pragma once

// Reference implementations used as test oracles. None of them shares
// code with the library beyond its data types.

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "ucov/bdt.hpp"
#include "ucov/requirements.hpp"
#include "ucov/vm.hpp"

namespace ucov::testing {

/// Successor lists of a CFG, with the virtual exit as index n.
struct Graph {
  std::size_t n = 0;
  std::vector<std::vector<std::size_t>> succ; // size n + 1
};
Graph graph_of(const Cfg &cfg);

/// b postdominates a: every path from a to the exit passes through b.
bool brute_postdominates(const Graph &g, std::size_t a, std::size_t b);
/// Blocks each block is control dependent on, via the path definition:
/// some path a -> ... -> b where b postdominates every node after a, and b
/// does not strictly postdominate a.
std::vector<std::set<std::size_t>> brute_control_dependence(const Graph &g);

/// Offset of the consumer of each producing instruction, from a symbolic
/// stack simulation per basic block; -1 for non-producers.
std::vector<std::int64_t> brute_consumers(const ProgramModule &m, const Function &fn);

/// First violated BDT invariant (node count, single parent, sibling order,
/// producer under its consumer, non-producer under its controller), or an
/// empty string.
std::string bdt_violation(const ProgramModule &m, const Function &fn);

/// Kullback information measure of a table given as rows.
double kullback(const std::vector<std::vector<std::int64_t>> &table);

/// Completion seqs of a requirement built from statement-only btrs, str and
/// nested rtr, read directly off a full trace. str uses the "some chain
/// exists" reading; rtr counts the longest chain.
class ChainOracle {
public:
  ChainOracle(const ProgramModule &m, const std::vector<Event> &trace);
  std::set<std::uint64_t> completions(const TestRequirement &tr, std::uint64_t w) const;
  /// Longest chain o1 < o2 < ... with o1 in C(inner, w) and o(k+1) in
  /// C(inner, ok), found by exhaustive search.
  std::size_t longest_chain(const TestRequirement &inner, std::uint64_t w) const;
  /// Root verdict under the exists reading.
  bool satisfied(const TestRequirement &tr) const;

private:
  bool fires(const ElementRef &e, std::size_t idx) const;
  const ProgramModule &m_;
  const std::vector<Event> &trace_;
};

} // namespace ucov::testing
