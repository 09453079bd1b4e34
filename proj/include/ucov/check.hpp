#pragma once

// Static well-formedness of StackIR modules.
//
// Stack discipline: the operand stack is empty at every basic-block
// boundary, so each pushed value is consumed by exactly one later
// instruction of the same block. Together with the absence of dup/swap this
// makes the producer -> consumer relation a function, which is what keeps
// the dependence tree a tree.

#include <cstdint>
#include <vector>

#include "ucov/ir.hpp"

namespace ucov {

/// Ordered basic-block leader offsets: offset 0, every jump target, and
/// every instruction following a jump or a `ret`.
std::vector<std::uint32_t> leaders(const Function &fn);

/// Number of values an instruction pops / pushes in the context of `module`.
int stack_pops(const ProgramModule &module, const Function &fn, const Instruction &ins);
int stack_pushes(const ProgramModule &module, const Instruction &ins);

struct StackInfo {
  /// For every offset: the offset of the instruction consuming its pushed
  /// value, or -1 for non-producers.
  std::vector<std::int32_t> consumer;
  /// For every offset: producers of the values it pops, in push order.
  std::vector<std::vector<std::uint32_t>> operands;
};

/// Simulates the stack of one function; throws StackDisciplineError or
/// TypeError. Requires names to resolve (see check_module).
StackInfo analyze_stack(const ProgramModule &module, const Function &fn);

/// Full module check: unique names, resolvable operands, valid jump
/// targets, no fall-through past the last instruction, typed stack
/// discipline, and every block able to reach a `ret`.
void check_module(const ProgramModule &module);

} // namespace ucov
