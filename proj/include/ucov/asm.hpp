#pragma once

// Textual forms of a ProgramModule.
//
// `.uasm` (human-oriented assembly):
//
//     # comment
//     global limit:int = 200000
//     array key:int[16]
//     fn f(x:int, y:int):bool
//       local t:int
//       load x @s1
//       brf 7
//       ...
//
// Jump operands are offsets or label names. A function without `:type`
// returns void.
//
// `.ubc` (canonical module file, bit-exact round trip):
//
//     UBC 1
//     global limit int 200000
//     array key int 16
//     fn f(x:int,y:int):bool
//     locals t:int
//     code 12
//     0: load x @s1
//     ...
//     end

#include <string>
#include <string_view>

#include "ucov/ir.hpp"

namespace ucov {

/// Parses assembly and runs check_module. Throws AsmError (with line) for
/// malformed text, StackDisciplineError/TypeError from the checker.
ProgramModule assemble(std::string_view text);
std::string disassemble(const ProgramModule &module);

std::string save_module(const ProgramModule &module);
/// Throws FormatError (with line) for malformed or truncated input and
/// unknown opcodes; checker errors otherwise.
ProgramModule load_module(std::string_view bytes);

std::string format_instruction(const Instruction &ins);

} // namespace ucov
