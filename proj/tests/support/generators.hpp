#pragma once

#include <random>
#include <string>
#include <vector>

#include "ucov/ir.hpp"
#include "ucov/requirements.hpp"
#include "ucov/vm.hpp"

namespace ucov::testing {

using Rng = std::mt19937_64;

/// MiniLang source of a small terminating program: globals g (int) and
/// flag (bool), array arr[4], a helper h(int) and main(int, int).
std::string random_source(Rng &rng);
/// Compiled random_source with at most `max_instructions` instructions.
ProgramModule random_module(Rng &rng, std::size_t max_instructions = 40);

/// Single-function module with an arbitrary (possibly unstructured) CFG of
/// at most `max_blocks` blocks in which every block reaches the exit.
ProgramModule random_cfg_module(Rng &rng, std::size_t max_blocks = 12);

struct ReqOptions {
  int max_depth = 3;
  bool allow_ctr = true;
  bool allow_not = true;
  bool allow_rtr = true;
  /// Only statement atoms.
  bool stmt_only = false;
};

/// `.ucr` text of one random requirement named `name`; it may fail
/// validation (the caller retries).
std::string random_requirement_text(Rng &rng, const ProgramModule &m, const std::string &name,
                                    const ReqOptions &opts = {});
/// A validated random requirement set of `count` requirements.
ReqSet random_reqs(Rng &rng, const ProgramModule &m, std::size_t count,
                   const ReqOptions &opts = {});

std::vector<Value> random_args(Rng &rng, const Function &fn);

/// A random program of at most 40 instructions, one to three random
/// requirements of depth up to opts.max_depth, and an input for main that
/// sometimes presets the globals.
struct Triple {
  ProgramModule module;
  ReqSet reqs;
  RunInput input;
};
Triple random_triple(Rng &rng, const ReqOptions &opts = {});

} // namespace ucov::testing
