#pragma once

// Cross-version mapping of statements and variables by BDT similarity, and
// migration of requirement sets onto a new program version.

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "ucov/bdt.hpp"
#include "ucov/ir.hpp"
#include "ucov/requirements.hpp"

namespace ucov {

struct FunctionDiff {
  std::set<std::string> changed;
  std::set<std::string> added;
  std::set<std::string> removed;
};

/// Code equality with labels dropped.
bool same_code(const Function &a, const Function &b);
FunctionDiff functions_changed(const ProgramModule &old_module, const ProgramModule &new_module);

struct MapResult {
  enum class Kind { Mapped, Ambiguous, Unmapped };
  Kind kind = Kind::Unmapped;
  std::uint32_t offset = 0;             // Mapped
  std::vector<std::uint32_t> candidates; // Ambiguous
  int level = 0;                         // filter level reached; 0 before any filter
  std::string stage;                     // "signature", "descendants", "ancestors", "siblings", "operands"
  std::string reason;                    // Unmapped

  bool operator==(const MapResult &) const = default;
};

std::string format_map_result(const MapResult &r);

/// Signatures of the nodes exactly k levels below `node`, in left-to-right
/// order.
std::vector<std::string> descendant_signature(const Bdt &t, std::int32_t node, int k);
/// The ancestor k levels up, compared by its signature together with the
/// operand expression it consumes (its data children); "start" for the
/// root and a distinct marker past it.
std::string ancestor_signature(const Bdt &t, std::int32_t node, int k);
/// Signature of a node and its data children, recursively.
std::string expression_signature(const Bdt &t, std::int32_t node);

MapResult map_statement(const Bdt &old_bdt, const Bdt &new_bdt, std::uint32_t offset);
MapResult map_statement(const ProgramModule &old_module, const Function &old_fn,
                        const ProgramModule &new_module, const Function &new_fn,
                        std::uint32_t offset);

struct Resolutions {
  /// (function, old offset) -> new offset
  std::map<std::pair<std::string, std::uint32_t>, std::uint32_t> statements;
  /// (scope, old name) -> new name; scope is the function for locals,
  /// `global` or `array` otherwise.
  std::map<std::pair<std::string, std::string>, std::string> variables;

  bool empty() const { return statements.empty() && variables.empty(); }
};

/// `stmt fn @+old -> @+new` and `var scope old -> new` lines; `#` comments.
Resolutions parse_resolutions(std::string_view text);
std::string format_resolutions(const Resolutions &r);
/// Throws Error(Structure) when a chosen target does not exist.
void check_resolutions(const Resolutions &r, const ProgramModule &new_module);

struct VarMapResult {
  enum class Kind { Mapped, Conflict, Unmapped };
  Kind kind = Kind::Unmapped;
  VarRef var;
  /// Mapped sites: (function, old offset, new offset, variable referenced there).
  struct Evidence {
    std::string fn;
    std::uint32_t old_offset = 0;
    std::uint32_t new_offset = 0;
    VarRef var;
    bool operator==(const Evidence &) const = default;
  };
  std::vector<Evidence> evidence;
  std::string reason;
};

std::string format_var_map_result(const VarMapResult &r);

/// Caches BDTs and per-function change status for one (old, new) pair.
class VersionMapper {
public:
  VersionMapper(const ProgramModule &old_module, const ProgramModule &new_module);
  /// The mapper keeps references to both modules.
  VersionMapper(ProgramModule &&, const ProgramModule &) = delete;
  VersionMapper(const ProgramModule &, ProgramModule &&) = delete;
  VersionMapper(ProgramModule &&, ProgramModule &&) = delete;

  const FunctionDiff &diff() const { return diff_; }
  /// Identity for unchanged functions; Unmapped when the function is gone.
  MapResult map_statement(const std::string &fn, std::uint32_t offset);
  VarMapResult map_variable(const VarRef &var);

  const ProgramModule &old_module() const { return old_; }
  const ProgramModule &new_module() const { return new_; }

private:
  const Bdt &bdt(const ProgramModule &m, const std::string &fn,
                 std::map<std::string, Bdt> &cache);

  const ProgramModule &old_;
  const ProgramModule &new_;
  FunctionDiff diff_;
  std::map<std::string, Bdt> old_bdts_, new_bdts_;
};

VarMapResult map_variable(const ProgramModule &old_module, const ProgramModule &new_module,
                          const VarRef &var);

struct MigrationIssue {
  std::string requirement;
  std::string kind;    // Unmapped, Ambiguous, Conflict, NotALeader, NotAnEdge, Invalid
  std::string element; // element or variable text
  std::string detail;
  bool operator==(const MigrationIssue &) const = default;
};

/// Tab-separated: requirement, kind, element, detail.
std::string format_issue(const MigrationIssue &i);

struct Migration {
  ReqSet reqs;
  std::vector<MigrationIssue> issues;
};

/// `reqs` must be validated against `old_module`. Requirements with any
/// unresolved issue are left out of the result.
Migration migrate(const ReqSet &reqs, const ProgramModule &old_module,
                  const ProgramModule &new_module, const Resolutions &res = {});

} // namespace ucov
