#pragma once

// Test suites: the `.ut` format, running tests under the matcher, and the
// coverage matrix (requirements, and optionally statements and branches,
// against test cases).
//
//   # comments
//   t1: terminateEmployee(1500000, 170000) -> false
//   set key[0] = 7          # applies to the next test only
//   t2: BSTDelete(0) -> !error

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ucov/matcher.hpp"
#include "ucov/requirements.hpp"
#include "ucov/vm.hpp"

namespace ucov {

struct TestSpec {
  std::string name;
  std::string entry;
  std::vector<Value> args;
  std::optional<Value> expected;
  bool expect_error = false;
  std::vector<GlobalAssign> sets;
  int line = 0;
};

/// Throws Error(Syntax) with line/column.
std::vector<TestSpec> parse_tests(std::string_view text);
/// Parses a typed literal: `42`, `-3`, `2.5f`, `2.5`, `true`.
std::optional<Value> parse_literal(std::string_view text);
/// Parses `fn(arg, ...)` into a nameless test.
TestSpec parse_call(std::string_view text);
std::string format_test(const TestSpec &t);

/// Exact for ints and bools; floats agree to a relative 1e-9.
bool values_match(const Value &actual, const Value &expected);

struct TestOutcome {
  enum class Status { Pass, Fail, Errored };
  std::string name;
  Status status = Status::Pass;
  std::string expected; // text, "-" when none
  std::string actual;   // value text, "void", or "!error: ..."
  RunResult run;
  std::vector<RequirementReport> requirements;
  /// Per coverage row of the report; empty unless element rows were asked for.
  std::vector<bool> element_cells;
  /// Set when the run was recorded and cross-checked against the oracle.
  std::optional<bool> oracle_agrees;
};

std::string_view status_name(TestOutcome::Status s);

struct MatrixRow {
  std::string kind; // "stmt", "branch" or "req"
  std::string label;
  std::vector<bool> cells; // one per test
  bool cumulative = false;
};

struct SuiteReport {
  std::vector<std::string> tests;
  std::vector<MatrixRow> rows;
};

struct SuiteOptions {
  /// Functions whose statements and branches get coverage rows.
  std::vector<std::string> element_functions;
  bool record_trace = false;
  RunLimits limits;
};

struct SuiteResult {
  std::vector<TestOutcome> tests;
  SuiteReport report;

  bool all_pass() const;
  /// Names of requirements no test satisfied.
  std::vector<std::string> uncovered() const;
};

struct CoverageElement {
  std::string kind; // "stmt" or "branch"
  std::string label;
  BtrExpr btr;
};

/// Coverage rows of a function: every labeled statement and unlabeled
/// leader, then both outcomes of every decision. Short-circuit condition
/// blocks fold into their decision, so an outcome is the OR of its edges.
std::vector<CoverageElement> coverage_elements(const ProgramModule &module, const std::string &fn);

/// `reqs` must be validated against `module`.
SuiteResult run_suite(const ProgramModule &module, const ReqSet &reqs,
                      const std::vector<TestSpec> &tests, const SuiteOptions &opts = {});

std::string render_check_text(const SuiteResult &r);
std::string render_json(const SuiteResult &r);
/// Matrix with a check mark / cross per cell and the cumulative column last.
std::string render_matrix(const SuiteReport &r);

} // namespace ucov
