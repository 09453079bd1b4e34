#pragma once

// StackIR interpreter with plan-filtered event emission.
//
// Every run numbers the complete (unfiltered) event stream with a gap-free
// sequence starting at 1. The instrumentation plan only decides which of
// those events reach the sink; selected events keep their full-stream seq,
// so a filtered run and a recorded full trace share timestamps.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ucov/check.hpp"
#include "ucov/ir.hpp"

namespace ucov {

struct Event {
  enum class Kind { MethodEnter, MethodExit, BlockEnter, StatementReached, VariableDefined };
  Kind kind = Kind::StatementReached;
  std::uint64_t seq = 0;
  /// Index into ProgramModule::functions.
  std::uint32_t fn = 0;
  std::uint64_t frame = 0;
  /// Statement offset, block leader offset, or defining offset.
  std::uint32_t offset = 0;
  /// VariableDefined only.
  VarRef var;
  Value value = std::int64_t{0};
  /// MethodEnter only: argument values bound to the parameters.
  std::vector<Value> args;

  bool operator==(const Event &) const = default;
};

std::string_view event_kind_name(Event::Kind k);
/// `seq kind fn frame detail`
std::string format_event(const ProgramModule &module, const Event &e);

class EventSink {
public:
  virtual ~EventSink() = default;
  /// Scalar global values once `set` directives are applied, before the
  /// first event.
  virtual void on_start(const std::map<std::string, Value> &initial_globals) {
    (void)initial_globals;
  }
  virtual void on_event(const Event &e) = 0;
};

struct FunctionPlan {
  std::set<std::uint32_t> statements;
  bool all_leaders = false;
  bool report_entry = false;
  bool operator==(const FunctionPlan &) const = default;
};

/// Observation points: statements, method entries/exits, block leaders and
/// definition sites of tracked variables.
struct InstrumentationPlan {
  std::map<std::string, FunctionPlan> functions;
  std::set<VarRef> variables;

  bool empty() const;
  /// Whether the event is one the plan observes.
  bool selects(const ProgramModule &module, const Event &e) const;
  void merge(const InstrumentationPlan &other);

  bool operator==(const InstrumentationPlan &) const = default;
};

enum class RuntimeErrorKind { DivByZero, Overflow, BadIndex, StepLimit, StackOverflow };
std::string_view runtime_error_name(RuntimeErrorKind k);

struct GlobalAssign {
  std::string name;
  std::optional<std::uint32_t> index; // array element when set
  Value value = std::int64_t{0};
};

struct RunInput {
  std::string entry;
  std::vector<Value> args;
  /// Applied to the zero/declared initial state before execution.
  std::vector<GlobalAssign> sets;
};

struct RunLimits {
  std::uint64_t max_steps = 20'000'000;
  std::size_t max_depth = 10'000;
};

struct RunResult {
  enum class Outcome { Returned, Errored };
  Outcome outcome = Outcome::Returned;
  std::optional<Value> value; // Returned from a non-void entry
  RuntimeErrorKind error = RuntimeErrorKind::DivByZero;
  std::string error_fn;
  std::uint32_t error_offset = 0;
  /// Events delivered to the sink.
  std::uint64_t event_count = 0;
  /// Length of the full event stream.
  std::uint64_t last_seq = 0;
  /// Scalar globals after `sets` were applied, before execution.
  std::map<std::string, Value> initial_globals;
  /// Full unfiltered stream when recording was requested.
  std::vector<Event> trace;
};

/// Throws Error(Usage) when the entry is missing, the argument list does
/// not match its signature, or a `set` directive is invalid. Runtime faults
/// are reported through RunResult::Outcome::Errored.
RunResult run(const ProgramModule &module, const RunInput &input, const InstrumentationPlan &plan,
              EventSink *sink, bool record_trace, const RunLimits &limits = {});

} // namespace ucov
