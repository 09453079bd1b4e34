#pragma once

// Instrumentation plans and requirement evaluation over the VM event stream.
//
// A requirement node R observed from window start w (exclusive) completes at
// a set of instants C(R, w):
//   btr    seqs t > w where one of its elements fires and the expression
//          holds over the firings in (w, t]
//   ctr    instants of C(inner, w) where the predicate holds on the state
//          just before t, read in the frame of the event at t
//   str    t1 = min C(R1, w), t2 = min C(R2, t1), ...; completes at every
//          instant of C(Rn, t(n-1))
//   rtr    occurrences o1 = min C(inner, w), o2 = min C(inner, o1), ...;
//          completes at o_k for k >= lo
// At the root a btr is evaluated once at the end of the run over "fired at
// least once", an rtr checks lo <= number of occurrences <= hi, and str/ctr
// are satisfied when they complete at least once from w = 0.

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ucov/requirements.hpp"
#include "ucov/vm.hpp"

namespace ucov {

InstrumentationPlan plan(const ProgramModule &module, const ReqSet &resolved);

struct ElementStats {
  std::uint64_t count = 0;
  std::uint64_t last_seq = 0;
  bool operator==(const ElementStats &) const = default;
};

struct RequirementReport {
  std::string name;
  bool satisfied = false;
  /// Root str: elements completed, out of `str_length`.
  std::optional<std::size_t> str_progress;
  std::size_t str_length = 0;
  /// Root rtr: observed occurrences and bounds.
  std::optional<std::uint64_t> rtr_count;
  std::optional<std::uint32_t> lo, hi;
  /// Predicate failures and undefined predicate variables, first few only.
  std::vector<std::string> diagnostics;
  std::vector<std::pair<std::string, ElementStats>> elements;
};

struct Verdict {
  std::string name;
  bool satisfied = false;
  bool operator==(const Verdict &) const = default;
};

/// Online matcher for one run. Events must arrive in increasing seq order.
class MatchSession : public EventSink {
public:
  MatchSession(const ProgramModule &module, const ReqSet &resolved);
  ~MatchSession() override;
  MatchSession(const MatchSession &) = delete;
  MatchSession &operator=(const MatchSession &) = delete;

  void on_start(const std::map<std::string, Value> &initial_globals) override;
  /// Throws Error(OutOfOrderEvent) on a seq regression.
  void on_event(const Event &e) override;
  std::vector<RequirementReport> finalize();

  struct Impl;

private:
  std::unique_ptr<Impl> impl_;
};

/// Recomputes every verdict from a full recorded trace.
std::vector<Verdict> oracle_evaluate(const ProgramModule &module, const ReqSet &resolved,
                                     const std::vector<Event> &trace,
                                     const std::map<std::string, Value> &initial_globals);

} // namespace ucov
