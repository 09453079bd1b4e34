#include <gtest/gtest.h>

#include <map>

#include "fixtures.hpp"
#include "generators.hpp"
#include "oracles.hpp"
#include "ucov/bdt.hpp"
#include "ucov/error.hpp"
#include "ucov/matcher.hpp"
#include "ucov/minilang.hpp"

using namespace ucov;
using namespace ucov::testing;

namespace {

struct Observed {
  std::vector<RequirementReport> reports;
  RunResult full;
};

// Plan-filtered online run plus a separate recorded run of the same input.
Observed observe(const ProgramModule &m, const ReqSet &reqs, const RunInput &in) {
  Observed o;
  MatchSession session(m, reqs);
  run(m, in, plan(m, reqs), &session, false);
  o.reports = session.finalize();
  o.full = run(m, in, {}, nullptr, true);
  return o;
}

const RequirementReport &report_of(const Observed &o, const std::string &name) {
  for (const auto &r : o.reports)
    if (r.name == name)
      return r;
  throw std::runtime_error("no report " + name);
}

RunInput emp(std::int64_t sales, std::int64_t salary) {
  return {"terminateEmployee", {sales, salary}, {}};
}

ReqSet one(const ProgramModule &m, const std::string &text) { return validate(parse_reqs(text), m); }

// Fire count and last seq of an element, read off a full trace.
ElementStats expected_stats(const ProgramModule &m, const ElementRef &e, const std::vector<Event> &trace) {
  ElementStats s;
  auto hit = [&](std::uint64_t seq) {
    ++s.count;
    s.last_seq = seq;
  };
  const auto fn_of = [&](const std::string &name) {
    return static_cast<std::uint32_t>(m.find_function(name) - m.functions.data());
  };
  switch (e.kind) {
  case ElementRef::Kind::Stmt:
    for (const auto &ev : trace)
      if (ev.kind == Event::Kind::StatementReached && ev.fn == fn_of(e.site.fn) &&
          ev.offset == e.site.offset())
        hit(ev.seq);
    break;
  case ElementRef::Kind::Branch: {
    const auto f = fn_of(e.site.fn);
    Cfg cfg = build_cfg(m.functions[f]);
    const auto src = cfg.block_of[e.site.offset()];
    const auto tgt = cfg.block_of[e.other.offset()];
    std::map<std::uint64_t, std::uint32_t> last;
    for (const auto &ev : trace) {
      if (ev.kind != Event::Kind::BlockEnter || ev.fn != f)
        continue;
      const auto b = cfg.block_of[ev.offset];
      auto it = last.find(ev.frame);
      if (it != last.end() && it->second == src && b == tgt)
        hit(ev.seq);
      last[ev.frame] = b;
    }
    break;
  }
  case ElementRef::Kind::DefUse: {
    const auto use_fn = fn_of(e.other.fn);
    for (std::size_t i = 0; i < trace.size(); ++i) {
      const auto &ev = trace[i];
      if (ev.kind != Event::Kind::StatementReached || ev.fn != use_fn || ev.offset != e.other.offset())
        continue;
      for (std::size_t j = i; j-- > 0;) {
        const auto &d = trace[j];
        if (d.kind != Event::Kind::VariableDefined || !(d.var == e.var))
          continue;
        if (e.var.kind == VarRef::Kind::Local && d.frame != ev.frame)
          continue;
        if (d.fn == fn_of(e.site.fn) && d.offset == e.site.offset())
          hit(ev.seq);
        break;
      }
    }
    break;
  }
  }
  return s;
}

} // namespace

TEST(Plan, TrBugOnP2) {
  auto m = load_fixture("terminate/p2.mls");
  auto reqs = load_reqs("terminate/trbug.ucr", m);
  auto p = plan(m, reqs);
  const auto &fn = m.functions[0];
  const auto &fp = p.functions.at("terminateEmployee");
  EXPECT_EQ(fp.statements, (std::set<std::uint32_t>{*fn.find_label("s1"), *fn.find_label("s3")}));
  EXPECT_TRUE(fp.report_entry);
  EXPECT_FALSE(fp.all_leaders);
  EXPECT_EQ(p.variables, (std::set<VarRef>{{VarRef::Kind::Local, "terminateEmployee", "salary"}}));
}

TEST(Plan, BranchFlagsAllLeaders) {
  auto m = load_fixture("terminate/p2.mls");
  auto p = plan(m, one(m, "req b = btr(branch terminateEmployee@+5 -> @+9);"));
  EXPECT_TRUE(p.functions.at("terminateEmployee").all_leaders);
}

TEST(Plan, EmptyRequirementsEmptyPlan) {
  auto m = load_fixture("terminate/p2.mls");
  EXPECT_TRUE(plan(m, {}).empty());
}

TEST(Matcher, TrBugOnP2IsSatisfied) {
  auto m = load_fixture("terminate/p2.mls");
  auto o = observe(m, load_reqs("terminate/trbug.ucr", m), emp(4000000, 170000));
  EXPECT_TRUE(report_of(o, "trbug").satisfied);
}

TEST(Matcher, TrBugOnP3EarlyReturnLeavesProgressZero) {
  auto m = load_fixture("terminate/p3.mls");
  auto reqs = load_reqs("terminate/trbug.ucr", m);
  auto o = observe(m, reqs, emp(4000000, 170000));
  const auto &r = report_of(o, "trbug");
  EXPECT_FALSE(r.satisfied);
  ASSERT_TRUE(r.str_progress);
  EXPECT_EQ(*r.str_progress, 0u);
  EXPECT_EQ(r.str_length, 2u);
  EXPECT_TRUE(report_of(observe(m, reqs, emp(2000000, 170000)), "trbug").satisfied);
}

TEST(Matcher, BstCase4NeverSatisfied) {
  auto m = load_fixture("bst/bst.mls");
  auto reqs = load_reqs("bst/cases.ucr", m);
  for (const auto &t : load_tests("bst/suite.ut")) {
    auto o = observe(m, reqs, {t.entry, t.args, t.sets});
    EXPECT_FALSE(report_of(o, "Case4").satisfied) << t.name;
  }
}

TEST(Matcher, ResetInactiveClause) {
  auto m = load_fixture("reset/reset.mls");
  auto reqs = load_reqs("reset/inactive.ucr", m);
  EXPECT_TRUE(report_of(observe(m, reqs, {"reset", {true, false}, {}}), "open").satisfied);
  EXPECT_FALSE(report_of(observe(m, reqs, {"reset", {false, false}, {}}), "open").satisfied);
}

TEST(Matcher, RtrCountBelowBound) {
  auto m = minilang::compile_source("fn f(n: int): int {\n"
                                    "  var i: int = 0;\n"
                                    "  while (i < n) { s4: i = i + 1; }\n"
                                    "  return i;\n}\n");
  auto reqs = one(m, "req r = rtr(btr(stmt f@s4), 2, _);");
  auto o = observe(m, reqs, {"f", {std::int64_t{1}}, {}});
  const auto &r = report_of(o, "r");
  EXPECT_FALSE(r.satisfied);
  EXPECT_EQ(r.rtr_count, 1u);
  EXPECT_TRUE(report_of(observe(m, reqs, {"f", {std::int64_t{3}}, {}}), "r").satisfied);
}

TEST(Matcher, RootBtrReadsWholeRun) {
  // (s1 or b1) and not dup1, where s1 fires and the defuse never does.
  auto m = load_fixture("terminate/p2.mls");
  const std::string f = "terminateEmployee";
  auto reqs = one(m, "req x = btr((stmt " + f + "@s1 || branch " + f + "@+5 -> @+6) && !defuse " + f +
                         "@+1 -> " + f + "@+23 of local " + f + ".raise);");
  auto o = observe(m, reqs, emp(1500000, 100000));
  EXPECT_TRUE(report_of(o, "x").satisfied);
  // With no raise the initial definition reaches the use and the negation fails.
  EXPECT_FALSE(report_of(observe(m, reqs, emp(5000, 100000)), "x").satisfied);
}

TEST(Matcher, CtrDiagnosticNamesTheFailingClause) {
  auto m = load_fixture("terminate/p2.mls");
  auto o = observe(m, load_reqs("terminate/trbug.ucr", m), emp(130000, 50000));
  const auto &r = report_of(o, "trbug");
  EXPECT_FALSE(r.satisfied);
  ASSERT_FALSE(r.diagnostics.empty());
  EXPECT_NE(r.diagnostics[0].find("salary"), std::string::npos) << r.diagnostics[0];
}

TEST(Matcher, OutOfOrderEventRejected) {
  auto m = load_fixture("terminate/p2.mls");
  auto reqs = load_reqs("terminate/trbug.ucr", m);
  MatchSession s(m, reqs);
  Event e;
  e.kind = Event::Kind::StatementReached;
  e.seq = 5;
  s.on_event(e);
  e.seq = 5;
  try {
    s.on_event(e);
    FAIL();
  } catch (const Error &err) {
    EXPECT_EQ(err.kind(), ErrorKind::OutOfOrderEvent);
  }
}

TEST(Oracle, EmptyTraceLeavesPositiveObligationsUnsatisfied) {
  auto m = load_fixture("bst/bst.mls");
  auto reqs = load_reqs("bst/cases.ucr", m);
  for (const auto &v : oracle_evaluate(m, reqs, {}, {}))
    EXPECT_FALSE(v.satisfied) << v.name;
}

TEST(Oracle, AgreesWithOnlineOnFixtureSuites) {
  const std::vector<std::array<const char *, 3>> cases{
      {"terminate/p1.mls", "terminate/trbug.ucr", "terminate/t2.ut"},
      {"terminate/p2.mls", "terminate/trbug.ucr", "terminate/t2.ut"},
      {"terminate/p3.mls", "terminate/trbug.ucr", "terminate/t2prime.ut"},
      {"terminate/p4.mls", "terminate/trbug.ucr", "terminate/t2prime.ut"},
      {"bst/bst.mls", "bst/cases.ucr", "bst/suite.ut"},
      {"bst/bst.mls", "bst/cases.ucr", "bst/case4.ut"},
      {"reset/reset.mls", "reset/inactive.ucr", "reset/coverage.ut"},
      {"isprime/p1.mls", "isprime/intents.ucr", "isprime/t1.ut"},
      {"isprime/p3.mls", "isprime/intents.ucr", "isprime/t2.ut"},
      {"infotbl/infotbl.mls", "infotbl/scenario.ucr", "infotbl/suite.ut"},
      {"nanoxml/v3.mls", "nanoxml/fix.ucr", "nanoxml/suite.ut"},
  };
  for (const auto &[prog, req, suite] : cases) {
    auto m = load_fixture(prog);
    auto reqs = load_reqs(req, m);
    for (const auto &t : load_tests(suite)) {
      auto o = observe(m, reqs, {t.entry, t.args, t.sets});
      auto verdicts = oracle_evaluate(m, reqs, o.full.trace, o.full.initial_globals);
      ASSERT_EQ(verdicts.size(), o.reports.size());
      for (std::size_t i = 0; i < verdicts.size(); ++i)
        EXPECT_EQ(verdicts[i].satisfied, o.reports[i].satisfied)
            << prog << " " << t.name << " " << verdicts[i].name;
    }
  }
}

TEST(MatcherProperty, OnlineEqualsOracle) {
  Rng rng(51);
  std::size_t sat = 0, total = 0;
  for (int i = 0; i < 1500; ++i) {
    auto t = random_triple(rng);
    auto o = observe(t.module, t.reqs, t.input);
    auto verdicts = oracle_evaluate(t.module, t.reqs, o.full.trace, o.full.initial_globals);
    ASSERT_EQ(verdicts.size(), o.reports.size());
    for (std::size_t k = 0; k < verdicts.size(); ++k) {
      ASSERT_EQ(verdicts[k].satisfied, o.reports[k].satisfied)
          << "triple " << i << "\n" << format_reqs(t.reqs);
      sat += verdicts[k].satisfied;
      ++total;
    }
  }
  // Both verdicts must be well represented for the comparison to mean much.
  EXPECT_GT(sat * 5, total);
  EXPECT_GT((total - sat) * 5, total);
}

TEST(MatcherProperty, ElementStatsMatchTrace) {
  Rng rng(52);
  std::map<ElementRef::Kind, std::size_t> fired;
  for (int i = 0; i < 400; ++i) {
    auto t = random_triple(rng);
    auto o = observe(t.module, t.reqs, t.input);
    for (std::size_t k = 0; k < o.reports.size(); ++k) {
      const auto elems = elements_of(t.reqs.reqs[k].tr);
      for (const auto &[name, stats] : o.reports[k].elements) {
        auto it = std::find_if(elems.begin(), elems.end(),
                               [&](const ElementRef &e) { return format_element(e) == name; });
        ASSERT_NE(it, elems.end()) << name;
        ASSERT_EQ(stats, expected_stats(t.module, *it, o.full.trace)) << "triple " << i << " " << name;
        if (stats.count)
          ++fired[it->kind];
      }
    }
  }
  EXPECT_GT(fired[ElementRef::Kind::Stmt], 20u);
  EXPECT_GT(fired[ElementRef::Kind::Branch], 20u);
  EXPECT_GT(fired[ElementRef::Kind::DefUse], 20u);
}

// Statement-only, negation-free requirements: the greedy online matcher
// agrees with exhaustive chain search.
TEST(MatcherProperty, GreedyMatchesExhaustiveChains) {
  Rng rng(53);
  ReqOptions opts;
  opts.allow_ctr = false;
  opts.allow_not = false;
  opts.stmt_only = true;
  int checked = 0;
  for (int i = 0; i < 2000 && checked < 600; ++i) {
    auto t = random_triple(rng, opts);
    auto o = observe(t.module, t.reqs, t.input);
    if (o.full.trace.size() > 400)
      continue;
    ++checked;
    ChainOracle chains(t.module, o.full.trace);
    for (std::size_t k = 0; k < o.reports.size(); ++k) {
      const auto &tr = t.reqs.reqs[k].tr;
      ASSERT_EQ(o.reports[k].satisfied, chains.satisfied(tr)) << "triple " << i << "\n"
                                                              << format_reqs(t.reqs);
      if (tr.kind == TestRequirement::Kind::Rtr)
        ASSERT_EQ(o.reports[k].rtr_count, chains.longest_chain(tr.children[0], 0));
    }
  }
  EXPECT_GE(checked, 300);
}
