#include "ucov/suite.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "ucov/bdt.hpp"
#include "ucov/check.hpp"

namespace ucov {

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b])))
    ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1])))
    --e;
  return std::string(s.substr(b, e - b));
}

bool is_name(std::string_view s) {
  if (s.empty() || std::isdigit(static_cast<unsigned char>(s[0])))
    return false;
  return std::all_of(s.begin(), s.end(),
                     [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; });
}

[[noreturn]] void syntax(const std::string &msg, int line) { throw Error(ErrorKind::Syntax, msg, line); }

std::vector<Value> parse_args(std::string_view text, int line) {
  std::vector<Value> out;
  if (trim(text).empty())
    return out;
  std::size_t start = 0;
  while (true) {
    auto comma = text.find(',', start);
    auto piece = trim(text.substr(start, comma == std::string_view::npos ? text.npos : comma - start));
    auto v = parse_literal(piece);
    if (!v)
      syntax("bad argument literal '" + piece + "'", line);
    out.push_back(*v);
    if (comma == std::string_view::npos)
      break;
    start = comma + 1;
  }
  return out;
}

TestSpec parse_call_at(std::string_view text, int line) {
  TestSpec t;
  t.line = line;
  auto open = text.find('(');
  auto close = text.rfind(')');
  if (open == text.npos || close == text.npos || close < open)
    syntax("expected 'fn(args)'", line);
  t.entry = trim(text.substr(0, open));
  if (!is_name(t.entry))
    syntax("bad function name '" + t.entry + "'", line);
  if (!trim(text.substr(close + 1)).empty())
    syntax("unexpected text after ')'", line);
  t.args = parse_args(text.substr(open + 1, close - open - 1), line);
  return t;
}

} // namespace

std::optional<Value> parse_literal(std::string_view text) {
  std::string s = trim(text);
  if (s == "true")
    return Value{true};
  if (s == "false")
    return Value{false};
  if (s.empty())
    return std::nullopt;
  const bool is_float = s.find_first_of(".eEf") != std::string::npos;
  if (is_float) {
    if (s.back() == 'f')
      s.pop_back();
    double d = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), d);
    if (ec != std::errc() || p != s.data() + s.size())
      return std::nullopt;
    return Value{d};
  }
  std::int64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    return std::nullopt;
  return Value{v};
}

TestSpec parse_call(std::string_view text) { return parse_call_at(text, 0); }

std::vector<TestSpec> parse_tests(std::string_view text) {
  std::vector<TestSpec> out;
  std::vector<GlobalAssign> pending;
  std::set<std::string> names;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (auto h = raw.find('#'); h != std::string::npos)
      raw.erase(h);
    std::string s = trim(raw);
    if (s.empty())
      continue;
    if (s.rfind("set ", 0) == 0) {
      auto eq = s.find('=');
      if (eq == s.npos)
        syntax("expected 'set name = value'", line);
      std::string target = trim(std::string_view(s).substr(4, eq - 4));
      GlobalAssign g;
      if (auto lb = target.find('['); lb != target.npos) {
        auto rb = target.find(']', lb);
        if (rb == target.npos || rb + 1 != target.size())
          syntax("expected 'set name[index] = value'", line);
        std::uint32_t idx = 0;
        std::string is = trim(std::string_view(target).substr(lb + 1, rb - lb - 1));
        auto [p, ec] = std::from_chars(is.data(), is.data() + is.size(), idx);
        if (ec != std::errc() || p != is.data() + is.size())
          syntax("bad array index '" + is + "'", line);
        g.index = idx;
        target = trim(std::string_view(target).substr(0, lb));
      }
      if (!is_name(target))
        syntax("bad global name '" + target + "'", line);
      g.name = target;
      auto v = parse_literal(std::string_view(s).substr(eq + 1));
      if (!v)
        syntax("bad literal in set directive", line);
      g.value = *v;
      pending.push_back(std::move(g));
      continue;
    }
    auto colon = s.find(':');
    if (colon == s.npos)
      syntax("expected 'name: fn(args) -> expected'", line);
    std::string name = trim(std::string_view(s).substr(0, colon));
    if (!is_name(name))
      syntax("bad test name '" + name + "'", line);
    if (!names.insert(name).second)
      syntax("duplicate test name '" + name + "'", line);
    std::string rest = s.substr(colon + 1);
    std::string call = rest, expect;
    if (auto arrow = rest.find("->"); arrow != rest.npos) {
      call = rest.substr(0, arrow);
      expect = trim(std::string_view(rest).substr(arrow + 2));
      if (expect.empty())
        syntax("missing expected result after '->'", line);
    }
    TestSpec t = parse_call_at(call, line);
    t.name = name;
    if (expect == "!error") {
      t.expect_error = true;
    } else if (!expect.empty()) {
      t.expected = parse_literal(expect);
      if (!t.expected)
        syntax("bad expected literal '" + expect + "'", line);
    }
    t.sets = std::move(pending);
    pending.clear();
    out.push_back(std::move(t));
  }
  if (!pending.empty())
    syntax("'set' directive not followed by a test", line);
  return out;
}

std::string format_test(const TestSpec &t) {
  std::string s;
  for (const auto &g : t.sets) {
    s += "set " + g.name;
    if (g.index)
      s += "[" + std::to_string(*g.index) + "]";
    s += " = " + format_value(g.value) + "\n";
  }
  s += t.name + ": " + t.entry + "(";
  for (std::size_t i = 0; i < t.args.size(); ++i)
    s += (i ? ", " : "") + format_value(t.args[i]);
  s += ")";
  if (t.expect_error)
    s += " -> !error";
  else if (t.expected)
    s += " -> " + format_value(*t.expected);
  return s;
}

bool values_match(const Value &actual, const Value &expected) {
  if (actual.index() != expected.index())
    return false;
  if (const double *a = std::get_if<double>(&actual)) {
    const double e = std::get<double>(expected);
    if (std::isnan(*a) || std::isnan(e))
      return std::isnan(*a) && std::isnan(e);
    return std::fabs(*a - e) <= 1e-9 * std::max(1.0, std::fabs(e));
  }
  return actual == expected;
}

std::string_view status_name(TestOutcome::Status s) {
  switch (s) {
  case TestOutcome::Status::Pass: return "PASS";
  case TestOutcome::Status::Fail: return "FAIL";
  case TestOutcome::Status::Errored: return "ERRORED";
  }
  return "?";
}

bool SuiteResult::all_pass() const {
  return std::all_of(tests.begin(), tests.end(),
                     [](const TestOutcome &t) { return t.status == TestOutcome::Status::Pass; });
}

std::vector<std::string> SuiteResult::uncovered() const {
  std::vector<std::string> out;
  for (const auto &row : report.rows)
    if (row.kind == "req" && !row.cumulative)
      out.push_back(row.label);
  return out;
}

std::vector<CoverageElement> coverage_elements(const ProgramModule &module,
                                               const std::string &name) {
  const Function *fn = module.find_function(name);
  if (!fn)
    throw Error(ErrorKind::UnknownFunction, "unknown function '" + name + "'");
  auto anchor_at = [&](std::uint32_t off) {
    Anchor a;
    a.offset = off;
    if (fn->code[off].label)
      a.label = *fn->code[off].label;
    return a;
  };
  std::vector<CoverageElement> out;
  std::set<std::uint32_t> stmts;
  for (const auto &[label, off] : fn->labels())
    stmts.insert(off);
  for (auto l : leaders(*fn))
    stmts.insert(l);
  for (auto off : stmts) {
    ElementRef e;
    e.kind = ElementRef::Kind::Stmt;
    e.site = {name, anchor_at(off)};
    out.push_back({"stmt", format_element(e), BtrExpr::leaf(e)});
  }

  // Group short-circuit condition blocks into one decision: an unlabeled
  // conditional block that is only entered by falling through another
  // conditional block and computes nothing but the condition.
  Cfg cfg = build_cfg(*fn);
  const auto n = static_cast<std::uint32_t>(cfg.blocks.size());
  std::vector<std::vector<std::pair<std::uint32_t, CfgEdge::Kind>>> preds(n);
  for (std::uint32_t b = 0; b < n; ++b)
    for (const auto &e : cfg.blocks[b].succs)
      if (e.to < n)
        preds[e.to].push_back({b, e.kind});
  auto conditional = [&](std::uint32_t b) { return is_conditional(fn->code[cfg.blocks[b].last()].op); };
  auto pure = [&](std::uint32_t b) {
    const auto &blk = cfg.blocks[b];
    if (fn->code[blk.leader].label)
      return false;
    for (auto i = blk.leader; i < blk.last(); ++i) {
      const Opcode op = fn->code[i].op;
      if (is_definition(op) || op == Opcode::Call || op == Opcode::Intr)
        return false;
    }
    return true;
  };
  std::vector<std::uint32_t> head(n);
  for (std::uint32_t b = 0; b < n; ++b) {
    head[b] = b;
    if (conditional(b) && pure(b) && preds[b].size() == 1 && conditional(preds[b][0].first) &&
        preds[b][0].second == CfgEdge::Kind::Fallthrough && preds[b][0].first < b)
      head[b] = head[preds[b][0].first];
  }
  std::map<std::uint32_t, std::vector<std::uint32_t>> clusters;
  for (std::uint32_t b = 0; b < n; ++b)
    if (conditional(b))
      clusters[head[b]].push_back(b);

  // A decision is named after the last label in its head block, if any.
  auto decision_at = [&](std::uint32_t h) {
    const auto &blk = cfg.blocks[h];
    for (auto i = blk.last() + 1; i-- > blk.leader;)
      if (fn->code[i].label)
        return i;
    return blk.leader;
  };
  auto emit_decision = [&](std::uint32_t h, const std::vector<std::uint32_t> &members) {
    std::set<std::uint32_t> in(members.begin(), members.end());
    std::map<std::uint32_t, std::vector<ElementRef>> by_target;
    for (auto m : members)
      for (const auto &edge : cfg.blocks[m].succs) {
        if (in.count(edge.to))
          continue;
        ElementRef e;
        e.kind = ElementRef::Kind::Branch;
        e.site = {name, anchor_at(cfg.blocks[m].last())};
        e.other = {name, anchor_at(cfg.blocks[edge.to].leader)};
        by_target[edge.to].push_back(e);
      }
    for (const auto &[target, edges] : by_target) {
      BtrExpr x = BtrExpr::leaf(edges[0]);
      for (std::size_t i = 1; i < edges.size(); ++i)
        x = BtrExpr::binary(BtrExpr::Kind::Or, std::move(x), BtrExpr::leaf(edges[i]));
      std::string label = "branch " + name + format_anchor(anchor_at(decision_at(h))) +
                          " -> " + format_anchor(anchor_at(cfg.blocks[target].leader));
      out.push_back({"branch", std::move(label), std::move(x)});
    }
    return by_target.size();
  };
  for (const auto &[h, members] : clusters) {
    if (members.size() == 1) {
      emit_decision(h, members);
      continue;
    }
    // Only a two-way decision is merged; otherwise every block stands alone.
    const auto before = out.size();
    if (emit_decision(h, members) != 2) {
      out.resize(before);
      for (auto m : members)
        emit_decision(m, {m});
    }
  }
  return out;
}

namespace {

class Tee : public EventSink {
public:
  explicit Tee(std::vector<EventSink *> sinks) : sinks_(std::move(sinks)) {}
  void on_start(const std::map<std::string, Value> &g) override {
    for (auto *s : sinks_)
      s->on_start(g);
  }
  void on_event(const Event &e) override {
    for (auto *s : sinks_)
      s->on_event(e);
  }

private:
  std::vector<EventSink *> sinks_;
};

std::string describe_error(const RunResult &r) {
  return "!error: " + std::string(runtime_error_name(r.error)) + " at " + r.error_fn + "@+" +
         std::to_string(r.error_offset);
}

} // namespace

SuiteResult run_suite(const ProgramModule &module, const ReqSet &reqs,
                      const std::vector<TestSpec> &tests, const SuiteOptions &opts) {
  ReqSet coverage;
  std::vector<std::string> coverage_kinds;
  for (const auto &fn : opts.element_functions)
    for (auto &e : coverage_elements(module, fn)) {
      NamedRequirement r;
      r.name = e.label;
      r.tr.kind = TestRequirement::Kind::Btr;
      r.tr.btr = std::move(e.btr);
      coverage.reqs.push_back(std::move(r));
      coverage_kinds.push_back(e.kind);
    }
  coverage = validate(coverage, module);

  InstrumentationPlan p = plan(module, reqs);
  p.merge(plan(module, coverage));

  SuiteResult result;
  for (const auto &t : tests) {
    MatchSession req_session(module, reqs);
    MatchSession cov_session(module, coverage);
    Tee tee({&req_session, &cov_session});
    RunInput in{t.entry, t.args, t.sets};
    TestOutcome o;
    o.name = t.name;
    o.run = run(module, in, p, &tee, opts.record_trace, opts.limits);
    o.expected = t.expect_error ? "!error" : t.expected ? format_value(*t.expected) : "-";
    if (o.run.outcome == RunResult::Outcome::Errored) {
      o.actual = describe_error(o.run);
      o.status = t.expect_error ? TestOutcome::Status::Pass : TestOutcome::Status::Errored;
    } else {
      o.actual = o.run.value ? format_value(*o.run.value) : "void";
      if (t.expect_error)
        o.status = TestOutcome::Status::Fail;
      else if (t.expected)
        o.status = o.run.value && values_match(*o.run.value, *t.expected) ? TestOutcome::Status::Pass
                                                                        : TestOutcome::Status::Fail;
    }
    o.requirements = req_session.finalize();
    for (const auto &c : cov_session.finalize())
      o.element_cells.push_back(c.satisfied);
    if (opts.record_trace) {
      auto verdicts = oracle_evaluate(module, reqs, o.run.trace, o.run.initial_globals);
      bool agree = verdicts.size() == o.requirements.size();
      for (std::size_t i = 0; agree && i < verdicts.size(); ++i)
        agree = verdicts[i].satisfied == o.requirements[i].satisfied;
      o.oracle_agrees = agree;
    }
    result.tests.push_back(std::move(o));
  }

  SuiteReport &rep = result.report;
  for (const auto &t : tests)
    rep.tests.push_back(t.name);
  for (std::size_t k = 0; k < coverage.reqs.size(); ++k) {
    MatrixRow row;
    row.kind = coverage_kinds[k];
    row.label = coverage.reqs[k].name;
    for (const auto &o : result.tests)
      row.cells.push_back(o.element_cells[k]);
    row.cumulative = std::find(row.cells.begin(), row.cells.end(), true) != row.cells.end();
    rep.rows.push_back(std::move(row));
  }
  for (std::size_t k = 0; k < reqs.reqs.size(); ++k) {
    MatrixRow row;
    row.kind = "req";
    row.label = reqs.reqs[k].name;
    for (const auto &o : result.tests)
      row.cells.push_back(o.requirements[k].satisfied);
    row.cumulative = std::find(row.cells.begin(), row.cells.end(), true) != row.cells.end();
    rep.rows.push_back(std::move(row));
  }
  return result;
}

namespace {

std::vector<std::string> detail_lines(const RequirementReport &r) {
  std::vector<std::string> out;
  if (r.str_progress)
    out.push_back("str progress " + std::to_string(*r.str_progress) + "/" +
                  std::to_string(r.str_length));
  if (r.rtr_count) {
    auto b = [](const std::optional<std::uint32_t> &v) { return v ? std::to_string(*v) : "_"; };
    out.push_back("rtr count " + std::to_string(*r.rtr_count) + " (bounds " + b(r.lo) + ", " +
                  b(r.hi) + ")");
  }
  for (const auto &d : r.diagnostics)
    out.push_back(d);
  return out;
}

} // namespace

std::string render_check_text(const SuiteResult &r) {
  std::ostringstream os;
  for (const auto &t : r.tests) {
    os << "test " << t.name << ": " << status_name(t.status) << " (expected " << t.expected
       << ", actual " << t.actual << ")";
    if (t.oracle_agrees)
      os << (*t.oracle_agrees ? " [oracle agrees]" : " [ORACLE MISMATCH]");
    os << "\n";
  }
  std::size_t covered = 0, nreq = 0;
  for (std::size_t k = 0; k < r.report.rows.size(); ++k) {
    const auto &row = r.report.rows[k];
    if (row.kind != "req")
      continue;
    const std::size_t idx = nreq++;
    if (row.cumulative) {
      ++covered;
      os << "requirement " << row.label << ": SATISFIED by";
      for (std::size_t t = 0; t < row.cells.size(); ++t)
        if (row.cells[t])
          os << ' ' << r.report.tests[t];
      os << "\n";
      continue;
    }
    os << "requirement " << row.label << ": UNSATISFIED\n";
    for (const auto &t : r.tests)
      for (const auto &line : detail_lines(t.requirements[idx]))
        os << "  " << t.name << ": " << line << "\n";
  }
  std::size_t passed = 0;
  for (const auto &t : r.tests)
    passed += t.status == TestOutcome::Status::Pass;
  os << "summary: " << passed << "/" << r.tests.size() << " tests passed, " << covered << "/" << nreq
     << " requirements covered\n";
  return os.str();
}

std::string render_json(const SuiteResult &r) {
  using nlohmann::json;
  json j;
  j["tests"] = json::array();
  for (const auto &t : r.tests) {
    json jt = {{"name", t.name},
               {"outcome", std::string(status_name(t.status))},
               {"expected", t.expected},
               {"actual", t.actual}};
    if (t.oracle_agrees)
      jt["oracleAgrees"] = *t.oracle_agrees;
    j["tests"].push_back(jt);
  }
  j["requirements"] = json::array();
  std::size_t idx = 0;
  for (const auto &row : r.report.rows) {
    if (row.kind != "req")
      continue;
    json jr;
    jr["name"] = row.label;
    jr["satisfiedBy"] = json::array();
    jr["diagnostics"] = json::object();
    for (std::size_t t = 0; t < r.tests.size(); ++t) {
      const auto &rep = r.tests[t].requirements[idx];
      if (rep.satisfied)
        jr["satisfiedBy"].push_back(r.tests[t].name);
      json d;
      d["satisfied"] = rep.satisfied;
      if (rep.str_progress) {
        d["strProgress"] = *rep.str_progress;
        d["strLength"] = rep.str_length;
      }
      if (rep.rtr_count) {
        d["rtrCount"] = *rep.rtr_count;
        d["lo"] = rep.lo ? json(*rep.lo) : json(nullptr);
        d["hi"] = rep.hi ? json(*rep.hi) : json(nullptr);
      }
      d["messages"] = rep.diagnostics;
      json el = json::object();
      for (const auto &[text, st] : rep.elements)
        el[text] = {{"count", st.count}, {"lastSeq", st.last_seq}};
      d["elements"] = el;
      jr["diagnostics"][r.tests[t].name] = d;
    }
    j["requirements"].push_back(jr);
    ++idx;
  }
  json rows = json::array();
  for (const auto &row : r.report.rows)
    if (row.kind != "req")
      rows.push_back({{"kind", row.kind}, {"element", row.label}, {"cells", row.cells},
                      {"cumulative", row.cumulative}});
  if (!rows.empty())
    j["elements"] = rows;
  return j.dump(2) + "\n";
}

std::string render_matrix(const SuiteReport &r) {
  auto text_of = [](const MatrixRow &row) { return row.kind == "req" ? "req " + row.label : row.label; };
  std::size_t label_w = 0;
  for (const auto &row : r.rows)
    label_w = std::max(label_w, text_of(row).size());
  label_w = std::max<std::size_t>(label_w, 4);
  std::vector<std::size_t> col_w;
  for (const auto &t : r.tests)
    col_w.push_back(std::max<std::size_t>(t.size(), 1));
  const std::string cum = "cumulative";
  std::ostringstream os;
  auto pad = [&](std::string s, std::size_t w, std::size_t shown) {
    return s + std::string(w > shown ? w - shown : 0, ' ');
  };
  os << pad("", label_w, 0);
  for (std::size_t c = 0; c < r.tests.size(); ++c)
    os << "  " << pad(r.tests[c], col_w[c], r.tests[c].size());
  os << "  " << cum << "\n";
  const char *yes = "✓", *no = "✗";
  for (const auto &row : r.rows) {
    std::string label = text_of(row);
    os << pad(label, label_w, label.size());
    for (std::size_t c = 0; c < row.cells.size(); ++c)
      os << "  " << pad(row.cells[c] ? yes : no, col_w[c], 1);
    os << "  " << (row.cumulative ? yes : no) << "\n";
  }
  return os.str();
}

} // namespace ucov
