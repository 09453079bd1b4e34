#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "cli.hpp"
#include "fixtures.hpp"
#include "ucov/asm.hpp"
#include "ucov/requirements.hpp"

using namespace ucov;
using namespace ucov::testing;

namespace {

std::string fx(const std::string &rel) { return fixture_path(rel); }

CliResult check(const std::string &prog, const std::string &reqs, const std::string &tests) {
  return run_cli({"check", fx(prog), fx(reqs), fx(tests)});
}

void write(const std::string &path, const std::string &text) { std::ofstream(path) << text; }

} // namespace

TEST(CliCheck, ExitCodesAcrossVersions) {
  EXPECT_EQ(check("terminate/p2.mls", "terminate/trbug.ucr", "terminate/t2.ut").code, 0);
  EXPECT_EQ(check("terminate/p1.mls", "terminate/trbug.ucr", "terminate/t2.ut").code, 1);
  EXPECT_EQ(check("terminate/p3.mls", "terminate/trbug.ucr", "terminate/t2.ut").code, 2);
  EXPECT_EQ(check("terminate/p3.mls", "terminate/trbug.ucr", "terminate/t2prime.ut").code, 0);
  auto r = check("terminate/p4.mls", "terminate/trbug.ucr", "terminate/t2prime.ut");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("test tbugp: FAIL"), std::string::npos) << r.out;
}

TEST(CliCheck, InputErrorsExitOne) {
  auto r = check("terminate/p2.mls", "terminate/missing.ucr", "terminate/t2.ut");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("missing.ucr"), std::string::npos);
  const auto bad = temp_path("bad.ucr");
  write(bad, "req x = btr(stmt terminateEmployee@nowhere);\n");
  r = run_cli({"check", fx("terminate/p2.mls"), bad, fx("terminate/t2.ut")});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("nowhere"), std::string::npos);
  EXPECT_EQ(run_cli({"check", fx("terminate/p2.mls")}).code, 1);
  EXPECT_EQ(run_cli({"frobnicate"}).code, 1);
}

TEST(CliCheck, JsonFormat) {
  auto r = run_cli({"check", fx("terminate/p2.mls"), fx("terminate/trbug.ucr"), fx("terminate/t2.ut"),
                    "--format", "json"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("\"satisfiedBy\""), std::string::npos);
}

TEST(CliCheck, RecordTraceCrossCheck) {
  auto r = run_cli({"check", fx("bst/bst.mls"), fx("bst/cases.ucr"), fx("bst/suite.ut"),
                    "--record-trace"});
  EXPECT_EQ(r.code, 2); // Case4 is uncovered
  EXPECT_EQ(r.err.find("disagree"), std::string::npos);
}

TEST(CliReport, BstMatrix) {
  auto r = run_cli({"report", fx("bst/bst.mls"), fx("bst/cases.ucr"), fx("bst/suite.ut")});
  EXPECT_EQ(r.code, 0);
  std::istringstream in(r.out);
  std::string line;
  std::map<std::string, std::string> rows;
  while (std::getline(in, line))
    if (line.rfind("req ", 0) == 0) {
      std::istringstream ls(line);
      std::string kind, name, cell, cells;
      ls >> kind >> name;
      while (ls >> cell)
        cells += cell == "✓" ? "1" : "0";
      rows[name] = cells;
    }
  EXPECT_EQ(rows["Case1"], "10001");
  EXPECT_EQ(rows["Case2"], "01001");
  EXPECT_EQ(rows["Case3"], "00111");
  EXPECT_EQ(rows["Case4"], "00000");
}

TEST(CliReport, IsPrimeP3UnderT1LeavesBothIntentsUncovered) {
  auto r = run_cli({"check", fx("isprime/p3.mls"), fx("isprime/intents.ucr"), fx("isprime/t1.ut")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("requirement prime: UNSATISFIED"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("requirement composite: UNSATISFIED"), std::string::npos) << r.out;
}

TEST(CliCompile, WritesModuleAndRoundtrips) {
  const auto ubc = temp_path("p1.ubc");
  ASSERT_EQ(run_cli({"compile", fx("terminate/p1.mls"), "-o", ubc}).code, 0);
  ASSERT_TRUE(std::filesystem::exists(ubc));
  auto original = cli::load_program(ubc);
  const auto uasm = temp_path("p1.uasm");
  ASSERT_EQ(run_cli({"disasm", ubc, "-o", uasm}).code, 0);
  const auto back = temp_path("p1b.ubc");
  ASSERT_EQ(run_cli({"asm", uasm, "-o", back}).code, 0);
  EXPECT_EQ(cli::load_program(back), original);
  EXPECT_EQ(read_text(back), read_text(ubc));
}

TEST(CliCompile, MalformedSourceExitsOne) {
  const auto src = temp_path("broken.mls");
  write(src, "fn f(: int { return 1; }\n");
  auto r = run_cli({"compile", src, "-o", temp_path("broken.ubc")});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("error"), std::string::npos);
  EXPECT_NE(r.err.find("broken.mls"), std::string::npos);
}

TEST(CliMap, FooToFoo2) {
  const auto out = temp_path("foo2.ucr");
  auto r = run_cli({"map", fx("foo/foo.mls"), fx("foo/foo2.mls"), fx("foo/min.ucr"), "-o", out});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_text(out), "req takes_y = str(btr(stmt foo@+11), ctr(btr(stmt foo@+12), "
                            "local foo.min == local foo.y));\n");
}

TEST(CliMap, IdenticalVersionsAndDeletedStatement) {
  auto same = run_cli({"map", fx("terminate/p2.mls"), fx("terminate/p2.mls"), fx("terminate/trbug.ucr")});
  EXPECT_EQ(same.code, 0);
  auto m = cli::load_program(fx("terminate/p2.mls"));
  EXPECT_EQ(same.out, format_reqs(load_reqs("terminate/trbug.ucr", m)));

  const auto reqs = temp_path("deleted.ucr");
  write(reqs, "req gone = btr(stmt f@A);\n");
  auto r = run_cli({"map", fx("corpus/23-deleted/old.mls"), fx("corpus/23-deleted/new.mls"), reqs});
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(r.out, "");
  EXPECT_NE(r.err.find("Unmapped"), std::string::npos) << r.err;
}

TEST(CliBdt, DumpsAndRejectsUnknownFunction) {
  auto r = run_cli({"bdt", fx("foo/foo.mls"), "--function", "foo"});
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, read_text(fx("foo/foo.bdt.golden")));
  EXPECT_EQ(run_cli({"bdt", fx("foo/foo.mls"), "-f", "bar"}).code, 1);
}

TEST(CliTrace, ResetStatementsPresent) {
  auto r = run_cli({"trace", fx("reset/reset.mls"), "reset(true, false)"});
  ASSERT_EQ(r.code, 0) << r.err;
  std::set<std::string> reached;
  std::istringstream in(r.out);
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string seq, kind, fn, frame, at, label;
    ls >> seq >> kind >> fn >> frame >> at >> label;
    if (kind == "stmt" && fn == "reset" && !label.empty())
      reached.insert(label);
  }
  EXPECT_EQ(reached, (std::set<std::string>{"@s1", "@s2", "@s3", "@s4"})) << r.out;
  EXPECT_NE(r.out.find("# returned"), std::string::npos);
}

TEST(CliTrace, FromTestFile) {
  auto r = run_cli({"trace", fx("terminate/p1.mls"), fx("terminate/t2.ut"), "--test", "tbug"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("# returned true"), std::string::npos);
  EXPECT_EQ(run_cli({"trace", fx("terminate/p1.mls"), fx("terminate/t2.ut"), "--test", "zz"}).code, 1);
}
