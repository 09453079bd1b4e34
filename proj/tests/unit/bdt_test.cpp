#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "generators.hpp"
#include "oracles.hpp"
#include "ucov/asm.hpp"
#include "ucov/bdt.hpp"
#include "ucov/check.hpp"
#include "ucov/error.hpp"
#include "ucov/minilang.hpp"

using namespace ucov;
using namespace ucov::testing;

namespace {

std::vector<std::set<std::size_t>> as_sets(const std::vector<std::vector<std::uint32_t>> &v) {
  std::vector<std::set<std::size_t>> out;
  for (const auto &row : v)
    out.emplace_back(row.begin(), row.end());
  return out;
}

} // namespace

TEST(Bdt, FooStoreOfYUnderItsConditional) {
  auto m = load_fixture("foo/foo.mls");
  const Function &fn = m.functions[0];
  Bdt t = build_bdt(m, fn);
  const auto load_y = *fn.find_label("my");
  const auto store = t.nodes[static_cast<std::size_t>(Bdt::node_of(load_y + 1))];
  ASSERT_EQ(fn.code[load_y + 1].op, Opcode::Store);
  ASSERT_EQ(store.children.size(), 1u);
  EXPECT_EQ(store.children[0], Bdt::node_of(load_y));
  const auto &cond = t.nodes[static_cast<std::size_t>(store.parent)];
  EXPECT_EQ(fn.code[static_cast<std::size_t>(cond.offset)].op, Opcode::Brf);
}

TEST(Bdt, StraightLineReturnIsAChain) {
  auto m = minilang::compile_source("fn f(x: int): int { return x + 1; }");
  const Function &fn = m.functions[0];
  Bdt t = build_bdt(m, fn);
  ASSERT_EQ(fn.code.size(), 4u);
  EXPECT_EQ(t.nodes[0].children, (std::vector<std::int32_t>{4}));
  EXPECT_EQ(t.nodes[4].children, (std::vector<std::int32_t>{3}));
  EXPECT_EQ(t.nodes[3].children, (std::vector<std::int32_t>{1, 2}));
  EXPECT_EQ(t.height(), 3);
}

TEST(Bdt, GoldenDump) {
  auto m = load_fixture("foo/foo.mls");
  const Function &fn = m.functions[0];
  EXPECT_EQ("fn foo\n" + format_bdt(fn, build_bdt(m, fn)), read_text(fixture_path("foo/foo.bdt.golden")));
}

TEST(Bdt, SignatureDropsNames) {
  auto m = load_fixture("foo/foo.mls");
  auto m2 = load_fixture("foo/foo2.mls");
  // `m = y` and `min = y` abstract to the same store.
  const auto a = *m.functions[0].find_label("my") + 1;
  const auto b = *m2.functions[0].find_label("my") + 1;
  EXPECT_EQ(abstract_signature(m.functions[0].code[a]), abstract_signature(m2.functions[0].code[b]));
}

TEST(BdtProperty, InvariantsOnFixtures) {
  for (const auto &f : all_program_fixtures()) {
    auto m = load_fixture(f);
    for (const auto &fn : m.functions)
      EXPECT_EQ(bdt_violation(m, fn), "") << f << ":" << fn.name;
  }
}

TEST(BdtProperty, InvariantsOnRandomModules) {
  Rng rng(31);
  for (int i = 0; i < 500; ++i) {
    auto m = random_module(rng);
    for (const auto &fn : m.functions)
      ASSERT_EQ(bdt_violation(m, fn), "") << "random " << i << ":" << fn.name;
  }
}

TEST(ControlDeps, PostdominatorsMatchBruteForce) {
  Rng rng(32);
  for (int i = 0; i < 400; ++i) {
    auto m = random_cfg_module(rng);
    Cfg cfg = build_cfg(m.functions[0]);
    ASSERT_LE(cfg.blocks.size(), 12u);
    Graph g = graph_of(cfg);
    auto pdom = postdominator_sets(cfg);
    for (std::size_t a = 0; a <= g.n; ++a)
      for (std::size_t b = 0; b <= g.n; ++b)
        ASSERT_EQ(pdom[a][b], brute_postdominates(g, a, b)) << "cfg " << i << " " << a << "," << b;
  }
}

TEST(ControlDeps, MatchPathDefinition) {
  Rng rng(33);
  for (int i = 0; i < 1000; ++i) {
    auto m = random_cfg_module(rng);
    Cfg cfg = build_cfg(m.functions[0]);
    auto got = as_sets(control_dependence_sets(cfg));
    auto want = brute_control_dependence(graph_of(cfg));
    ASSERT_EQ(got.size(), cfg.blocks.size());
    for (std::size_t b = 0; b < got.size(); ++b)
      ASSERT_EQ(got[b], want[b]) << "cfg " << i << " block " << b << "\n"
                                 << disassemble(m);
  }
}

TEST(ControlDeps, InstructionControllerIsNearestPrecedingConditional) {
  Rng rng(34);
  for (int i = 0; i < 300; ++i) {
    auto m = random_cfg_module(rng);
    const Function &fn = m.functions[0];
    Cfg cfg = build_cfg(fn);
    auto sets = control_dependence_sets(cfg);
    auto deps = control_deps(fn, cfg);
    for (std::uint32_t k = 0; k < fn.code.size(); ++k) {
      // Nearest preceding controller; later ones (loop back edges) would
      // make the tree cyclic, so with none before k the parent is start.
      std::int32_t want = -1;
      for (auto a : sets[cfg.block_of[k]]) {
        const auto c = cfg.blocks[a].last();
        if (c < k)
          want = std::max(want, static_cast<std::int32_t>(c));
      }
      ASSERT_EQ(deps[k], want) << "cfg " << i << " @+" << k;
    }
  }
}

TEST(ControlDeps, UnreachableExitRejected) {
  try {
    auto m = assemble("fn f()\n  jmp 0\n");
    postdominators(build_cfg(m.functions[0]));
    FAIL() << "expected UnreachableExit";
  } catch (const Error &e) {
    EXPECT_EQ(e.kind(), ErrorKind::UnreachableExit);
  }
}
