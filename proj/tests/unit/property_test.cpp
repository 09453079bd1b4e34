#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "generators.hpp"
#include "ucov/asm.hpp"
#include "ucov/bdt.hpp"
#include "ucov/crossref.hpp"
#include "ucov/minilang.hpp"

using namespace ucov;
using namespace ucov::testing;

// Mapping a function onto itself never picks a wrong node.
TEST(CrossrefProperty, SelfMappingIsSound) {
  Rng rng(71);
  std::size_t mapped = 0, total = 0;
  for (int i = 0; i < 200; ++i) {
    auto m = random_module(rng, 80);
    for (const auto &fn : m.functions) {
      Bdt b = build_bdt(m, fn);
      for (std::uint32_t k = 0; k < fn.code.size(); ++k) {
        auto r = map_statement(b, b, k);
        ++total;
        if (r.kind == MapResult::Kind::Mapped) {
          ASSERT_EQ(r.offset, k) << disassemble(m);
          ++mapped;
        } else {
          ASSERT_EQ(r.kind, MapResult::Kind::Ambiguous);
          ASSERT_NE(std::find(r.candidates.begin(), r.candidates.end(), k), r.candidates.end());
        }
      }
    }
  }
  EXPECT_GT(mapped * 10, total * 9);
}

// A fresh declaration at the top of main shifts every old instruction by
// two; mapped statements must land exactly there.
TEST(CrossrefProperty, InsertedStatementShiftsMapping) {
  Rng rng(72);
  std::size_t mapped = 0, total = 0;
  for (int i = 0; i < 200; ++i) {
    const std::string src = random_source(rng);
    const auto at = src.find('{', src.find("fn main(")) + 1;
    const std::string mutated = src.substr(0, at) + "\n  var fresh: int = 424242;" + src.substr(at);
    auto a = minilang::compile_source(src);
    auto b = minilang::compile_source(mutated);
    VersionMapper vm(a, b);
    const Function &fn = *a.find_function("main");
    for (std::uint32_t k = 0; k < fn.code.size(); ++k) {
      auto r = vm.map_statement("main", k);
      ++total;
      ASSERT_NE(r.kind, MapResult::Kind::Unmapped);
      if (r.kind == MapResult::Kind::Mapped) {
        ASSERT_EQ(r.offset, k + 2) << "@+" << k << "\n" << src;
        ++mapped;
      }
    }
    // h is untouched.
    EXPECT_TRUE(vm.map_statement("h", 0).kind == MapResult::Kind::Mapped);
  }
  EXPECT_GT(mapped * 10, total * 9);
}

TEST(CrossrefProperty, MigrationAcrossIdenticalModulesIsIdentity) {
  Rng rng(73);
  for (int i = 0; i < 200; ++i) {
    auto m = random_module(rng);
    auto reqs = random_reqs(rng, m, 3);
    Migration mig = migrate(reqs, m, m);
    ASSERT_TRUE(mig.issues.empty());
    ASSERT_EQ(format_reqs(mig.reqs), format_reqs(reqs));
  }
}

// Recompiling a fixture after stripping its labels changes nothing but the
// annotations, so every statement maps to itself.
TEST(CrossrefProperty, FixturesMapOntoThemselves) {
  for (const auto &f : all_program_fixtures()) {
    auto m = load_fixture(f);
    auto stripped = strip_labels(m);
    VersionMapper vm(m, stripped);
    for (const auto &fn : m.functions)
      for (std::uint32_t k = 0; k < fn.code.size(); ++k) {
        auto r = vm.map_statement(fn.name, k);
        ASSERT_EQ(r.kind, MapResult::Kind::Mapped) << f << " " << fn.name << "@+" << k;
        ASSERT_EQ(r.offset, k);
      }
  }
}
