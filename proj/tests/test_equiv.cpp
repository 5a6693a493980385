#include "doctest.h"
#include "equiv.hpp"
#include "error.hpp"
#include "parser.hpp"
#include "support.hpp"

using namespace dtsi;

namespace {

ChainModel chain(const std::string& text) { return chain_of(build_ts(parse_static(text))); }

}  // namespace

TEST_SUITE("equiv") {
  TEST_CASE("aggregate step probabilities into a set") {
    auto c = chain("({a},1/3) [] ({a},1/3)");
    const int s0 = c.initial, fin = 1 - s0;
    CHECK(pm_a(c, s0, parse_step_label("{a}"), {fin}) == doctest::Approx(0.5));
    CHECK(pm_a(c, s0, {}, {s0}) == doctest::Approx(0.5));
    CHECK(pm_a(c, s0, parse_step_label("{b}"), {fin}) == 0);

    auto v = chain("({a},#1);({b},0.5)");
    CHECK_FALSE(v.tangible[v.initial]);
    CHECK(pm_a(v, v.initial, {}, {0, 1, 2}) == 0);
  }

  TEST_CASE("block with equal futures after an immediate choice") {
    auto b = test::build_model("qts_f");
    auto p = largest_autobisim(b.chain);
    CHECK(p.size() == 4);
    int pairs = 0;
    for (const auto& blk : p.blocks) {
      if (blk.size() != 2) continue;
      ++pairs;
      for (int s : blk) CHECK(b.chain.tangible[s]);
    }
    CHECK(pairs == 1);
    CHECK_FALSE(bisimulation_violation(b.chain, p).has_value());
  }

  TEST_CASE("distinct signatures give a discrete partition") {
    auto b = test::build_model("ts_example");
    CHECK(largest_autobisim(b.chain).size() == 5);
  }

  TEST_CASE("blocks never mix tangible and vanishing states") {
    for (const auto& name : test::bundled_models()) {
      CAPTURE(name);
      auto b = test::build_model(name);
      auto p = largest_autobisim(b.chain);
      for (const auto& blk : p.blocks)
        for (int s : blk) CHECK(b.chain.tangible[s] == b.chain.tangible[blk.front()]);
    }
  }

  TEST_CASE("cross-expression equivalence") {
    CHECK(bisim_equivalent(chain("({a},1/2)"), chain("({a},1/3) [] ({a},1/3)")).equivalent);
    CHECK_FALSE(bisim_equivalent(chain("({a},1/2)"), chain("({b},1/2)")).equivalent);
    CHECK_FALSE(bisim_equivalent(chain("({a},1/2)"), chain("({a},0.501)")).equivalent);
    auto r = bisim_equivalent(chain("({a},1/2)"), chain("({a},1/3) [] ({a},1/3)"));
    CHECK(r.offset == 2);
    CHECK(r.partition.block_of.size() == 4);
  }

  TEST_CASE("quotient rejects a partition that is not a bisimulation") {
    auto b = test::build_model("ts_example");
    std::vector<std::vector<int>> blocks(1);
    std::vector<std::vector<int>> split;
    for (int s = 0; s < b.chain.size(); ++s)
      if (b.chain.tangible[s]) blocks[0].push_back(s);
      else split.push_back({s});
    for (auto& x : split) blocks.push_back(x);
    auto p = Partition::from_blocks(blocks, b.chain.size());
    CHECK(bisimulation_violation(b.chain, p).has_value());
    CHECK_THROWS_AS(quotient(b.chain, p), AnalysisError);
  }

  TEST_CASE("quotient chain of the abstract shared memory system") {
    auto b = test::build_model("shared_memory_abstract");
    auto q = quotient(b.chain);
    CHECK(q.chain.size() == 6);
    CHECK(q.chain.initial == q.partition.block_of[b.chain.initial]);
    for (int k = 0; k < q.chain.size(); ++k) CHECK(q.chain.pm.row(k).sum() == doctest::Approx(1));
    CHECK(blocks_csv(q).rfind("state,block\n", 0) == 0);
    CHECK(quotient_json(q).find("\"members\"") != std::string::npos);
  }

  TEST_CASE("disjoint union keeps both chains apart") {
    auto x = chain("({a},1/2)"), y = chain("({a},1/2);({b},1/2)");
    auto u = disjoint_union(x, y);
    CHECK(u.size() == 5);
    CHECK(u.pm.topRightCorner(2, 3).isZero());
    CHECK(u.pm.bottomLeftCorner(3, 2).isZero());
  }
}
