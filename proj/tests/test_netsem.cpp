#include "doctest.h"
#include "netsem.hpp"
#include "parser.hpp"
#include "support.hpp"

using namespace dtsi;

namespace {

int count_kind(const DtsiBox& n, PlaceKind k) {
  int c = 0;
  for (const auto& p : n.places) c += p.kind == k;
  return c;
}

}  // namespace

TEST_SUITE("netsem") {
  TEST_CASE("an activity is a single transition between entry and exit") {
    auto n = box_of(parse_static("({a},0.5)"));
    CHECK(n.places.size() == 2);
    CHECK(count_kind(n, PlaceKind::Entry) == 1);
    CHECK(count_kind(n, PlaceKind::Exit) == 1);
    REQUIRE(n.transitions.size() == 1);
    CHECK(n.transitions[0].pre.size() == 1);
    CHECK(n.entry_marking() == Marking{1, 0});
  }

  TEST_CASE("sequence fuses exit and entry into an internal place") {
    auto n = box_of(parse_static("({a},0.5);({b},0.5)"));
    CHECK(n.places.size() == 3);
    CHECK(count_kind(n, PlaceKind::Internal) == 1);
  }

  TEST_CASE("choice shares entry and exit places") {
    auto n = box_of(parse_static("({a},0.5) [] ({b},0.5)"));
    CHECK(n.places.size() == 2);
    CHECK(n.transitions.size() == 2);
    CHECK(n.transitions[0].pre == n.transitions[1].pre);
  }

  TEST_CASE("restriction drops transitions mentioning the action") {
    auto n = box_of(parse_static("(({a},0.5) || ({b},0.5)) rs a"));
    REQUIRE(n.transitions.size() == 1);
    CHECK(n.transitions[0].act.part == Multiaction{{"b", false}});
  }

  TEST_CASE("synchronization adds a transition joining both presets") {
    auto n = box_of(parse_static("(({a},0.5) || ({a^},0.4)) sy a"));
    REQUIRE(n.transitions.size() == 3);
    const auto& t = n.transitions[2];
    CHECK(t.act.part.empty());
    CHECK(t.act.value == doctest::Approx(0.2));
    CHECK(t.pre.size() == 2);
  }

  TEST_CASE("firing moves tokens and probabilities follow the step rule") {
    auto n = box_of(parse_static("({a},0.3) [] ({a},0.6)"));
    auto m0 = n.entry_marking();
    auto sets = fireable_sets(n, m0);
    CHECK(sets.size() == 3);
    CHECK(pf_net(n, {0}, m0) == doctest::Approx(0.3 * 0.4));
    CHECK(pt_net(n, {}, m0) == doctest::Approx(0.7 * 0.4 / (1 - 0.18)));
    CHECK(fire(n, m0, {0}) == n.exit_marking());
    CHECK(tangible(n, m0));
    auto rg = build_rg(n);
    CHECK(rg.size() == 2);
  }

  TEST_CASE("immediate transitions suppress stochastic ones") {
    auto n = box_of(parse_static("({a},0.5) || ({b},#2)"));
    auto m0 = n.entry_marking();
    CHECK_FALSE(tangible(n, m0));
    CHECK(enabled(n, m0) == std::vector<int>{1});
    CHECK(fireable_sets(n, m0) == std::vector<std::vector<int>>{{1}});
  }

  TEST_CASE("bundled boxes are safe, clean and match their transition systems") {
    for (const auto& name : test::bundled_models()) {
      CAPTURE(name);
      auto b = test::build_model(name);
      auto box = box_of(b.model.instantiate());
      auto rg = build_rg(box);
      auto rep = check_safe_clean(box, rg);
      CHECK(rep.safe);
      CHECK(rep.clean);
      CHECK(rg.size() == b.ts.size());
      CHECK(isomorphic(graph_of(b.ts), graph_of(box, rg), 1e-12).has_value());
    }
  }

  TEST_CASE("exports are well formed") {
    auto box = box_of(parse_static("({a},0.5);({b},#1)"));
    CHECK(box.to_json().find("\"transitions\"") != std::string::npos);
    CHECK(box.to_dot().rfind("digraph", 0) == 0);
    auto rg = build_rg(box);
    CHECK(rg.to_dot(box).rfind("digraph", 0) == 0);
    CHECK(marking_str(box, box.entry_marking()).size() > 0);
  }
}
