#include "doctest.h"
#include "error.hpp"
#include "expr.hpp"

using namespace dtsi;

namespace {

Multiaction ma(std::initializer_list<ActionSym> xs) { return Multiaction(xs); }
const ActionSym a{"a"}, a_{"a", true}, b{"b"}, c{"c"};

}  // namespace

TEST_SUITE("expr") {
  TEST_CASE("multiset arithmetic keeps multiplicities") {
    Multiset<int> x{1, 1, 2};
    Multiset<int> y{1, 3};
    CHECK((x + y).count(1) == 3);
    CHECK((x - y).count(1) == 1);
    CHECK((x - y).count(3) == 0);
    CHECK(x.size() == 3);
    CHECK(Multiset<int>{1}.subset_of(x));
    CHECK_FALSE(y.subset_of(x));
    CHECK(x.remove(1, 5) == 2);
    CHECK(x == Multiset<int>{2});
  }

  TEST_CASE("multiaction text and conjugates") {
    CHECK(to_string(ma({b, a_, a})) == "{a,a^,b}");
    CHECK(to_string(Multiaction{}) == "{}");
    CHECK(a.conjugate() == a_);
    CHECK(mentions(ma({a_}), "a"));
    CHECK_FALSE(mentions(ma({b}), "a"));
  }

  TEST_CASE("synchronization removes one conjugate pair") {
    CHECK(synchronizable(ma({a, b}), ma({a_, c}), "a"));
    CHECK_FALSE(synchronizable(ma({a}), ma({a}), "a"));
    CHECK(sync_parts(ma({a, b}), ma({a_, c}), "a") == ma({b, c}));
    CHECK(sync_parts(ma({a, a}), ma({a_}), "a") == ma({a}));
    CHECK_THROWS_AS(sync_parts(ma({b}), ma({c}), "a"), InputError);

    Activity u{ma({a}), Kind::Stochastic, 0.5, Numbering::leaf(1)};
    Activity v{ma({a_}), Kind::Stochastic, 0.4, Numbering::leaf(2)};
    Activity w = sync_activities(u, v, "a");
    CHECK(w.part.empty());
    CHECK(w.value == doctest::Approx(0.2));
    CHECK(w.num.content() == std::vector<int>{1, 2});

    Activity i{ma({a}), Kind::Immediate, 2, Numbering::leaf(3)};
    Activity j{ma({a_}), Kind::Immediate, 3, Numbering::leaf(4)};
    CHECK(sync_activities(i, j, "a").value == 5);
    CHECK_THROWS_AS(sync_activities(u, j, "a"), InputError);
  }

  TEST_CASE("numbering content collects leaves in order") {
    auto n = Numbering::pair(Numbering::pair(Numbering::leaf(3), Numbering::leaf(1)), Numbering::leaf(2));
    CHECK(n.content() == std::vector<int>{1, 2, 3});
    CHECK_FALSE(n.is_leaf());
    CHECK(n.left().right().leaf_value() == 1);
    CHECK(n == Numbering::pair(Numbering::pair(Numbering::leaf(3), Numbering::leaf(1)), Numbering::leaf(2)));
  }

  TEST_CASE("values are range checked") {
    CHECK_NOTHROW(validate_value(Kind::Stochastic, 0.5));
    CHECK_THROWS_AS(validate_value(Kind::Stochastic, 1.0), InputError);
    CHECK_THROWS_AS(validate_value(Kind::Stochastic, 0.0), InputError);
    CHECK_NOTHROW(validate_value(Kind::Immediate, 7));
    CHECK_THROWS_AS(validate_value(Kind::Immediate, 0), InputError);
    CHECK(format_number(0.1) == "0.1");
    CHECK(format_number(2) == "2");
  }

  TEST_CASE("relabelings must be permutations") {
    auto f = Relabeling::from_pairs({{"a", "b"}, {"b", "a"}});
    CHECK(f("a") == "b");
    CHECK(f("c") == "c");
    CHECK(f(a_) == ActionSym{"b", true});
    CHECK(f.str() == "[f: a<->b]");
    auto g = Relabeling::from_pairs({{"a", "b"}, {"b", "c"}, {"c", "a"}});
    CHECK(g.str() == "[f: a->b, b->c, c->a]");
    CHECK_THROWS_AS(Relabeling::from_pairs({{"a", "b"}}), InputError);
    CHECK_THROWS_AS(Relabeling::from_pairs({{"a", "c"}, {"b", "c"}}), InputError);
    CHECK(Relabeling::from_pairs({{"a", "a"}}) == Relabeling{});
  }

  TEST_CASE("leaves are numbered in preorder") {
    auto x = StaticExpr::activity(ma({a}), Kind::Stochastic, 0.5);
    auto y = StaticExpr::activity(ma({b}), Kind::Immediate, 2);
    auto e = StaticExpr::choice(StaticExpr::seq(x, y), StaticExpr::par(y, x));
    REQUIRE(e.activities().size() == 4);
    for (int i = 0; i < 4; ++i) CHECK(e.activities()[i].num.content() == std::vector<int>{i + 1});
    CHECK(e.node(0).op == Op::Choice);
    CHECK(e.num_children(0) == 2);
    CHECK(e.node(e.child(0, 1)).op == Op::Par);
  }

  TEST_CASE("regularity forbids concurrency at the top of an iteration body") {
    auto x = StaticExpr::activity(ma({a}), Kind::Stochastic, 0.5);
    CHECK(StaticExpr::iter(x, x, x).is_regular());
    CHECK_FALSE(StaticExpr::iter(x, StaticExpr::par(x, x), x).is_regular());
    CHECK(StaticExpr::iter(StaticExpr::par(x, x), x, StaticExpr::par(x, x)).is_regular());
    CHECK_FALSE(StaticExpr::iter(x, StaticExpr::choice(x, StaticExpr::par(x, x)), x).is_regular());
  }

  TEST_CASE("stop and shape helpers") {
    auto s = StaticExpr::stop();
    CHECK(s.is_stop(0));
    auto x = StaticExpr::activity(ma({a}), Kind::Stochastic, 0.5);
    auto e = StaticExpr::seq(x, s);
    CHECK(e.is_stop(e.child(0, 1)));
    CHECK_FALSE(e.is_stop(0));

    auto e2 = e.with_activity(0, ma({a}), Kind::Stochastic, 0.25);
    CHECK(e2.same_shape(e));
    CHECK_FALSE(e2 == e);
    CHECK(e2.activities()[0].value == 0.25);
    CHECK_FALSE(e.same_shape(StaticExpr::choice(x, s)));
    CHECK(e.subexpr(e.child(0, 0)) == x);
  }

  TEST_CASE("bar placement follows the dynamic grammar") {
    auto x = StaticExpr::activity(ma({a}), Kind::Stochastic, 0.5);
    auto e = std::make_shared<const StaticExpr>(StaticExpr::seq(x, x));
    CHECK(DynamicExpr::overlined(e).well_formed());
    CHECK(DynamicExpr::underlined(e).well_formed());
    DynamicExpr both{e, {over_bar(1), over_bar(2)}};
    CHECK_FALSE(both.well_formed());
    DynamicExpr mid{e, {under_bar(1)}};
    CHECK(mid.well_formed());
  }
}
