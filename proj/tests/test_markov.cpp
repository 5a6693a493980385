#include <cmath>
#include <numeric>

#include "doctest.h"
#include "error.hpp"
#include "markov.hpp"
#include "parser.hpp"
#include "support.hpp"

using namespace dtsi;

namespace {

Matrix mat(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix m(rows.size(), rows.begin()->size());
  int i = 0;
  for (const auto& r : rows) {
    int j = 0;
    for (double v : r) m(i, j++) = v;
    ++i;
  }
  return m;
}

}  // namespace

TEST_SUITE("markov") {
  TEST_CASE("two-state chain has the textbook stationary vector") {
    const double p = 0.3, q = 0.1;
    auto st = steady_state(mat({{1 - p, p}, {q, 1 - q}}));
    CHECK(st.pmf[0] == doctest::Approx(q / (p + q)));
    CHECK(st.pmf[1] == doctest::Approx(p / (p + q)));
    CHECK(st.period == 1);
    CHECK(st.residual < 1e-12);
  }

  TEST_CASE("transient states get zero mass") {
    auto st = steady_state(mat({{0, 1, 0}, {0, 0.5, 0.5}, {0, 0.5, 0.5}}));
    CHECK(st.pmf[0] == 0);
    CHECK(st.pmf[1] == doctest::Approx(0.5));
    CHECK(st.closed_class == std::vector<int>{1, 2});
  }

  TEST_CASE("zero rows are absorbing") {
    auto st = steady_state(mat({{0, 1}, {0, 0}}));
    CHECK(st.pmf == Pmf{0, 1});
  }

  TEST_CASE("two closed classes are an analysis error") {
    CHECK_THROWS_AS(steady_state(mat({{0.5, 0.25, 0.25}, {0, 1, 0}, {0, 0, 1}})), AnalysisError);
    try {
      steady_state(mat({{0.5, 0.25, 0.25}, {0, 1, 0}, {0, 0, 1}}));
    } catch (const AnalysisError& e) {
      CHECK(std::string(e.what()).find("closed") != std::string::npos);
    }
  }

  TEST_CASE("communication classes and periods") {
    auto cyc = mat({{0, 1, 0}, {0, 0, 1}, {1, 0, 0}});
    CHECK(communication_classes(cyc).size() == 1);
    CHECK(period_of(cyc, {0, 1, 2}) == 3);
    auto st = steady_state(cyc);
    CHECK(st.period == 3);
    for (double v : st.pmf) CHECK(v == doctest::Approx(1.0 / 3));
    auto two = mat({{0, 1, 0, 0}, {1, 0, 0, 0}, {0, 0, 0.5, 0.5}, {0, 0, 0.5, 0.5}});
    CHECK(communication_classes(two).size() == 2);
    CHECK(closed_classes(two).size() == 2);
    CHECK(period_of(two, {0, 1}) == 2);
  }

  TEST_CASE("power iteration and transient distributions") {
    auto p = mat({{0.2, 0.8, 0}, {0.1, 0.6, 0.3}, {0.5, 0, 0.5}});
    auto pi = power_iteration(p, {1, 0, 0});
    auto st = steady_state(p);
    for (int i = 0; i < 3; ++i) CHECK(pi[i] == doctest::Approx(st.pmf[i]).epsilon(1e-10));
    auto t2 = transient(p, {1, 0, 0}, 2);
    CHECK(t2[0] == doctest::Approx(0.2 * 0.2 + 0.8 * 0.1));
    CHECK(t2[2] == doctest::Approx(0.8 * 0.3));
    CHECK_THROWS_AS(power_iteration(mat({{0, 1}, {1, 0}}), {1, 0}, 1e-12, 1000), AnalysisError);
  }

  TEST_CASE("sojourn vectors and embedded chain") {
    auto b = test::build_model("ts_example");
    auto sol = solve(b.chain);
    const int s1 = b.chain.initial;
    CHECK(sol.soj.sj[s1] == doctest::Approx(1 / 0.3));
    CHECK(sol.soj.var[s1] == doctest::Approx(0.7 / 0.09));
    auto pe = edtmc(b.chain);
    for (int i = 0; i < pe.rows(); ++i) {
      CHECK(pe(i, i) == 0);
      CHECK(pe.row(i).sum() == doctest::Approx(1));
    }
    CHECK(sol.psi_star.period == 3);
    CHECK(sol.route_gap < 1e-12);
  }

  TEST_CASE("step labels") {
    auto l = parse_step_label("{b,c^} {a}");
    CHECK(l.size() == 2);
    CHECK(to_string(l) == "{a} {b,c^}");
    CHECK(parse_step_label("~").empty());
    CHECK(parse_step_label("{}").count(Multiaction{}) == 1);
    CHECK_THROWS_AS(parse_step_label(""), InputError);
  }

  TEST_CASE("derived trace probabilities") {
    auto b = test::build_model("ssbsspt_pair");
    IndexEvaluator ev(b.chain, solve(b.chain));
    const int s3 = ev.resolve_path("{a} / {b}");
    CHECK(trace_prob(b.chain, s3, {parse_step_label("{c}")}) == doctest::Approx(0.5));
    CHECK(trace_prob(b.chain, s3, {}) == 1);
    CHECK(trace_prob(b.chain, s3, {parse_step_label("{a}")}) == 0);
    CHECK(trace_prob(b.chain, b.chain.initial, {parse_step_label("{a}"), parse_step_label("{b}")}) ==
          doctest::Approx(0.25));
  }

  TEST_CASE("index expressions") {
    auto b = test::build_model("ts_example");
    auto sol = solve(b.chain);
    IndexEvaluator ev(b.chain, sol, b.model.states());
    const int s2 = ev.resolve_state("s2");
    CHECK(s2 == ev.resolve_path("{a}"));
    CHECK(ev.resolve_state(std::to_string(s2 + 1)) == s2);
    CHECK(ev.eval("phi[s2]") == doctest::Approx(sol.phi[s2]));
    CHECK(ev.eval("recur[s2]") == doctest::Approx(1 / sol.phi[s2]));
    CHECK(ev.eval("rate[s2]") == doctest::Approx(sol.phi[s2] / sol.soj.sj[s2]));
    CHECK(ev.eval("sj[s2] * 2 - (1 + 1) / 2") == doctest::Approx(2 * sol.soj.sj[s2] - 1));
    CHECK(ev.eval("phi[s2, s3]") == doctest::Approx(sol.phi[s2]));
    CHECK(ev.eval("psistar[s2]") == doctest::Approx(sol.psi_star.pmf[s2]));
    CHECK(ev.eval("reward[s2=0.5]") == doctest::Approx(0.5 * sol.phi[s2]));
    CHECK(ev.eval("phi[{a} / {b}]") == 0);
    CHECK(ev.eval("step[{b}]") == doctest::Approx(sol.phi[s2] * 0.4));
    CHECK_THROWS_AS(ev.eval("bogus[s2]"), InputError);
    CHECK_THROWS_AS(ev.eval("phi[s9]"), InputError);
    CHECK_THROWS_AS(ev.resolve_path("{z}"), InputError);
  }

  TEST_CASE("csv rows per state") {
    auto b = test::build_model("choice_stoch");
    auto csv = solution_csv(b.chain, solve(b.chain));
    CHECK(csv.rfind("state,key,kind,sj,var,psistar,psi,phi\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
    CHECK(csv.find("inf") != std::string::npos);
  }
}
