#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "equiv.hpp"
#include "expr.hpp"
#include "markov.hpp"
#include "opsem.hpp"
#include "parser.hpp"

namespace dtsi::test {

std::string model_path(const std::string& name);  // bundled model by file stem
const std::vector<std::string>& bundled_models();

struct Built {
  ModelFile model;
  TransitionSystem ts;
  ChainModel chain;
};
Built build_model(const std::string& name, const std::map<std::string, double>& params = {},
                  const std::string& definition = "");

inline bool close(double a, double b, double tol) { return std::abs(a - b) <= tol * std::max(1.0, std::abs(b)); }

struct GenOptions {
  int max_leaves = 6;
  int max_sync = 2;
  bool restrict_relabel = true;
  bool immediates = true;
};

// Random regular static expression over the actions a, b, c.
StaticExpr random_term(std::mt19937_64& rng, const GenOptions& opt = {});

// Every regular term with up to three leaves built from Seq, Choice, Par and
// one three-leaf iteration, with leaves drawn from a fixed palette and an
// optional outer restriction or relabeling. No synchronization.
std::vector<StaticExpr> small_terms();

// Independent step semantics for terms without synchronization: states are
// residual terms normalized so that structurally equivalent positions
// coincide; steps are enumerated by brute force over concurrent subsets.
LabeledGraph residual_graph(const StaticExpr& e, std::size_t max_states = 100000);

}  // namespace dtsi::test
