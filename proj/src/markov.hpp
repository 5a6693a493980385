#pragma once

#include <Eigen/Dense>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "expr.hpp"
#include "opsem.hpp"

namespace dtsi {

using Matrix = Eigen::MatrixXd;
using Pmf = std::vector<double>;
using StepLabel = Multiset<Multiaction>;  // multiaction parts of a step

struct LabeledArc {
  StepLabel label;
  double prob = 0;
  int target = 0;
};

// A transition system (or its quotient) reduced to what chain analysis needs:
// one-step probabilities, the state kinds, and arcs aggregated per
// (multiaction label, target).
struct ChainModel {
  std::vector<std::string> names;
  std::vector<bool> tangible;
  std::vector<std::vector<LabeledArc>> arcs;
  Matrix pm;
  int initial = 0;

  int size() const { return static_cast<int>(names.size()); }
};

ChainModel chain_of(const TransitionSystem& ts);

struct SojournVectors {
  std::vector<double> sj;   // 0 for vanishing, +inf when absorbing
  std::vector<double> var;
  std::vector<double> sl;   // self-loop abstraction factor
};

SojournVectors sojourn(const ChainModel& c);
Matrix edtmc(const ChainModel& c);  // zero diagonal; absorbing rows all zero
Matrix dtmc(const ChainModel& c);

// Strongly connected components in order of their least state.
std::vector<std::vector<int>> communication_classes(const Matrix& p);
std::vector<std::vector<int>> closed_classes(const Matrix& p);
int period_of(const Matrix& p, const std::vector<int>& cls);

struct Stationary {
  Pmf pmf;
  std::vector<int> closed_class;
  int period = 1;   // > 1: stationary but not limiting
  double residual = 0;
};

// Stationary PMF of a chain with exactly one closed class. Rows summing to
// zero are read as absorbing. Throws AnalysisError otherwise.
Stationary steady_state(const Matrix& p);
// Independent check; throws AnalysisError when it does not settle.
Pmf power_iteration(const Matrix& p, const Pmf& start, double tol = 1e-12, long cap = 1000000);
Pmf transient(const Matrix& p, const Pmf& psi0, int k);
Pmf initial_pmf(const ChainModel& c);

struct Solution {
  SojournVectors soj;
  Matrix p, pstar;
  Stationary psi_star, psi;
  Pmf phi;         // route through the embedded chain and sojourn times
  Pmf phi_direct;  // route through the DTMC restricted to tangible states
  double route_gap = 0;
};

Solution solve(const ChainModel& c);

// Probability of a derived step trace from state s.
double trace_prob(const ChainModel& c, int s, const std::vector<StepLabel>& trace);

// Parses "{a} {b,c^}" (or "~" for the empty step) into multiaction parts.
StepLabel parse_step_label(const std::string& text);
std::string to_string(const StepLabel& l);

// Performance indices written as arithmetic over
//   phi[..] psi[..] psistar[..] sj[s] var[s] recur[s] rate[s]
//   step[{a} {b}] reward[s=v, ..]
// where states are 1-based numbers, names bound by `state` lines, or
// inline paths such as {a} / {r1} {r2}.
class IndexEvaluator {
 public:
  IndexEvaluator(const ChainModel& c, const Solution& sol,
                 std::vector<std::pair<std::string, std::string>> named_states = {});

  double eval(const std::string& expr) const;
  int resolve_state(const std::string& ref) const;
  // Follows multiaction-labelled steps from the initial state.
  int resolve_path(const std::string& path) const;

 private:
  const ChainModel& c_;
  const Solution& sol_;
  std::vector<std::pair<std::string, std::string>> named_;
};

std::string solution_csv(const ChainModel& c, const Solution& sol);
std::string matrix_csv(const Matrix& m);

}  // namespace dtsi
