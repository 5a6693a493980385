#pragma once

#include <optional>
#include <string>
#include <vector>

#include "markov.hpp"

namespace dtsi {

struct Partition {
  std::vector<int> block_of;              // state -> block
  std::vector<std::vector<int>> blocks;   // sorted members, ordered by least member

  int size() const { return static_cast<int>(blocks.size()); }
  static Partition from_blocks(std::vector<std::vector<int>> blocks, int states);
};

// Aggregate probability of moving from s into H by steps labelled A.
double pm_a(const ChainModel& c, int s, const StepLabel& a, const std::vector<int>& h);

// Coarsest partition compatible with the tangible/vanishing split in which
// every state of a block reaches every block with the same probability per
// label. Probabilities are bucketed to multiples of tol.
Partition largest_autobisim(const ChainModel& c, double tol = 1e-9);

// Message describing the first violation, or nothing if p is a bisimulation.
std::optional<std::string> bisimulation_violation(const ChainModel& c, const Partition& p, double tol = 1e-9);

ChainModel disjoint_union(const ChainModel& a, const ChainModel& b);

struct EquivResult {
  bool equivalent = false;
  Partition partition;  // over the union; states of b follow those of a
  int offset = 0;
};

EquivResult bisim_equivalent(const ChainModel& a, const ChainModel& b, double tol = 1e-9);

struct Quotient {
  Partition partition;
  ChainModel chain;  // one state per block
};

// Throws AnalysisError when p is not a bisimulation of c.
Quotient quotient(const ChainModel& c, const Partition& p, double tol = 1e-9);
Quotient quotient(const ChainModel& c, double tol = 1e-9);

std::string chain_json(const ChainModel& c);
std::string quotient_json(const Quotient& q);
std::string blocks_csv(const Quotient& q);

}  // namespace dtsi
