#include "equiv.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "error.hpp"
#include "json.hpp"

namespace dtsi {

Partition Partition::from_blocks(std::vector<std::vector<int>> blocks, int states) {
  Partition p;
  for (auto& b : blocks) std::sort(b.begin(), b.end());
  std::erase_if(blocks, [](const auto& b) { return b.empty(); });
  std::sort(blocks.begin(), blocks.end(), [](const auto& x, const auto& y) { return x.front() < y.front(); });
  p.block_of.assign(states, -1);
  for (std::size_t k = 0; k < blocks.size(); ++k)
    for (int s : blocks[k]) p.block_of[s] = static_cast<int>(k);
  p.blocks = std::move(blocks);
  return p;
}

double pm_a(const ChainModel& c, int s, const StepLabel& a, const std::vector<int>& h) {
  double r = 0;
  for (const auto& arc : c.arcs[s])
    if (arc.label == a && std::find(h.begin(), h.end(), arc.target) != h.end()) r += arc.prob;
  return r;
}

namespace {

// Per-state aggregated probabilities keyed by (label, target block).
using Signature = std::map<std::pair<StepLabel, int>, double>;

Signature signature(const ChainModel& c, int s, const std::vector<int>& block_of) {
  Signature sig;
  for (const auto& a : c.arcs[s]) sig[{a.label, block_of[a.target]}] += a.prob;
  return sig;
}

std::vector<std::pair<std::pair<StepLabel, int>, long long>> bucketed(const Signature& sig, double tol) {
  std::vector<std::pair<std::pair<StepLabel, int>, long long>> r;
  for (const auto& [k, v] : sig) {
    const long long q = std::llround(v / tol);
    if (q != 0) r.push_back({k, q});
  }
  return r;
}

}  // namespace

Partition largest_autobisim(const ChainModel& c, double tol) {
  const int n = c.size();
  std::vector<int> block_of(n);
  for (int s = 0; s < n; ++s) block_of[s] = c.tangible[s] ? 0 : 1;
  int count = -1;
  for (;;) {
    std::map<std::pair<int, std::vector<std::pair<std::pair<StepLabel, int>, long long>>>, std::vector<int>> groups;
    for (int s = 0; s < n; ++s) groups[{block_of[s], bucketed(signature(c, s, block_of), tol)}].push_back(s);
    std::vector<std::vector<int>> blocks;
    for (auto& [_, members] : groups) blocks.push_back(std::move(members));
    Partition p = Partition::from_blocks(std::move(blocks), n);
    if (p.size() == count) return p;
    count = p.size();
    block_of = p.block_of;
  }
}

std::optional<std::string> bisimulation_violation(const ChainModel& c, const Partition& p, double tol) {
  for (const auto& b : p.blocks) {
    const int r = b.front();
    const Signature ref = signature(c, r, p.block_of);
    for (int s : b) {
      if (c.tangible[s] != c.tangible[r])
        return "block of state " + std::to_string(r + 1) + " mixes tangible and vanishing states";
      Signature sig = signature(c, s, p.block_of);
      for (const auto& [k, v] : ref) sig[k];
      for (const auto& [k, v] : sig) {
        auto it = ref.find(k);
        const double w = it == ref.end() ? 0 : it->second;
        if (std::abs(v - w) > tol)
          return "states " + std::to_string(r + 1) + " and " + std::to_string(s + 1) + " differ on label " +
                 to_string(k.first) + " into block " + std::to_string(k.second + 1);
      }
    }
  }
  return std::nullopt;
}

ChainModel disjoint_union(const ChainModel& a, const ChainModel& b) {
  ChainModel u;
  const int na = a.size(), nb = b.size();
  u.initial = a.initial;
  u.names = a.names;
  u.tangible = a.tangible;
  u.arcs = a.arcs;
  for (int s = 0; s < nb; ++s) {
    u.names.push_back(b.names[s]);
    u.tangible.push_back(b.tangible[s]);
    auto arcs = b.arcs[s];
    for (auto& x : arcs) x.target += na;
    u.arcs.push_back(std::move(arcs));
  }
  u.pm = Matrix::Zero(na + nb, na + nb);
  u.pm.topLeftCorner(na, na) = a.pm;
  u.pm.bottomRightCorner(nb, nb) = b.pm;
  return u;
}

EquivResult bisim_equivalent(const ChainModel& a, const ChainModel& b, double tol) {
  EquivResult r;
  r.offset = a.size();
  r.partition = largest_autobisim(disjoint_union(a, b), tol);
  r.equivalent = r.partition.block_of[a.initial] == r.partition.block_of[b.initial + r.offset];
  return r;
}

Quotient quotient(const ChainModel& c, const Partition& p, double tol) {
  if (auto v = bisimulation_violation(c, p, tol)) throw AnalysisError("not a bisimulation: " + *v);
  Quotient q;
  q.partition = p;
  const int k = p.size();
  ChainModel& qc = q.chain;
  qc.initial = p.block_of[c.initial];
  qc.pm = Matrix::Zero(k, k);
  qc.arcs.resize(k);
  for (int b = 0; b < k; ++b) {
    qc.names.push_back("K" + std::to_string(b + 1));
    const int rep = p.blocks[b].front();
    qc.tangible.push_back(c.tangible[rep]);
    for (const auto& [key, prob] : signature(c, rep, p.block_of)) {
      qc.arcs[b].push_back({key.first, prob, key.second});
      qc.pm(b, key.second) += prob;
    }
  }
  return q;
}

Quotient quotient(const ChainModel& c, double tol) { return quotient(c, largest_autobisim(c, tol), tol); }

namespace {

nlohmann::json arcs_json(const ChainModel& c, int s) {
  auto r = nlohmann::json::array();
  for (const auto& a : c.arcs[s])
    r.push_back({{"label", to_string(a.label)}, {"probability", a.prob}, {"target", a.target + 1}});
  return r;
}

}  // namespace

std::string chain_json(const ChainModel& c) {
  nlohmann::json j;
  j["initial"] = c.initial + 1;
  j["states"] = nlohmann::json::array();
  for (int s = 0; s < c.size(); ++s)
    j["states"].push_back({{"id", s + 1},
                           {"key", c.names[s]},
                           {"kind", c.tangible[s] ? "tangible" : "vanishing"},
                           {"arcs", arcs_json(c, s)}});
  return j.dump(2) + "\n";
}

std::string quotient_json(const Quotient& q) {
  nlohmann::json j;
  j["initial"] = q.chain.initial + 1;
  j["blocks"] = nlohmann::json::array();
  for (int b = 0; b < q.chain.size(); ++b) {
    auto members = nlohmann::json::array();
    for (int s : q.partition.blocks[b]) members.push_back(s + 1);
    j["blocks"].push_back({{"id", b + 1},
                           {"name", q.chain.names[b]},
                           {"kind", q.chain.tangible[b] ? "tangible" : "vanishing"},
                           {"members", members},
                           {"arcs", arcs_json(q.chain, b)}});
  }
  return j.dump(2) + "\n";
}

std::string blocks_csv(const Quotient& q) {
  std::string r = "state,block\n";
  for (std::size_t s = 0; s < q.partition.block_of.size(); ++s)
    r += std::to_string(s + 1) + "," + q.chain.names[q.partition.block_of[s]] + "\n";
  return r;
}

}  // namespace dtsi
