#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "expr.hpp"
#include "opsem.hpp"

namespace dtsi {

enum class PlaceKind : std::uint8_t { Entry, Internal, Exit };

struct Place {
  std::string name;
  PlaceKind kind = PlaceKind::Internal;
};

// Arc list entries are (place index, weight), sorted by place.
using Arcs = std::vector<std::pair<int, int>>;

struct NetTransition {
  std::string name;
  Activity act;
  Arcs pre, post;
};

// Token count per place.
using Marking = std::vector<int>;

class DtsiBox {
 public:
  std::vector<Place> places;
  std::vector<NetTransition> transitions;

  Marking entry_marking() const;  // one token on every entry place
  Marking exit_marking() const;

  std::string to_json() const;
  std::string to_dot() const;
};

DtsiBox box_of(const StaticExpr& e);

bool preset_within(const Arcs& pre, const Marking& m);
// Transitions whose preset is covered by m; immediate ones take priority.
std::vector<int> enabled(const DtsiBox& n, const Marking& m);
bool tangible(const DtsiBox& n, const Marking& m);

// Every set U that may fire in m (sorted transition indices); the empty set
// is included exactly when m is tangible.
std::vector<std::vector<int>> fireable_sets(const DtsiBox& n, const Marking& m);

Marking fire(const DtsiBox& n, const Marking& m, const std::vector<int>& u);
double pf_net(const DtsiBox& n, const std::vector<int>& u, const Marking& m);
double pt_net(const DtsiBox& n, const std::vector<int>& u, const Marking& m);

struct RgArc {
  int source = 0;
  std::vector<int> set;
  double prob = 0;
  int target = 0;
};

struct ReachabilityGraph {
  std::vector<Marking> markings;
  std::vector<bool> tangible;
  std::vector<RgArc> arcs;
  int initial = 0;

  std::size_t size() const { return markings.size(); }
  std::string to_json(const DtsiBox& n) const;
  std::string to_dot(const DtsiBox& n) const;
};

ReachabilityGraph build_rg(const DtsiBox& n, std::size_t max_markings = 100000);

struct SafetyReport {
  bool safe = true;
  bool clean = true;
  std::optional<Marking> witness;  // first offending marking
  std::string message;
};

SafetyReport check_safe_clean(const DtsiBox& n, const ReachabilityGraph& rg);

// Activity-identity labelled graph of the reachability graph.
LabeledGraph graph_of(const DtsiBox& n, const ReachabilityGraph& rg);

std::string marking_str(const DtsiBox& n, const Marking& m);

}  // namespace dtsi
