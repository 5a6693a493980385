#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "expr.hpp"

namespace dtsi {

// Activities met while exploring one expression, interned by identity.
// Leaves keep ids 0..n-1 in leaf order; relabeled and synchronized
// activities are added on demand and remember how they were derived so
// their values can be recomputed for new parameter values.
class ActivityPool {
 public:
  explicit ActivityPool(const StaticExpr& e);

  const Activity& get(int id) const { return acts_[id]; }
  std::size_t size() const { return acts_.size(); }

  int relabeled(int id, const Relabeling& f);
  int synced(int u, int v, const std::string& a);

  // Recompute every value from new leaf values (same shape expression).
  void revalue(const StaticExpr& e);

 private:
  struct Origin {
    int kind = 0;  // 0 leaf, 1 relabel, 2 sync
    int a = -1, b = -1;
  };
  int intern(Activity act, Origin o);

  std::vector<Activity> acts_;
  std::vector<Origin> origin_;
  std::map<ActivityId, int> index_;
  std::map<std::pair<int, std::string>, int> relabel_cache_;  // key: (id, f.str())
  std::map<std::tuple<int, int, std::string>, int> sync_cache_;
};

// A step is a set of activity ids, kept sorted.
using Step = std::vector<int>;

struct BarsHash {
  std::size_t operator()(const Bars& b) const noexcept;
};

struct Derivation {
  Step step;
  Bars after;
};

// Rewriting and step derivation over one static skeleton.
class Engine {
 public:
  explicit Engine(std::shared_ptr<const StaticExpr> e, std::size_t closure_cap = 1000000);

  const StaticExpr& expr() const { return *expr_; }
  std::shared_ptr<const StaticExpr> expr_ptr() const { return expr_; }
  ActivityPool& pool() { return *pool_; }
  std::shared_ptr<ActivityPool> pool_ptr() const { return pool_; }

  // Structural equivalence class of g (inaction rules both ways), sorted.
  // root restricts rewriting to one subtree; bars must lie inside it.
  std::vector<Bars> closure(const Bars& g, int root = 0) const;
  bool operative(const Bars& g, int root = 0) const;
  bool is_final(const Bars& g, int root = 0) const;
  bool is_initial(const Bars& g, int root = 0) const;

  // Local definitions for an operative expression.
  std::set<Step> can(const Bars& h, int root = 0);
  std::set<Step> now(const Bars& h, int root = 0);
  bool tang(const Bars& h, int root = 0);

  // All steps derivable by the action rules, before priority filtering.
  std::vector<Derivation> derive(const Bars& h, int root = 0);

  bool step_immediate(const Step& s) const { return !s.empty() && pool_->get(s.front()).immediate(); }
  std::string step_label(const Step& s) const;  // activities with numberings

  // One inaction rule: bars at the node itself (slot -1) or at its children.
  struct Pattern {
    int slot[2];
    bool under[2];
    int n;
  };
  struct Rule {
    Pattern lhs, rhs;
  };

 private:
  const std::vector<Rule>& rules_for(Op op) const;
  bool match(const Bars& g, int m, const Pattern& p, std::vector<std::int32_t>& codes) const;
  std::int32_t code(int m, int slot, bool under) const;
  template <class F>
  void for_each_rewrite(const Bars& g, int root, bool forward_only, F&& f) const;

  Bars sub_bars(const Bars& g, int n) const;
  std::set<Step> can_rec(const Bars& h, int n);
  std::vector<Derivation> derive_rec(const Bars& h, int n);
  void saturate(std::set<Step>& steps, const std::string& a);

  std::shared_ptr<const StaticExpr> expr_;
  std::shared_ptr<ActivityPool> pool_;
  std::vector<int> parent_;
  std::size_t cap_;
};

struct TsState {
  std::string key;       // least serialization over operative members
  bool tangible = true;
  std::vector<Bars> members;  // operative members
  std::vector<Step> exec;     // executable steps, empty step first when tangible
};

struct TsTransition {
  int source = 0;
  int step = 0;  // index into states[source].exec
  double prob = 0;
  int target = 0;
};

struct BuildOptions {
  std::size_t max_states = 100000;
  std::size_t closure_cap = 1000000;
};

class TransitionSystem {
 public:
  std::shared_ptr<const StaticExpr> expr;
  std::shared_ptr<ActivityPool> pool;
  std::vector<TsState> states;
  std::vector<TsTransition> transitions;
  std::vector<std::vector<int>> out;  // transition indices per source
  int initial = 0;

  std::size_t size() const { return states.size(); }
  std::size_t tangible_count() const;
  const Step& step_of(const TsTransition& t) const { return states[t.source].exec[t.step]; }

  double pf(int s, const Step& step) const;
  double pt(int s, const Step& step) const;
  double pm(int s, int t) const;

  // Same structure, probabilities recomputed for an expression that differs
  // only in activity values.
  TransitionSystem with_values(const StaticExpr& e) const;

  std::string to_json(bool with_members = false) const;
  std::string to_dot() const;

  void recompute_probabilities();
};

TransitionSystem build_ts(const StaticExpr& e, const BuildOptions& opt = {});

// Multiaction-part multiset L(step) in canonical text form, e.g. "{a},{b,c^}".
std::string multiaction_label(const ActivityPool& pool, const Step& step);
Multiset<Multiaction> multiaction_parts(const ActivityPool& pool, const Step& step);

// Step-labelled probabilistic graph used for isomorphism checks.
struct LabeledGraph {
  struct Edge {
    std::string label;
    double prob;
    int target;
  };
  int initial = 0;
  std::vector<bool> tangible;
  std::vector<std::vector<Edge>> out;
};

enum class LabelMode { ActivityIdentity, MultiactionParts };
LabeledGraph graph_of(const TransitionSystem& ts, LabelMode mode = LabelMode::ActivityIdentity);
std::string activity_identity_label(const Activity& a);

// State bijection from a to b (index = state of a), if one exists.
std::optional<std::vector<int>> isomorphic(const LabeledGraph& a, const LabeledGraph& b, double tol = 1e-9);
std::optional<std::vector<int>> ts_isomorphic(const TransitionSystem& a, const TransitionSystem& b,
                                              double tol = 1e-9, LabelMode mode = LabelMode::ActivityIdentity);

}  // namespace dtsi
