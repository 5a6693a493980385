#pragma once

#include <compare>
#include <cstdint>
#include <memory>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "multiset.hpp"

namespace dtsi {

struct ActionSym {
  std::string name;
  bool conj = false;

  ActionSym conjugate() const { return {name, !conj}; }
  std::string str() const { return conj ? name + "^" : name; }

  friend bool operator==(const ActionSym&, const ActionSym&) = default;
  friend auto operator<=>(const ActionSym&, const ActionSym&) = default;
};

using Multiaction = Multiset<ActionSym>;

std::string to_string(const Multiaction& m);
std::set<ActionSym> alphabet(const Multiaction& m);
bool mentions(const Multiaction& m, const std::string& a);  // a or a^ occurs

bool synchronizable(const Multiaction& x, const Multiaction& y, const std::string& a);
// x + y - {a, a^}; throws InputError unless synchronizable.
Multiaction sync_parts(const Multiaction& x, const Multiaction& y, const std::string& a);

// Leaf number or ordered pair of numberings; immutable, cheap to copy.
class Numbering {
 public:
  static Numbering leaf(int n);
  static Numbering pair(Numbering l, Numbering r);

  bool is_leaf() const { return !kids_; }
  int leaf_value() const { return leaf_; }
  const Numbering& left() const { return kids_->first; }
  const Numbering& right() const { return kids_->second; }

  std::vector<int> content() const;  // sorted leaf labels
  std::string str() const;

  friend bool operator==(const Numbering& a, const Numbering& b);

 private:
  int leaf_ = 0;
  std::shared_ptr<const std::pair<Numbering, Numbering>> kids_;
};

enum class Kind : std::uint8_t { Stochastic, Immediate };

struct Activity {
  Multiaction part;
  Kind kind = Kind::Stochastic;
  double value = 0.5;  // probability in (0;1) or positive weight
  Numbering num = Numbering::leaf(0);

  bool immediate() const { return kind == Kind::Immediate; }
};

// What makes two activity occurrences "the same" in a step.
struct ActivityId {
  Multiaction part;
  Kind kind;
  std::vector<int> content;

  friend bool operator==(const ActivityId&, const ActivityId&) = default;
  friend auto operator<=>(const ActivityId&, const ActivityId&) = default;
};

ActivityId id_of(const Activity& a);
std::string to_string(const Activity& a);     // ({a,b^},0.5) or ({a},#2)
std::string describe(const Activity& a);      // with numbering appended
std::string format_number(double v);          // shortest round-trip decimal
void validate_value(Kind k, double v);        // throws InputError when out of range

Activity sync_activities(const Activity& u, const Activity& v, const std::string& a);

// Bijection on elementary action names, extended to conjugates pointwise.
class Relabeling {
 public:
  Relabeling() = default;
  // Each pair maps from -> to. Throws InputError unless the pairs form a permutation.
  static Relabeling from_pairs(const std::vector<std::pair<std::string, std::string>>& pairs);

  std::string operator()(const std::string& name) const;
  ActionSym operator()(const ActionSym& s) const { return {(*this)(s.name), s.conj}; }
  Multiaction operator()(const Multiaction& m) const;
  Activity operator()(const Activity& a) const;

  const std::vector<std::pair<std::string, std::string>>& pairs() const { return pairs_; }
  std::string str() const;  // "[f: a<->b, c->d, d->e, e->c]"

  friend bool operator==(const Relabeling& x, const Relabeling& y) { return x.pairs_ == y.pairs_; }

 private:
  std::vector<std::pair<std::string, std::string>> pairs_;  // sorted, identity entries dropped
};

std::vector<Activity> apply_relabel(const Relabeling& f, const std::vector<Activity>& step);

enum class Op : std::uint8_t { Act, Seq, Choice, Par, Relabel, Restrict, Sync, Iter };

struct Node {
  Op op = Op::Act;
  int end = 0;       // one past the last preorder index of this subtree
  int leaf = -1;     // Act: index into activities()
  int relabel = -1;  // Relabel: index into relabelings()
  std::string action;  // Restrict / Sync
};

inline constexpr const char* kStopAction = "_g";

// Static expression stored as a preorder arena. Leaves are always numbered
// 1..n in preorder, which is also left-to-right source order.
class StaticExpr {
 public:
  static StaticExpr activity(Multiaction part, Kind kind, double value);
  static StaticExpr seq(const StaticExpr& a, const StaticExpr& b);
  static StaticExpr choice(const StaticExpr& a, const StaticExpr& b);
  static StaticExpr par(const StaticExpr& a, const StaticExpr& b);
  static StaticExpr relabel(const StaticExpr& a, const Relabeling& f);
  static StaticExpr restrict(const StaticExpr& a, const std::string& act);
  static StaticExpr sync(const StaticExpr& a, const std::string& act);
  static StaticExpr iter(const StaticExpr& init, const StaticExpr& body, const StaticExpr& term);
  static StaticExpr stop();

  int size() const { return static_cast<int>(nodes_.size()); }
  const Node& node(int n) const { return nodes_[n]; }
  int num_children(int n) const;
  int child(int n, int i) const;

  const Activity& activity_at(int n) const { return acts_[nodes_[n].leaf]; }
  const std::vector<Activity>& activities() const { return acts_; }
  const Relabeling& relabeling_at(int n) const { return relabels_[nodes_[n].relabel]; }

  bool is_regular() const;
  bool is_stop(int n) const;  // subtree at n is the Stop abbreviation

  StaticExpr subexpr(int n) const;
  // Same shape, one leaf replaced (leaf index is 0-based).
  StaticExpr with_activity(int leaf, Multiaction part, Kind kind, double value) const;
  // True when the two expressions differ at most in activity values.
  bool same_shape(const StaticExpr& o) const;

  friend bool operator==(const StaticExpr& a, const StaticExpr& b);

 private:
  static StaticExpr compose(Op op, std::initializer_list<const StaticExpr*> kids);
  void append(const StaticExpr& e);
  void renumber();
  bool is_d(int n) const;

  std::vector<Node> nodes_;
  std::vector<Activity> acts_;
  std::vector<Relabeling> relabels_;
};

// Bars on a fixed static skeleton: sorted codes node*2 + (underbar ? 1 : 0).
using Bars = std::vector<std::int32_t>;

inline std::int32_t over_bar(int node) { return node * 2; }
inline std::int32_t under_bar(int node) { return node * 2 + 1; }
inline int bar_node(std::int32_t code) { return code >> 1; }
inline bool bar_under(std::int32_t code) { return code & 1; }

struct DynamicExpr {
  std::shared_ptr<const StaticExpr> skel;
  Bars bars;

  static DynamicExpr overlined(std::shared_ptr<const StaticExpr> e);
  static DynamicExpr underlined(std::shared_ptr<const StaticExpr> e);

  // Checks the bar placement follows the dynamic grammar.
  bool well_formed() const;

  friend bool operator==(const DynamicExpr& a, const DynamicExpr& b) {
    return a.bars == b.bars && (a.skel == b.skel || *a.skel == *b.skel);
  }
};

bool bars_well_formed(const StaticExpr& e, const Bars& bars, int root);

}  // namespace dtsi
