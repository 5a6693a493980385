#include "expr.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>

#include "error.hpp"

namespace dtsi {

std::string to_string(const Multiaction& m) {
  std::string s = "{";
  bool first = true;
  for (const auto& [a, c] : m) {
    for (std::size_t i = 0; i < c; ++i) {
      if (!first) s += ',';
      s += a.str();
      first = false;
    }
  }
  return s + "}";
}

std::set<ActionSym> alphabet(const Multiaction& m) { return m.support(); }

bool mentions(const Multiaction& m, const std::string& a) {
  return m.contains({a, false}) || m.contains({a, true});
}

bool synchronizable(const Multiaction& x, const Multiaction& y, const std::string& a) {
  ActionSym p{a, false}, q{a, true};
  return (x.contains(p) && y.contains(q)) || (x.contains(q) && y.contains(p));
}

Multiaction sync_parts(const Multiaction& x, const Multiaction& y, const std::string& a) {
  if (!synchronizable(x, y, a)) throw InputError("not synchronizable on " + a);
  Multiaction r = x + y;
  r.remove({a, false});
  r.remove({a, true});
  return r;
}

Numbering Numbering::leaf(int n) {
  Numbering r;
  r.leaf_ = n;
  return r;
}

Numbering Numbering::pair(Numbering l, Numbering r) {
  Numbering x;
  x.kids_ = std::make_shared<const std::pair<Numbering, Numbering>>(std::move(l), std::move(r));
  return x;
}

std::vector<int> Numbering::content() const {
  if (is_leaf()) return {leaf_};
  auto a = left().content();
  auto b = right().content();
  std::vector<int> r;
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(r));
  return r;
}

std::string Numbering::str() const {
  if (is_leaf()) return std::to_string(leaf_);
  return "(" + left().str() + ")(" + right().str() + ")";
}

bool operator==(const Numbering& a, const Numbering& b) {
  if (a.is_leaf() != b.is_leaf()) return false;
  if (a.is_leaf()) return a.leaf_ == b.leaf_;
  return a.left() == b.left() && a.right() == b.right();
}

ActivityId id_of(const Activity& a) { return {a.part, a.kind, a.num.content()}; }

std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string to_string(const Activity& a) {
  std::string v = a.immediate() ? "#" + format_number(a.value) : format_number(a.value);
  return "(" + to_string(a.part) + "," + v + ")";
}

std::string describe(const Activity& a) { return to_string(a) + "_" + a.num.str(); }

void validate_value(Kind k, double v) {
  if (!std::isfinite(v)) throw InputError("malformed probability or weight");
  if (k == Kind::Stochastic && !(v > 0.0 && v < 1.0))
    throw InputError("probability " + format_number(v) + " outside (0;1)");
  if (k == Kind::Immediate && !(v > 0.0))
    throw InputError("weight " + format_number(v) + " must be positive");
}

Activity sync_activities(const Activity& u, const Activity& v, const std::string& a) {
  if (u.kind != v.kind) throw InputError("cannot synchronize stochastic with immediate");
  Activity r;
  r.part = sync_parts(u.part, v.part, a);
  r.kind = u.kind;
  r.value = u.immediate() ? u.value + v.value : u.value * v.value;
  r.num = Numbering::pair(u.num, v.num);
  return r;
}

Relabeling Relabeling::from_pairs(const std::vector<std::pair<std::string, std::string>>& pairs) {
  std::map<std::string, std::string> f;
  for (const auto& [from, to] : pairs) {
    auto [it, fresh] = f.emplace(from, to);
    if (!fresh && it->second != to) throw InputError("relabeling maps " + from + " twice");
  }
  std::set<std::string> dom, img;
  for (const auto& [from, to] : f) {
    dom.insert(from);
    if (!img.insert(to).second) throw InputError("relabeling is not injective at " + to);
  }
  if (dom != img) throw InputError("relabeling is not a bijection on its support");
  for (const auto& [from, to] : f)
    if (from == kStopAction || to == kStopAction) throw InputError("reserved action in relabeling");
  Relabeling r;
  for (const auto& p : f)
    if (p.first != p.second) r.pairs_.push_back(p);
  return r;
}

std::string Relabeling::operator()(const std::string& name) const {
  auto it = std::lower_bound(pairs_.begin(), pairs_.end(), name,
                             [](const auto& p, const std::string& n) { return p.first < n; });
  return (it != pairs_.end() && it->first == name) ? it->second : name;
}

Multiaction Relabeling::operator()(const Multiaction& m) const {
  return m.map([this](const ActionSym& s) { return (*this)(s); });
}

Activity Relabeling::operator()(const Activity& a) const {
  Activity r = a;
  r.part = (*this)(a.part);
  return r;
}

std::string Relabeling::str() const {
  std::string s = "[f:";
  bool first = true;
  std::set<std::string> done;
  for (const auto& [from, to] : pairs_) {
    if (done.count(from)) continue;
    s += first ? " " : ", ";
    first = false;
    if ((*this)(to) == from) {
      s += from + "<->" + to;
      done.insert(to);
    } else {
      s += from + "->" + to;
    }
    done.insert(from);
  }
  return s + "]";
}

std::vector<Activity> apply_relabel(const Relabeling& f, const std::vector<Activity>& step) {
  std::vector<Activity> r;
  r.reserve(step.size());
  for (const auto& a : step) r.push_back(f(a));
  return r;
}

// ---- StaticExpr ----

int StaticExpr::num_children(int n) const {
  switch (nodes_[n].op) {
    case Op::Act: return 0;
    case Op::Relabel:
    case Op::Restrict:
    case Op::Sync: return 1;
    case Op::Iter: return 3;
    default: return 2;
  }
}

int StaticExpr::child(int n, int i) const {
  int c = n + 1;
  for (int k = 0; k < i; ++k) c = nodes_[c].end;
  return c;
}

void StaticExpr::append(const StaticExpr& e) {
  int off = size();
  int leaf_off = static_cast<int>(acts_.size());
  int rel_off = static_cast<int>(relabels_.size());
  for (Node n : e.nodes_) {
    n.end += off;
    if (n.leaf >= 0) n.leaf += leaf_off;
    if (n.relabel >= 0) n.relabel += rel_off;
    nodes_.push_back(std::move(n));
  }
  acts_.insert(acts_.end(), e.acts_.begin(), e.acts_.end());
  relabels_.insert(relabels_.end(), e.relabels_.begin(), e.relabels_.end());
}

void StaticExpr::renumber() {
  for (std::size_t i = 0; i < acts_.size(); ++i) acts_[i].num = Numbering::leaf(static_cast<int>(i) + 1);
}

StaticExpr StaticExpr::compose(Op op, std::initializer_list<const StaticExpr*> kids) {
  StaticExpr r;
  r.nodes_.push_back(Node{op, 0, -1, -1, {}});
  for (const auto* k : kids) r.append(*k);
  r.nodes_[0].end = r.size();
  r.renumber();
  return r;
}

StaticExpr StaticExpr::activity(Multiaction part, Kind kind, double value) {
  validate_value(kind, value);
  StaticExpr r;
  r.nodes_.push_back(Node{Op::Act, 1, 0, -1, {}});
  r.acts_.push_back(Activity{std::move(part), kind, value, Numbering::leaf(1)});
  return r;
}

StaticExpr StaticExpr::seq(const StaticExpr& a, const StaticExpr& b) { return compose(Op::Seq, {&a, &b}); }
StaticExpr StaticExpr::choice(const StaticExpr& a, const StaticExpr& b) { return compose(Op::Choice, {&a, &b}); }
StaticExpr StaticExpr::par(const StaticExpr& a, const StaticExpr& b) { return compose(Op::Par, {&a, &b}); }

StaticExpr StaticExpr::relabel(const StaticExpr& a, const Relabeling& f) {
  StaticExpr r = compose(Op::Relabel, {&a});
  r.relabels_.insert(r.relabels_.begin(), f);
  for (auto& n : r.nodes_)
    if (n.relabel >= 0) ++n.relabel;
  r.nodes_[0].relabel = 0;
  return r;
}

StaticExpr StaticExpr::restrict(const StaticExpr& a, const std::string& act) {
  StaticExpr r = compose(Op::Restrict, {&a});
  r.nodes_[0].action = act;
  return r;
}

StaticExpr StaticExpr::sync(const StaticExpr& a, const std::string& act) {
  StaticExpr r = compose(Op::Sync, {&a});
  r.nodes_[0].action = act;
  return r;
}

StaticExpr StaticExpr::iter(const StaticExpr& init, const StaticExpr& body, const StaticExpr& term) {
  return compose(Op::Iter, {&init, &body, &term});
}

StaticExpr StaticExpr::stop() {
  return restrict(activity(Multiaction{{kStopAction, false}}, Kind::Stochastic, 0.5), kStopAction);
}

bool StaticExpr::is_stop(int n) const {
  const Node& r = nodes_[n];
  if (r.op != Op::Restrict || r.action != kStopAction || r.end != n + 2) return false;
  const Node& c = nodes_[n + 1];
  if (c.op != Op::Act) return false;
  const Activity& a = acts_[c.leaf];
  return a.kind == Kind::Stochastic && a.value == 0.5 && a.part == Multiaction{{kStopAction, false}};
}

bool StaticExpr::is_d(int n) const {
  switch (nodes_[n].op) {
    case Op::Act: return true;
    case Op::Seq:
    case Op::Relabel:
    case Op::Restrict:
    case Op::Sync: return is_d(child(n, 0));
    case Op::Choice: return is_d(child(n, 0)) && is_d(child(n, 1));
    case Op::Iter: return is_d(child(n, 0)) && is_d(child(n, 1));
    case Op::Par: return false;
  }
  return false;
}

bool StaticExpr::is_regular() const {
  for (int n = 0; n < size(); ++n)
    if (nodes_[n].op == Op::Iter && !is_d(child(n, 1))) return false;
  return true;
}

StaticExpr StaticExpr::subexpr(int n) const {
  StaticExpr r;
  int end = nodes_[n].end;
  std::map<int, int> leaf_map, rel_map;
  for (int i = n; i < end; ++i) {
    Node x = nodes_[i];
    x.end -= n;
    if (x.leaf >= 0) {
      int k = static_cast<int>(r.acts_.size());
      r.acts_.push_back(acts_[x.leaf]);
      x.leaf = k;
    }
    if (x.relabel >= 0) {
      int k = static_cast<int>(r.relabels_.size());
      r.relabels_.push_back(relabels_[x.relabel]);
      x.relabel = k;
    }
    r.nodes_.push_back(std::move(x));
  }
  r.renumber();
  return r;
}

StaticExpr StaticExpr::with_activity(int leaf, Multiaction part, Kind kind, double value) const {
  validate_value(kind, value);
  StaticExpr r = *this;
  Activity& a = r.acts_.at(leaf);
  a.part = std::move(part);
  a.kind = kind;
  a.value = value;
  return r;
}

bool StaticExpr::same_shape(const StaticExpr& o) const {
  if (nodes_.size() != o.nodes_.size() || acts_.size() != o.acts_.size()) return false;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Node &x = nodes_[i], &y = o.nodes_[i];
    if (x.op != y.op || x.end != y.end || x.action != y.action) return false;
    if (x.op == Op::Relabel && !(relabels_[x.relabel] == o.relabels_[y.relabel])) return false;
  }
  for (std::size_t i = 0; i < acts_.size(); ++i)
    if (acts_[i].part != o.acts_[i].part || acts_[i].kind != o.acts_[i].kind) return false;
  return true;
}

bool operator==(const StaticExpr& a, const StaticExpr& b) {
  if (!a.same_shape(b)) return false;
  for (std::size_t i = 0; i < a.acts_.size(); ++i)
    if (a.acts_[i].value != b.acts_[i].value) return false;
  return true;
}

// ---- DynamicExpr ----

namespace {

std::pair<std::size_t, std::size_t> bar_range(const StaticExpr& e, const Bars& bars, int n) {
  auto lo = std::lower_bound(bars.begin(), bars.end(), over_bar(n));
  auto hi = std::lower_bound(lo, bars.end(), over_bar(e.node(n).end));
  return {static_cast<std::size_t>(lo - bars.begin()), static_cast<std::size_t>(hi - bars.begin())};
}

bool wf(const StaticExpr& e, const Bars& bars, int n) {
  auto [lo, hi] = bar_range(e, bars, n);
  if (lo == hi) return false;
  if (bar_node(bars[lo]) == n) return hi - lo == 1;
  int k = e.num_children(n);
  if (k == 0) return false;
  int dynamic = 0;
  for (int i = 0; i < k; ++i) {
    int c = e.child(n, i);
    auto [clo, chi] = bar_range(e, bars, c);
    if (clo == chi) continue;
    ++dynamic;
    if (!wf(e, bars, c)) return false;
  }
  if (e.node(n).op == Op::Par) return dynamic == 2;
  return dynamic == 1;
}

}  // namespace

bool bars_well_formed(const StaticExpr& e, const Bars& bars, int root) {
  if (!std::is_sorted(bars.begin(), bars.end())) return false;
  auto [lo, hi] = bar_range(e, bars, root);
  if (lo != 0 || hi != bars.size()) return false;
  return wf(e, bars, root);
}

DynamicExpr DynamicExpr::overlined(std::shared_ptr<const StaticExpr> e) {
  return {std::move(e), Bars{over_bar(0)}};
}

DynamicExpr DynamicExpr::underlined(std::shared_ptr<const StaticExpr> e) {
  return {std::move(e), Bars{under_bar(0)}};
}

bool DynamicExpr::well_formed() const { return skel && bars_well_formed(*skel, bars, 0); }

}  // namespace dtsi
