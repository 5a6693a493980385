#include "opsem.hpp"

#include <algorithm>
#include <deque>
#include <functional>
#include <stdexcept>
#include <unordered_set>

#include "error.hpp"
#include "json.hpp"
#include "parser.hpp"

namespace dtsi {

// ---- ActivityPool ----

ActivityPool::ActivityPool(const StaticExpr& e) {
  const auto& acts = e.activities();
  for (std::size_t i = 0; i < acts.size(); ++i) intern(acts[i], {0, static_cast<int>(i), -1});
}

int ActivityPool::intern(Activity act, Origin o) {
  ActivityId key = id_of(act);
  auto it = index_.find(key);
  if (it != index_.end()) return it->second;
  int id = static_cast<int>(acts_.size());
  acts_.push_back(std::move(act));
  origin_.push_back(o);
  index_.emplace(std::move(key), id);
  return id;
}

int ActivityPool::relabeled(int id, const Relabeling& f) {
  auto key = std::make_pair(id, f.str());
  auto it = relabel_cache_.find(key);
  if (it != relabel_cache_.end()) return it->second;
  Activity a = f(acts_[id]);
  int r = a.part == acts_[id].part ? id : intern(std::move(a), {1, id, -1});
  relabel_cache_.emplace(std::move(key), r);
  return r;
}

int ActivityPool::synced(int u, int v, const std::string& a) {
  if (u > v) std::swap(u, v);
  auto key = std::make_tuple(u, v, a);
  auto it = sync_cache_.find(key);
  if (it != sync_cache_.end()) return it->second;
  int r = intern(sync_activities(acts_[u], acts_[v], a), {2, u, v});
  sync_cache_.emplace(std::move(key), r);
  return r;
}

void ActivityPool::revalue(const StaticExpr& e) {
  const auto& leaves = e.activities();
  for (std::size_t i = 0; i < acts_.size(); ++i) {
    const Origin& o = origin_[i];
    Activity& x = acts_[i];
    switch (o.kind) {
      case 0: x.value = leaves.at(o.a).value; break;
      case 1: x.value = acts_[o.a].value; break;
      default:
        x.value = x.immediate() ? acts_[o.a].value + acts_[o.b].value : acts_[o.a].value * acts_[o.b].value;
    }
  }
}

std::size_t BarsHash::operator()(const Bars& b) const noexcept {
  std::size_t h = 1469598103934665603ull;
  for (auto c : b) {
    h ^= static_cast<std::size_t>(c) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
  }
  return h;
}

// ---- Engine ----

namespace {

constexpr int kSelf = -1;

Engine::Rule rule(std::initializer_list<std::pair<int, bool>> l, std::initializer_list<std::pair<int, bool>> r);

}  // namespace

Engine::Engine(std::shared_ptr<const StaticExpr> e, std::size_t closure_cap)
    : expr_(std::move(e)), pool_(std::make_shared<ActivityPool>(*expr_)), cap_(closure_cap) {
  parent_.assign(expr_->size(), -1);
  for (int n = 0; n < expr_->size(); ++n)
    for (int i = 0; i < expr_->num_children(n); ++i) parent_[expr_->child(n, i)] = n;
}

namespace {

Engine::Rule rule(std::initializer_list<std::pair<int, bool>> l, std::initializer_list<std::pair<int, bool>> r) {
  Engine::Rule x{};
  auto fill = [](auto& p, const auto& src) {
    p.n = 0;
    for (auto [slot, under] : src) {
      p.slot[p.n] = slot;
      p.under[p.n] = under;
      ++p.n;
    }
  };
  fill(x.lhs, l);
  fill(x.rhs, r);
  return x;
}

constexpr bool O = false, U = true;

}  // namespace

const std::vector<Engine::Rule>& Engine::rules_for(Op op) const {
  static const std::vector<Rule> none;
  static const std::vector<Rule> seq = {
      rule({{kSelf, O}}, {{0, O}}),
      rule({{0, U}}, {{1, O}}),
      rule({{1, U}}, {{kSelf, U}}),
  };
  static const std::vector<Rule> choice = {
      rule({{kSelf, O}}, {{0, O}}),
      rule({{kSelf, O}}, {{1, O}}),
      rule({{0, U}}, {{kSelf, U}}),
      rule({{1, U}}, {{kSelf, U}}),
  };
  static const std::vector<Rule> par = {
      rule({{kSelf, O}}, {{0, O}, {1, O}}),
      rule({{0, U}, {1, U}}, {{kSelf, U}}),
  };
  static const std::vector<Rule> unary = {
      rule({{kSelf, O}}, {{0, O}}),
      rule({{0, U}}, {{kSelf, U}}),
  };
  static const std::vector<Rule> iter = {
      rule({{kSelf, O}}, {{0, O}}),
      rule({{0, U}}, {{1, O}}),
      rule({{1, U}}, {{1, O}}),
      rule({{1, U}}, {{2, O}}),
      rule({{2, U}}, {{kSelf, U}}),
  };
  switch (op) {
    case Op::Act: return none;
    case Op::Seq: return seq;
    case Op::Choice: return choice;
    case Op::Par: return par;
    case Op::Iter: return iter;
    default: return unary;
  }
}

std::int32_t Engine::code(int m, int slot, bool under) const {
  int node = slot == kSelf ? m : expr_->child(m, slot);
  return under ? under_bar(node) : over_bar(node);
}

bool Engine::match(const Bars& g, int m, const Pattern& p, std::vector<std::int32_t>& codes) const {
  auto lo = std::lower_bound(g.begin(), g.end(), over_bar(m));
  auto hi = std::lower_bound(lo, g.end(), over_bar(expr_->node(m).end));
  if (hi - lo != p.n) return false;
  codes.clear();
  for (int i = 0; i < p.n; ++i) codes.push_back(code(m, p.slot[i], p.under[i]));
  std::sort(codes.begin(), codes.end());
  return std::equal(lo, hi, codes.begin());
}

template <class F>
void Engine::for_each_rewrite(const Bars& g, int root, bool forward_only, F&& f) const {
  int root_end = expr_->node(root).end;
  std::vector<int> cands;
  for (auto c : g) {
    int x = bar_node(c);
    if (x < root || x >= root_end) continue;
    cands.push_back(x);
    if (x != root) cands.push_back(parent_[x]);
  }
  std::sort(cands.begin(), cands.end());
  cands.erase(std::unique(cands.begin(), cands.end()), cands.end());
  std::vector<std::int32_t> codes, repl;
  for (int m : cands) {
    for (const Rule& r : rules_for(expr_->node(m).op)) {
      for (int dir = 0; dir < (forward_only ? 1 : 2); ++dir) {
        const Pattern& from = dir == 0 ? r.lhs : r.rhs;
        const Pattern& to = dir == 0 ? r.rhs : r.lhs;
        if (!match(g, m, from, codes)) continue;
        Bars next;
        next.reserve(g.size() + 1);
        for (auto c : g)
          if (!std::binary_search(codes.begin(), codes.end(), c)) next.push_back(c);
        for (int i = 0; i < to.n; ++i) next.push_back(code(m, to.slot[i], to.under[i]));
        std::sort(next.begin(), next.end());
        if (!f(std::move(next))) return;
      }
    }
  }
}

std::vector<Bars> Engine::closure(const Bars& g, int root) const {
  std::unordered_set<Bars, BarsHash> seen{g};
  std::deque<Bars> work{g};
  while (!work.empty()) {
    Bars cur = std::move(work.front());
    work.pop_front();
    for_each_rewrite(cur, root, false, [&](Bars next) {
      if (seen.insert(next).second) {
        if (seen.size() > cap_) throw LimitError("structural-equivalence closure exceeds " + std::to_string(cap_));
        work.push_back(std::move(next));
      }
      return true;
    });
  }
  std::vector<Bars> r(seen.begin(), seen.end());
  std::sort(r.begin(), r.end());
  return r;
}

bool Engine::operative(const Bars& g, int root) const {
  bool any = false;
  for_each_rewrite(g, root, true, [&](Bars) {
    any = true;
    return false;
  });
  return !any;
}

bool Engine::is_initial(const Bars& g, int root) const {
  auto c = closure(g, root);
  return std::binary_search(c.begin(), c.end(), Bars{over_bar(root)});
}

bool Engine::is_final(const Bars& g, int root) const {
  auto c = closure(g, root);
  return std::binary_search(c.begin(), c.end(), Bars{under_bar(root)});
}

Bars Engine::sub_bars(const Bars& g, int n) const {
  auto lo = std::lower_bound(g.begin(), g.end(), over_bar(n));
  auto hi = std::lower_bound(lo, g.end(), over_bar(expr_->node(n).end));
  return Bars(lo, hi);
}

namespace {

Step merge(const Step& a, const Step& b) {
  Step r;
  r.reserve(a.size() + b.size());
  std::merge(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(r));
  return r;
}

int dynamic_child(const StaticExpr& e, const Bars& h, int n) {
  for (int i = 0; i < e.num_children(n); ++i) {
    int c = e.child(n, i);
    auto lo = std::lower_bound(h.begin(), h.end(), over_bar(c));
    if (lo != h.end() && *lo < over_bar(e.node(c).end)) return c;
  }
  throw std::logic_error("no dynamic operand");
}

}  // namespace

void Engine::saturate(std::set<Step>& steps, const std::string& a) {
  std::vector<Step> work(steps.begin(), steps.end());
  while (!work.empty()) {
    Step s = std::move(work.back());
    work.pop_back();
    for (std::size_t i = 0; i < s.size(); ++i)
      for (std::size_t j = i + 1; j < s.size(); ++j) {
        const Activity &u = pool_->get(s[i]), &v = pool_->get(s[j]);
        if (u.kind != v.kind || !synchronizable(u.part, v.part, a)) continue;
        int w = pool_->synced(s[i], s[j], a);
        Step t;
        for (std::size_t k = 0; k < s.size(); ++k)
          if (k != i && k != j) t.push_back(s[k]);
        t.insert(std::upper_bound(t.begin(), t.end(), w), w);
        if (steps.insert(t).second) work.push_back(std::move(t));
      }
  }
}

std::set<Step> Engine::can_rec(const Bars& h, int n) {
  const Node& x = expr_->node(n);
  auto self = std::lower_bound(h.begin(), h.end(), over_bar(n));
  if (self != h.end() && bar_node(*self) == n) {
    if (bar_under(*self)) return {};
    if (x.op != Op::Act) throw std::logic_error("overbar on a compound term of an operative expression");
    return {Step{x.leaf}};
  }
  switch (x.op) {
    case Op::Par: {
      auto a = can_rec(h, expr_->child(n, 0));
      auto b = can_rec(h, expr_->child(n, 1));
      std::set<Step> r = a;
      r.insert(b.begin(), b.end());
      for (const auto& s : a)
        for (const auto& t : b) r.insert(merge(s, t));
      return r;
    }
    case Op::Relabel: {
      const Relabeling& f = expr_->relabeling_at(n);
      std::set<Step> r;
      for (const auto& s : can_rec(h, n + 1)) {
        Step t;
        for (int id : s) t.push_back(pool_->relabeled(id, f));
        std::sort(t.begin(), t.end());
        r.insert(std::move(t));
      }
      return r;
    }
    case Op::Restrict: {
      std::set<Step> r;
      for (const auto& s : can_rec(h, n + 1))
        if (std::none_of(s.begin(), s.end(), [&](int id) { return mentions(pool_->get(id).part, x.action); }))
          r.insert(s);
      return r;
    }
    case Op::Sync: {
      auto r = can_rec(h, n + 1);
      saturate(r, x.action);
      return r;
    }
    default: return can_rec(h, dynamic_child(*expr_, h, n));
  }
}

std::set<Step> Engine::can(const Bars& h, int root) {
  if (!operative(h, root)) throw InputError("Can is defined for operative expressions only");
  return can_rec(h, root);
}

std::set<Step> Engine::now(const Bars& h, int root) {
  auto c = can(h, root);
  bool any_imm = false, any_sto = false;
  for (const auto& s : c) (step_immediate(s) ? any_imm : any_sto) = true;
  if (!(any_imm && any_sto)) return c;
  std::set<Step> r;
  for (const auto& s : c)
    if (step_immediate(s)) r.insert(s);
  return r;
}

bool Engine::tang(const Bars& h, int root) {
  for (const auto& s : now(h, root))
    if (step_immediate(s)) return false;
  return true;
}

std::vector<Derivation> Engine::derive_rec(const Bars& h, int n) {
  const Node& x = expr_->node(n);
  auto self = std::lower_bound(h.begin(), h.end(), over_bar(n));
  if (self != h.end() && bar_node(*self) == n) {
    if (bar_under(*self)) return {};
    if (x.op != Op::Act) throw std::logic_error("overbar on a compound term of an operative expression");
    return {Derivation{Step{x.leaf}, Bars{under_bar(n)}}};
  }
  switch (x.op) {
    case Op::Par: {
      int c0 = expr_->child(n, 0), c1 = expr_->child(n, 1);
      Bars h0 = sub_bars(h, c0), h1 = sub_bars(h, c1);
      auto d0 = derive_rec(h, c0);
      auto d1 = derive_rec(h, c1);
      std::vector<Derivation> r;
      for (const auto& d : d0) r.push_back({d.step, merge(d.after, h1)});
      for (const auto& d : d1) r.push_back({d.step, merge(h0, d.after)});
      for (const auto& a : d0)
        for (const auto& b : d1)
          if (step_immediate(a.step) == step_immediate(b.step))
            r.push_back({merge(a.step, b.step), merge(a.after, b.after)});
      return r;
    }
    case Op::Relabel: {
      const Relabeling& f = expr_->relabeling_at(n);
      auto r = derive_rec(h, n + 1);
      for (auto& d : r) {
        for (int& id : d.step) id = pool_->relabeled(id, f);
        std::sort(d.step.begin(), d.step.end());
      }
      return r;
    }
    case Op::Restrict: {
      auto r = derive_rec(h, n + 1);
      std::erase_if(r, [&](const Derivation& d) {
        return std::any_of(d.step.begin(), d.step.end(),
                           [&](int id) { return mentions(pool_->get(id).part, x.action); });
      });
      return r;
    }
    case Op::Sync: {
      std::set<std::pair<Step, Bars>> seen;
      std::vector<Derivation> r;
      for (const auto& d : derive_rec(h, n + 1)) {
        std::set<Step> steps{d.step};
        saturate(steps, x.action);
        for (const auto& s : steps)
          if (seen.emplace(s, d.after).second) r.push_back({s, d.after});
      }
      return r;
    }
    default: return derive_rec(h, dynamic_child(*expr_, h, n));
  }
}

std::vector<Derivation> Engine::derive(const Bars& h, int root) { return derive_rec(h, root); }

std::string Engine::step_label(const Step& s) const {
  std::string r = "{";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) r += ",";
    r += describe(pool_->get(s[i]));
  }
  return r + "}";
}

// ---- transition system ----

std::size_t TransitionSystem::tangible_count() const {
  return static_cast<std::size_t>(std::count_if(states.begin(), states.end(), [](const TsState& s) { return s.tangible; }));
}

double TransitionSystem::pf(int s, const Step& step) const {
  const TsState& st = states[s];
  if (std::find(st.exec.begin(), st.exec.end(), step) == st.exec.end())
    throw InputError("step is not executable in state s" + std::to_string(s + 1));
  if (!st.tangible) {
    double w = 0;
    for (int id : step) w += pool->get(id).value;
    return w;
  }
  double p = 1;
  for (int id : step) p *= pool->get(id).value;
  for (const Step& e : st.exec)
    if (e.size() == 1 && !std::binary_search(step.begin(), step.end(), e[0])) p *= 1 - pool->get(e[0]).value;
  return p;
}

double TransitionSystem::pt(int s, const Step& step) const {
  double total = 0;
  for (const Step& e : states[s].exec) total += pf(s, e);
  return pf(s, step) / total;
}

double TransitionSystem::pm(int s, int t) const {
  double p = 0;
  for (int k : out[s])
    if (transitions[k].target == t) p += transitions[k].prob;
  return p;
}

void TransitionSystem::recompute_probabilities() {
  std::vector<std::vector<double>> pts(states.size());
  for (std::size_t s = 0; s < states.size(); ++s) {
    const auto& exec = states[s].exec;
    std::vector<double> pfs;
    double total = 0;
    for (const Step& e : exec) {
      pfs.push_back(pf(static_cast<int>(s), e));
      total += pfs.back();
    }
    for (double& v : pfs) v /= total;
    pts[s] = std::move(pfs);
  }
  for (auto& t : transitions) t.prob = pts[t.source][t.step];
}

TransitionSystem TransitionSystem::with_values(const StaticExpr& e) const {
  if (!expr->same_shape(e)) throw InputError("expression shape differs; rebuild the transition system");
  TransitionSystem r = *this;
  r.expr = std::make_shared<const StaticExpr>(e);
  auto p = std::make_shared<ActivityPool>(*pool);
  p->revalue(e);
  r.pool = std::move(p);
  r.recompute_probabilities();
  for (auto& st : r.states) {
    st.key.clear();
    for (const auto& m : st.members) {
      std::string k = serialize(DynamicExpr{r.expr, m});
      if (st.key.empty() || k < st.key) st.key = std::move(k);
    }
  }
  return r;
}

TransitionSystem build_ts(const StaticExpr& e, const BuildOptions& opt) {
  auto ex = std::make_shared<const StaticExpr>(e);
  if (!ex->is_regular()) throw InputError("expression is not regular");
  Engine eng(ex, opt.closure_cap);
  TransitionSystem ts;
  ts.expr = ex;
  ts.pool = eng.pool_ptr();

  std::unordered_map<Bars, int, BarsHash> owner;
  std::deque<int> work;
  auto state_of = [&](const Bars& g) -> int {
    auto it = owner.find(g);
    if (it != owner.end()) return it->second;
    if (ts.states.size() >= opt.max_states)
      throw LimitError("state space exceeds " + std::to_string(opt.max_states) + " states");
    int id = static_cast<int>(ts.states.size());
    TsState st;
    for (auto& m : eng.closure(g)) {
      owner.emplace(m, id);
      if (eng.operative(m)) st.members.push_back(m);
    }
    for (const auto& m : st.members) {
      std::string k = serialize(DynamicExpr{ex, m});
      if (st.key.empty() || k < st.key) st.key = std::move(k);
    }
    ts.states.push_back(std::move(st));
    work.push_back(id);
    return id;
  };

  ts.initial = state_of(Bars{over_bar(0)});
  while (!work.empty()) {
    int s = work.front();
    work.pop_front();
    std::map<Step, std::vector<Bars>> found;
    bool vanishing = false;
    std::vector<Bars> members = ts.states[s].members;
    for (const auto& h : members)
      for (auto& d : eng.derive(h)) {
        vanishing = vanishing || eng.step_immediate(d.step);
        found[d.step].push_back(std::move(d.after));
      }
    std::vector<Step> exec;
    std::vector<TsTransition> trans;
    if (!vanishing) {
      exec.push_back({});
      trans.push_back({s, 0, 0, s});
    }
    for (auto& [step, afters] : found) {
      if (eng.step_immediate(step) != vanishing) continue;
      int idx = static_cast<int>(exec.size());
      exec.push_back(step);
      std::set<int> targets;
      for (const auto& a : afters) targets.insert(state_of(a));
      for (int t : targets) trans.push_back({s, idx, 0, t});
    }
    ts.states[s].tangible = !vanishing;
    ts.states[s].exec = std::move(exec);
    for (auto& t : trans) ts.transitions.push_back(t);
  }
  std::stable_sort(ts.transitions.begin(), ts.transitions.end(),
                   [](const TsTransition& a, const TsTransition& b) { return a.source < b.source; });
  ts.out.assign(ts.states.size(), {});
  for (std::size_t k = 0; k < ts.transitions.size(); ++k) ts.out[ts.transitions[k].source].push_back(static_cast<int>(k));
  ts.recompute_probabilities();
  return ts;
}

// ---- labels, export ----

Multiset<Multiaction> multiaction_parts(const ActivityPool& pool, const Step& step) {
  Multiset<Multiaction> r;
  for (int id : step) r.add(pool.get(id).part);
  return r;
}

std::string multiaction_label(const ActivityPool& pool, const Step& step) {
  std::string r;
  for (const auto& [m, c] : multiaction_parts(pool, step))
    for (std::size_t i = 0; i < c; ++i) {
      if (!r.empty()) r += ",";
      r += to_string(m);
    }
  return r;
}

std::string activity_identity_label(const Activity& a) {
  std::string r = to_string(a.part) + (a.immediate() ? "#" : "") + "<";
  auto c = a.num.content();
  for (std::size_t i = 0; i < c.size(); ++i) r += (i ? "," : "") + std::to_string(c[i]);
  return r + ">";
}

namespace {

nlohmann::json step_json(const ActivityPool& pool, const Step& s) {
  auto arr = nlohmann::json::array();
  for (int id : s) {
    const Activity& a = pool.get(id);
    arr.push_back({{"multiaction", to_string(a.part)},
                   {"kind", a.immediate() ? "immediate" : "stochastic"},
                   {"value", a.value},
                   {"numbering", a.num.str()}});
  }
  return arr;
}

}  // namespace

std::string TransitionSystem::to_json(bool with_members) const {
  nlohmann::json j;
  j["initial"] = initial + 1;
  j["states"] = nlohmann::json::array();
  for (std::size_t s = 0; s < states.size(); ++s) {
    nlohmann::json st = {{"id", s + 1}, {"key", states[s].key}, {"kind", states[s].tangible ? "tangible" : "vanishing"}};
    if (with_members) {
      auto m = nlohmann::json::array();
      for (const auto& b : states[s].members) m.push_back(serialize(DynamicExpr{expr, b}));
      st["members"] = m;
    }
    j["states"].push_back(st);
  }
  j["transitions"] = nlohmann::json::array();
  for (const auto& t : transitions)
    j["transitions"].push_back({{"source", t.source + 1},
                                {"step", step_json(*pool, step_of(t))},
                                {"probability", t.prob},
                                {"target", t.target + 1}});
  return j.dump(2) + "\n";
}

std::string TransitionSystem::to_dot() const {
  std::string r = "digraph ts {\n  rankdir=LR;\n";
  for (std::size_t s = 0; s < states.size(); ++s)
    r += "  s" + std::to_string(s + 1) + " [label=\"s" + std::to_string(s + 1) + "\"" +
         (states[s].tangible ? "" : ", style=dashed") + (static_cast<int>(s) == initial ? ", peripheries=2" : "") + "];\n";
  for (const auto& t : transitions) {
    std::string lab = multiaction_label(*pool, step_of(t));
    r += "  s" + std::to_string(t.source + 1) + " -> s" + std::to_string(t.target + 1) + " [label=\"{" + lab + "} " +
         format_number(t.prob) + "\"];\n";
  }
  return r + "}\n";
}

LabeledGraph graph_of(const TransitionSystem& ts, LabelMode mode) {
  LabeledGraph g;
  g.initial = ts.initial;
  g.out.resize(ts.size());
  for (const auto& s : ts.states) g.tangible.push_back(s.tangible);
  for (const auto& t : ts.transitions) {
    const Step& st = ts.step_of(t);
    std::string lab;
    if (mode == LabelMode::MultiactionParts) {
      lab = multiaction_label(*ts.pool, st);
    } else {
      std::vector<std::string> parts;
      for (int id : st) parts.push_back(activity_identity_label(ts.pool->get(id)));
      std::sort(parts.begin(), parts.end());
      for (const auto& p : parts) lab += p + ";";
    }
    g.out[t.source].push_back({lab, t.prob, t.target});
  }
  return g;
}

// ---- isomorphism ----

namespace {

struct IsoSearch {
  const LabeledGraph& a;
  const LabeledGraph& b;
  double tol;

  struct Map {
    std::vector<int> fw, bw;
  };

  static std::vector<std::string> labels(const std::vector<LabeledGraph::Edge>& es) {
    std::vector<std::string> r;
    for (const auto& e : es) r.push_back(e.label);
    std::sort(r.begin(), r.end());
    return r;
  }

  bool propagate(Map& m, std::vector<std::pair<int, int>> work) const {
    while (!work.empty()) {
      auto [u, v] = work.back();
      work.pop_back();
      if (m.fw[u] == v) continue;
      if (m.fw[u] != -1 || m.bw[v] != -1) return false;
      if (a.tangible[u] != b.tangible[v]) return false;
      const auto &eu = a.out[u], &ev = b.out[v];
      if (eu.size() != ev.size() || labels(eu) != labels(ev)) return false;
      m.fw[u] = v;
      m.bw[v] = u;
      for (const auto& e : eu) {
        const LabeledGraph::Edge* only = nullptr;
        int count = 0;
        for (const auto& f : ev)
          if (f.label == e.label) {
            only = &f;
            ++count;
          }
        if (count == 1) {
          if (std::abs(only->prob - e.prob) > tol) return false;
          work.emplace_back(e.target, only->target);
        }
      }
    }
    return true;
  }

  bool verify(const Map& m) const {
    for (std::size_t u = 0; u < a.out.size(); ++u) {
      int v = m.fw[u];
      if (v < 0) return false;
      std::vector<std::pair<std::string, int>> x, y;
      std::vector<double> px, py;
      auto ea = a.out[u], eb = b.out[v];
      auto key_a = [&](const LabeledGraph::Edge& e) { return std::make_pair(e.label, m.fw[e.target]); };
      auto key_b = [&](const LabeledGraph::Edge& e) { return std::make_pair(e.label, e.target); };
      std::sort(ea.begin(), ea.end(), [&](const auto& p, const auto& q) { return key_a(p) < key_a(q); });
      std::sort(eb.begin(), eb.end(), [&](const auto& p, const auto& q) { return key_b(p) < key_b(q); });
      for (std::size_t i = 0; i < ea.size(); ++i) {
        if (key_a(ea[i]) != key_b(eb[i])) return false;
        if (std::abs(ea[i].prob - eb[i].prob) > tol) return false;
      }
    }
    return true;
  }

  bool search(Map& m, std::vector<std::pair<int, int>> work) const {
    if (!propagate(m, std::move(work))) return false;
    for (std::size_t u = 0; u < a.out.size(); ++u) {
      if (m.fw[u] < 0) continue;
      for (const auto& e : a.out[u]) {
        if (m.fw[e.target] >= 0) continue;
        for (const auto& f : b.out[m.fw[u]]) {
          if (f.label != e.label || m.bw[f.target] >= 0 || std::abs(f.prob - e.prob) > tol) continue;
          Map copy = m;
          if (search(copy, {{e.target, f.target}})) {
            m = std::move(copy);
            return true;
          }
        }
        return false;
      }
    }
    return verify(m);
  }
};

}  // namespace

std::optional<std::vector<int>> isomorphic(const LabeledGraph& a, const LabeledGraph& b, double tol) {
  if (a.out.size() != b.out.size()) return std::nullopt;
  IsoSearch s{a, b, tol};
  IsoSearch::Map m{std::vector<int>(a.out.size(), -1), std::vector<int>(b.out.size(), -1)};
  if (!s.search(m, {{a.initial, b.initial}})) return std::nullopt;
  return m.fw;
}

std::optional<std::vector<int>> ts_isomorphic(const TransitionSystem& a, const TransitionSystem& b, double tol,
                                              LabelMode mode) {
  return isomorphic(graph_of(a, mode), graph_of(b, mode), tol);
}

}  // namespace dtsi
