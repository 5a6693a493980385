#include "netsem.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <set>

#include "error.hpp"
#include "json.hpp"

namespace dtsi {

namespace {

// A box under construction together with its interface places.
struct Frag {
  std::vector<Place> places;
  std::vector<NetTransition> trans;
  std::vector<int> entries, exits;
};

void add_arc(Arcs& arcs, int place, int w) {
  auto it = std::lower_bound(arcs.begin(), arcs.end(), std::make_pair(place, 0));
  if (it != arcs.end() && it->first == place)
    it->second += w;
  else
    arcs.insert(it, {place, w});
}

int arc_weight(const Arcs& arcs, int place) {
  auto it = std::lower_bound(arcs.begin(), arcs.end(), std::make_pair(place, 0));
  return it != arcs.end() && it->first == place ? it->second : 0;
}

Frag disjoint(Frag a, const Frag& b) {
  const int off = static_cast<int>(a.places.size());
  a.places.insert(a.places.end(), b.places.begin(), b.places.end());
  for (auto t : b.trans) {
    for (auto& [p, w] : t.pre) p += off;
    for (auto& [p, w] : t.post) p += off;
    a.trans.push_back(std::move(t));
  }
  for (int p : b.entries) a.entries.push_back(p + off);
  for (int p : b.exits) a.exits.push_back(p + off);
  return a;
}

struct FuseSpec {
  std::vector<std::vector<int>> groups;
  PlaceKind kind;
};

// Replaces the places of each spec's groups by their cartesian product. A new
// place inherits the summed arcs of the places in its tuple. Returns the new
// place indices per spec; the other places and interface lists are remapped.
std::vector<std::vector<int>> fuse(Frag& f, const std::vector<FuseSpec>& specs) {
  std::set<int> removed;
  std::vector<std::vector<std::vector<int>>> tuples;
  for (const auto& spec : specs) {
    std::vector<std::vector<int>> ts{{}};
    for (const auto& g : spec.groups) {
      removed.insert(g.begin(), g.end());
      std::vector<std::vector<int>> next;
      for (const auto& t : ts)
        for (int p : g) {
          auto u = t;
          u.push_back(p);
          next.push_back(std::move(u));
        }
      ts = std::move(next);
    }
    tuples.push_back(std::move(ts));
  }

  std::vector<int> remap(f.places.size(), -1);
  std::vector<Place> places;
  for (std::size_t p = 0; p < f.places.size(); ++p)
    if (!removed.count(static_cast<int>(p))) {
      remap[p] = static_cast<int>(places.size());
      places.push_back(f.places[p]);
    }
  std::vector<std::vector<int>> fresh(specs.size());
  for (std::size_t s = 0; s < specs.size(); ++s)
    for (const auto& t : tuples[s]) {
      std::string name = "(";
      for (std::size_t i = 0; i < t.size(); ++i) name += (i ? "*" : "") + f.places[t[i]].name;
      fresh[s].push_back(static_cast<int>(places.size()));
      places.push_back({name + ")", specs[s].kind});
    }

  auto rewrite = [&](const Arcs& old) {
    Arcs r;
    for (auto [p, w] : old)
      if (remap[p] >= 0) add_arc(r, remap[p], w);
    for (std::size_t s = 0; s < specs.size(); ++s)
      for (std::size_t i = 0; i < tuples[s].size(); ++i) {
        int w = 0;
        for (int p : tuples[s][i]) w += arc_weight(old, p);
        if (w) add_arc(r, fresh[s][i], w);
      }
    return r;
  };
  for (auto& t : f.trans) {
    t.pre = rewrite(t.pre);
    t.post = rewrite(t.post);
  }
  auto keep = [&](std::vector<int>& v) {
    std::vector<int> r;
    for (int p : v)
      if (remap[p] >= 0) r.push_back(remap[p]);
    v = std::move(r);
  };
  keep(f.entries);
  keep(f.exits);
  f.places = std::move(places);
  return fresh;
}

// Places the operands side by side; the interfaces of each stay available
// through `parts`.
Frag juxtapose(std::vector<Frag> ops, std::vector<Frag>& parts) {
  Frag f;
  for (auto& o : ops) {
    const int off = static_cast<int>(f.places.size());
    Frag shifted;
    for (int p : o.entries) shifted.entries.push_back(p + off);
    for (int p : o.exits) shifted.exits.push_back(p + off);
    parts.push_back(std::move(shifted));
    f = disjoint(std::move(f), o);
  }
  f.entries.clear();
  f.exits.clear();
  return f;
}

bool disjoint_content(const Activity& a, const Activity& b) {
  auto x = a.num.content(), y = b.num.content();
  std::vector<int> both;
  std::set_intersection(x.begin(), x.end(), y.begin(), y.end(), std::back_inserter(both));
  return both.empty();
}

void synchronize(Frag& f, const std::string& a) {
  std::set<ActivityId> seen;
  for (const auto& t : f.trans) seen.insert(id_of(t.act));
  for (std::size_t i = 0; i < f.trans.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      const NetTransition& u = f.trans[j];
      const NetTransition& v = f.trans[i];
      if (u.act.kind != v.act.kind || !disjoint_content(u.act, v.act)) continue;
      if (!synchronizable(u.act.part, v.act.part, a)) continue;
      NetTransition s;
      s.act = sync_activities(u.act, v.act, a);
      if (!seen.insert(id_of(s.act)).second) continue;
      s.pre = u.pre;
      s.post = u.post;
      for (auto [p, w] : v.pre) add_arc(s.pre, p, w);
      for (auto [p, w] : v.post) add_arc(s.post, p, w);
      // A preset that is not a set can never be covered in a safe net.
      if (std::any_of(s.pre.begin(), s.pre.end(), [](auto pw) { return pw.second > 1; })) continue;
      s.name = "t" + s.act.num.str();
      f.trans.push_back(std::move(s));  // i keeps scanning, so new ones pair too
    }
  }
}

Frag build(const StaticExpr& e, int n) {
  const Node& node = e.node(n);
  switch (node.op) {
    case Op::Act: {
      const Activity& act = e.activity_at(n);
      const std::string k = std::to_string(act.num.leaf_value());
      Frag f;
      f.places = {{"e" + k, PlaceKind::Entry}, {"x" + k, PlaceKind::Exit}};
      f.trans.push_back({"t" + k, act, {{0, 1}}, {{1, 1}}});
      f.entries = {0};
      f.exits = {1};
      return f;
    }
    case Op::Seq: {
      std::vector<Frag> p;
      Frag f = juxtapose({build(e, e.child(n, 0)), build(e, e.child(n, 1))}, p);
      f.entries = p[0].entries;
      f.exits = p[1].exits;
      fuse(f, {{{p[0].exits, p[1].entries}, PlaceKind::Internal}});
      return f;
    }
    case Op::Choice: {
      std::vector<Frag> p;
      Frag f = juxtapose({build(e, e.child(n, 0)), build(e, e.child(n, 1))}, p);
      auto fresh = fuse(f, {{{p[0].entries, p[1].entries}, PlaceKind::Entry},
                            {{p[0].exits, p[1].exits}, PlaceKind::Exit}});
      f.entries = fresh[0];
      f.exits = fresh[1];
      return f;
    }
    case Op::Par:
      return disjoint(build(e, e.child(n, 0)), build(e, e.child(n, 1)));
    case Op::Relabel: {
      Frag f = build(e, e.child(n, 0));
      const Relabeling& r = e.relabeling_at(n);
      for (auto& t : f.trans) t.act = r(t.act);
      return f;
    }
    case Op::Restrict: {
      Frag f = build(e, e.child(n, 0));
      std::erase_if(f.trans, [&](const NetTransition& t) { return mentions(t.act.part, node.action); });
      return f;
    }
    case Op::Sync: {
      Frag f = build(e, e.child(n, 0));
      synchronize(f, node.action);
      return f;
    }
    case Op::Iter: {
      std::vector<Frag> p;
      Frag f = juxtapose({build(e, e.child(n, 0)), build(e, e.child(n, 1)), build(e, e.child(n, 2))}, p);
      // Everything between the initial part's entries and the terminal
      // part's exits collapses into one internal interface.
      f.entries = p[0].entries;
      f.exits = p[2].exits;
      fuse(f, {{{p[0].exits, p[1].exits, p[1].entries, p[2].entries}, PlaceKind::Internal}});
      return f;
    }
  }
  throw std::logic_error("unknown operator");
}

}  // namespace

Marking DtsiBox::entry_marking() const {
  Marking m(places.size(), 0);
  for (std::size_t p = 0; p < places.size(); ++p) m[p] = places[p].kind == PlaceKind::Entry;
  return m;
}

Marking DtsiBox::exit_marking() const {
  Marking m(places.size(), 0);
  for (std::size_t p = 0; p < places.size(); ++p) m[p] = places[p].kind == PlaceKind::Exit;
  return m;
}

DtsiBox box_of(const StaticExpr& e) {
  if (!e.is_regular()) throw InputError("expression is not regular");
  Frag f = build(e, 0);
  DtsiBox b;
  b.places = std::move(f.places);
  b.transitions = std::move(f.trans);
  return b;
}

bool preset_within(const Arcs& pre, const Marking& m) {
  return std::all_of(pre.begin(), pre.end(), [&](auto pw) { return m[pw.first] >= pw.second; });
}

std::vector<int> enabled(const DtsiBox& n, const Marking& m) {
  std::vector<int> stoch, imm;
  for (std::size_t t = 0; t < n.transitions.size(); ++t)
    if (preset_within(n.transitions[t].pre, m))
      (n.transitions[t].act.immediate() ? imm : stoch).push_back(static_cast<int>(t));
  return imm.empty() ? stoch : imm;
}

bool tangible(const DtsiBox& n, const Marking& m) {
  auto ena = enabled(n, m);
  return ena.empty() || !n.transitions[ena.front()].act.immediate();
}

std::vector<std::vector<int>> fireable_sets(const DtsiBox& n, const Marking& m) {
  const auto ena = enabled(n, m);
  std::vector<std::vector<int>> out;
  if (tangible(n, m)) out.push_back({});
  std::vector<int> cur;
  Marking left = m;
  // Depth-first over ena in index order; a transition joins only if its
  // preset still fits in what the chosen ones have not consumed.
  auto rec = [&](auto& self, std::size_t i) -> void {
    for (std::size_t k = i; k < ena.size(); ++k) {
      const auto& pre = n.transitions[ena[k]].pre;
      if (!preset_within(pre, left)) continue;
      for (auto [p, w] : pre) left[p] -= w;
      cur.push_back(ena[k]);
      out.push_back(cur);
      self(self, k + 1);
      cur.pop_back();
      for (auto [p, w] : pre) left[p] += w;
    }
  };
  rec(rec, 0);
  std::sort(out.begin(), out.end());
  return out;
}

Marking fire(const DtsiBox& n, const Marking& m, const std::vector<int>& u) {
  const auto ena = enabled(n, m);
  Marking r = m;
  for (int t : u) {
    if (!std::binary_search(ena.begin(), ena.end(), t)) throw InputError("transition set is not enabled");
    for (auto [p, w] : n.transitions[t].pre) r[p] -= w;
  }
  if (std::any_of(r.begin(), r.end(), [](int c) { return c < 0; }))
    throw InputError("transition set is not enabled");
  if (u.empty() && !tangible(n, m)) throw InputError("empty step in a vanishing marking");
  for (int t : u)
    for (auto [p, w] : n.transitions[t].post) r[p] += w;
  return r;
}

double pf_net(const DtsiBox& n, const std::vector<int>& u, const Marking& m) {
  const auto ena = enabled(n, m);
  if (tangible(n, m)) {
    double r = 1;
    for (int t : ena) {
      const double p = n.transitions[t].act.value;
      r *= std::binary_search(u.begin(), u.end(), t) ? p : 1 - p;
    }
    return r;
  }
  double w = 0;
  for (int t : u) w += n.transitions[t].act.value;
  return w;
}

double pt_net(const DtsiBox& n, const std::vector<int>& u, const Marking& m) {
  double total = 0;
  for (const auto& v : fireable_sets(n, m)) total += pf_net(n, v, m);
  return pf_net(n, u, m) / total;
}

ReachabilityGraph build_rg(const DtsiBox& n, std::size_t max_markings) {
  ReachabilityGraph rg;
  std::map<Marking, int> index;
  std::deque<int> queue;
  auto intern = [&](const Marking& m) {
    auto [it, fresh] = index.emplace(m, static_cast<int>(rg.markings.size()));
    if (fresh) {
      if (rg.markings.size() >= max_markings)
        throw LimitError("reachability graph exceeds " + std::to_string(max_markings) + " markings");
      rg.markings.push_back(m);
      rg.tangible.push_back(tangible(n, m));
      queue.push_back(it->second);
    }
    return it->second;
  };
  rg.initial = intern(n.entry_marking());
  while (!queue.empty()) {
    const int s = queue.front();
    queue.pop_front();
    const Marking m = rg.markings[s];
    const auto sets = fireable_sets(n, m);
    std::vector<double> pf;
    double total = 0;
    for (const auto& u : sets) total += pf.emplace_back(pf_net(n, u, m));
    for (std::size_t i = 0; i < sets.size(); ++i) {
      const int t = intern(fire(n, m, sets[i]));
      rg.arcs.push_back({s, sets[i], pf[i] / total, t});
    }
  }
  return rg;
}

SafetyReport check_safe_clean(const DtsiBox& n, const ReachabilityGraph& rg) {
  SafetyReport r;
  const Marking in = n.entry_marking(), out = n.exit_marking();
  auto covers = [](const Marking& m, const Marking& sub) {
    for (std::size_t p = 0; p < m.size(); ++p)
      if (m[p] < sub[p]) return false;
    return true;
  };
  for (const auto& m : rg.markings) {
    if (std::any_of(m.begin(), m.end(), [](int c) { return c > 1; })) {
      r.safe = false;
      r.message = "marking is not safe: " + marking_str(n, m);
    } else if ((covers(m, in) && m != in) || (covers(m, out) && m != out)) {
      r.clean = false;
      r.message = "marking is not clean: " + marking_str(n, m);
    } else {
      continue;
    }
    r.witness = m;
    break;
  }
  return r;
}

LabeledGraph graph_of(const DtsiBox& n, const ReachabilityGraph& rg) {
  LabeledGraph g;
  g.initial = rg.initial;
  g.tangible = rg.tangible;
  g.out.resize(rg.size());
  for (const auto& a : rg.arcs) {
    std::vector<std::string> parts;
    for (int t : a.set) parts.push_back(activity_identity_label(n.transitions[t].act));
    std::sort(parts.begin(), parts.end());
    std::string lab;
    for (const auto& p : parts) lab += p + ";";
    g.out[a.source].push_back({lab, a.prob, a.target});
  }
  return g;
}

std::string marking_str(const DtsiBox& n, const Marking& m) {
  std::string r = "{";
  bool first = true;
  for (std::size_t p = 0; p < m.size(); ++p)
    for (int k = 0; k < m[p]; ++k) {
      r += (first ? "" : ",") + n.places[p].name;
      first = false;
    }
  return r + "}";
}

namespace {

const char* kind_name(PlaceKind k) {
  switch (k) {
    case PlaceKind::Entry: return "entry";
    case PlaceKind::Exit: return "exit";
    default: return "internal";
  }
}

nlohmann::json arcs_json(const Arcs& a) {
  auto r = nlohmann::json::array();
  for (auto [p, w] : a) r.push_back({{"place", p + 1}, {"weight", w}});
  return r;
}

std::string transition_label(const NetTransition& t) { return to_string(t.act); }

}  // namespace

std::string DtsiBox::to_json() const {
  nlohmann::json j;
  j["places"] = nlohmann::json::array();
  for (std::size_t p = 0; p < places.size(); ++p)
    j["places"].push_back({{"id", p + 1}, {"name", places[p].name}, {"kind", kind_name(places[p].kind)}});
  j["transitions"] = nlohmann::json::array();
  for (std::size_t t = 0; t < transitions.size(); ++t) {
    const auto& tr = transitions[t];
    j["transitions"].push_back({{"id", t + 1},
                                {"name", tr.name},
                                {"multiaction", to_string(tr.act.part)},
                                {"kind", tr.act.immediate() ? "immediate" : "stochastic"},
                                {"value", tr.act.value},
                                {"numbering", tr.act.num.str()},
                                {"pre", arcs_json(tr.pre)},
                                {"post", arcs_json(tr.post)}});
  }
  auto init = nlohmann::json::array();
  const auto m = entry_marking();
  for (std::size_t p = 0; p < m.size(); ++p)
    if (m[p]) init.push_back(p + 1);
  j["initial_marking"] = init;
  return j.dump(2) + "\n";
}

std::string DtsiBox::to_dot() const {
  std::string r = "digraph box {\n  rankdir=LR;\n";
  for (std::size_t p = 0; p < places.size(); ++p)
    r += "  p" + std::to_string(p + 1) + " [shape=circle, label=\"" + places[p].name + "\\n" +
         kind_name(places[p].kind) + "\"" + (places[p].kind == PlaceKind::Entry ? ", style=bold" : "") + "];\n";
  for (std::size_t t = 0; t < transitions.size(); ++t) {
    const auto& tr = transitions[t];
    r += "  t" + std::to_string(t + 1) + " [shape=box" + (tr.act.immediate() ? ", style=filled" : "") +
         ", label=\"" + transition_label(tr) + " " + tr.act.num.str() + "\"];\n";
    for (auto [p, w] : tr.pre)
      r += "  p" + std::to_string(p + 1) + " -> t" + std::to_string(t + 1) +
           (w > 1 ? " [label=\"" + std::to_string(w) + "\"]" : "") + ";\n";
    for (auto [p, w] : tr.post)
      r += "  t" + std::to_string(t + 1) + " -> p" + std::to_string(p + 1) +
           (w > 1 ? " [label=\"" + std::to_string(w) + "\"]" : "") + ";\n";
  }
  return r + "}\n";
}

std::string ReachabilityGraph::to_json(const DtsiBox& n) const {
  nlohmann::json j;
  j["initial"] = initial + 1;
  j["markings"] = nlohmann::json::array();
  for (std::size_t s = 0; s < markings.size(); ++s) {
    auto places = nlohmann::json::array();
    for (std::size_t p = 0; p < markings[s].size(); ++p)
      for (int k = 0; k < markings[s][p]; ++k) places.push_back(p + 1);
    j["markings"].push_back(
        {{"id", s + 1}, {"places", places}, {"kind", tangible[s] ? "tangible" : "vanishing"}});
  }
  j["arcs"] = nlohmann::json::array();
  for (const auto& a : arcs) {
    auto ts = nlohmann::json::array();
    for (int t : a.set) ts.push_back(n.transitions[t].name);
    j["arcs"].push_back({{"source", a.source + 1}, {"transitions", ts}, {"probability", a.prob}, {"target", a.target + 1}});
  }
  return j.dump(2) + "\n";
}

std::string ReachabilityGraph::to_dot(const DtsiBox& n) const {
  std::string r = "digraph rg {\n  rankdir=LR;\n";
  for (std::size_t s = 0; s < markings.size(); ++s)
    r += "  m" + std::to_string(s + 1) + " [label=\"" + marking_str(n, markings[s]) + "\"" +
         (tangible[s] ? "" : ", style=dashed") + (static_cast<int>(s) == initial ? ", peripheries=2" : "") + "];\n";
  for (const auto& a : arcs) {
    std::string lab = "{";
    for (std::size_t i = 0; i < a.set.size(); ++i) lab += (i ? "," : "") + n.transitions[a.set[i]].name;
    r += "  m" + std::to_string(a.source + 1) + " -> m" + std::to_string(a.target + 1) + " [label=\"" + lab + "} " +
         format_number(a.prob) + "\"];\n";
  }
  return r + "}\n";
}

}  // namespace dtsi
