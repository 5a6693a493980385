#include "support.hpp"

#include <algorithm>
#include <map>
#include <memory>
#include <queue>
#include <stdexcept>

namespace dtsi::test {

std::string model_path(const std::string& name) { return std::string(MODELS_DIR) + "/" + name + ".dtsi"; }

const std::vector<std::string>& bundled_models() {
  static const std::vector<std::string> names = {"ts_example",   "choice_stoch", "choice_imm",   "sync_pair",
                                                 "ssbsspt_pair", "qts_f",        "shared_memory", "shared_memory_abstract"};
  return names;
}

Built build_model(const std::string& name, const std::map<std::string, double>& params, const std::string& definition) {
  ModelFile m = load_model(model_path(name));
  for (const auto& [k, v] : params) m.bind(k, v);
  TransitionSystem ts = build_ts(m.instantiate(definition));
  ChainModel c = chain_of(ts);
  return {std::move(m), std::move(ts), std::move(c)};
}

// ---------------------------------------------------------------- generator

namespace {

const char* const kNames[] = {"a", "b", "c"};

StaticExpr random_leaf(std::mt19937_64& rng, const GenOptions& opt) {
  std::uniform_real_distribution<double> unit(0, 1);
  Multiaction part;
  const int syms = unit(rng) < 0.1 ? 0 : (unit(rng) < 0.75 ? 1 : 2);
  for (int i = 0; i < syms; ++i) part.add({kNames[rng() % 3], unit(rng) < 0.4});
  if (opt.immediates && unit(rng) < 0.3) return StaticExpr::activity(part, Kind::Immediate, 1 + static_cast<double>(rng() % 4));
  return StaticExpr::activity(part, Kind::Stochastic, 0.05 + 0.9 * unit(rng));
}

Relabeling random_relabeling(std::mt19937_64& rng) {
  std::vector<std::string> to = {"a", "b", "c"};
  do std::shuffle(to.begin(), to.end(), rng);
  while (to == std::vector<std::string>{"a", "b", "c"});
  return Relabeling::from_pairs({{"a", to[0]}, {"b", to[1]}, {"c", to[2]}});
}

StaticExpr gen(std::mt19937_64& rng, int leaves, int& syncs, const GenOptions& opt) {
  std::uniform_real_distribution<double> unit(0, 1);
  StaticExpr e;
  if (leaves == 1) {
    e = random_leaf(rng, opt);
  } else if (leaves >= 3 && unit(rng) < 0.25) {
    const int body = 1 + static_cast<int>(rng() % (leaves - 2));
    const int init = 1 + static_cast<int>(rng() % (leaves - body - 1));
    const int term = leaves - body - init;
    StaticExpr t = term == 1 && unit(rng) < 0.3 ? StaticExpr::stop() : gen(rng, term, syncs, opt);
    e = StaticExpr::iter(gen(rng, init, syncs, opt), gen(rng, body, syncs, opt), t);
  } else {
    const int left = 1 + static_cast<int>(rng() % (leaves - 1));
    StaticExpr l = gen(rng, left, syncs, opt), r = gen(rng, leaves - left, syncs, opt);
    switch (rng() % 3) {
      case 0: e = StaticExpr::seq(l, r); break;
      case 1: e = StaticExpr::choice(l, r); break;
      default: e = StaticExpr::par(l, r); break;
    }
  }
  const double w = unit(rng);
  if (syncs > 0 && w < 0.2) {
    --syncs;
    e = StaticExpr::sync(e, kNames[rng() % 3]);
  } else if (opt.restrict_relabel && w < 0.28) {
    e = StaticExpr::restrict(e, kNames[rng() % 3]);
  } else if (opt.restrict_relabel && w < 0.34) {
    e = StaticExpr::relabel(e, random_relabeling(rng));
  }
  return e;
}

}  // namespace

StaticExpr random_term(std::mt19937_64& rng, const GenOptions& opt) {
  for (;;) {
    int syncs = opt.max_sync;
    const int leaves = 1 + static_cast<int>(rng() % opt.max_leaves);
    StaticExpr e = gen(rng, leaves, syncs, opt);
    if (e.is_regular()) return e;
  }
}

std::vector<StaticExpr> small_terms() {
  // Leaf kinds: {a} stochastic, {b} stochastic, {a} immediate, {b} immediate.
  // Values depend on the leaf position so that no two leaves coincide.
  auto leaf = [](int kind, int pos) {
    const Multiaction part{{kind % 2 == 0 ? "a" : "b", false}};
    if (kind < 2) return StaticExpr::activity(part, Kind::Stochastic, 0.2 + 0.15 * pos);
    return StaticExpr::activity(part, Kind::Immediate, 1.0 + pos);
  };
  using Bin = StaticExpr (*)(const StaticExpr&, const StaticExpr&);
  const Bin ops[] = {&StaticExpr::seq, &StaticExpr::choice, &StaticExpr::par};

  std::vector<StaticExpr> bodies;
  for (int k0 = 0; k0 < 4; ++k0) {
    const StaticExpr x = leaf(k0, 0);
    bodies.push_back(x);
    for (int k1 = 0; k1 < 4; ++k1) {
      const StaticExpr y = leaf(k1, 1);
      for (Bin f : ops) bodies.push_back(f(x, y));
      for (int k2 = 0; k2 < 4; ++k2) {
        const StaticExpr z = leaf(k2, 2);
        for (Bin f : ops)
          for (Bin g : ops) {
            bodies.push_back(f(g(x, y), z));
            bodies.push_back(f(x, g(y, z)));
          }
        bodies.push_back(StaticExpr::iter(x, y, z));
      }
    }
  }
  std::vector<StaticExpr> all;
  const Relabeling swap = Relabeling::from_pairs({{"a", "b"}, {"b", "a"}});
  for (const auto& b : bodies) {
    if (!b.is_regular()) continue;
    all.push_back(b);
    all.push_back(StaticExpr::restrict(b, "a"));
    all.push_back(StaticExpr::relabel(b, swap));
  }
  return all;
}

// ---------------------------------------------------------- residual oracle

namespace {

enum class Tag { Done, Leaf, Seq1, Seq2, ChoiceStart, Chosen, Par, Iter, IterMid, Wrap };

struct Res;
using ResPtr = std::shared_ptr<const Res>;

struct Res {
  Tag tag = Tag::Done;
  int node = -1;
  int aux = 0;  // chosen branch or iteration phase
  std::vector<ResPtr> kids;
  std::string key;
};

ResPtr make(Tag t, int n, int aux = 0, std::vector<ResPtr> kids = {}) {
  auto r = std::make_shared<Res>();
  r->tag = t;
  r->node = n;
  r->aux = aux;
  r->kids = std::move(kids);
  r->key = std::to_string(static_cast<int>(t)) + ":" + std::to_string(n) + ":" + std::to_string(aux) + "(";
  for (const auto& k : r->kids) r->key += k->key + ",";
  r->key += ")";
  return r;
}

const ResPtr& done() {
  static const ResPtr d = make(Tag::Done, -1);
  return d;
}

struct Item {
  int leaf;
  Activity act;
};

struct OStep {
  std::vector<Item> items;
  ResPtr to;

  bool immediate() const { return items.front().act.immediate(); }
};

class Oracle {
 public:
  explicit Oracle(const StaticExpr& e) : e_(e) {}

  ResPtr start(int n) const {
    switch (e_.node(n).op) {
      case Op::Act: return make(Tag::Leaf, n);
      case Op::Seq: return make(Tag::Seq1, n, 0, {start(e_.child(n, 0))});
      case Op::Choice: return make(Tag::ChoiceStart, n);
      case Op::Par: return make(Tag::Par, n, 0, {start(e_.child(n, 0)), start(e_.child(n, 1))});
      case Op::Iter: return make(Tag::Iter, n, 0, {start(e_.child(n, 0))});
      case Op::Relabel:
      case Op::Restrict: return make(Tag::Wrap, n, 0, {start(e_.child(n, 0))});
      case Op::Sync: break;
    }
    throw std::logic_error("residual oracle does not handle synchronization");
  }

  // Collapses positions that are structurally equivalent.
  ResPtr norm(Tag t, int n, int aux, std::vector<ResPtr> kids) const {
    const bool kid_done = !kids.empty() && kids[0] == done();
    switch (t) {
      case Tag::Seq1:
        if (kid_done) return make(Tag::Seq2, n, 0, {start(e_.child(n, 1))});
        break;
      case Tag::Seq2:
      case Tag::Chosen:
      case Tag::Wrap:
        if (kid_done) return done();
        break;
      case Tag::Par:
        if (kid_done && kids[1] == done()) return done();
        break;
      case Tag::Iter:
        if (kid_done) return aux < 2 ? make(Tag::IterMid, n) : done();
        break;
      default: break;
    }
    return make(t, n, aux, std::move(kids));
  }

  std::vector<OStep> steps(const ResPtr& r) const {
    std::vector<OStep> out;
    const int n = r->node;
    auto lift = [&](const std::vector<OStep>& inner, auto wrap) {
      for (const auto& s : inner) out.push_back({s.items, wrap(s.to)});
    };
    switch (r->tag) {
      case Tag::Done: break;
      case Tag::Leaf: out.push_back({{{e_.node(n).leaf, e_.activity_at(n)}}, done()}); break;
      case Tag::Seq1:
      case Tag::Seq2:
      case Tag::Chosen:
      case Tag::Iter:
        lift(steps(r->kids[0]), [&](const ResPtr& k) { return norm(r->tag, n, r->aux, {k}); });
        break;
      case Tag::ChoiceStart:
        for (int side = 0; side < 2; ++side)
          lift(steps(start(e_.child(n, side))), [&](const ResPtr& k) { return norm(Tag::Chosen, n, side, {k}); });
        break;
      case Tag::IterMid:
        for (int phase = 1; phase <= 2; ++phase)
          lift(steps(start(e_.child(n, phase))), [&](const ResPtr& k) { return norm(Tag::Iter, n, phase, {k}); });
        break;
      case Tag::Par: {
        const auto l = steps(r->kids[0]), rr = steps(r->kids[1]);
        for (const auto& s : l) out.push_back({s.items, norm(Tag::Par, n, 0, {s.to, r->kids[1]})});
        for (const auto& s : rr) out.push_back({s.items, norm(Tag::Par, n, 0, {r->kids[0], s.to})});
        for (const auto& x : l)
          for (const auto& y : rr) {
            if (x.immediate() != y.immediate()) continue;
            auto items = x.items;
            items.insert(items.end(), y.items.begin(), y.items.end());
            out.push_back({std::move(items), norm(Tag::Par, n, 0, {x.to, y.to})});
          }
        break;
      }
      case Tag::Wrap: {
        const Node& nd = e_.node(n);
        for (auto s : steps(r->kids[0])) {
          if (nd.op == Op::Restrict) {
            const bool hit = std::any_of(s.items.begin(), s.items.end(),
                                         [&](const Item& i) { return mentions(i.act.part, nd.action); });
            if (hit) continue;
          } else {
            for (auto& i : s.items) i.act = e_.relabeling_at(n)(i.act);
          }
          out.push_back({s.items, norm(Tag::Wrap, n, 0, {s.to})});
        }
        break;
      }
    }
    return out;
  }

 private:
  const StaticExpr& e_;
};

std::string label_of(const std::vector<Item>& items) {
  std::vector<std::string> parts;
  for (const auto& i : items) parts.push_back(activity_identity_label(i.act));
  std::sort(parts.begin(), parts.end());
  std::string r;
  for (const auto& p : parts) r += p + ";";
  return r;
}

}  // namespace

LabeledGraph residual_graph(const StaticExpr& e, std::size_t max_states) {
  Oracle o(e);
  std::map<std::string, int> index;
  std::vector<ResPtr> states;
  auto intern = [&](const ResPtr& r) {
    auto [it, fresh] = index.emplace(r->key, static_cast<int>(states.size()));
    if (fresh) {
      if (states.size() >= max_states) throw std::runtime_error("residual oracle: too many states");
      states.push_back(r);
    }
    return it->second;
  };
  LabeledGraph g;
  g.initial = intern(o.start(0));
  for (std::size_t s = 0; s < states.size(); ++s) {
    auto all = o.steps(states[s]);
    const bool vanishing = std::any_of(all.begin(), all.end(), [](const OStep& x) { return x.immediate(); });
    std::erase_if(all, [&](const OStep& x) { return x.immediate() != vanishing; });

    // Probability of exclusive execution, before normalization.
    std::vector<double> pf;
    double empty = 1;
    if (vanishing) {
      for (const auto& x : all) {
        double w = 0;
        for (const auto& i : x.items) w += i.act.value;
        pf.push_back(w);
      }
    } else {
      std::vector<std::pair<int, double>> singles;  // leaves that may fire alone
      for (const auto& x : all)
        if (x.items.size() == 1) singles.emplace_back(x.items[0].leaf, x.items[0].act.value);
      for (const auto& [_, v] : singles) empty *= 1 - v;
      for (const auto& x : all) {
        double p = 1;
        for (const auto& i : x.items) p *= i.act.value;
        for (const auto& [leaf, v] : singles)
          if (std::none_of(x.items.begin(), x.items.end(), [&](const Item& i) { return i.leaf == leaf; })) p *= 1 - v;
        pf.push_back(p);
      }
    }
    double total = vanishing ? 0 : empty;
    for (double p : pf) total += p;

    std::vector<LabeledGraph::Edge> edges;
    if (!vanishing) edges.push_back({"", empty / total, static_cast<int>(s)});
    for (std::size_t k = 0; k < all.size(); ++k) edges.push_back({label_of(all[k].items), pf[k] / total, intern(all[k].to)});
    g.out.resize(states.size());
    g.tangible.resize(states.size());
    g.out[s] = std::move(edges);
    g.tangible[s] = !vanishing;
  }
  g.out.resize(states.size());
  g.tangible.resize(states.size());
  return g;
}

}  // namespace dtsi::test
