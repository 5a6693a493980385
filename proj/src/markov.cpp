#include "markov.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <numeric>

#include "error.hpp"

namespace dtsi {

ChainModel chain_of(const TransitionSystem& ts) {
  ChainModel c;
  const int n = static_cast<int>(ts.size());
  c.initial = ts.initial;
  c.pm = Matrix::Zero(n, n);
  c.arcs.resize(n);
  for (const auto& s : ts.states) {
    c.names.push_back(s.key);
    c.tangible.push_back(s.tangible);
  }
  for (const auto& t : ts.transitions) {
    c.pm(t.source, t.target) += t.prob;
    StepLabel lab = multiaction_parts(*ts.pool, ts.step_of(t));
    auto& out = c.arcs[t.source];
    auto it = std::find_if(out.begin(), out.end(),
                           [&](const LabeledArc& a) { return a.target == t.target && a.label == lab; });
    if (it == out.end())
      out.push_back({std::move(lab), t.prob, t.target});
    else
      it->prob += t.prob;
  }
  return c;
}

SojournVectors sojourn(const ChainModel& c) {
  SojournVectors v;
  const double inf = std::numeric_limits<double>::infinity();
  for (int s = 0; s < c.size(); ++s) {
    const double loop = c.pm(s, s);
    const bool absorbing = loop >= 1 - 1e-15;
    v.sl.push_back(absorbing ? inf : 1 / (1 - loop));
    if (!c.tangible[s]) {
      v.sj.push_back(0);
      v.var.push_back(0);
    } else if (absorbing) {
      v.sj.push_back(inf);
      v.var.push_back(inf);
    } else {
      v.sj.push_back(1 / (1 - loop));
      v.var.push_back(loop / ((1 - loop) * (1 - loop)));
    }
  }
  return v;
}

Matrix edtmc(const ChainModel& c) {
  const int n = c.size();
  Matrix p = Matrix::Zero(n, n);
  for (int s = 0; s < n; ++s) {
    const double loop = c.pm(s, s);
    if (loop >= 1 - 1e-15) continue;
    for (int t = 0; t < n; ++t)
      if (t != s) p(s, t) = c.pm(s, t) / (1 - loop);
  }
  return p;
}

Matrix dtmc(const ChainModel& c) { return c.pm; }

namespace {

// Rows that sum to zero behave as self-loops.
bool edge(const Matrix& p, int s, int t) {
  if (p(s, t) > 0) return true;
  return s == t && p.row(s).sum() == 0;
}

}  // namespace

std::vector<std::vector<int>> communication_classes(const Matrix& p) {
  const int n = static_cast<int>(p.rows());
  std::vector<int> index(n, -1), low(n, 0), stack;
  std::vector<bool> on(n, false);
  std::vector<std::vector<int>> out;
  int counter = 0;
  std::function<void(int)> visit = [&](int v) {
    index[v] = low[v] = counter++;
    stack.push_back(v);
    on[v] = true;
    for (int w = 0; w < n; ++w) {
      if (!edge(p, v, w)) continue;
      if (index[w] < 0) {
        visit(w);
        low[v] = std::min(low[v], low[w]);
      } else if (on[w]) {
        low[v] = std::min(low[v], index[w]);
      }
    }
    if (low[v] == index[v]) {
      std::vector<int> cls;
      int w;
      do {
        w = stack.back();
        stack.pop_back();
        on[w] = false;
        cls.push_back(w);
      } while (w != v);
      std::sort(cls.begin(), cls.end());
      out.push_back(std::move(cls));
    }
  };
  for (int v = 0; v < n; ++v)
    if (index[v] < 0) visit(v);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::vector<int>> closed_classes(const Matrix& p) {
  std::vector<std::vector<int>> r;
  for (auto& cls : communication_classes(p)) {
    bool closed = true;
    for (int s : cls)
      for (int t = 0; t < p.cols() && closed; ++t)
        if (edge(p, s, t) && !std::binary_search(cls.begin(), cls.end(), t)) closed = false;
    if (closed) r.push_back(std::move(cls));
  }
  return r;
}

int period_of(const Matrix& p, const std::vector<int>& cls) {
  std::vector<long> level(p.rows(), -1);
  std::deque<int> q{cls.front()};
  level[cls.front()] = 0;
  long g = 0;
  while (!q.empty()) {
    int s = q.front();
    q.pop_front();
    for (int t : cls) {
      if (!edge(p, s, t)) continue;
      if (level[t] < 0) {
        level[t] = level[s] + 1;
        q.push_back(t);
      } else {
        g = std::gcd(g, std::labs(level[s] + 1 - level[t]));
      }
    }
  }
  return g == 0 ? 1 : static_cast<int>(g);
}

namespace {

std::string classes_str(const std::vector<std::vector<int>>& cls) {
  std::string r;
  for (const auto& c : cls) {
    r += r.empty() ? "{" : ", {";
    for (std::size_t i = 0; i < c.size(); ++i) r += (i ? "," : "") + std::to_string(c[i] + 1);
    r += "}";
  }
  return r;
}

}  // namespace

Stationary steady_state(const Matrix& p) {
  auto closed = closed_classes(p);
  if (closed.size() != 1)
    throw AnalysisError("chain has " + std::to_string(closed.size()) +
                        " closed communication classes: " + classes_str(closed));
  Stationary st;
  st.closed_class = closed.front();
  const auto& cls = st.closed_class;
  const int k = static_cast<int>(cls.size());
  Matrix sub(k, k);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) sub(i, j) = p(cls[i], cls[j]) + (i == j && p.row(cls[i]).sum() == 0 ? 1 : 0);
  Matrix a = (sub - Matrix::Identity(k, k)).transpose();
  a.row(k - 1).setOnes();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(k);
  rhs(k - 1) = 1;
  Eigen::VectorXd x = a.partialPivLu().solve(rhs);
  st.pmf.assign(p.rows(), 0.0);
  for (int i = 0; i < k; ++i) st.pmf[cls[i]] = std::max(0.0, x(i));
  const double total = std::accumulate(st.pmf.begin(), st.pmf.end(), 0.0);
  for (double& v : st.pmf) v /= total;
  Eigen::RowVectorXd psi(k);
  for (int i = 0; i < k; ++i) psi(i) = st.pmf[cls[i]];
  st.residual = (psi * (sub - Matrix::Identity(k, k))).cwiseAbs().maxCoeff();
  st.period = period_of(p, cls);
  return st;
}

Pmf power_iteration(const Matrix& p, const Pmf& start, double tol, long cap) {
  Eigen::RowVectorXd x = Eigen::Map<const Eigen::RowVectorXd>(start.data(), static_cast<long>(start.size()));
  for (long it = 0; it < cap; ++it) {
    Eigen::RowVectorXd y = x * p;
    const double delta = (y - x).cwiseAbs().maxCoeff();
    x = y;
    if (delta < tol) return Pmf(x.data(), x.data() + x.size());
  }
  throw AnalysisError("power iteration did not converge");
}

Pmf transient(const Matrix& p, const Pmf& psi0, int k) {
  Eigen::RowVectorXd x = Eigen::Map<const Eigen::RowVectorXd>(psi0.data(), static_cast<long>(psi0.size()));
  for (int i = 0; i < k; ++i) x = x * p;
  return Pmf(x.data(), x.data() + x.size());
}

Pmf initial_pmf(const ChainModel& c) {
  Pmf r(c.size(), 0.0);
  r[c.initial] = 1;
  return r;
}

Solution solve(const ChainModel& c) {
  Solution sol;
  sol.soj = sojourn(c);
  sol.p = dtmc(c);
  sol.pstar = edtmc(c);
  sol.psi = steady_state(sol.p);
  sol.psi_star = steady_state(sol.pstar);
  const int n = c.size();

  auto normalize = [](Pmf v, const char* what) {
    const double total = std::accumulate(v.begin(), v.end(), 0.0);
    if (!(total > 0)) throw AnalysisError(std::string("no tangible state carries ") + what);
    for (double& x : v) x /= total;
    return v;
  };

  const auto& cls = sol.psi_star.closed_class;
  if (cls.size() == 1 && std::isinf(sol.soj.sj[cls.front()])) {
    sol.phi.assign(n, 0.0);
    sol.phi[cls.front()] = 1;
  } else {
    Pmf w(n, 0.0);
    for (int s = 0; s < n; ++s)
      if (c.tangible[s] && sol.psi_star.pmf[s] > 0) w[s] = sol.psi_star.pmf[s] * sol.soj.sj[s];
    sol.phi = normalize(std::move(w), "stationary mass");
  }

  Pmf d(n, 0.0);
  for (int s = 0; s < n; ++s)
    if (c.tangible[s]) d[s] = sol.psi.pmf[s];
  sol.phi_direct = normalize(std::move(d), "stationary mass");

  for (int s = 0; s < n; ++s) sol.route_gap = std::max(sol.route_gap, std::abs(sol.phi[s] - sol.phi_direct[s]));
  return sol;
}

double trace_prob(const ChainModel& c, int s, const std::vector<StepLabel>& trace) {
  std::map<int, double> front{{s, 1.0}};
  for (const auto& lab : trace) {
    std::map<int, double> next;
    for (auto [st, w] : front)
      for (const auto& a : c.arcs[st])
        if (a.label == lab) next[a.target] += w * a.prob;
    front = std::move(next);
  }
  double r = 0;
  for (auto [st, w] : front) r += w;
  return r;
}

// ---- text forms ----

namespace {

class Cursor {
 public:
  explicit Cursor(const std::string& t) : t_(t) {}

  void skip() {
    while (i_ < t_.size() && std::isspace(static_cast<unsigned char>(t_[i_]))) ++i_;
  }
  bool done() {
    skip();
    return i_ >= t_.size();
  }
  char peek() {
    skip();
    return i_ < t_.size() ? t_[i_] : '\0';
  }
  bool accept(char c) {
    if (peek() != c) return false;
    ++i_;
    return true;
  }
  void expect(char c) {
    if (!accept(c)) fail(std::string("expected '") + c + "'");
  }
  std::string ident() {
    skip();
    std::size_t b = i_;
    while (i_ < t_.size() && (std::isalnum(static_cast<unsigned char>(t_[i_])) || t_[i_] == '_')) ++i_;
    if (b == i_) fail("expected a name");
    return t_.substr(b, i_ - b);
  }
  double number() {
    skip();
    const char* b = t_.c_str() + i_;
    char* e = nullptr;
    double v = std::strtod(b, &e);
    if (e == b) fail("expected a number");
    i_ += static_cast<std::size_t>(e - b);
    return v;
  }
  // Raw text up to the first top-level character in `stops`.
  std::string until(const std::string& stops) {
    skip();
    std::size_t b = i_;
    int depth = 0;
    while (i_ < t_.size()) {
      char c = t_[i_];
      if (c == '{') ++depth;
      if (c == '}') --depth;
      if (depth == 0 && stops.find(c) != std::string::npos) break;
      ++i_;
    }
    std::string r = t_.substr(b, i_ - b);
    while (!r.empty() && std::isspace(static_cast<unsigned char>(r.back()))) r.pop_back();
    return r;
  }
  [[noreturn]] void fail(const std::string& msg) const {
    throw InputError("column " + std::to_string(i_ + 1) + " in '" + t_ + "': " + msg);
  }

 private:
  const std::string& t_;
  std::size_t i_ = 0;
};

Multiaction parse_multiaction(Cursor& c) {
  c.expect('{');
  Multiaction m;
  if (c.accept('}')) return m;
  do {
    ActionSym s{c.ident(), false};
    if (c.accept('^')) s.conj = true;
    m.add(s);
  } while (c.accept(','));
  c.expect('}');
  return m;
}

std::vector<std::string> split_top(const std::string& text, char sep) {
  std::vector<std::string> r;
  std::string cur;
  int depth = 0;
  for (char ch : text) {
    if (ch == '{') ++depth;
    if (ch == '}') --depth;
    if (ch == sep && depth == 0) {
      r.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  r.push_back(cur);
  return r;
}

}  // namespace

StepLabel parse_step_label(const std::string& text) {
  Cursor c(text);
  StepLabel l;
  if (c.accept('~')) {
    if (!c.done()) c.fail("unexpected text after '~'");
    return l;
  }
  while (!c.done()) l.add(parse_multiaction(c));
  if (l.empty()) throw InputError("empty step label; write '~' for the empty step");
  return l;
}

std::string to_string(const StepLabel& l) {
  if (l.empty()) return "~";
  std::string r;
  for (const auto& [m, k] : l)
    for (std::size_t i = 0; i < k; ++i) r += (r.empty() ? "" : " ") + to_string(m);
  return r;
}

IndexEvaluator::IndexEvaluator(const ChainModel& c, const Solution& sol,
                               std::vector<std::pair<std::string, std::string>> named_states)
    : c_(c), sol_(sol), named_(std::move(named_states)) {}

int IndexEvaluator::resolve_path(const std::string& path) const {
  std::set<int> front{c_.initial};
  for (const auto& part : split_top(path, '/')) {
    const StepLabel lab = parse_step_label(part);
    std::set<int> next;
    for (int s : front)
      for (const auto& a : c_.arcs[s])
        if (a.label == lab && a.prob > 0) next.insert(a.target);
    if (next.empty()) throw InputError("no state reached by path '" + path + "'");
    front = std::move(next);
  }
  if (front.size() != 1) throw InputError("path '" + path + "' reaches " + std::to_string(front.size()) + " states");
  return *front.begin();
}

int IndexEvaluator::resolve_state(const std::string& ref) const {
  std::string r = ref;
  r.erase(0, r.find_first_not_of(" \t"));
  r.erase(r.find_last_not_of(" \t") + 1);
  if (r.empty()) throw InputError("empty state reference");
  if (std::all_of(r.begin(), r.end(), [](char ch) { return std::isdigit(static_cast<unsigned char>(ch)); })) {
    const int k = std::stoi(r);
    if (k < 1 || k > c_.size()) throw InputError("state " + r + " out of range");
    return k - 1;
  }
  if (r.front() == '{' || r.front() == '~') return resolve_path(r);
  for (const auto& [name, path] : named_)
    if (name == r) return resolve_path(path);
  throw InputError("unknown state '" + r + "'");
}

double IndexEvaluator::eval(const std::string& text) const {
  Cursor c(text);
  const int n = c_.size();
  auto states = [&](Cursor& cur) {
    std::vector<int> r;
    do r.push_back(resolve_state(cur.until(",]")));
    while (cur.accept(','));
    return r;
  };
  auto sum_over = [&](const Pmf& v, const std::vector<int>& ss) {
    double r = 0;
    for (int s : ss) r += v[s];
    return r;
  };
  auto one = [&](Cursor& cur) {
    auto ss = states(cur);
    if (ss.size() != 1) cur.fail("expected a single state");
    return ss.front();
  };

  std::function<double()> expr, term, factor;
  factor = [&]() -> double {
    if (c.accept('(')) {
      double v = expr();
      c.expect(')');
      return v;
    }
    if (c.accept('-')) return -factor();
    const char ch = c.peek();
    if (std::isdigit(static_cast<unsigned char>(ch)) || ch == '.') return c.number();
    const std::string f = c.ident();
    c.expect('[');
    double v = 0;
    if (f == "phi") {
      v = sum_over(sol_.phi, states(c));
    } else if (f == "psi") {
      v = sum_over(sol_.psi.pmf, states(c));
    } else if (f == "psistar") {
      v = sum_over(sol_.psi_star.pmf, states(c));
    } else if (f == "sj") {
      v = sol_.soj.sj[one(c)];
    } else if (f == "var") {
      v = sol_.soj.var[one(c)];
    } else if (f == "recur") {
      v = 1 / sol_.phi[one(c)];
    } else if (f == "rate") {
      const int s = one(c);
      v = sol_.phi[s] / sol_.soj.sj[s];
    } else if (f == "step") {
      const StepLabel want = parse_step_label(c.until("]"));
      for (int s = 0; s < n; ++s)
        for (const auto& a : c_.arcs[s])
          if (want.subset_of(a.label)) v += sol_.phi[s] * a.prob;
    } else if (f == "reward") {
      do {
        const int s = resolve_state(c.until("=]"));
        c.expect('=');
        v += sol_.phi[s] * c.number();
      } while (c.accept(','));
    } else {
      c.fail("unknown index function '" + f + "'");
    }
    c.expect(']');
    return v;
  };
  term = [&]() {
    double v = factor();
    for (;;) {
      if (c.accept('*'))
        v *= factor();
      else if (c.accept('/'))
        v /= factor();
      else
        return v;
    }
  };
  expr = [&]() {
    double v = term();
    for (;;) {
      if (c.accept('+'))
        v += term();
      else if (c.accept('-'))
        v -= term();
      else
        return v;
    }
  };
  const double v = expr();
  if (!c.done()) c.fail("unexpected trailing text");
  return v;
}

std::string matrix_csv(const Matrix& m) {
  std::string r;
  for (long i = 0; i < m.rows(); ++i) {
    for (long j = 0; j < m.cols(); ++j) r += (j ? "," : "") + format_number(m(i, j));
    r += "\n";
  }
  return r;
}

std::string solution_csv(const ChainModel& c, const Solution& sol) {
  auto quote = [](const std::string& s) {
    std::string r = "\"";
    for (char ch : s) r += ch == '"' ? std::string("\"\"") : std::string(1, ch);
    return r + "\"";
  };
  auto num = [](double v) { return std::isinf(v) ? std::string("inf") : format_number(v); };
  std::string r = "state,key,kind,sj,var,psistar,psi,phi\n";
  for (int s = 0; s < c.size(); ++s)
    r += std::to_string(s + 1) + "," + quote(c.names[s]) + "," + (c.tangible[s] ? "tangible" : "vanishing") + "," +
         num(sol.soj.sj[s]) + "," + num(sol.soj.var[s]) + "," + num(sol.psi_star.pmf[s]) + "," +
         num(sol.psi.pmf[s]) + "," + num(sol.phi[s]) + "\n";
  return r;
}

}  // namespace dtsi
