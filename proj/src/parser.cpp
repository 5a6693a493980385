#include "parser.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "error.hpp"

namespace dtsi {

struct Pos {
  int line = 1, col = 1;
};

struct ValueRef {
  bool immediate = false;
  std::optional<double> literal;
  std::string param;
  Pos pos;
};

struct Syn {
  enum class K { Act, Seq, Choice, Par, Relabel, Restrict, Sync, SyncRestrict, Iter, Ref, Stop };
  K k = K::Act;
  Pos pos;
  Multiaction part;
  ValueRef value;
  std::vector<std::shared_ptr<Syn>> kids;
  std::string name;                // Ref, Restrict, Sync
  std::vector<std::string> names;  // sr(...)
  std::vector<std::pair<std::string, std::string>> relabel;
  int bar = 0;       // 0 none, 1 overbar, 2 underbar
  int stop_bar = 0;  // bar on the inner activity of Stop
};

namespace {

[[noreturn]] void fail(Pos p, const std::string& msg) {
  throw InputError("line " + std::to_string(p.line) + ", column " + std::to_string(p.col) + ": " + msg);
}

enum class T { End, Ident, Number, Sym };

struct Token {
  T type = T::End;
  std::string text;
  Pos pos;
};

class Lexer {
 public:
  explicit Lexer(const std::string& src) : s_(src) {}

  Token next() {
    skip();
    Token t;
    t.pos = pos_;
    if (i_ >= s_.size()) return t;
    char c = s_[i_];
    if (std::isalpha(static_cast<unsigned char>(c))) {
      std::size_t j = i_;
      while (j < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[j])) || s_[j] == '_')) ++j;
      t.type = T::Ident;
      t.text = s_.substr(i_, j - i_);
      advance(j - i_);
      return t;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) ||
        (c == '.' && i_ + 1 < s_.size() && std::isdigit(static_cast<unsigned char>(s_[i_ + 1])))) {
      std::size_t j = i_;
      while (j < s_.size() && (std::isdigit(static_cast<unsigned char>(s_[j])) || s_[j] == '.')) ++j;
      if (j < s_.size() && (s_[j] == 'e' || s_[j] == 'E')) {
        std::size_t k = j + 1;
        if (k < s_.size() && (s_[k] == '+' || s_[k] == '-')) ++k;
        if (k < s_.size() && std::isdigit(static_cast<unsigned char>(s_[k]))) {
          j = k;
          while (j < s_.size() && std::isdigit(static_cast<unsigned char>(s_[j]))) ++j;
        }
      }
      t.type = T::Number;
      t.text = s_.substr(i_, j - i_);
      advance(j - i_);
      return t;
    }
    static const char* multi[] = {"<->", "->", "||", "[]"};
    for (const char* m : multi) {
      std::size_t n = std::char_traits<char>::length(m);
      if (s_.compare(i_, n, m) == 0) {
        t.type = T::Sym;
        t.text = m;
        advance(n);
        return t;
      }
    }
    if (std::string("(){}[],;*#^_=:/-").find(c) != std::string::npos) {
      t.type = T::Sym;
      t.text = std::string(1, c);
      advance(1);
      return t;
    }
    fail(pos_, std::string("unexpected character '") + c + "'");
  }

  // Raw text up to end of line (used for state/index declarations).
  std::string rest_of_line() {
    std::size_t j = s_.find('\n', i_);
    if (j == std::string::npos) j = s_.size();
    std::string r = s_.substr(i_, j - i_);
    auto cut = r.find("//");
    if (cut != std::string::npos) r.resize(cut);
    advance(j - i_);
    while (!r.empty() && std::isspace(static_cast<unsigned char>(r.back()))) r.pop_back();
    while (!r.empty() && std::isspace(static_cast<unsigned char>(r.front()))) r.erase(r.begin());
    return r;
  }

 private:
  void advance(std::size_t n) {
    for (std::size_t k = 0; k < n; ++k) {
      if (s_[i_] == '\n') {
        ++pos_.line;
        pos_.col = 1;
      } else {
        ++pos_.col;
      }
      ++i_;
    }
  }
  void skip() {
    for (;;) {
      while (i_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[i_]))) advance(1);
      if (s_.compare(i_, 2, "//") == 0) {
        while (i_ < s_.size() && s_[i_] != '\n') advance(1);
        continue;
      }
      return;
    }
  }

  const std::string& s_;
  std::size_t i_ = 0;
  Pos pos_;
};

double to_double(const Token& t) {
  try {
    std::size_t used = 0;
    double v = std::stod(t.text, &used);
    if (used != t.text.size()) fail(t.pos, "malformed number '" + t.text + "'");
    return v;
  } catch (const std::logic_error&) {
    fail(t.pos, "malformed number '" + t.text + "'");
  }
}

const std::set<std::string> kKeywords = {"rs", "sy", "sr", "Stop", "let", "param", "root", "state", "index"};

}  // namespace

class Parser {
 public:
  explicit Parser(const std::string& src) : lex_(src) { shift(); }

  ModelFile model() {
    ModelFile m;
    while (tok_.type != T::End) {
      if (tok_.type != T::Ident) fail(tok_.pos, "expected a declaration");
      Token kw = tok_;
      if (kw.text == "param") {
        shift();
        ParamDecl d;
        d.name = ident("parameter name");
        for (const auto& p : m.params_)
          if (p.name == d.name) fail(kw.pos, "parameter " + d.name + " declared twice");
        expect("=");
        double a = number();
        if (accept(":")) {
          double b = number();
          expect(":");
          double c = number();
          d.range = Grid{a, b, c};
          if (!(c > 0) || b < a) fail(kw.pos, "bad sweep range for " + d.name);
        } else {
          d.value = a;
        }
        m.params_.push_back(d);
      } else if (kw.text == "let") {
        shift();
        std::string name = ident("definition name");
        if (kKeywords.count(name)) fail(kw.pos, "'" + name + "' is reserved");
        if (m.defs_.count(name)) fail(kw.pos, name + " defined twice");
        expect("=");
        m.defs_[name] = expr();
      } else if (kw.text == "root") {
        shift();
        if (m.root_) fail(kw.pos, "root declared twice");
        m.root_ = expr();
      } else if (kw.text == "state" || kw.text == "index") {
        // name '=' then raw text to end of line
        Token name = lex_.next();
        if (name.type != T::Ident) fail(name.pos, "expected a name");
        Token eq = lex_.next();
        if (eq.text != "=") fail(eq.pos, "expected '='");
        std::string body = lex_.rest_of_line();
        if (body.empty()) fail(eq.pos, "empty " + kw.text + " declaration");
        (kw.text == "state" ? m.states_ : m.indices_).emplace_back(name.text, body);
        shift();
      } else {
        fail(kw.pos, "unknown declaration '" + kw.text + "'");
      }
    }
    if (!m.root_) fail(tok_.pos, "model has no root");
    return m;
  }

  std::shared_ptr<Syn> whole_expr() {
    auto e = expr();
    if (tok_.type != T::End) fail(tok_.pos, "unexpected '" + tok_.text + "'");
    return e;
  }

 private:
  void shift() { tok_ = lex_.next(); }
  bool is(const char* s) const { return tok_.type == T::Sym && tok_.text == s; }
  bool is_kw(const char* s) const { return tok_.type == T::Ident && tok_.text == s; }
  bool accept(const char* s) {
    if (!is(s)) return false;
    shift();
    return true;
  }
  void expect(const char* s) {
    if (!accept(s)) fail(tok_.pos, std::string("expected '") + s + "'" + found());
  }
  std::string found() const {
    return tok_.type == T::End ? " at end of input" : " but found '" + tok_.text + "'";
  }
  std::string ident(const char* what) {
    if (tok_.type != T::Ident) fail(tok_.pos, std::string("expected ") + what + found());
    std::string s = tok_.text;
    shift();
    return s;
  }
  double number() {
    if (tok_.type != T::Number) fail(tok_.pos, "expected a number" + found());
    double v = to_double(tok_);
    Pos p = tok_.pos;
    shift();
    if (accept("/")) {
      if (tok_.type != T::Number) fail(tok_.pos, "expected a denominator" + found());
      double d = to_double(tok_);
      shift();
      if (d == 0) fail(p, "division by zero");
      v /= d;
    }
    return v;
  }

  std::shared_ptr<Syn> node(Syn::K k, Pos p) {
    auto s = std::make_shared<Syn>();
    s->k = k;
    s->pos = p;
    return s;
  }

  std::shared_ptr<Syn> binary(Syn::K k, Pos p, std::shared_ptr<Syn> a, std::shared_ptr<Syn> b) {
    auto s = node(k, p);
    s->kids = {std::move(a), std::move(b)};
    return s;
  }

  std::shared_ptr<Syn> expr() {
    auto e = choice();
    while (is("||")) {
      Pos p = tok_.pos;
      shift();
      e = binary(Syn::K::Par, p, e, choice());
    }
    return e;
  }

  std::shared_ptr<Syn> choice() {
    auto e = seq();
    while (is("[]")) {
      Pos p = tok_.pos;
      shift();
      e = binary(Syn::K::Choice, p, e, seq());
    }
    return e;
  }

  std::shared_ptr<Syn> seq() {
    auto e = postfix();
    while (is(";")) {
      Pos p = tok_.pos;
      shift();
      e = binary(Syn::K::Seq, p, e, postfix());
    }
    return e;
  }

  std::shared_ptr<Syn> postfix() {
    auto e = primary();
    for (;;) {
      Pos p = tok_.pos;
      if (is_kw("rs") || is_kw("sy")) {
        bool rs = tok_.text == "rs";
        shift();
        auto s = node(rs ? Syn::K::Restrict : Syn::K::Sync, p);
        s->name = action_name();
        s->kids = {e};
        e = s;
      } else if (is_kw("sr")) {
        shift();
        expect("(");
        auto s = node(Syn::K::SyncRestrict, p);
        do s->names.push_back(action_name());
        while (accept(","));
        expect(")");
        s->kids = {e};
        e = s;
      } else if (is("[")) {
        shift();
        auto s = node(Syn::K::Relabel, p);
        if (is_kw("f")) {
          // optional "f:" prefix; "f" may also be an action name
          Token save = tok_;
          shift();
          if (!accept(":")) relabel_entry(*s, save.text);
        }
        if (s->relabel.empty()) relabel_entry(*s, action_name());
        while (accept(",")) relabel_entry(*s, action_name());
        expect("]");
        s->kids = {e};
        e = s;
      } else {
        return e;
      }
    }
  }

  void relabel_entry(Syn& s, const std::string& from) {
    if (accept("<->")) {
      std::string to = action_name();
      s.relabel.emplace_back(from, to);
      s.relabel.emplace_back(to, from);
    } else {
      expect("->");
      s.relabel.emplace_back(from, action_name());
    }
  }

  std::string action_name() {
    Pos p = tok_.pos;
    std::string n = ident("an action name");
    if (is("^")) fail(p, "expected an elementary action, not a conjugate");
    return n;
  }

  std::shared_ptr<Syn> primary() {
    Pos p = tok_.pos;
    if (is("^") || is("_")) {
      int bar = is("^") ? 1 : 2;
      shift();
      expect("(");
      auto e = expr();
      expect(")");
      if (e->bar) fail(p, "nested bars");
      e->bar = bar;
      return e;
    }
    if (is("(")) {
      shift();
      if (is("{")) return activity(p);
      auto e = expr();
      expect(")");
      return e;
    }
    if (is("[")) {
      shift();
      auto s = node(Syn::K::Iter, p);
      s->kids.push_back(expr());
      expect("*");
      s->kids.push_back(expr());
      expect("*");
      s->kids.push_back(expr());
      expect("]");
      return s;
    }
    if (is_kw("Stop")) {
      shift();
      auto s = node(Syn::K::Stop, p);
      if (is("(")) {
        // Stop(^) / Stop(_): bar on the hidden activity inside Stop
        shift();
        if (accept("^")) s->stop_bar = 1;
        else if (accept("_")) s->stop_bar = 2;
        else fail(tok_.pos, "expected '^' or '_'" + found());
        expect(")");
      }
      return s;
    }
    if (tok_.type == T::Ident && !kKeywords.count(tok_.text)) {
      auto s = node(Syn::K::Ref, p);
      s->name = tok_.text;
      shift();
      return s;
    }
    fail(p, "expected an expression" + found());
  }

  // after "(" with current token "{"
  std::shared_ptr<Syn> activity(Pos p) {
    auto s = node(Syn::K::Act, p);
    expect("{");
    if (!is("}")) {
      do {
        std::string n = ident("an action name");
        bool conj = accept("^");
        s->part.add({n, conj});
      } while (accept(","));
    }
    expect("}");
    expect(",");
    s->value.pos = tok_.pos;
    s->value.immediate = accept("#");
    if (tok_.type == T::Ident) {
      s->value.param = tok_.text;
      shift();
    } else {
      s->value.literal = number();
    }
    expect(")");
    return s;
  }

  Lexer lex_;
  Token tok_;
};

namespace {

struct Built {
  StaticExpr e;
  std::vector<std::pair<int, int>> bars;  // (preorder index, 1 over / 2 under)
};

class Instantiator {
 public:
  Instantiator(const std::map<std::string, std::shared_ptr<Syn>>& defs, const std::map<std::string, double>& params)
      : defs_(defs), params_(params) {}

  Built build(const Syn& s) {
    Built r = build_inner(s);
    if (s.bar) r.bars.emplace_back(0, s.bar);
    return r;
  }

 private:
  static void shift_into(Built& out, const Built& kid, int offset) {
    for (auto [n, b] : kid.bars) out.bars.emplace_back(n + offset, b);
  }

  Built compose(const Syn& s, std::vector<Built> kids) {
    Built r;
    switch (s.k) {
      case Syn::K::Seq: r.e = StaticExpr::seq(kids[0].e, kids[1].e); break;
      case Syn::K::Choice: r.e = StaticExpr::choice(kids[0].e, kids[1].e); break;
      case Syn::K::Par: r.e = StaticExpr::par(kids[0].e, kids[1].e); break;
      case Syn::K::Iter: r.e = StaticExpr::iter(kids[0].e, kids[1].e, kids[2].e); break;
      case Syn::K::Restrict: r.e = StaticExpr::restrict(kids[0].e, s.name); break;
      case Syn::K::Sync: r.e = StaticExpr::sync(kids[0].e, s.name); break;
      case Syn::K::Relabel:
        try {
          r.e = StaticExpr::relabel(kids[0].e, Relabeling::from_pairs(s.relabel));
        } catch (const InputError& err) {
          fail(s.pos, err.what());
        }
        break;
      default: break;
    }
    int off = 1;
    for (const auto& k : kids) {
      shift_into(r, k, off);
      off += k.e.size();
    }
    return r;
  }

  Built build_inner(const Syn& s) {
    switch (s.k) {
      case Syn::K::Act: {
        double v = 0;
        if (s.value.literal) {
          v = *s.value.literal;
        } else {
          auto it = params_.find(s.value.param);
          if (it == params_.end()) fail(s.value.pos, "unknown parameter '" + s.value.param + "'");
          v = it->second;
        }
        Kind k = s.value.immediate ? Kind::Immediate : Kind::Stochastic;
        for (const auto& [a, _] : s.part)
          if (a.name == kStopAction) fail(s.pos, "reserved action name");
        try {
          return {StaticExpr::activity(s.part, k, v), {}};
        } catch (const InputError& err) {
          fail(s.value.pos, err.what());
        }
      }
      case Syn::K::Stop: {
        Built r{StaticExpr::stop(), {}};
        if (s.stop_bar) r.bars.emplace_back(1, s.stop_bar);
        return r;
      }
      case Syn::K::Ref: {
        auto it = defs_.find(s.name);
        if (it == defs_.end()) fail(s.pos, "unknown name '" + s.name + "'");
        if (active_.count(s.name)) fail(s.pos, "recursive definition of '" + s.name + "'");
        active_.insert(s.name);
        Built r = build(*it->second);
        active_.erase(s.name);
        return r;
      }
      case Syn::K::SyncRestrict: {
        Built r = build(*s.kids[0]);
        int wrapped = 0;
        auto wrap = [&](bool rs, const std::string& a) {
          r.e = rs ? StaticExpr::restrict(r.e, a) : StaticExpr::sync(r.e, a);
          ++wrapped;
        };
        for (const auto& a : s.names) wrap(false, a);
        for (const auto& a : s.names) wrap(true, a);
        for (auto& [n, b] : r.bars) n += wrapped;
        return r;
      }
      default: {
        std::vector<Built> kids;
        for (const auto& k : s.kids) kids.push_back(build(*k));
        return compose(s, std::move(kids));
      }
    }
  }

  const std::map<std::string, std::shared_ptr<Syn>>& defs_;
  const std::map<std::string, double>& params_;
  std::set<std::string> active_;
};

Bars to_bars(const Built& b) {
  Bars bars;
  for (auto [n, k] : b.bars) bars.push_back(k == 1 ? over_bar(n) : under_bar(n));
  std::sort(bars.begin(), bars.end());
  return bars;
}

}  // namespace

std::vector<double> Grid::points() const {
  std::vector<double> r;
  long n = static_cast<long>(std::floor((stop - start) / step + 1e-9));
  for (long i = 0; i <= n; ++i) r.push_back(start + static_cast<double>(i) * step);
  return r;
}

std::string Grid::str() const {
  return format_number(start) + ":" + format_number(stop) + ":" + format_number(step);
}

std::vector<std::string> ModelFile::definitions() const {
  std::vector<std::string> r;
  for (const auto& [n, _] : defs_) r.push_back(n);
  return r;
}

void ModelFile::bind(const std::string& name, double value) {
  for (auto& p : params_)
    if (p.name == name) {
      p.value = value;
      p.range.reset();
      return;
    }
  throw InputError("unknown parameter " + name);
}

void ModelFile::bind_range(const std::string& name, const Grid& g) {
  if (!(g.step > 0) || g.stop < g.start) throw InputError("bad sweep range for " + name);
  for (auto& p : params_)
    if (p.name == name) {
      p.range = g;
      p.value.reset();
      return;
    }
  throw InputError("unknown parameter " + name);
}

std::map<std::string, double> ModelFile::bindings() const {
  std::map<std::string, double> b;
  for (const auto& p : params_) {
    if (!p.value) throw InputError("parameter " + p.name + " has a sweep range but no value");
    b[p.name] = *p.value;
  }
  return b;
}

std::size_t ModelFile::sweep_size() const {
  std::size_t n = 1;
  for (const auto& p : params_) n *= p.range ? p.range->points().size() : 1;
  return n;
}

std::map<std::string, double> ModelFile::sweep_point(std::size_t i) const {
  if (i >= sweep_size()) throw InputError("sweep point out of range");
  std::map<std::string, double> b;
  for (auto it = params_.rbegin(); it != params_.rend(); ++it) {
    if (!it->range) {
      b[it->name] = *it->value;
      continue;
    }
    const auto vals = it->range->points();
    b[it->name] = vals[i % vals.size()];
    i /= vals.size();
  }
  return b;
}

std::vector<std::map<std::string, double>> ModelFile::sweep_points() const {
  std::vector<std::map<std::string, double>> pts(1);
  for (const auto& p : params_) {
    std::vector<double> vals = p.range ? p.range->points() : std::vector<double>{*p.value};
    std::vector<std::map<std::string, double>> next;
    for (const auto& base : pts)
      for (double v : vals) {
        auto m = base;
        m[p.name] = v;
        next.push_back(std::move(m));
      }
    pts = std::move(next);
  }
  return pts;
}

StaticExpr ModelFile::instantiate(const std::map<std::string, double>& b, const std::string& name) const {
  const Syn* s = root_.get();
  if (!name.empty()) {
    auto it = defs_.find(name);
    if (it == defs_.end()) throw InputError("unknown name '" + name + "'");
    s = it->second.get();
  }
  Instantiator inst(defs_, b);
  Built r = inst.build(*s);
  if (!r.bars.empty()) throw InputError("model expressions must be static (no bars)");
  if (!r.e.is_regular()) throw InputError("expression is not regular: an iteration body has parallelism at its top level");
  return r.e;
}

ModelFile parse_model(const std::string& text) { return Parser(text).model(); }

ModelFile load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_model(ss.str());
  } catch (const InputError& e) {
    throw InputError(path + ": " + e.what());
  }
}

StaticExpr parse_static(const std::string& text, const std::map<std::string, double>& params) {
  auto syn = Parser(text).whole_expr();
  std::map<std::string, std::shared_ptr<Syn>> none;
  Built r = Instantiator(none, params).build(*syn);
  if (!r.bars.empty()) throw InputError("static expression must not carry bars");
  return r.e;
}

DynamicExpr parse_dynamic(const std::string& text, const std::map<std::string, double>& params) {
  auto syn = Parser(text).whole_expr();
  std::map<std::string, std::shared_ptr<Syn>> none;
  Built r = Instantiator(none, params).build(*syn);
  DynamicExpr g{std::make_shared<const StaticExpr>(r.e), to_bars(r)};
  if (!g.well_formed()) throw InputError("bars do not form a dynamic expression");
  return g;
}

// ---- serialization ----

namespace {

int level(const StaticExpr& e, int n) {
  if (e.is_stop(n)) return 4;
  switch (e.node(n).op) {
    case Op::Act:
    case Op::Iter: return 4;
    case Op::Relabel:
    case Op::Restrict:
    case Op::Sync: return 3;
    case Op::Seq: return 2;
    case Op::Choice: return 1;
    case Op::Par: return 0;
  }
  return 4;
}

class Writer {
 public:
  Writer(const StaticExpr& e, const Bars* bars) : e_(e), bars_(bars) {}

  void write(int n, int min_level, std::string& out) const {
    int b = bar_at(n);
    if (b) {
      out += b == 1 ? "^(" : "_(";
      body(n, 0, out);
      out += ')';
      return;
    }
    body(n, min_level, out);
  }

 private:
  int bar_at(int n) const {
    if (!bars_) return 0;
    if (std::binary_search(bars_->begin(), bars_->end(), over_bar(n))) return 1;
    if (std::binary_search(bars_->begin(), bars_->end(), under_bar(n))) return 2;
    return 0;
  }

  void body(int n, int min_level, std::string& out) const {
    bool paren = level(e_, n) < min_level;
    if (paren) out += '(';
    const Node& x = e_.node(n);
    if (e_.is_stop(n)) {
      out += "Stop";
      int b = bar_at(n + 1);
      if (b) out += b == 1 ? "(^)" : "(_)";
    } else {
      switch (x.op) {
        case Op::Act: out += to_string(e_.activity_at(n)); break;
        case Op::Seq:
          write(e_.child(n, 0), 2, out);
          out += ";";
          write(e_.child(n, 1), 3, out);
          break;
        case Op::Choice:
          write(e_.child(n, 0), 1, out);
          out += " [] ";
          write(e_.child(n, 1), 2, out);
          break;
        case Op::Par:
          write(e_.child(n, 0), 0, out);
          out += " || ";
          write(e_.child(n, 1), 1, out);
          break;
        case Op::Relabel:
          write(e_.child(n, 0), 3, out);
          out += " " + e_.relabeling_at(n).str();
          break;
        case Op::Restrict:
        case Op::Sync:
          write(e_.child(n, 0), 3, out);
          out += (x.op == Op::Restrict ? " rs " : " sy ") + x.action;
          break;
        case Op::Iter:
          out += "[";
          write(e_.child(n, 0), 0, out);
          out += " * ";
          write(e_.child(n, 1), 0, out);
          out += " * ";
          write(e_.child(n, 2), 0, out);
          out += "]";
          break;
      }
    }
    if (paren) out += ')';
  }

  const StaticExpr& e_;
  const Bars* bars_;
};

}  // namespace

std::string serialize(const StaticExpr& e) {
  std::string s;
  Writer(e, nullptr).write(0, 0, s);
  return s;
}

std::string serialize(const DynamicExpr& g) {
  std::string s;
  Writer(*g.skel, &g.bars).write(0, 0, s);
  return s;
}

std::string serialize(const StaticExpr& e, const Bars& bars, int n) {
  std::string s;
  Writer(e, &bars).write(n, 0, s);
  return s;
}

}  // namespace dtsi
