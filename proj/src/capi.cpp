#include "dtsi/dtsi.h"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <string>

#include "equiv.hpp"
#include "error.hpp"
#include "json.hpp"
#include "markov.hpp"
#include "netsem.hpp"
#include "opsem.hpp"
#include "parser.hpp"

struct dtsi_model {
  dtsi::ModelFile file;
};

struct dtsi_ts {
  dtsi::TransitionSystem ts;
  std::string definition;
};

struct dtsi_net {
  dtsi::DtsiBox box;
};

struct dtsi_rg {
  std::shared_ptr<const dtsi::DtsiBox> box;
  dtsi::ReachabilityGraph rg;
};

struct dtsi_quotient {
  dtsi::Quotient q;
};

struct dtsi_solution {
  dtsi::ChainModel chain;
  dtsi::Solution sol;
};

namespace {

thread_local std::string g_error;

struct ArgError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

template <class F>
dtsi_status guard(F&& f) {
  try {
    f();
    g_error.clear();
    return DTSI_OK;
  } catch (const ArgError& e) {
    g_error = e.what();
    return DTSI_E_ARG;
  } catch (const dtsi::InputError& e) {
    g_error = e.what();
    return DTSI_E_INPUT;
  } catch (const dtsi::AnalysisError& e) {
    g_error = e.what();
    return DTSI_E_ANALYSIS;
  } catch (const dtsi::LimitError& e) {
    g_error = e.what();
    return DTSI_E_LIMIT;
  } catch (const std::exception& e) {
    g_error = e.what();
    return DTSI_E_INTERNAL;
  } catch (...) {
    g_error = "unknown failure";
    return DTSI_E_INTERNAL;
  }
}

template <class T>
void need(const T* p, const char* what) {
  if (!p) throw ArgError(std::string(what) + " is null");
}

char* dup(const std::string& s) {
  char* r = static_cast<char*>(std::malloc(s.size() + 1));
  if (!r) throw std::bad_alloc();
  std::memcpy(r, s.c_str(), s.size() + 1);
  return r;
}

void put(char** out, const std::string& s) {
  need(out, "output pointer");
  *out = dup(s);
}

std::string def_name(const char* d) { return d ? d : ""; }

double parse_value(const std::string& text) {
  const auto slash = text.find('/');
  auto num = [&](const std::string& t) {
    char* end = nullptr;
    const double v = std::strtod(t.c_str(), &end);
    if (t.empty() || *end != '\0') throw dtsi::InputError("malformed number '" + t + "'");
    return v;
  };
  if (slash == std::string::npos) return num(text);
  return num(text.substr(0, slash)) / num(text.substr(slash + 1));
}

dtsi::StaticExpr instantiate_point(const dtsi::ModelFile& m, std::size_t i, const std::string& def) {
  if (i >= m.sweep_size()) throw ArgError("sweep point out of range");
  return m.instantiate(m.sweep_point(i), def);
}

std::size_t copy_out(const std::vector<double>& v, double* buf, std::size_t cap) {
  if (buf)
    for (std::size_t i = 0; i < v.size() && i < cap; ++i) buf[i] = v[i];
  return v.size();
}

nlohmann::json vec_json(const std::vector<double>& v) {
  auto r = nlohmann::json::array();
  for (double x : v) r.push_back(std::isinf(x) ? nlohmann::json("inf") : nlohmann::json(x));
  return r;
}

nlohmann::json mat_json(const dtsi::Matrix& m) {
  auto r = nlohmann::json::array();
  for (long i = 0; i < m.rows(); ++i) {
    auto row = nlohmann::json::array();
    for (long j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    r.push_back(row);
  }
  return r;
}

}  // namespace

extern "C" {

const char* dtsi_last_error(void) { return g_error.c_str(); }
void dtsi_string_free(char* s) { std::free(s); }
const char* dtsi_version(void) { return "1.0.0"; }

dtsi_status dtsi_model_load(const char* path, dtsi_model** out) {
  return guard([&] {
    need(path, "path");
    need(out, "output handle");
    *out = new dtsi_model{dtsi::load_model(path)};
  });
}

dtsi_status dtsi_model_parse(const char* text, dtsi_model** out) {
  return guard([&] {
    need(text, "text");
    need(out, "output handle");
    *out = new dtsi_model{dtsi::parse_model(text)};
  });
}

void dtsi_model_free(dtsi_model* m) { delete m; }

dtsi_status dtsi_model_bind(dtsi_model* m, const char* spec) {
  return guard([&] {
    need(m, "model");
    need(spec, "binding");
    const std::string s = spec;
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw dtsi::InputError("binding '" + s + "' is not name=value");
    const std::string name = s.substr(0, eq), value = s.substr(eq + 1);
    if (value.find(':') == std::string::npos) {
      m->file.bind(name, parse_value(value));
      return;
    }
    const auto c1 = value.find(':'), c2 = value.find(':', c1 + 1);
    if (c2 == std::string::npos) throw dtsi::InputError("range '" + value + "' is not start:stop:step");
    dtsi::Grid g{parse_value(value.substr(0, c1)), parse_value(value.substr(c1 + 1, c2 - c1 - 1)),
                 parse_value(value.substr(c2 + 1))};
    if (!(g.step > 0) || g.stop < g.start) throw dtsi::InputError("range '" + value + "' is empty or has no step");
    m->file.bind_range(name, g);
  });
}

dtsi_status dtsi_model_info(const dtsi_model* m, char** json) {
  return guard([&] {
    need(m, "model");
    nlohmann::json j;
    j["params"] = nlohmann::json::array();
    for (const auto& p : m->file.params()) {
      nlohmann::json e = {{"name", p.name}};
      if (p.value) e["value"] = *p.value;
      if (p.range) e["range"] = p.range->str();
      j["params"].push_back(e);
    }
    j["definitions"] = m->file.definitions();
    j["states"] = nlohmann::json::array();
    for (const auto& [n, path] : m->file.states()) j["states"].push_back({{"name", n}, {"path", path}});
    j["indices"] = nlohmann::json::array();
    for (const auto& [n, e] : m->file.indices()) j["indices"].push_back({{"name", n}, {"expr", e}});
    put(json, j.dump(2) + "\n");
  });
}

dtsi_status dtsi_model_sweep_count(const dtsi_model* m, size_t* n) {
  return guard([&] {
    need(m, "model");
    need(n, "output");
    *n = m->file.sweep_size();
  });
}

dtsi_status dtsi_model_sweep_point(const dtsi_model* m, size_t i, char** json) {
  return guard([&] {
    need(m, "model");
    if (i >= m->file.sweep_size()) throw ArgError("sweep point out of range");
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [k, v] : m->file.sweep_point(i)) j[k] = v;
    put(json, j.dump());
  });
}

dtsi_status dtsi_model_expression(const dtsi_model* m, const char* definition, char** text) {
  return guard([&] {
    need(m, "model");
    put(text, dtsi::serialize(m->file.instantiate(def_name(definition))));
  });
}

dtsi_status dtsi_ts_build(const dtsi_model* m, const char* definition, size_t max_states, dtsi_ts** out) {
  return guard([&] {
    need(m, "model");
    need(out, "output handle");
    dtsi::BuildOptions opt;
    if (max_states) opt.max_states = max_states;
    auto ts = dtsi::build_ts(m->file.instantiate(def_name(definition)), opt);
    *out = new dtsi_ts{std::move(ts), def_name(definition)};
  });
}

dtsi_status dtsi_ts_build_point(const dtsi_model* m, const char* definition, size_t i, size_t max_states,
                                dtsi_ts** out) {
  return guard([&] {
    need(m, "model");
    need(out, "output handle");
    dtsi::BuildOptions opt;
    if (max_states) opt.max_states = max_states;
    auto ts = dtsi::build_ts(instantiate_point(m->file, i, def_name(definition)), opt);
    *out = new dtsi_ts{std::move(ts), def_name(definition)};
  });
}

dtsi_status dtsi_ts_at_point(const dtsi_ts* base, const dtsi_model* m, size_t i, dtsi_ts** out) {
  return guard([&] {
    need(base, "transition system");
    need(m, "model");
    need(out, "output handle");
    auto ts = base->ts.with_values(instantiate_point(m->file, i, base->definition));
    *out = new dtsi_ts{std::move(ts), base->definition};
  });
}

void dtsi_ts_free(dtsi_ts* ts) { delete ts; }

dtsi_status dtsi_ts_size(const dtsi_ts* ts, size_t* states, size_t* tangible) {
  return guard([&] {
    need(ts, "transition system");
    if (states) *states = ts->ts.size();
    if (tangible) *tangible = ts->ts.tangible_count();
  });
}

dtsi_status dtsi_ts_export(const dtsi_ts* ts, dtsi_format fmt, char** out) {
  return guard([&] {
    need(ts, "transition system");
    switch (fmt) {
      case DTSI_FORMAT_JSON: put(out, ts->ts.to_json(true)); break;
      case DTSI_FORMAT_DOT: put(out, ts->ts.to_dot()); break;
      case DTSI_FORMAT_CSV: {
        std::string r = "source,step,probability,target\n";
        for (const auto& t : ts->ts.transitions)
          r += std::to_string(t.source + 1) + ",\"{" + dtsi::multiaction_label(*ts->ts.pool, ts->ts.step_of(t)) +
               "}\"," + dtsi::format_number(t.prob) + "," + std::to_string(t.target + 1) + "\n";
        put(out, r);
        break;
      }
      default: throw ArgError("unknown format");
    }
  });
}

dtsi_status dtsi_net_build(const dtsi_model* m, const char* definition, dtsi_net** out) {
  return guard([&] {
    need(m, "model");
    need(out, "output handle");
    *out = new dtsi_net{dtsi::box_of(m->file.instantiate(def_name(definition)))};
  });
}

void dtsi_net_free(dtsi_net* n) { delete n; }

dtsi_status dtsi_net_size(const dtsi_net* n, size_t* places, size_t* transitions) {
  return guard([&] {
    need(n, "net");
    if (places) *places = n->box.places.size();
    if (transitions) *transitions = n->box.transitions.size();
  });
}

dtsi_status dtsi_net_export(const dtsi_net* n, dtsi_format fmt, char** out) {
  return guard([&] {
    need(n, "net");
    if (fmt == DTSI_FORMAT_JSON)
      put(out, n->box.to_json());
    else if (fmt == DTSI_FORMAT_DOT)
      put(out, n->box.to_dot());
    else
      throw ArgError("nets export as json or dot");
  });
}

dtsi_status dtsi_rg_build(const dtsi_net* n, size_t max_markings, dtsi_rg** out) {
  return guard([&] {
    need(n, "net");
    need(out, "output handle");
    auto box = std::make_shared<const dtsi::DtsiBox>(n->box);
    auto rg = dtsi::build_rg(*box, max_markings ? max_markings : 100000);
    *out = new dtsi_rg{std::move(box), std::move(rg)};
  });
}

void dtsi_rg_free(dtsi_rg* rg) { delete rg; }

dtsi_status dtsi_rg_size(const dtsi_rg* rg, size_t* markings, size_t* tangible) {
  return guard([&] {
    need(rg, "reachability graph");
    if (markings) *markings = rg->rg.size();
    if (tangible) *tangible = static_cast<size_t>(std::count(rg->rg.tangible.begin(), rg->rg.tangible.end(), true));
  });
}

dtsi_status dtsi_rg_export(const dtsi_rg* rg, dtsi_format fmt, char** out) {
  return guard([&] {
    need(rg, "reachability graph");
    if (fmt == DTSI_FORMAT_JSON)
      put(out, rg->rg.to_json(*rg->box));
    else if (fmt == DTSI_FORMAT_DOT)
      put(out, rg->rg.to_dot(*rg->box));
    else
      throw ArgError("reachability graphs export as json or dot");
  });
}

dtsi_status dtsi_rg_check(const dtsi_rg* rg, int* safe, int* clean, char** message) {
  return guard([&] {
    need(rg, "reachability graph");
    auto rep = dtsi::check_safe_clean(*rg->box, rg->rg);
    if (safe) *safe = rep.safe;
    if (clean) *clean = rep.clean;
    if (message) *message = rep.message.empty() ? nullptr : dup(rep.message);
  });
}

dtsi_status dtsi_check_iso(const dtsi_ts* ts, const dtsi_rg* rg, double tol, int* isomorphic, char** mapping) {
  return guard([&] {
    need(ts, "transition system");
    need(rg, "reachability graph");
    need(isomorphic, "output");
    auto iso = dtsi::isomorphic(dtsi::graph_of(ts->ts), dtsi::graph_of(*rg->box, rg->rg), tol > 0 ? tol : 1e-9);
    *isomorphic = iso.has_value();
    if (mapping) {
      if (iso) {
        auto j = nlohmann::json::array();
        for (int k : *iso) j.push_back(k + 1);
        *mapping = dup(j.dump());
      } else {
        *mapping = nullptr;
      }
    }
  });
}

dtsi_status dtsi_solve(const dtsi_ts* ts, dtsi_solution** out) {
  return guard([&] {
    need(ts, "transition system");
    need(out, "output handle");
    auto* s = new dtsi_solution{dtsi::chain_of(ts->ts), {}};
    try {
      s->sol = dtsi::solve(s->chain);
    } catch (...) {
      delete s;
      throw;
    }
    *out = s;
  });
}

dtsi_status dtsi_quotient_build(const dtsi_ts* ts, double tol, dtsi_quotient** out) {
  return guard([&] {
    need(ts, "transition system");
    need(out, "output handle");
    *out = new dtsi_quotient{dtsi::quotient(dtsi::chain_of(ts->ts), tol > 0 ? tol : 1e-9)};
  });
}

void dtsi_quotient_free(dtsi_quotient* q) { delete q; }

dtsi_status dtsi_quotient_blocks(const dtsi_quotient* q, size_t* blocks) {
  return guard([&] {
    need(q, "quotient");
    need(blocks, "output");
    *blocks = static_cast<size_t>(q->q.partition.size());
  });
}

dtsi_status dtsi_quotient_export(const dtsi_quotient* q, dtsi_format fmt, char** out) {
  return guard([&] {
    need(q, "quotient");
    if (fmt == DTSI_FORMAT_JSON)
      put(out, dtsi::quotient_json(q->q));
    else if (fmt == DTSI_FORMAT_CSV)
      put(out, dtsi::blocks_csv(q->q));
    else
      throw ArgError("quotients export as json or csv");
  });
}

dtsi_status dtsi_quotient_solve(const dtsi_quotient* q, dtsi_solution** out) {
  return guard([&] {
    need(q, "quotient");
    need(out, "output handle");
    auto* s = new dtsi_solution{q->q.chain, {}};
    try {
      s->sol = dtsi::solve(s->chain);
    } catch (...) {
      delete s;
      throw;
    }
    *out = s;
  });
}

void dtsi_solution_free(dtsi_solution* s) { delete s; }

dtsi_status dtsi_solution_size(const dtsi_solution* s, size_t* states) {
  return guard([&] {
    need(s, "solution");
    need(states, "output");
    *states = static_cast<size_t>(s->chain.size());
  });
}

dtsi_status dtsi_solution_vector(const dtsi_solution* s, dtsi_vector which, double* buf, size_t cap, size_t* n) {
  return guard([&] {
    need(s, "solution");
    const std::vector<double>* v = nullptr;
    switch (which) {
      case DTSI_VEC_SJ: v = &s->sol.soj.sj; break;
      case DTSI_VEC_VAR: v = &s->sol.soj.var; break;
      case DTSI_VEC_PSI_STAR: v = &s->sol.psi_star.pmf; break;
      case DTSI_VEC_PSI: v = &s->sol.psi.pmf; break;
      case DTSI_VEC_PHI: v = &s->sol.phi; break;
      case DTSI_VEC_PHI_DIRECT: v = &s->sol.phi_direct; break;
      default: throw ArgError("unknown vector");
    }
    const std::size_t len = copy_out(*v, buf, cap);
    if (n) *n = len;
  });
}

dtsi_status dtsi_solution_matrix(const dtsi_solution* s, dtsi_matrix which, double* buf, size_t cap, size_t* n) {
  return guard([&] {
    need(s, "solution");
    const dtsi::Matrix* m = nullptr;
    if (which == DTSI_MAT_PM)
      m = &s->sol.p;
    else if (which == DTSI_MAT_P_STAR)
      m = &s->sol.pstar;
    else
      throw ArgError("unknown matrix");
    std::vector<double> flat;
    for (long i = 0; i < m->rows(); ++i)
      for (long j = 0; j < m->cols(); ++j) flat.push_back((*m)(i, j));
    const std::size_t len = copy_out(flat, buf, cap);
    if (n) *n = len;
  });
}

dtsi_status dtsi_solution_period(const dtsi_solution* s, int* period) {
  return guard([&] {
    need(s, "solution");
    need(period, "output");
    *period = s->sol.psi_star.period;
  });
}

dtsi_status dtsi_solution_export(const dtsi_solution* s, dtsi_format fmt, char** out) {
  return guard([&] {
    need(s, "solution");
    if (fmt == DTSI_FORMAT_CSV) {
      put(out, dtsi::solution_csv(s->chain, s->sol));
      return;
    }
    if (fmt != DTSI_FORMAT_JSON) throw ArgError("solutions export as json or csv");
    nlohmann::json j;
    j["states"] = nlohmann::json::array();
    for (int k = 0; k < s->chain.size(); ++k)
      j["states"].push_back({{"id", k + 1}, {"key", s->chain.names[k]}, {"kind", s->chain.tangible[k] ? "tangible" : "vanishing"}});
    j["sj"] = vec_json(s->sol.soj.sj);
    j["var"] = vec_json(s->sol.soj.var);
    j["P"] = mat_json(s->sol.p);
    j["P_star"] = mat_json(s->sol.pstar);
    j["psi"] = vec_json(s->sol.psi.pmf);
    j["psi_star"] = vec_json(s->sol.psi_star.pmf);
    j["phi"] = vec_json(s->sol.phi);
    j["embedded_period"] = s->sol.psi_star.period;
    j["limiting"] = s->sol.psi.period == 1;
    j["route_gap"] = s->sol.route_gap;
    put(out, j.dump(2) + "\n");
  });
}

dtsi_status dtsi_solution_index(const dtsi_solution* s, const dtsi_model* m, const char* expr, double* value) {
  return guard([&] {
    need(s, "solution");
    need(expr, "index");
    need(value, "output");
    std::string e = expr;
    std::vector<std::pair<std::string, std::string>> named;
    if (m) {
      named = m->file.states();
      for (const auto& [n, x] : m->file.indices())
        if (n == e) e = x;
    }
    dtsi::IndexEvaluator ev(s->chain, s->sol, named);
    *value = ev.eval(e);
  });
}

dtsi_status dtsi_solution_trace(const dtsi_solution* s, size_t state, const char* trace, double* value) {
  return guard([&] {
    need(s, "solution");
    need(trace, "trace");
    need(value, "output");
    if (state < 1 || state > static_cast<size_t>(s->chain.size())) throw ArgError("state out of range");
    std::vector<dtsi::StepLabel> steps;
    std::string t = trace, cur;
    if (t.find_first_not_of(" \t") != std::string::npos) {
      int depth = 0;
      for (char ch : t + "/") {
        if (ch == '{') ++depth;
        if (ch == '}') --depth;
        if (ch == '/' && depth == 0) {
          steps.push_back(dtsi::parse_step_label(cur));
          cur.clear();
        } else {
          cur += ch;
        }
      }
    }
    *value = dtsi::trace_prob(s->chain, static_cast<int>(state) - 1, steps);
  });
}

dtsi_status dtsi_equivalent(const dtsi_ts* a, const dtsi_ts* b, double tol, int* equivalent, char** partition) {
  return guard([&] {
    need(a, "transition system");
    need(b, "transition system");
    need(equivalent, "output");
    auto r = dtsi::bisim_equivalent(dtsi::chain_of(a->ts), dtsi::chain_of(b->ts), tol > 0 ? tol : 1e-9);
    *equivalent = r.equivalent;
    if (partition) {
      auto j = nlohmann::json::array();
      for (const auto& blk : r.partition.blocks) {
        auto members = nlohmann::json::array();
        for (int st : blk) members.push_back(st + 1);
        j.push_back(members);
      }
      *partition = dup(j.dump());
    }
  });
}

}  // extern "C"
