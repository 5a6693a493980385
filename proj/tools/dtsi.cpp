#include <dtsi/dtsi.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

namespace {

struct Failure {
  int code;
  std::string message;
};

int exit_code(dtsi_status s) {
  switch (s) {
    case DTSI_OK: return 0;
    case DTSI_E_INPUT:
    case DTSI_E_ARG: return 2;
    default: return 1;
  }
}

void check(dtsi_status s) {
  if (s != DTSI_OK) throw Failure{exit_code(s), dtsi_last_error()};
}

std::string take(char* s) {
  std::string r = s ? s : "";
  dtsi_string_free(s);
  return r;
}

template <class T, void (*Free)(T*)>
struct Freer {
  void operator()(T* p) const { Free(p); }
};
using Model = std::unique_ptr<dtsi_model, Freer<dtsi_model, dtsi_model_free>>;
using Ts = std::unique_ptr<dtsi_ts, Freer<dtsi_ts, dtsi_ts_free>>;
using Net = std::unique_ptr<dtsi_net, Freer<dtsi_net, dtsi_net_free>>;
using Rg = std::unique_ptr<dtsi_rg, Freer<dtsi_rg, dtsi_rg_free>>;
using Quot = std::unique_ptr<dtsi_quotient, Freer<dtsi_quotient, dtsi_quotient_free>>;
using Sol = std::unique_ptr<dtsi_solution, Freer<dtsi_solution, dtsi_solution_free>>;

struct Options {
  std::string model;
  std::vector<std::string> params;
  double tol = 1e-9;
  std::size_t max_states = 100000;
  std::string format = "json";
  std::string out;
  std::vector<std::string> indices;
  bool use_quotient = false;
  bool per_point = false;
  unsigned jobs = 0;
  std::string against, left, right;
};

dtsi_format format_of(const std::string& f) {
  if (f == "json") return DTSI_FORMAT_JSON;
  if (f == "csv") return DTSI_FORMAT_CSV;
  if (f == "dot") return DTSI_FORMAT_DOT;
  throw Failure{2, "unknown format '" + f + "'"};
}

std::string extension(dtsi_format f) {
  return f == DTSI_FORMAT_JSON ? ".json" : f == DTSI_FORMAT_CSV ? ".csv" : ".dot";
}

// Writes to OUT/name when an output directory is set, else to stdout.
void emit(const Options& o, const std::string& name, const std::string& content) {
  if (o.out.empty()) {
    std::cout << content;
    if (!content.empty() && content.back() != '\n') std::cout << '\n';
    return;
  }
  const auto path = std::filesystem::path(o.out) / name;
  std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  f << content;
  if (!f) throw Failure{2, "cannot write " + path.string()};
  std::cerr << "wrote " << path.string() << "\n";
}

Model load(const Options& o, const std::string& path) {
  dtsi_model* m = nullptr;
  check(dtsi_model_load(path.c_str(), &m));
  Model r(m);
  for (const auto& p : o.params) check(dtsi_model_bind(r.get(), p.c_str()));
  return r;
}

Ts build_ts(const Options& o, const dtsi_model* m, const std::string& def = "") {
  dtsi_ts* t = nullptr;
  check(dtsi_ts_build(m, def.empty() ? nullptr : def.c_str(), o.max_states, &t));
  return Ts(t);
}

Rg build_rg(const Options& o, const dtsi_model* m, Net& net) {
  dtsi_net* n = nullptr;
  check(dtsi_net_build(m, nullptr, &n));
  net.reset(n);
  dtsi_rg* g = nullptr;
  check(dtsi_rg_build(n, o.max_states, &g));
  return Rg(g);
}

Sol solve(const Options& o, const dtsi_ts* ts) {
  dtsi_solution* s = nullptr;
  if (o.use_quotient) {
    dtsi_quotient* q = nullptr;
    check(dtsi_quotient_build(ts, o.tol, &q));
    Quot guard(q);
    check(dtsi_quotient_solve(q, &s));
  } else {
    check(dtsi_solve(ts, &s));
  }
  return Sol(s);
}

// Requested indices, or every index the model defines.
std::vector<std::string> index_list(const Options& o, const dtsi_model* m) {
  if (!o.indices.empty()) return o.indices;
  char* info = nullptr;
  check(dtsi_model_info(m, &info));
  std::vector<std::string> r;
  for (const auto& e : nlohmann::json::parse(take(info))["indices"]) r.push_back(e["name"]);
  return r;
}

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

int cmd_ts(const Options& o) {
  auto m = load(o, o.model);
  auto ts = build_ts(o, m.get());
  const auto f = format_of(o.format);
  char* s = nullptr;
  check(dtsi_ts_export(ts.get(), f, &s));
  emit(o, "ts" + extension(f), take(s));
  std::size_t n = 0, t = 0;
  check(dtsi_ts_size(ts.get(), &n, &t));
  std::cerr << n << " states (" << t << " tangible, " << n - t << " vanishing)\n";
  return 0;
}

int cmd_box(const Options& o) {
  auto m = load(o, o.model);
  dtsi_net* n = nullptr;
  check(dtsi_net_build(m.get(), nullptr, &n));
  Net net(n);
  const auto f = format_of(o.format);
  char* s = nullptr;
  check(dtsi_net_export(n, f, &s));
  emit(o, "box" + extension(f), take(s));
  std::size_t p = 0, t = 0;
  check(dtsi_net_size(n, &p, &t));
  std::cerr << p << " places, " << t << " transitions\n";
  return 0;
}

int cmd_rg(const Options& o) {
  auto m = load(o, o.model);
  Net net;
  auto rg = build_rg(o, m.get(), net);
  const auto f = format_of(o.format);
  char* s = nullptr;
  check(dtsi_rg_export(rg.get(), f, &s));
  emit(o, "rg" + extension(f), take(s));
  int safe = 0, clean = 0;
  char* msg = nullptr;
  check(dtsi_rg_check(rg.get(), &safe, &clean, &msg));
  std::size_t k = 0;
  check(dtsi_rg_size(rg.get(), &k, nullptr));
  std::cerr << k << " markings, " << (safe ? "safe" : "not safe") << ", " << (clean ? "clean" : "not clean") << "\n";
  if (msg) std::cerr << take(msg) << "\n";
  return safe && clean ? 0 : 1;
}

int cmd_checkiso(const Options& o) {
  auto m = load(o, o.model);
  auto ts = build_ts(o, m.get());
  Net net;
  auto rg = build_rg(o, m.get(), net);
  int iso = 0, safe = 0, clean = 0;
  char* mapping = nullptr;
  char* msg = nullptr;
  check(dtsi_check_iso(ts.get(), rg.get(), o.tol, &iso, &mapping));
  check(dtsi_rg_check(rg.get(), &safe, &clean, &msg));
  std::size_t n = 0, k = 0;
  check(dtsi_ts_size(ts.get(), &n, nullptr));
  check(dtsi_rg_size(rg.get(), &k, nullptr));
  nlohmann::json j = {{"isomorphic", iso != 0}, {"ts_states", n}, {"rg_markings", k}, {"safe", safe != 0}, {"clean", clean != 0}};
  if (mapping) j["mapping"] = nlohmann::json::parse(take(mapping));
  if (msg) j["diagnostic"] = take(msg);
  emit(o, "checkiso.json", j.dump(2) + "\n");
  std::cerr << (iso ? "isomorphic: " : "not isomorphic: ") << n << " states vs " << k << " markings\n";
  return iso && safe && clean ? 0 : 1;
}

nlohmann::json index_values(const std::vector<std::string>& names, const dtsi_solution* s, const dtsi_model* m) {
  nlohmann::json r = nlohmann::json::object();
  for (const auto& n : names) {
    double v = 0;
    check(dtsi_solution_index(s, m, n.c_str(), &v));
    r[n] = v;
  }
  return r;
}

int cmd_solve(const Options& o) {
  auto m = load(o, o.model);
  auto ts = build_ts(o, m.get());
  auto sol = solve(o, ts.get());
  const auto names = index_list(o, m.get());
  const auto idx = index_values(names, sol.get(), m.get());
  const auto f = format_of(o.format);
  char* s = nullptr;
  if (f == DTSI_FORMAT_CSV) {
    check(dtsi_solution_export(sol.get(), DTSI_FORMAT_CSV, &s));
    std::string ic = "index,value\n";
    for (const auto& n : names) ic += "\"" + n + "\"," + num(idx[n].get<double>()) + "\n";
    if (o.out.empty()) {
      emit(o, "", take(s) + "\n" + ic);
    } else {
      emit(o, "solution.csv", take(s));
      emit(o, "indices.csv", ic);
    }
  } else {
    check(dtsi_solution_export(sol.get(), DTSI_FORMAT_JSON, &s));
    auto j = nlohmann::json::parse(take(s));
    j["indices"] = idx;
    j["quotient"] = o.use_quotient;
    emit(o, "solution.json", j.dump(2) + "\n");
  }
  int period = 1;
  check(dtsi_solution_period(sol.get(), &period));
  if (period > 1) std::cerr << "note: embedded chain has period " << period << "; stationary but not limiting\n";
  for (const auto& n : names) std::cerr << n << " = " << num(idx[n].get<double>()) << "\n";
  return 0;
}

int cmd_quotient(const Options& o) {
  auto m = load(o, o.model);
  auto ts = build_ts(o, m.get());
  dtsi_quotient* q = nullptr;
  check(dtsi_quotient_build(ts.get(), o.tol, &q));
  Quot quot(q);
  std::size_t blocks = 0;
  check(dtsi_quotient_blocks(q, &blocks));
  char* s = nullptr;
  check(dtsi_quotient_export(q, DTSI_FORMAT_JSON, &s));
  auto j = nlohmann::json::parse(take(s));
  dtsi_solution* sp = nullptr;
  const dtsi_status st = dtsi_quotient_solve(q, &sp);
  Sol sol(sp);
  if (st == DTSI_OK) {
    check(dtsi_solution_export(sp, DTSI_FORMAT_JSON, &s));
    j["solution"] = nlohmann::json::parse(take(s));
  } else {
    j["solution_error"] = dtsi_last_error();
  }
  if (format_of(o.format) == DTSI_FORMAT_CSV) {
    check(dtsi_quotient_export(q, DTSI_FORMAT_CSV, &s));
    std::string out = take(s);
    if (sol) {
      check(dtsi_solution_export(sp, DTSI_FORMAT_CSV, &s));
      if (o.out.empty()) {
        out += "\n" + take(s);
      } else {
        emit(o, "quotient_solution.csv", take(s));
      }
    }
    emit(o, "blocks.csv", out);
  } else {
    emit(o, "quotient.json", j.dump(2) + "\n");
  }
  std::cerr << blocks << " blocks\n";
  return st == DTSI_OK ? 0 : exit_code(st);
}

int cmd_equiv(const Options& o) {
  auto m = load(o, o.model);
  Model other;
  const dtsi_model* mb = m.get();
  if (!o.against.empty()) {
    other = load(o, o.against);
    mb = other.get();
  }
  if (mb == m.get() && o.left == o.right)
    std::cerr << "note: comparing an expression with itself\n";
  auto a = build_ts(o, m.get(), o.left);
  auto b = build_ts(o, mb, o.right);
  int eq = 0;
  char* part = nullptr;
  check(dtsi_equivalent(a.get(), b.get(), o.tol, &eq, &part));
  std::size_t na = 0;
  check(dtsi_ts_size(a.get(), &na, nullptr));
  nlohmann::json j = {{"equivalent", eq != 0}, {"left_states", na}, {"blocks", nlohmann::json::parse(take(part))}};
  emit(o, "equiv.json", j.dump(2) + "\n");
  std::cerr << (eq ? "equivalent" : "not equivalent") << "\n";
  return eq ? 0 : 1;
}

int cmd_sweep(const Options& o) {
  auto m = load(o, o.model);
  if (o.per_point && o.out.empty()) throw Failure{2, "--per-point needs --out"};
  std::size_t points = 0;
  check(dtsi_model_sweep_count(m.get(), &points));
  if (points == 0) throw Failure{2, "empty sweep"};
  dtsi_ts* bt = nullptr;
  check(dtsi_ts_build_point(m.get(), nullptr, 0, o.max_states, &bt));
  Ts base(bt);
  const auto names = index_list(o, m.get());
  if (names.empty()) throw Failure{2, "no indices: pass --index or define some in the model"};

  std::vector<std::vector<double>> values(points, std::vector<double>(names.size(), std::nan("")));
  std::vector<std::string> errors(points);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < points; i = next++) {
      try {
        dtsi_ts* t = nullptr;
        check(dtsi_ts_at_point(base.get(), m.get(), i, &t));
        Ts ts(t);
        auto sol = solve(o, ts.get());
        for (std::size_t k = 0; k < names.size(); ++k)
          check(dtsi_solution_index(sol.get(), m.get(), names[k].c_str(), &values[i][k]));
        if (o.per_point) {
          char* s = nullptr;
          check(dtsi_solution_export(sol.get(), DTSI_FORMAT_CSV, &s));
          char buf[32];
          std::snprintf(buf, sizeof buf, "points/point_%06zu.csv", i + 1);
          emit(o, buf, take(s));
        }
      } catch (const Failure& f) {
        errors[i] = f.message;
      }
    }
  };
  unsigned jobs = o.jobs ? o.jobs : std::max(1u, std::thread::hardware_concurrency());
  jobs = static_cast<unsigned>(std::min<std::size_t>(jobs, std::max<std::size_t>(points, 1)));
  std::vector<std::thread> pool;
  for (unsigned k = 1; k < jobs; ++k) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::vector<nlohmann::json> bindings(points);
  std::vector<std::string> pnames;
  for (std::size_t i = 0; i < points; ++i) {
    char* s = nullptr;
    check(dtsi_model_sweep_point(m.get(), i, &s));
    bindings[i] = nlohmann::json::parse(take(s));
  }
  char* info = nullptr;
  check(dtsi_model_info(m.get(), &info));
  const auto params = nlohmann::json::parse(take(info))["params"];
  std::vector<std::string> swept;
  for (const auto& p : params) {
    pnames.push_back(p["name"]);
    if (p.contains("range")) swept.push_back(p["name"]);
  }
  auto where = [&](std::size_t i) {
    std::string r;
    for (const auto& p : swept) r += (r.empty() ? "" : ", ") + p + "=" + num(bindings[i][p].get<double>());
    return r;
  };

  std::string header;
  for (const auto& p : params)
    if (p.contains("range")) header += "# grid " + p["name"].get<std::string>() + " = " + p["range"].get<std::string>() + "\n";
  if (o.use_quotient) header += "# solved on the quotient by step stochastic bisimulation\n";
  std::string extrema = "index,kind,value,at\n";
  for (std::size_t k = 0; k < names.size(); ++k) {
    std::size_t lo = points, hi = points;
    for (std::size_t i = 0; i < points; ++i) {
      const double v = values[i][k];
      if (std::isnan(v)) continue;
      if (lo == points || v < values[lo][k]) lo = i;
      if (hi == points || v > values[hi][k]) hi = i;
    }
    if (lo == points) continue;
    header += "# min " + names[k] + " = " + num(values[lo][k]) + " at " + where(lo) + "\n";
    header += "# max " + names[k] + " = " + num(values[hi][k]) + " at " + where(hi) + "\n";
    extrema += "\"" + names[k] + "\",min," + num(values[lo][k]) + ",\"" + where(lo) + "\"\n";
    extrema += "\"" + names[k] + "\",max," + num(values[hi][k]) + ",\"" + where(hi) + "\"\n";
  }
  std::string csv;
  for (std::size_t p = 0; p < pnames.size(); ++p) csv += (p ? "," : "") + pnames[p];
  for (const auto& n : names) csv += ",\"" + n + "\"";
  csv += "\n";
  for (std::size_t i = 0; i < points; ++i) {
    for (std::size_t p = 0; p < pnames.size(); ++p) csv += (p ? "," : "") + num(bindings[i][pnames[p]].get<double>());
    for (double v : values[i]) csv += "," + num(v);
    csv += "\n";
  }
  emit(o, "sweep.csv", header + csv);
  if (!o.out.empty()) {
    emit(o, "extrema.csv", extrema);
    std::cout << header;
  }
  const auto failed = static_cast<std::size_t>(std::count_if(errors.begin(), errors.end(), [](const auto& e) { return !e.empty(); }));
  if (failed) {
    const auto first = std::find_if(errors.begin(), errors.end(), [](const auto& e) { return !e.empty(); });
    std::cerr << failed << " of " << points << " points failed; first: " << *first << "\n";
    return failed == points ? 1 : 0;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dtsi: step semantics, nets and Markov analysis of dtsi process terms"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* c) {
    c->add_option("model", o.model, "model file")->required();
    c->add_option("--param", o.params, "binding name=value or name=start:stop:step")->take_all();
    c->add_option("--tol", o.tol, "probability tolerance")->check(CLI::PositiveNumber);
    c->add_option("--max-states", o.max_states, "state space cap")->check(CLI::PositiveNumber);
    c->add_option("--format", o.format, "json, csv or dot")->check(CLI::IsMember({"json", "csv", "dot"}));
    c->add_option("--out", o.out, "output directory");
  };
  std::map<CLI::App*, int (*)(const Options&)> run;
  auto sub = [&](const char* name, const char* help, int (*fn)(const Options&)) {
    auto* c = app.add_subcommand(name, help);
    common(c);
    run[c] = fn;
    return c;
  };
  sub("ts", "build the transition system", cmd_ts);
  sub("box", "build the dtsi-box", cmd_box);
  sub("rg", "build the reachability graph of the box", cmd_rg);
  sub("checkiso", "check the transition system against the reachability graph", cmd_checkiso);
  auto* solve_c = sub("solve", "solve the underlying chains and evaluate indices", cmd_solve);
  solve_c->add_option("--index", o.indices, "index name or expression")->take_all();
  solve_c->add_flag("--quotient", o.use_quotient, "solve the bisimulation quotient");
  sub("quotient", "reduce by step stochastic bisimulation", cmd_quotient);
  auto* sweep_c = sub("sweep", "evaluate indices over a parameter grid", cmd_sweep);
  sweep_c->add_option("--index", o.indices, "index name or expression")->take_all();
  sweep_c->add_flag("--quotient", o.use_quotient, "solve the bisimulation quotient at each point");
  sweep_c->add_flag("--per-point", o.per_point, "write one per-state CSV per grid point");
  sweep_c->add_option("--jobs", o.jobs, "worker threads (default: hardware threads)");
  auto* equiv_c = sub("equiv", "decide step stochastic bisimulation equivalence", cmd_equiv);
  equiv_c->add_option("--against", o.against, "second model file (default: the same file)");
  equiv_c->add_option("--left", o.left, "definition used on the left (default: root)");
  equiv_c->add_option("--right", o.right, "definition used on the right (default: root)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  try {
    for (auto& [c, fn] : run)
      if (c->parsed()) return fn(o);
  } catch (const Failure& f) {
    std::cerr << "error: " << f.message << "\n";
    return f.code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
