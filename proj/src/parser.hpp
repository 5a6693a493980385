#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "expr.hpp"

namespace dtsi {

struct Syn;  // unresolved syntax tree; parameters and names still symbolic

// Inclusive numeric grid start, start+step, ..., up to stop.
struct Grid {
  double start = 0, stop = 0, step = 1;
  std::vector<double> points() const;
  std::string str() const;
};

struct ParamDecl {
  std::string name;
  std::optional<double> value;
  std::optional<Grid> range;
};

class ModelFile {
 public:
  const std::vector<ParamDecl>& params() const { return params_; }
  // Named state selectors and index definitions, kept as source text.
  const std::vector<std::pair<std::string, std::string>>& states() const { return states_; }
  const std::vector<std::pair<std::string, std::string>>& indices() const { return indices_; }
  std::vector<std::string> definitions() const;
  bool has_definition(const std::string& name) const { return defs_.count(name) != 0; }

  void bind(const std::string& name, double value);
  void bind_range(const std::string& name, const Grid& g);

  // Current scalar bindings; throws InputError if a parameter only has a range.
  std::map<std::string, double> bindings() const;
  // Cartesian product over ranged parameters (others fixed).
  std::vector<std::map<std::string, double>> sweep_points() const;
  std::size_t sweep_size() const;
  std::map<std::string, double> sweep_point(std::size_t i) const;  // i-th entry of sweep_points()

  // Root (or named definition) with the given bindings. Checks regularity.
  StaticExpr instantiate(const std::map<std::string, double>& b, const std::string& name = "") const;
  StaticExpr instantiate(const std::string& name = "") const { return instantiate(bindings(), name); }

 private:
  friend class Parser;
  std::vector<ParamDecl> params_;
  std::map<std::string, std::shared_ptr<Syn>> defs_;
  std::shared_ptr<Syn> root_;
  std::vector<std::pair<std::string, std::string>> states_;
  std::vector<std::pair<std::string, std::string>> indices_;
};

ModelFile parse_model(const std::string& text);
ModelFile load_model(const std::string& path);

// A bare expression; names may refer to the given parameters only.
StaticExpr parse_static(const std::string& text, const std::map<std::string, double>& params = {});
DynamicExpr parse_dynamic(const std::string& text, const std::map<std::string, double>& params = {});

std::string serialize(const StaticExpr& e);
std::string serialize(const DynamicExpr& g);
// Subtree at node n, with the bars that fall inside it.
std::string serialize(const StaticExpr& e, const Bars& bars, int n);

}  // namespace dtsi
