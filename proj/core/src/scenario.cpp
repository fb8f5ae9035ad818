#include "wviab/scenario.hpp"

#include <cmath>
#include <set>

#include "json.hpp"

#include "wviab/errors.hpp"
#include "wviab/io.hpp"
#include "wviab/rng.hpp"

namespace wviab {

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::set<std::string>& allowed,
                const char* where) {
  for (const auto& item : j.items())
    if (!allowed.contains(item.key()))
      throw ParseError(std::string("unknown key '") + item.key() + "' in " +
                       where);
}

double need_number(const json& j, const char* key, const char* where) {
  if (!j.contains(key))
    throw ParseError(std::string(where) + " needs '" + key + "'");
  const json& v = j.at(key);
  if (!v.is_number())
    throw ParseError(std::string(where) + " field '" + key +
                     "' must be a number");
  return v.get<double>();
}

double opt_number(const json& j, const char* key, double fallback,
                  const char* where) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_number())
    throw ParseError(std::string(where) + " field '" + key +
                     "' must be a number");
  return v.get<double>();
}

std::vector<double> number_list(const json& v, const char* what) {
  if (!v.is_array())
    throw ParseError(std::string(what) + " must be an array of numbers");
  std::vector<double> out;
  out.reserve(v.size());
  for (const json& x : v) {
    if (!x.is_number())
      throw ParseError(std::string(what) + " must be an array of numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

EmpiricalMeasure measure_from(const json& j, const char* where) {
  if (!j.is_object())
    throw ParseError(std::string(where) + " must be a measure object");
  return measure_from_json(j.dump());
}

FieldSpec field_from(const json& j, const char* where) {
  if (!j.is_object())
    throw ParseError(std::string(where) + " must be an object");
  check_keys(j,
             {"kind", "name", "b", "A", "lambda", "target", "kernel", "kappa",
              "sigma"},
             where);
  FieldSpec spec;
  if (!j.contains("kind") || !j.at("kind").is_string())
    throw ParseError(std::string(where) + " needs a string 'kind'");
  spec.kind = j.at("kind").get<std::string>();
  if (j.contains("name")) {
    if (!j.at("name").is_string())
      throw ParseError(std::string(where) + " field 'name' must be a string");
    spec.name = j.at("name").get<std::string>();
  }
  if (j.contains("b")) spec.b = number_list(j.at("b"), "field 'b'");
  if (j.contains("target"))
    spec.target = number_list(j.at("target"), "field 'target'");
  if (j.contains("A")) {
    const json& a = j.at("A");
    if (!a.is_array())
      throw ParseError("field 'A' must be an array of rows");
    for (const json& row : a)
      spec.A.push_back(number_list(row, "field 'A' row"));
  }
  spec.lambda = opt_number(j, "lambda", spec.lambda, where);
  spec.kappa = opt_number(j, "kappa", spec.kappa, where);
  spec.sigma = opt_number(j, "sigma", spec.sigma, where);
  if (j.contains("kernel")) {
    if (!j.at("kernel").is_string())
      throw ParseError(std::string(where) + " field 'kernel' must be a string");
    spec.kernel = j.at("kernel").get<std::string>();
  }
  return spec;
}

ConstraintSpec constraint_from(const json& j) {
  if (!j.is_object())
    throw ParseError("'constraint' must be an object");
  check_keys(j, {"type", "params"}, "'constraint'");
  ConstraintSpec spec;
  if (!j.contains("type") || !j.at("type").is_string())
    throw ParseError("'constraint' needs a string 'type'");
  spec.type = j.at("type").get<std::string>();
  if (j.contains("params")) {
    const json& p = j.at("params");
    if (!p.is_object())
      throw ParseError("'constraint.params' must be an object");
    check_keys(p, {"level", "target"}, "'constraint.params'");
    spec.level = opt_number(p, "level", spec.level, "'constraint.params'");
    if (p.contains("target"))
      spec.target = number_list(p.at("target"), "constraint target");
  }
  return spec;
}

LyapunovSpec lyapunov_from(const json& j) {
  if (!j.is_object())
    throw ParseError("'lyapunov' must be an object");
  check_keys(j, {"type", "rho", "target"}, "'lyapunov'");
  LyapunovSpec spec;
  if (!j.contains("type") || !j.at("type").is_string())
    throw ParseError("'lyapunov' needs a string 'type'");
  spec.type = j.at("type").get<std::string>();
  spec.rho = need_number(j, "rho", "'lyapunov'");
  if (j.contains("target"))
    spec.target = measure_from(j.at("target"), "'lyapunov.target'");
  return spec;
}

}  // namespace

const EmpiricalMeasure& Scenario::initial() const {
  if (!mu0) throw ValidationError("scenario carries no initial measure");
  return *mu0;
}

int Scenario::dim() const { return initial().dim(); }

Scenario scenario_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("scenario JSON: ") + e.what());
  }
  if (!j.is_object()) throw ParseError("scenario must be a JSON object");
  check_keys(j,
             {"dynamics", "mu0", "horizon", "dt", "selection_depth", "seed",
              "constraint", "lyapunov", "reference", "mu_track", "out_prefix"},
             "scenario");

  Scenario sc;
  sc.input_hash = fnv1a64_hex(text.data(), text.size());

  if (!j.contains("dynamics") || !j.at("dynamics").is_object())
    throw ParseError("scenario needs a 'dynamics' object");
  const json& dyn = j.at("dynamics");
  check_keys(dyn, {"family", "M", "Lambda", "L"}, "'dynamics'");
  if (!dyn.contains("family") || !dyn.at("family").is_array() ||
      dyn.at("family").empty())
    throw ParseError("'dynamics' needs a nonempty 'family' array");
  for (const json& entry : dyn.at("family"))
    sc.family.push_back(field_from(entry, "family entry"));
  sc.growth = opt_number(dyn, "M", -1.0, "'dynamics'");
  sc.lipschitz_x = opt_number(dyn, "Lambda", -1.0, "'dynamics'");
  sc.lipschitz_measure = opt_number(dyn, "L", -1.0, "'dynamics'");

  if (!j.contains("mu0"))
    throw ParseError("scenario needs 'mu0'");
  sc.mu0 = measure_from(j.at("mu0"), "'mu0'");

  sc.horizon = opt_number(j, "horizon", sc.horizon, "scenario");
  sc.dt = opt_number(j, "dt", sc.dt, "scenario");
  const double depth = opt_number(j, "selection_depth",
                                  static_cast<double>(sc.selection_depth),
                                  "scenario");
  if (depth != std::floor(depth) || depth < 0.0 || depth > 16.0)
    throw ValidationError("'selection_depth' must be an integer in [0, 16]");
  sc.selection_depth = static_cast<int>(depth);
  if (j.contains("seed")) {
    const json& s = j.at("seed");
    if (!s.is_number_unsigned())
      throw ParseError("'seed' must be a nonnegative integer");
    sc.seed = s.get<std::uint64_t>();
  }
  if (j.contains("constraint")) sc.constraint = constraint_from(j.at("constraint"));
  if (j.contains("lyapunov")) sc.lyapunov = lyapunov_from(j.at("lyapunov"));
  if (j.contains("reference"))
    sc.reference = field_from(j.at("reference"), "'reference'");
  if (j.contains("mu_track"))
    sc.mu_track = measure_from(j.at("mu_track"), "'mu_track'");
  if (j.contains("out_prefix")) {
    if (!j.at("out_prefix").is_string())
      throw ParseError("'out_prefix' must be a string");
    sc.out_prefix = j.at("out_prefix").get<std::string>();
  }

  if (!(sc.horizon > 0.0) || !std::isfinite(sc.horizon))
    throw ValidationError("'horizon' must be positive");
  if (!(sc.dt > 0.0) || !std::isfinite(sc.dt))
    throw ValidationError("'dt' must be positive");

  const int dim = sc.dim();
  double derived_lip = 0.0;
  for (const FieldSpec& spec : sc.family)
    derived_lip = std::max(derived_lip, field_constants(spec, dim).lipschitz_x);
  const double lip = sc.lipschitz_x >= 0.0 ? sc.lipschitz_x : derived_lip;
  if (lip > 0.0 && sc.dt > 1.0 / (2.0 * lip) + 1e-12)
    throw ValidationError("'dt' exceeds the stability limit 1/(2*Lambda)");

  if (sc.reference && !is_plain(*sc.reference))
    throw ValidationError("'reference' must be a measure-independent field");
  if (sc.reference) field_constants(*sc.reference, dim);
  if (sc.mu_track && sc.mu_track->dim() != dim)
    throw DimensionError("'mu_track' dimension differs from 'mu0'");
  if (sc.lyapunov && sc.lyapunov->target &&
      sc.lyapunov->target->dim() != dim)
    throw DimensionError("'lyapunov.target' dimension differs from 'mu0'");

  scenario_dynamics(sc);  // surfaces family/constant problems at load time
  if (sc.constraint) build_constraint(*sc.constraint, dim);
  if (sc.lyapunov) build_functional(*sc.lyapunov, dim);
  return sc;
}

Scenario load_scenario(const std::string& path) {
  try {
    return scenario_from_json(read_text_file(path));
  } catch (const ParseError& e) {
    throw ParseError(std::string(e.what()) + " (" + path + ")");
  }
}

SetValuedDynamics scenario_dynamics(const Scenario& scenario) {
  return build_dynamics(scenario.family, scenario.dim(), scenario.growth,
                        scenario.lipschitz_x, scenario.lipschitz_measure);
}

ConstraintSet build_constraint(const ConstraintSpec& spec, int dim) {
  if (spec.type == "m2_ball") return ConstraintSet::second_moment_ball(spec.level);
  if (spec.type == "variance_ball") return ConstraintSet::variance_ball(spec.level);
  if (spec.type == "mean_norm_ball")
    return ConstraintSet::mean_norm_ball(spec.level);
  if (spec.type == "mean_slice") {
    if (static_cast<int>(spec.target.size()) != dim)
      throw ValidationError(
          "mean_slice needs a 'target' vector matching the dimension");
    return ConstraintSet::mean_slice(spec.target);
  }
  if (spec.type == "epigraph")
    throw ValidationError(
        "epigraph constraints are built by the decay synthesis; give the "
        "scenario a 'lyapunov' entry instead");
  throw ValidationError("unknown constraint type '" + spec.type + "'");
}

LyapunovFunctional build_functional(const LyapunovSpec& spec, int dim) {
  if (!(spec.rho > 0.0) || !std::isfinite(spec.rho))
    throw ValidationError("'lyapunov.rho' must be positive");
  if (spec.type == "m2sq") return LyapunovFunctional::second_moment_sq();
  if (spec.type == "variance") return LyapunovFunctional::variance_fn();
  if (spec.type == "w2sq_to_target") {
    if (!spec.target)
      throw ValidationError("w2sq_to_target needs a 'target' measure");
    if (spec.target->dim() != dim)
      throw DimensionError("'lyapunov.target' dimension mismatch");
    return LyapunovFunctional::w2_sq_to_target(*spec.target);
  }
  throw ValidationError("unknown lyapunov type '" + spec.type + "'");
}

}  // namespace wviab
