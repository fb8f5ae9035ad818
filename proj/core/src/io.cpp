#include "wviab/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "wviab/errors.hpp"

namespace wviab {

using nlohmann::json;

std::string format_double(double v) {
  if (!std::isfinite(v))
    throw NumericalError("refusing to format a non-finite value");
  if (v == 0.0) return "0";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string format_sig12(double v) {
  if (!std::isfinite(v))
    throw NumericalError("refusing to format a non-finite value");
  if (v == 0.0) return "0.00000000000";
  const double a = std::abs(v);
  int e = static_cast<int>(std::floor(std::log10(a)));
  // log10 can land a hair off a power of ten; settle e exactly.
  while (a >= std::pow(10.0, e + 1)) ++e;
  while (a < std::pow(10.0, e)) --e;
  if (e > 11 || e < -4) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.11e", v);
    return buf;
  }
  int decimals = 11 - e;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  // Rounding may have bumped the magnitude (0.99999... -> 1.0...): redo with
  // the decimals the rounded value calls for.
  const double back = std::strtod(buf, nullptr);
  const double ba = std::abs(back);
  if (ba != 0.0) {
    int e2 = static_cast<int>(std::floor(std::log10(ba)));
    while (ba >= std::pow(10.0, e2 + 1)) ++e2;
    while (ba < std::pow(10.0, e2)) --e2;
    if (e2 != e && e2 >= -4 && e2 <= 11) {
      decimals = 11 - e2;
      std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
    }
  }
  return buf;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ParseError("cannot write '" + path + "'");
  out << content;
  if (!out) throw ParseError("short write to '" + path + "'");
}

namespace {

json parse_json(const std::string& text, const char* what) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded())
    throw ParseError(std::string("malformed ") + what + " JSON");
  return j;
}

double number_at(const json& j, const char* what) {
  if (!j.is_number())
    throw ParseError(std::string(what) + " must be a number");
  return j.get<double>();
}

}  // namespace

EmpiricalMeasure measure_from_json(const std::string& text) {
  json j = parse_json(text, "measure");
  if (!j.is_object() || !j.contains("dim") || !j.contains("points"))
    throw ParseError("measure JSON needs 'dim' and 'points'");
  if (!j["dim"].is_number_integer())
    throw ParseError("measure 'dim' must be an integer");
  const int dim = j["dim"].get<int>();
  if (!j["points"].is_array() || j["points"].empty())
    throw ParseError("measure 'points' must be a nonempty array");

  std::vector<std::vector<double>> points;
  points.reserve(j["points"].size());
  for (const auto& row : j["points"]) {
    if (!row.is_array() || static_cast<int>(row.size()) != dim)
      throw ParseError("measure point does not match 'dim'");
    std::vector<double> p;
    p.reserve(row.size());
    for (const auto& c : row) p.push_back(number_at(c, "measure coordinate"));
    points.push_back(std::move(p));
  }
  std::vector<double> weights;
  if (j.contains("weights")) {
    if (!j["weights"].is_array() || j["weights"].size() != points.size())
      throw ParseError("measure 'weights' must match 'points'");
    for (const auto& w : j["weights"])
      weights.push_back(number_at(w, "measure weight"));
  }
  return EmpiricalMeasure::from_points(dim, points, std::move(weights));
}

std::string measure_to_json(const EmpiricalMeasure& mu) {
  json j;
  j["dim"] = mu.dim();
  json points = json::array();
  for (std::size_t i = 0; i < mu.size(); ++i) {
    json row = json::array();
    for (double c : mu.point(i)) row.push_back(c);
    points.push_back(std::move(row));
  }
  j["points"] = std::move(points);
  j["weights"] = mu.weights();
  return j.dump(2) + "\n";
}

EmpiricalMeasure read_measure(const std::string& path) {
  try {
    return measure_from_json(read_text_file(path));
  } catch (ParseError& e) {
    throw ParseError(std::string(e.what()) + " (" + path + ")");
  }
}

void write_measure(const std::string& path, const EmpiricalMeasure& mu) {
  write_text_file(path, measure_to_json(mu));
}

std::string plan_to_json(const TransportPlan& plan) {
  json j;
  json pairs = json::array();
  for (const PlanEntry& e : plan.entries)
    pairs.push_back(json::array({e.source, e.target, e.mass}));
  j["pairs"] = std::move(pairs);
  j["cost"] = plan.cost;
  j["optimal"] = plan.optimal;
  return j.dump(2) + "\n";
}

std::string selection_to_json(const Selection& sel) {
  json j;
  j["grid"] = sel.grid;
  json controls = json::array();
  for (const ControlMix& mix : sel.controls) controls.push_back(mix.weights);
  j["controls"] = std::move(controls);
  return j.dump(2) + "\n";
}

Selection selection_from_json(const std::string& text) {
  json j = parse_json(text, "selection");
  if (!j.is_object() || !j.contains("grid") || !j.contains("controls"))
    throw ParseError("selection JSON needs 'grid' and 'controls'");
  if (!j["grid"].is_array() || !j["controls"].is_array())
    throw ParseError("selection 'grid' and 'controls' must be arrays");
  Selection sel;
  for (const auto& g : j["grid"])
    sel.grid.push_back(number_at(g, "selection grid node"));
  for (const auto& row : j["controls"]) {
    if (!row.is_array()) throw ParseError("selection control must be an array");
    ControlMix mix;
    for (const auto& w : row)
      mix.weights.push_back(number_at(w, "selection control weight"));
    sel.controls.push_back(std::move(mix));
  }
  return sel;
}

namespace {

void csv_header(std::string& out, int dim, const char* lead,
                const char* tail) {
  out += lead;
  for (int c = 0; c < dim; ++c) {
    out += ",x_";
    out += std::to_string(c);
  }
  out += tail;
  out += '\n';
}

void measure_rows(std::string& out, const std::string& prefix,
                  const EmpiricalMeasure& mu) {
  for (std::size_t i = 0; i < mu.size(); ++i) {
    out += prefix;
    out += ',';
    out += std::to_string(i);
    for (double c : mu.point(i)) {
      out += ',';
      out += format_double(c);
    }
    out += ',';
    out += format_double(mu.weight(i));
    out += '\n';
  }
}

}  // namespace

std::string trajectory_csv(const MeasureTrajectory& traj) {
  if (traj.nodes() == 0)
    throw ValidationError("cannot serialize an empty trajectory");
  std::string out;
  csv_header(out, traj.state(0).dim(), "t,atom_id", ",weight");
  for (std::size_t k = 0; k < traj.nodes(); ++k)
    measure_rows(out, format_double(traj.time(k)), traj.state(k));
  return out;
}

std::string tracking_csv(const TrackingResult& result) {
  const MeasureTrajectory& traj = result.trajectory;
  if (traj.nodes() == 0)
    throw ValidationError("cannot serialize an empty tracking result");
  std::string out = "t,realized,mismatch,bound\n";
  for (std::size_t k = 0; k < traj.nodes(); ++k) {
    out += format_double(traj.time(k));
    out += ',';
    out += format_double(result.realized[k]);
    out += ',';
    if (k < result.mismatch.size()) out += format_double(result.mismatch[k]);
    out += ',';
    out += format_double(result.bound[k]);
    out += '\n';
  }
  return out;
}

std::string decay_csv(const DecayCertificate& cert) {
  const MeasureTrajectory& traj = cert.trajectory;
  if (traj.nodes() == 0)
    throw ValidationError("cannot serialize an empty certificate");
  std::string out = "t,W,envelope,slack\n";
  for (std::size_t k = 0; k < traj.nodes(); ++k) {
    out += format_double(traj.time(k));
    out += ',';
    out += format_double(cert.value[k]);
    out += ',';
    out += format_double(cert.envelope[k]);
    out += ',';
    out += format_double(cert.envelope[k] - cert.value[k]);
    out += '\n';
  }
  return out;
}

std::string reach_csv(const ReachableSample& sample) {
  if (sample.measures.empty())
    throw ValidationError("cannot serialize an empty reachable sample");
  std::string out;
  csv_header(out, sample.measures.front().dim(), "sample_id,atom_id",
             ",weight");
  // measure_rows writes atom ids itself, so prefix is just the sample id.
  for (std::size_t s = 0; s < sample.measures.size(); ++s)
    measure_rows(out, std::to_string(s), sample.measures[s]);
  return out;
}

std::string viability_json(const ViabilityReport& report) {
  json j;
  j["status"] = report.viable ? "viable" : "failed";
  j["tolerance"] = report.tolerance;
  j["worst"] = report.worst;
  long first_fail = -1;
  for (std::size_t k = 0; k < report.constraint_distance.size(); ++k)
    if (report.constraint_distance[k] > report.tolerance) {
      first_fail = static_cast<long>(k);
      break;
    }
  j["first_failing_node"] = first_fail;
  j["times"] = report.trajectory.times();
  j["g_values"] = report.constraint_distance;
  j["gronwall_margin"] = report.gronwall_margin;
  json controls = json::array();
  for (const ControlMix& mix : report.selection.controls)
    controls.push_back(mix.weights);
  j["controls"] = std::move(controls);
  return j.dump(2) + "\n";
}

std::string decay_json(const DecayCertificate& cert) {
  json j;
  j["certified"] = cert.certified;
  j["rho"] = cert.rho;
  j["tolerance"] = cert.tolerance;
  j["worst_excess"] = cert.worst_excess;
  j["times"] = cert.trajectory.times();
  j["W"] = cert.value;
  j["envelope"] = cert.envelope;
  j["lower_derivative"] = cert.lower_derivative;
  return j.dump(2) + "\n";
}

std::string reach_json(const ReachableSample& sample) {
  json j;
  j["time"] = sample.time;
  j["ball_radius"] = sample.ball_radius;
  j["count"] = sample.measures.size();
  return j.dump(2) + "\n";
}

std::string manifest_to_json(const RunManifest& manifest) {
  json j;
  j["scenario_hash"] = manifest.scenario_hash;
  j["version"] = manifest.version;
  j["seed"] = manifest.seed;
  if (manifest.wall_clock_ms >= 0.0)
    j["wall_clock_ms"] = manifest.wall_clock_ms;
  j["outputs"] = manifest.outputs;
  return j.dump(2) + "\n";
}

}  // namespace wviab
