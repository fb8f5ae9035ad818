#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "wviab/inclusions.hpp"
#include "wviab/lyapunov.hpp"
#include "wviab/measures.hpp"
#include "wviab/viability.hpp"

namespace wviab {

/// Shortest representation that round-trips the exact double, locale
/// independent. Negative zero renders as "0"; non-finite values throw
/// NumericalError (output files must stay clean).
std::string format_double(double v);

/// Twelve significant digits in fixed notation where reasonable
/// (5 -> "5.00000000000", 0 -> "0.00000000000"), scientific notation for
/// extreme magnitudes.
std::string format_sig12(double v);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

/// Measure JSON: {"dim": d, "points": [[...], ...], "weights": [...]} with
/// weights optional (uniform when absent).
EmpiricalMeasure measure_from_json(const std::string& text);
std::string measure_to_json(const EmpiricalMeasure& mu);
EmpiricalMeasure read_measure(const std::string& path);
void write_measure(const std::string& path, const EmpiricalMeasure& mu);

/// Plan JSON: {"pairs": [[i, j, mass], ...], "cost": c}.
std::string plan_to_json(const TransportPlan& plan);

/// Selection JSON: {"grid": [...], "controls": [[weights], ...]}.
std::string selection_to_json(const Selection& sel);
Selection selection_from_json(const std::string& text);

/// One row per (time, atom): t,atom_id,x_0..x_{d-1},weight.
std::string trajectory_csv(const MeasureTrajectory& traj);

/// One row per reference node: t,realized,mismatch,bound. The mismatch
/// column belongs to the interval starting at t; the final row leaves it
/// empty.
std::string tracking_csv(const TrackingResult& result);

/// One row per node: t,W,envelope,slack with slack = envelope - W.
std::string decay_csv(const DecayCertificate& cert);

/// One row per (sample, atom): sample_id,atom_id,x_0..x_{d-1},weight.
std::string reach_csv(const ReachableSample& sample);

std::string viability_json(const ViabilityReport& report);
std::string decay_json(const DecayCertificate& cert);
std::string reach_json(const ReachableSample& sample);

/// Record of one CLI run: what was read, what was written, under which
/// seed. wall_clock_ms < 0 omits the timing field (reproducible outputs).
struct RunManifest {
  std::string scenario_hash;
  std::string version;
  std::uint64_t seed = 0;
  double wall_clock_ms = -1.0;
  std::vector<std::string> outputs;
};

std::string manifest_to_json(const RunManifest& manifest);

}  // namespace wviab
