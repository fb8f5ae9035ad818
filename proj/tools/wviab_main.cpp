#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "wviab/errors.hpp"
#include "wviab/flows.hpp"
#include "wviab/inclusions.hpp"
#include "wviab/io.hpp"
#include "wviab/lyapunov.hpp"
#include "wviab/measures.hpp"
#include "wviab/parallel.hpp"
#include "wviab/registry.hpp"
#include "wviab/rng.hpp"
#include "wviab/scenario.hpp"
#include "wviab/selftest.hpp"
#include "wviab/version.hpp"
#include "wviab/viability.hpp"

namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

/// Literal path first, then relative to $WVIAB_FIXTURES.
std::string resolve_input(const std::string& path) {
  if (fs::exists(path)) return path;
  if (const char* root = std::getenv("WVIAB_FIXTURES")) {
    const fs::path alt = fs::path(root) / path;
    if (fs::exists(alt)) return alt.string();
  }
  throw wviab::ParseError("cannot find input file '" + path + "'");
}

struct Overrides {
  std::string scenario_path;
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  bool seed_set = false;
  int depth = -1;
  double dt = 0.0;
};

void add_scenario_options(CLI::App* cmd, Overrides& ov) {
  cmd->add_option("--scenario", ov.scenario_path, "scenario JSON file")
      ->required();
  cmd->add_option("--out", ov.out_dir, "output directory (default .)");
  cmd->add_option("--seed", ov.seed, "override the scenario seed")
      ->each([&ov](const std::string&) { ov.seed_set = true; });
  cmd->add_option("--depth", ov.depth, "override the selection depth");
  cmd->add_option("--dt", ov.dt, "override the integrator step");
}

wviab::Scenario load_with_overrides(const Overrides& ov) {
  wviab::Scenario sc = wviab::load_scenario(resolve_input(ov.scenario_path));
  if (ov.seed_set) sc.seed = ov.seed;
  if (ov.depth >= 0) {
    if (ov.depth > 16)
      throw wviab::ValidationError("--depth must be in [0, 16]");
    sc.selection_depth = ov.depth;
  }
  if (ov.dt != 0.0) {
    if (!(ov.dt > 0.0))
      throw wviab::ValidationError("--dt must be positive");
    sc.dt = ov.dt;
    const double lip = wviab::scenario_dynamics(sc).lipschitz_x();
    if (lip > 0.0 && sc.dt > 1.0 / (2.0 * lip) + 1e-12)
      throw wviab::ValidationError(
          "--dt exceeds the stability limit 1/(2*Lambda)");
  }
  return sc;
}

/// Writes the named payloads plus a manifest listing them.
void write_outputs(const Overrides& ov, const wviab::Scenario& sc,
                   std::vector<std::pair<std::string, std::string>> files,
                   double wall_ms) {
  fs::create_directories(ov.out_dir);
  wviab::RunManifest manifest;
  manifest.scenario_hash = sc.input_hash;
  manifest.version = wviab::kVersion;
  manifest.seed = sc.seed;
  manifest.wall_clock_ms = wall_ms;
  for (auto& [name, text] : files) {
    wviab::write_text_file(ov.out_dir + "/" + name, text);
    manifest.outputs.push_back(name);
  }
  const std::string mname = sc.out_prefix + "_manifest.json";
  manifest.outputs.push_back(mname);
  wviab::write_text_file(ov.out_dir + "/" + mname,
                         wviab::manifest_to_json(manifest));
  for (const std::string& name : manifest.outputs)
    std::cout << ov.out_dir << "/" << name << "\n";
}

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start)
      .count();
}

int run_w2(const std::string& file_a, const std::string& file_b,
           const std::string& out_dir) {
  const wviab::EmpiricalMeasure mu = wviab::read_measure(resolve_input(file_a));
  const wviab::EmpiricalMeasure nu = wviab::read_measure(resolve_input(file_b));
  const wviab::W2Result res = wviab::wasserstein2(mu, nu);
  std::cout << wviab::format_sig12(res.distance) << "\n";
  fs::create_directories(out_dir);
  wviab::write_text_file(out_dir + "/w2_plan.json",
                         wviab::plan_to_json(res.plan));
  return 0;
}

int run_simulate(const Overrides& ov) {
  const auto start = Clock::now();
  const wviab::Scenario sc = load_with_overrides(ov);
  const wviab::SetValuedDynamics dyn = wviab::scenario_dynamics(sc);
  wviab::Selection sel;
  if (dyn.family_size() == 1) {
    sel = wviab::Selection::constant(0.0, sc.horizon,
                                     wviab::ControlMix::pure(0, 1));
  } else {
    wviab::Rng rng = wviab::Rng::stream(sc.seed, 0);
    sel = wviab::Selection::random_dyadic(0.0, sc.horizon, sc.selection_depth,
                                          dyn.family_size(), rng);
  }
  const wviab::MeasureTrajectory traj =
      wviab::solve_selection(dyn, sel, sc.initial(), sc.dt);
  std::vector<std::pair<std::string, std::string>> files;
  files.emplace_back(sc.out_prefix + "_trajectory.csv",
                     wviab::trajectory_csv(traj));
  files.emplace_back(sc.out_prefix + "_selection.json",
                     wviab::selection_to_json(sel));
  write_outputs(ov, sc, std::move(files), ms_since(start));
  return 0;
}

int run_filippov(const Overrides& ov) {
  const auto start = Clock::now();
  const wviab::Scenario sc = load_with_overrides(ov);
  const wviab::SetValuedDynamics dyn = wviab::scenario_dynamics(sc);
  const wviab::FieldSpec w_spec =
      sc.reference ? *sc.reference : sc.family.front();
  if (!wviab::is_plain(w_spec))
    throw wviab::ValidationError(
        "the tracking reference must be a measure-independent field");
  const wviab::VelocityField w = wviab::build_plain_field(w_spec, sc.dim());
  const std::size_t pieces = std::size_t{1} << sc.selection_depth;
  std::vector<double> grid(pieces + 1);
  for (std::size_t i = 0; i <= pieces; ++i)
    grid[i] = i == pieces
                  ? sc.horizon
                  : sc.horizon * (static_cast<double>(i) /
                                  static_cast<double>(pieces));
  const wviab::MeasureTrajectory ref =
      wviab::solve_continuity_on_grid(w, grid, sc.initial(), sc.dt);
  const wviab::EmpiricalMeasure mu_track =
      sc.mu_track ? *sc.mu_track : sc.initial();
  const wviab::TrackingResult tr =
      wviab::filippov_track(dyn, ref, w, mu_track, sc.dt);
  std::vector<std::pair<std::string, std::string>> files;
  files.emplace_back(sc.out_prefix + "_tracking.csv", wviab::tracking_csv(tr));
  write_outputs(ov, sc, std::move(files), ms_since(start));
  return 0;
}

int run_reach(const Overrides& ov) {
  const auto start = Clock::now();
  const wviab::Scenario sc = load_with_overrides(ov);
  const wviab::SetValuedDynamics dyn = wviab::scenario_dynamics(sc);
  const wviab::ReachableSample sample = wviab::reachable_sample(
      dyn, sc.initial(), sc.horizon, 32, sc.dt, sc.seed, sc.selection_depth);
  std::vector<std::pair<std::string, std::string>> files;
  files.emplace_back(sc.out_prefix + "_reach.csv", wviab::reach_csv(sample));
  files.emplace_back(sc.out_prefix + "_reach.json", wviab::reach_json(sample));
  write_outputs(ov, sc, std::move(files), ms_since(start));
  return 0;
}

int run_viable(const Overrides& ov) {
  const auto start = Clock::now();
  const wviab::Scenario sc = load_with_overrides(ov);
  if (!sc.constraint)
    throw wviab::ValidationError("scenario has no 'constraint' entry");
  const wviab::SetValuedDynamics dyn = wviab::scenario_dynamics(sc);
  const wviab::ConstraintSet constraint =
      wviab::build_constraint(*sc.constraint, sc.dim());
  wviab::ViabilityOptions opts;
  opts.depth = sc.selection_depth;
  const wviab::ViabilityReport report = wviab::viable_trajectory(
      dyn, constraint, sc.initial(), sc.horizon, sc.dt, opts);
  std::vector<std::pair<std::string, std::string>> files;
  files.emplace_back(sc.out_prefix + "_viability.json",
                     wviab::viability_json(report));
  files.emplace_back(sc.out_prefix + "_viable_trajectory.csv",
                     wviab::trajectory_csv(report.trajectory));
  write_outputs(ov, sc, std::move(files), ms_since(start));
  return report.viable ? 0 : 5;
}

int run_lyapunov(const Overrides& ov) {
  const auto start = Clock::now();
  const wviab::Scenario sc = load_with_overrides(ov);
  if (!sc.lyapunov)
    throw wviab::ValidationError("scenario has no 'lyapunov' entry");
  const wviab::SetValuedDynamics dyn = wviab::scenario_dynamics(sc);
  const wviab::LyapunovFunctional V =
      wviab::build_functional(*sc.lyapunov, sc.dim());
  wviab::DecayOptions opts;
  opts.depth_per_window = std::max(1, sc.selection_depth);
  const wviab::DecayCertificate cert = wviab::stable_trajectory(
      dyn, V, sc.lyapunov->rho, sc.initial(), sc.horizon, sc.dt, opts);
  std::vector<std::pair<std::string, std::string>> files;
  files.emplace_back(sc.out_prefix + "_decay.csv", wviab::decay_csv(cert));
  files.emplace_back(sc.out_prefix + "_decay.json", wviab::decay_json(cert));
  write_outputs(ov, sc, std::move(files), ms_since(start));
  return cert.certified ? 0 : 6;
}

int run_selftest_cmd(const std::string& out_dir, std::uint64_t seed) {
  const wviab::SelftestResult res = wviab::run_selftest(out_dir, seed);
  for (const std::string& line : res.lines) std::cout << line << "\n";
  std::cout << (9 - res.failures) << " of 9 criteria passed\n";
  return res.failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "particle toolkit: exact transport, characteristic flows, tracking, "
      "viability and decay certificates"};
  app.set_version_flag("--version", std::string(wviab::kVersion));
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads,
                 "worker thread cap (0 = hardware parallelism)");

  std::string w2_a, w2_b, w2_out = ".";
  CLI::App* w2 = app.add_subcommand(
      "w2", "exact 2-Wasserstein distance between two measure files");
  w2->add_option("a", w2_a, "first measure JSON")->required();
  w2->add_option("b", w2_b, "second measure JSON")->required();
  w2->add_option("--out", w2_out, "output directory for the plan");

  Overrides sim_ov, fil_ov, reach_ov, via_ov, lya_ov;
  CLI::App* sim = app.add_subcommand(
      "simulate", "integrate the scenario's selection and write the "
                  "trajectory");
  add_scenario_options(sim, sim_ov);
  CLI::App* fil = app.add_subcommand(
      "filippov", "track a reference curve and report distance vs bound");
  add_scenario_options(fil, fil_ov);
  CLI::App* reach = app.add_subcommand(
      "reach", "sample endpoints attainable under random selections");
  add_scenario_options(reach, reach_ov);
  CLI::App* via = app.add_subcommand(
      "viable", "synthesize a trajectory staying inside the constraint");
  add_scenario_options(via, via_ov);
  CLI::App* lya = app.add_subcommand(
      "lyapunov", "synthesize a trajectory certified against the decay "
                  "envelope");
  add_scenario_options(lya, lya_ov);

  std::string st_out = "selftest_out";
  std::uint64_t st_seed = 1;
  CLI::App* st = app.add_subcommand("selftest", "run the acceptance battery");
  st->add_option("--out", st_out, "artifact directory");
  st->add_option("--seed", st_seed, "seed for the battery");

  try {
    app.parse(argc, argv);
    if (threads > 0) wviab::set_max_threads(threads);
    if (w2->parsed()) return run_w2(w2_a, w2_b, w2_out);
    if (sim->parsed()) return run_simulate(sim_ov);
    if (fil->parsed()) return run_filippov(fil_ov);
    if (reach->parsed()) return run_reach(reach_ov);
    if (via->parsed()) return run_viable(via_ov);
    if (lya->parsed()) return run_lyapunov(lya_ov);
    if (st->parsed()) return run_selftest_cmd(st_out, st_seed);
    return 1;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const wviab::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const wviab::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const wviab::ControlGridMismatch& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const wviab::BaseMismatchError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const wviab::DomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const wviab::DimensionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const wviab::NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const wviab::NotInConstraint& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 5;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
