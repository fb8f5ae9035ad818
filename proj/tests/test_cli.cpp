#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "wviab/version.hpp"

// The harness drives the installed binary exactly the way a user would:
// through a shell, with fixtures resolved via WVIAB_FIXTURES.

namespace {

namespace fs = std::filesystem;

fs::path work_dir() {
  static const fs::path dir = [] {
    const fs::path d = fs::path(WVIAB_CLI_WORK_DIR);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

int run_cli(const std::string& args, std::string* output = nullptr) {
  static int counter = 0;
  const fs::path capture = work_dir() / ("capture_" + std::to_string(counter++));
  const std::string cmd = std::string("WVIAB_FIXTURES='") + WVIAB_FIXTURES_DIR +
                          "' '" + WVIAB_CLI_PATH + "' " + args + " > '" +
                          capture.string() + "' 2>&1";
  const int raw = std::system(cmd.c_str());
  if (output != nullptr) *output = read_file(capture);
  REQUIRE(WIFEXITED(raw));
  return WEXITSTATUS(raw);
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::istringstream in(read_file(p));
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(std::move(cells));
  }
  return rows;
}

}  // namespace

TEST_CASE("the version flag reports the library version") {
  std::string out;
  CHECK(run_cli("--version", &out) == 0);
  CHECK(out == std::string(wviab::kVersion) + "\n");
}

TEST_CASE("distances print with twelve significant digits") {
  const fs::path dir = work_dir() / "w2";
  fs::create_directories(dir);
  write_file(dir / "origin.json", R"({"dim": 2, "points": [[0.0, 0.0]]})");
  write_file(dir / "far.json", R"({"dim": 2, "points": [[3.0, 4.0]]})");

  std::string out;
  CHECK(run_cli("w2 '" + (dir / "origin.json").string() + "' '" +
                    (dir / "far.json").string() + "' --out '" + dir.string() +
                    "'",
                &out) == 0);
  CHECK(out == "5.00000000000\n");
  CHECK(read_file(dir / "w2_plan.json").find("\"cost\"") != std::string::npos);

  CHECK(run_cli("w2 half01.json dirac1.json --out '" + dir.string() + "'",
                &out) == 0);
  CHECK(out == "1.00000000000\n");

  CHECK(run_cli("w2 half01.json half01.json --out '" + dir.string() + "'",
                &out) == 0);
  CHECK(out == "0.00000000000\n");
}

TEST_CASE("exit codes separate the failure families") {
  const fs::path dir = work_dir() / "codes";
  fs::create_directories(dir);

  CHECK(run_cli("") == 2);  // a subcommand is required

  write_file(dir / "unknown_key.json", R"({
  "dynamics": {"family": [{"kind": "zero"}]},
  "mu0": {"dim": 1, "points": [[0.0]]},
  "horizon": 1.0,
  "dt": 0.01,
  "bogus": 3
})");
  CHECK(run_cli("simulate --scenario '" + (dir / "unknown_key.json").string() +
                "' --out '" + dir.string() + "'") == 2);

  CHECK(run_cli("simulate --scenario no_such_file.json") == 2);

  write_file(dir / "plane.json", R"({"dim": 2, "points": [[0.0, 0.0]]})");
  CHECK(run_cli("w2 '" + (dir / "plane.json").string() +
                "' dirac1.json --out '" + dir.string() + "'") == 3);

  // stiff linear dynamics pass validation but overflow mid-run
  write_file(dir / "stiff.json", R"({
  "dynamics": {"family": [{"kind": "linear", "A": [[150.0]]}]},
  "mu0": {"dim": 1, "points": [[1.0]]},
  "horizon": 5.0,
  "dt": 0.003
})");
  CHECK(run_cli("simulate --scenario '" + (dir / "stiff.json").string() +
                "' --out '" + dir.string() + "'") == 4);

  CHECK(run_cli("viable --scenario viable_escape.json --out '" +
                (dir / "escape").string() + "'") == 5);

  CHECK(run_cli("lyapunov --scenario lyap_ambitious.json --out '" +
                (dir / "ambitious").string() + "'") == 6);
}

TEST_CASE("zero dynamics freeze every trajectory row") {
  const fs::path dir = work_dir() / "still";
  CHECK(run_cli("simulate --scenario zero.json --out '" + dir.string() + "'") ==
        0);
  const auto rows = read_csv(dir / "still_trajectory.csv");
  REQUIRE(rows.size() > 1);
  // map atom -> the row cells past the time column; all times must agree
  std::map<std::string, std::vector<std::string>> first;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const std::vector<std::string>& row = rows[r];
    REQUIRE(row.size() >= 4);
    const std::vector<std::string> tail(row.begin() + 1, row.end());
    const auto [it, inserted] = first.emplace(row[1], tail);
    if (!inserted) CHECK(it->second == tail);
  }
  CHECK(first.size() == 3);  // three atoms in the fixture
  CHECK(fs::exists(dir / "still_manifest.json"));
}

TEST_CASE("the attraction scenario contracts its second moment") {
  const fs::path dir = work_dir() / "pull";
  CHECK(run_cli("simulate --scenario simulate.json --out '" + dir.string() +
                "'") == 0);
  const auto rows = read_csv(dir / "pull_trajectory.csv");
  REQUIRE(rows.size() > 1);
  const std::string t0 = rows[1][0];
  const std::string t1 = rows.back()[0];
  auto m2_at = [&](const std::string& t) {
    double sum = 0.0;
    for (std::size_t r = 1; r < rows.size(); ++r) {
      if (rows[r][0] != t) continue;
      const double x = std::stod(rows[r][2]);
      const double y = std::stod(rows[r][3]);
      const double w = std::stod(rows[r][4]);
      sum += w * (x * x + y * y);
    }
    return std::sqrt(sum);
  };
  const double ratio = m2_at(t1) / m2_at(t0);
  CHECK(std::abs(ratio - std::exp(-1.0)) <= 1e-4);
}

TEST_CASE("reruns are byte identical, thread cap included") {
  const fs::path a = work_dir() / "det_a";
  const fs::path b = work_dir() / "det_b";
  const fs::path c = work_dir() / "det_c";
  CHECK(run_cli("simulate --scenario simulate.json --out '" + a.string() +
                "'") == 0);
  CHECK(run_cli("simulate --scenario simulate.json --out '" + b.string() +
                "'") == 0);
  CHECK(run_cli("--threads 1 simulate --scenario simulate.json --out '" +
                c.string() + "'") == 0);
  for (const char* name : {"pull_trajectory.csv", "pull_selection.json"}) {
    const std::string base = read_file(a / name);
    CHECK(read_file(b / name) == base);
    CHECK(read_file(c / name) == base);
  }

  const fs::path ra = work_dir() / "reach_a";
  const fs::path rb = work_dir() / "reach_b";
  CHECK(run_cli("reach --scenario reach.json --out '" + ra.string() + "'") ==
        0);
  CHECK(run_cli("reach --scenario reach.json --out '" + rb.string() + "'") ==
        0);
  for (const char* name : {"sweep_reach.csv", "sweep_reach.json"}) {
    CHECK(read_file(ra / name) == read_file(rb / name));
  }
}

TEST_CASE("tracking output stays under its certified bound") {
  const fs::path dir = work_dir() / "track";
  CHECK(run_cli("filippov --scenario tracking.json --out '" + dir.string() +
                "'") == 0);
  const auto rows = read_csv(dir / "track_tracking.csv");
  REQUIRE(rows.size() > 2);
  CHECK(rows[0] == std::vector<std::string>{"t", "realized", "mismatch",
                                            "bound"});
  for (std::size_t r = 1; r < rows.size(); ++r) {
    REQUIRE(rows[r].size() == 4);
    CHECK(std::stod(rows[r][1]) <= std::stod(rows[r][3]) + 1e-6);
  }
}

TEST_CASE("the feasible ball scenario is viable even at depth zero") {
  const fs::path deep = work_dir() / "ball_deep";
  const fs::path flat = work_dir() / "ball_flat";
  CHECK(run_cli("viable --scenario viable_ball.json --out '" + deep.string() +
                "'") == 0);
  CHECK(fs::exists(deep / "ball_viability.json"));
  CHECK(fs::exists(deep / "ball_viable_trajectory.csv"));
  CHECK(run_cli("viable --scenario viable_ball.json --depth 0 --out '" +
                flat.string() + "'") == 0);
}

TEST_CASE("a measure at the target certifies decay with zero slack") {
  const fs::path dir = work_dir() / "lyap_still";
  CHECK(run_cli("lyapunov --scenario lyap_still.json --out '" + dir.string() +
                "'") == 0);
  const auto rows = read_csv(dir / "still_decay.csv");
  REQUIRE(rows.size() > 1);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    CHECK(std::abs(std::stod(rows[r][1])) <= 1e-12);
  }
}

TEST_CASE("decay certification succeeds on the attainable rate") {
  const fs::path dir = work_dir() / "contract";
  CHECK(run_cli("lyapunov --scenario lyap_contraction.json --out '" +
                dir.string() + "'") == 0);
  const auto rows = read_csv(dir / "contract_decay.csv");
  REQUIRE(rows.size() > 2);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const double value = std::stod(rows[r][1]);
    const double envelope = std::stod(rows[r][2]);
    CHECK(value <= envelope + 1e-3 * std::max(1.0, std::stod(rows[1][1])));
  }
}

TEST_CASE("the selftest battery passes and regenerates byte-identically") {
  const fs::path a = work_dir() / "selftest_a";
  const fs::path b = work_dir() / "selftest_b";
  std::string out;
  CHECK(run_cli("selftest --out '" + a.string() + "'", &out) == 0);
  CHECK(out.find("9 of 9 criteria passed") != std::string::npos);
  CHECK(run_cli("selftest --out '" + b.string() + "'") == 0);
  std::size_t compared = 0;
  for (const auto& entry : fs::directory_iterator(a)) {
    const fs::path name = entry.path().filename();
    CHECK(read_file(a / name) == read_file(b / name));
    ++compared;
  }
  CHECK(compared == 9);
}

TEST_CASE("scenario overrides are validated before running") {
  const fs::path dir = work_dir() / "overrides";
  CHECK(run_cli("simulate --scenario simulate.json --depth 40 --out '" +
                dir.string() + "'") == 2);
  CHECK(run_cli("simulate --scenario simulate.json --dt 2.0 --out '" +
                dir.string() + "'") == 2);  // above the stability limit
  CHECK(run_cli("simulate --scenario simulate.json --dt 0.02 --seed 7 --out '" +
                dir.string() + "'") == 0);
}
