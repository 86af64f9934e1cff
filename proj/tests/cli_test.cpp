#include <doctest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

namespace {

namespace fs = std::filesystem;

int run(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " " + FRAGKILL_CLI + " " + args + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void spit(const std::string& path, const std::string& text) { std::ofstream(path, std::ios::binary) << text; }

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(cells);
  }
  return rows;
}

}  // namespace

TEST_CASE("compute reports the spectral constants") {
  spit("cli_binary.json", R"({"measure":{"atoms":[{"w":1.0,"s":[0.5,0.5]}]},"scale":{"p":1,"h":0.01,"x_max":2}})");
  REQUIRE(run("compute --config cli_binary.json --out cli_compute.json") == 0);
  const auto out = nlohmann::json::parse(slurp("cli_compute.json"));
  CHECK(std::abs(out["p_bar"].get<double>() - 1.421342879534) < 1e-9);
  CHECK(std::abs(out["c_p_bar"].get<double>() - 0.258796632081) < 1e-11);
  CHECK(out["kappa"].get<double>() == 0.0);
  CHECK(out["rho"].get<double>() == 1.0);
  CHECK(out["phi"].size() == 4);
  CHECK(out["scale"].size() == 201);
  CHECK(fs::exists("cli_compute.json.manifest.json"));
  CHECK_FALSE(fs::exists("cli_compute.json.tmp"));
}

TEST_CASE("compute failures map to exit codes") {
  spit("cli_malformed.json", "{\n \"c\": 1,\n}");
  CHECK(run("compute --config cli_malformed.json --out cli_x.json") == 1);
  spit("cli_slow.json", R"({"c":0.1,"scale":{"p":1}})");
  CHECK(run("compute --config cli_slow.json --out cli_x.json") == 2);
  CHECK(run("compute --config does_not_exist.json --out cli_x.json") == 1);
  CHECK(run("compute --out cli_x.json") == 1);
}

TEST_CASE("simulate writes a trajectory within the block-count bound") {
  spit("cli_sim.json", R"({"x":1,"horizon":15,"c_factor":2})");
  REQUIRE(run("simulate --config cli_sim.json --out cli_sim.csv --seed 11") == 0);
  const auto rows = parse_csv(slurp("cli_sim.csv"));
  REQUIRE(rows.size() == 102);
  CHECK(rows[0] == std::vector<std::string>{"t", "N", "log_lambda1", "total_mass", "extinct", "zeta"});
  const auto manifest = nlohmann::json::parse(slurp("cli_sim.csv.manifest.json"));
  const double c = manifest["config"]["c"].get<double>();
  double prev = -1.0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const double t = std::stod(rows[i][0]);
    CHECK(t > prev);
    prev = t;
    CHECK(std::stod(rows[i][1]) <= std::exp(1.0 + c * t) * (1.0 + 1e-12));
  }
  REQUIRE(run("simulate --config cli_sim.json --out cli_sim2.csv --seed 11") == 0);
  CHECK(slurp("cli_sim.csv") == slurp("cli_sim2.csv"));
  REQUIRE(run("simulate --config cli_sim.json --out cli_sim3.csv --seed 12") == 0);
  CHECK(slurp("cli_sim.csv") != slurp("cli_sim3.csv"));
}

TEST_CASE("simulate modes and caps") {
  spit("cli_h0.json", R"({"horizon":0})");
  CHECK(run("simulate --config cli_h0.json --out cli_h0.csv") == 1);
  CHECK(run("simulate --config cli_sim.json --out cli_h0.csv --horizon 0") == 1);

  spit("cli_cap.json", R"({"mode":"unkilled","horizon":30,"caps":{"max_blocks":100,"hard":true}})");
  CHECK(run("simulate --config cli_cap.json --out cli_cap.csv") == 3);
  spit("cli_soft.json", R"({"mode":"unkilled","horizon":30,"caps":{"max_blocks":100}})");
  CHECK(run("simulate --config cli_soft.json --out cli_soft.csv") == 0);

  spit("cli_spine.json", R"({"mode":"spine","tilt":1,"x":0.5,"horizon":20})");
  REQUIRE(run("simulate --config cli_spine.json --out cli_spine.csv") == 0);
  const auto rows = parse_csv(slurp("cli_spine.csv"));
  CHECK(rows[0] == std::vector<std::string>{"t", "position", "log_mass", "event"});
  CHECK(rows[1][3] == "start");

  spit("cli_mart.json",
       R"({"x":1,"horizon":5,"checkpoints":[0,5],"martingale_columns":["m_intrinsic","m_killed","z_mult"],
           "z_function":{"x":[0,4],"y":[0.9,0.1]}})");
  REQUIRE(run("simulate --config cli_mart.json --out cli_mart.csv") == 0);
  const auto mrows = parse_csv(slurp("cli_mart.csv"));
  REQUIRE(mrows.size() == 3);
  CHECK(mrows[0].back() == "z_mult");
  CHECK(std::stod(mrows[1][6]) == 1.0);
}

TEST_CASE("experiment names and preconditions") {
  spit("cli_empty.json", "{}");
  CHECK(run("experiment nope --config cli_empty.json --out cli_e.csv") == 1);
  spit("cli_decay_slow.json", R"({"c_factor":0.9})");
  CHECK(run("experiment decay --config cli_decay_slow.json --out cli_e.csv") == 1);
  CHECK(run("experiment many-to-one --config cli_empty.json --out cli_e.csv --trials 500") == 0);
  const auto summary = nlohmann::json::parse(slurp("cli_e.csv.summary.json"));
  CHECK(summary["passed"].get<bool>());
  CHECK(summary["experiment"] == "many-to-one");
}

TEST_CASE("a failed hard check exits 4") {
  // Too few extinctions at x = 2 for the (0.01, 0.99) band.
  spit("cli_band.json", R"({"x":[2],"interior_x":[2],"trials":200})");
  CHECK(run("experiment extinction --config cli_band.json --out cli_band.csv") == 4);
  CHECK(fs::exists("cli_band.csv"));
  CHECK(fs::exists("cli_band.csv.summary.json"));
}

TEST_CASE("threads come from the flag or FRAGKILL_THREADS and do not change output") {
  spit("cli_ext.json", R"({"trials":300,"horizon":30})");
  REQUIRE(run("experiment extinction --config cli_ext.json --out cli_t1.csv --threads 1") == 0);
  REQUIRE(run("experiment extinction --config cli_ext.json --out cli_t4.csv", "FRAGKILL_THREADS=4") == 0);
  CHECK(slurp("cli_t1.csv") == slurp("cli_t4.csv"));
  const auto manifest = nlohmann::json::parse(slurp("cli_t4.csv.manifest.json"));
  CHECK(manifest["threads"].get<unsigned>() == 4);
}

TEST_CASE("re-running the manifest config reproduces the output") {
  spit("cli_growth.json", R"({"trials":100,"caps":{"max_blocks":2000}})");
  REQUIRE(run("experiment growth --config cli_growth.json --out cli_g.csv --seed 99") == 0);
  const auto manifest = nlohmann::json::parse(slurp("cli_g.csv.manifest.json"));
  CHECK(manifest["master_seed"].get<std::uint64_t>() == 99);
  CHECK(manifest["version"] == "0.1.0");
  CHECK(manifest.contains("wall_clock_seconds"));
  CHECK(manifest["checks"].size() > 0);
  spit("cli_g_replay.json", manifest["config"].dump());
  REQUIRE(run("experiment growth --config cli_g_replay.json --out cli_g2.csv") == 0);
  CHECK(slurp("cli_g.csv") == slurp("cli_g2.csv"));
}
