#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "boltzstab/errors.hpp"
#include "boltzstab/scenario.hpp"

using namespace boltzstab;
namespace fs = std::filesystem;

namespace {

const char* kMaxwell =
    R"("kernel": {"variant": "mollified-soft", "gamma": 0.0, "nu": 0.5, "c_b": 1.0, "c_phi": 1.0})";

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("boltzstab_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int cli(const std::string& args) {
  const std::string cmd = std::string(BOLTZSTAB_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path write_config(const fs::path& dir, const std::string& body) {
  const fs::path p = dir / "config.json";
  std::ofstream(p) << body;
  return p;
}

// 24 points leave the Gaussian tails under-resolved, so clipping runs above the default guard
std::string small(const std::string& command, const std::string& scenario,
                  const std::string& time = R"({"dt": 0.05, "t_end": 0.2, "clip_tolerance": 1e-3})",
                  const std::string& kernel = kMaxwell) {
  return R"({"version": "boltzstab/1", "command": ")" + command + R"(", )" + kernel +
         R"(, "grid": {"points": 24}, "quadrature": {"eps": 0.2, "n_theta": 4}, "time": )" + time +
         R"(, "scenario": )" + scenario + "}";
}

}  // namespace

TEST_CASE("minimal relax scenario exits 0 with a monotone entropy column") {
  const auto dir = scratch("relax");
  const std::string scen = std::string(BOLTZSTAB_SCENARIOS) + "/relax_minimal.json";
  REQUIRE(cli("relax --config " + scen + " --out " + dir.string()) == 0);
  std::ifstream in(dir / "relax_0.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line.rfind("# ", 0) == 0);
  std::getline(in, line);
  std::vector<std::string> cols;
  std::stringstream hs(line);
  for (std::string c; std::getline(hs, c, ',');) cols.push_back(c);
  const auto col = std::find(cols.begin(), cols.end(), "entropy") - cols.begin();
  REQUIRE(col < static_cast<long>(cols.size()));
  double prev = 1e300;
  int rows = 0;
  while (std::getline(in, line)) {
    std::stringstream rs(line);
    std::string cell;
    for (long k = 0; k <= col; ++k) std::getline(rs, cell, ',');
    const double h = std::stod(cell);
    CHECK(h <= prev);
    prev = h;
    ++rows;
  }
  CHECK(rows > 1);
  CHECK(fs::exists(dir / "manifest.json"));
  CHECK(slurp(dir / "verdicts.txt").find("PASS") != std::string::npos);
}

TEST_CASE("exit status per class") {
  const auto dir = scratch("exit");
  // q = 1 in a stability run is a precondition error
  auto p = write_config(dir, small("stability", R"({"q": [1], "initial": {"shape": "bimodal"},
      "cst_hat": {"1": 0.0}})"));
  CHECK(cli("stability --config " + p.string() + " --out " + (dir / "a").string()) == 2);

  // malformed text
  p = write_config(dir, "{\"version\": \"boltzstab/1\",\n \"command\": }");
  CHECK(cli("run --config " + p.string()) == 2);

  // CFL guard
  p = write_config(dir, small("relax", R"({"initial": {"shape": "bimodal"}})",
                              R"({"dt": 0.05, "t_end": 0.2, "cfl_limit": 1e-6})"));
  const fs::path out = dir / "abort";
  CHECK(cli("relax --config " + p.string() + " --out " + out.string()) == 3);
  CHECK(fs::exists(out / "run.log"));

  // a frozen zero constant cannot contain a growing moment
  p = write_config(dir, small("propagation", R"({"checks": ["moment"], "constants": {"moment": 0.0},
      "validation": [{"initial": {"shape": "bump"}}]})",
                              R"({"dt": 0.05, "t_end": 0.2, "clip_tolerance": 1e-3})"));
  CHECK(cli("propagation --config " + p.string() + " --out " + (dir / "b").string()) == 1);

  // subcommand must agree with the file
  p = write_config(dir, small("relax", R"({"initial": {"shape": "bimodal"}})"));
  CHECK(cli("stability --config " + p.string() + " --out " + (dir / "c").string()) == 2);
  CHECK(cli("relax --config " + p.string() + " --out " + (dir / "c").string()) == 0);
  CHECK(cli("relax") == 2);
}

TEST_CASE("parse diagnostics carry line or field") {
  try {
    parse_scenario("{\n\"version\": \"boltzstab/1\",\n\"command\": ,\n}");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.where().find("line 3") != std::string::npos);
  }
  try {
    parse_scenario(small("relax", R"({"initial": {"shape": "bimodal", "colour": 1}})"));
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.where().find("scenario.initial[0]") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_scenario(R"({"version": "boltzstab/0", "command": "relax"})"), ParseError);
  CHECK_THROWS_AS(parse_scenario(small("relax", R"({"initial": {"shape": "triangle"}})")),
                  ParseError);
  CHECK_THROWS_AS(parse_scenario(R"({"version": "boltzstab/1", "command": "relax"})"), ParseError);
}

TEST_CASE("validate") {
  const auto ok = parse_scenario(small("relax", R"({"initial": {"shape": "bimodal"}})"));
  CHECK(validate_scenario(ok).empty());

  const char* soft = R"("kernel": {"variant": "power-soft", "gamma": -0.5, "nu": 0.5,
      "c_b": 1.0, "c_phi": 1.0})";
  std::string text = small("propagation", R"({"p": 1.2, "constants": {"moment": 0, "lp": 0, "gradient": 0},
      "validation": [{"initial": {"shape": "bump"}}]})",
                           R"({"dt": 0.05, "t_end": 0.2})", soft);
  text.replace(text.find(R"("eps": 0.2)"), 10, R"("eps": 0.2, "diagonal_exclusion_radius": 0.5)");
  const auto d = validate_scenario(parse_scenario(text));
  REQUIRE(d.size() == 1);
  CHECK(d[0].field == "scenario.p");
  CHECK(d[0].message.find("p > N/(N+gamma)") != std::string::npos);

  const char* rough = R"("kernel": {"variant": "power-hard", "gamma": 0.5, "nu": 1.2,
      "c_b": 1.0, "c_phi": 1.0})";
  const auto s = parse_scenario(small("stability", R"({"initial": {"shape": "bimodal"},
      "cst_hat": {"2": 0.0, "4": 0.0}})",
                                      R"({"dt": 0.05, "t_end": 0.2})", rough));
  bool flagged = false;
  for (const auto& x : validate_scenario(s)) flagged = flagged || x.field == "kernel.nu";
  CHECK(flagged);

  const auto lab = parse_scenario(R"({"version": "boltzstab/1", "command": "lab"})");
  REQUIRE(validate_scenario(lab).size() == 1);
  CHECK(validate_scenario(lab)[0].field == "config.seed");

  const auto dir = scratch("validate");
  const auto p = write_config(dir, small("relax", R"({"initial": {"shape": "bimodal"}})"));
  CHECK(cli("validate --config " + p.string()) == 0);
  CHECK(cli("validate --config " + write_config(dir, lab.resolved.dump()).string()) == 2);
}

TEST_CASE("overrides") {
  const auto s = parse_scenario(small("relax", R"({"initial": {"shape": "bimodal"}})"));
  Overrides o;
  o.threads = 3;
  o.seed = 42;
  o.output = "elsewhere";
  const auto r = apply(s, o);
  CHECK(r.resolved["threads"] == 3);
  CHECK(r.resolved["seed"] == 42);
  CHECK(r.resolved["output"] == "elsewhere");
  o = Overrides{};
  o.command = "stability";
  CHECK_THROWS(apply(s, o));
}

TEST_CASE("manifest reproduces the run bit for bit") {
  const auto a = parse_scenario(small("relax", R"({"initial": [{"shape": "bimodal"},
      {"shape": "anisotropic", "temperatures": [1.5, 0.5]}]})"));
  const auto first = run_scenario(a);
  const auto b = parse_scenario(first.manifest.dump());
  CHECK(b.resolved == a.resolved);
  const auto second = run_scenario(b);
  REQUIRE(first.tables.size() == second.tables.size());
  REQUIRE(first.tables.size() == 2);
  for (std::size_t k = 0; k < first.tables.size(); ++k)
    CHECK(csv_text(first.tables[k]) == csv_text(second.tables[k]));
  CHECK(first.all_passed());
}

TEST_CASE("number formatting round-trips") {
  for (double x : {0.1, 1.0 / 3.0, 1e-300, 6.02214076e23}) CHECK(std::stod(format_number(x)) == x);
  CHECK(format_number(kInfinity) == "inf");
}
