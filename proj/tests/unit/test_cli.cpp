#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
  int code;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Run run(const std::string& args, const std::string& tag) {
  const fs::path err = "cli_" + tag + ".stderr";
  const std::string cmd = std::string(SPINFORGE_BIN) + " " + args + " > /dev/null 2> " + err.string();
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(err)};
}

fs::path write_config(const std::string& tag, const std::string& body) {
  const fs::path p = "cli_" + tag + ".json";
  std::ofstream(p) << body;
  return p;
}

json summary(const fs::path& dir, const std::string& command) {
  return json::parse(slurp(dir / (command + ".json")))["summary"];
}

}  // namespace

TEST_CASE("concentration subcommand reports the posterior mode") {
  fs::remove_all("cli_conc");
  const auto r = run("--out cli_conc concentration 1 6 3e-9", "conc");
  REQUIRE(r.code == 0);
  const auto s = summary("cli_conc", "concentration");
  const double v = 4.0 / 3.0 * M_PI * std::pow(3e-7, 3);
  CHECK(s["mode"].get<double>() == doctest::Approx(std::log(1.2) / v).epsilon(1e-6));
  CHECK(s["mode"].get<double>() == doctest::Approx(1.6e18).epsilon(0.02));
  const std::string csv = slurp("cli_conc/concentration_posterior.csv");
  CHECK(csv.rfind("# spinforge ", 0) == 0);
  CHECK(csv.find("rho_cm3,density,cdf") != std::string::npos);
}

TEST_CASE("malformed configs exit with code 2 and name the key") {
  const auto bad_value = write_config("neg", R"({"hyperfine": {"a_perp_khz": -3}})");
  auto r = run("--config " + bad_value.string() + " --out cli_bad spectrum", "neg");
  CHECK(r.code == 2);
  auto e = json::parse(r.err);
  CHECK(e["error"] == "config");
  CHECK(e["key"] == "hyperfine.a_perp_khz");

  const auto typo = write_config("typo", R"({"hyperfine": {"a_perp_kHz": 50.5}})");
  r = run("--config " + typo.string() + " --out cli_bad spectrum", "typo");
  CHECK(r.code == 2);
  CHECK(json::parse(r.err)["key"] == "hyperfine.a_perp_kHz");

  const auto broken = write_config("broken", "{\"hyperfine\": ");
  r = run("--config " + broken.string() + " --out cli_bad spectrum", "broken");
  CHECK(r.code == 2);
  CHECK(json::parse(r.err)["key"] == "--config");

  r = run("--out cli_bad ramsey --mode nonsense", "argv");
  CHECK(r.code == 2);
}

TEST_CASE("numerical failures exit with code 1") {
  const auto r = run("--out cli_num concentration 0 0 3e-9", "num");
  CHECK(r.code == 1);
  CHECK(json::parse(r.err)["error"] == "numerical");
}

TEST_CASE("repeat runs with the same seed are byte identical") {
  const auto cfg = write_config("jumps", R"({"darkspins": {"n_samples": 400}, "seed": 9})");
  for (const char* dir : {"cli_rep_a", "cli_rep_b", "cli_rep_c"}) fs::remove_all(dir);
  const std::string base = "--config " + cfg.string() + " --out ";
  REQUIRE(run(base + "cli_rep_a darkspins --subtask jumps", "rep_a").code == 0);
  REQUIRE(run(base + "cli_rep_b darkspins --subtask jumps", "rep_b").code == 0);
  REQUIRE(run(base + "cli_rep_c --seed 10 darkspins --subtask jumps", "rep_c").code == 0);
  for (const char* f : {"darkspins_jumps.csv", "darkspins_dwells.csv", "darkspins.json"}) {
    CHECK(slurp(fs::path("cli_rep_a") / f) == slurp(fs::path("cli_rep_b") / f));
  }
  CHECK(slurp("cli_rep_a/darkspins_jumps.csv") != slurp("cli_rep_c/darkspins_jumps.csv"));
}

TEST_CASE("json format bundles the tables") {
  fs::remove_all("cli_json");
  REQUIRE(run("--format json --out cli_json ramsey --mode s0", "json").code == 0);
  const auto doc = json::parse(slurp("cli_json/ramsey.json"));
  CHECK(doc["meta"]["command"] == "ramsey");
  CHECK(doc["tables"].contains("ramsey_s0"));
  CHECK(doc["tables"].contains("ramsey_s0_fft"));
  CHECK_FALSE(fs::exists("cli_json/ramsey_s0.csv"));
}
