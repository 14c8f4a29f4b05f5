#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <sstream>

#include "support.hpp"
#include "upacrl/cli.hpp"
#include "upacrl/io.hpp"

namespace fs = std::filesystem;
using upacrl::cli::run_cli;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string fx(const std::string& name) { return testing::fixture(name).string(); }

}  // namespace

TEST_CASE("run") {
  const auto dir = testing::scratch_dir("cli-run");
  auto r = cli({"run", "--config", fx("bandit_hard.cfg"), "--seed", "7", "--out", (dir / "a").string()});
  CHECK(r.code == 0);
  CHECK(r.out.find("final_regret=") != std::string::npos);
  CHECK(r.out.find("max_level=") != std::string::npos);
  CHECK(fs::exists(dir / "a" / "results.csv"));
  CHECK(fs::exists(dir / "a" / "summary.json"));

  // Same arguments, byte-identical data file.
  r = cli({"run", "--config", fx("bandit_hard.cfg"), "--seed", "7", "--out", (dir / "b").string()});
  CHECK(slurp(dir / "a" / "results.csv") == slurp(dir / "b" / "results.csv"));

  r = cli({"run", "--config", fx("bandit_hard.cfg"), "--set", "algorithm=nope", "--out", (dir / "c").string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("algorithm") != std::string::npos);
  CHECK(r.err.find("upac-oful, oful, oful-ball") != std::string::npos);

  r = cli({"run", "--config", fx("bandit_hard.cfg"), "--set", "delta=1.5"});
  CHECK(r.code == 2);
  CHECK(r.err.find("delta") != std::string::npos);

  r = cli({"run", "--config", fx("bandit_hard.cfg"), "--set", "colour=blue"});
  CHECK(r.code == 2);
  CHECK(r.err.find("colour") != std::string::npos);

  CHECK(cli({"run", "--config", "/no/such/file.cfg"}).code == 2);
  CHECK(cli({"frobnicate"}).code == 2);
  CHECK(cli({}).code == 2);

  r = cli({"run", "--config", fx("tabular_file.cfg"), "--out", (dir / "file").string()});
  CHECK(r.code == 0);
  r = cli({"run", "--config", fx("mdp_small.cfg"), "--out", (dir / "mdp").string()});
  CHECK(r.code == 0);
  CHECK(cli({"audit", (dir / "mdp").string()}).code == 0);
}

TEST_CASE("UPACRL_OUT is the default output root") {
  const auto root = testing::scratch_dir("cli-env");
  setenv(upacrl::cli::kOutEnv, root.c_str(), 1);
  const auto r = cli({"run", "--config", fx("bandit_hard.cfg"), "--seed", "3"});
  unsetenv(upacrl::cli::kOutEnv);
  CHECK(r.code == 0);
  CHECK(fs::exists(root / "bandit-upac-oful-seed3" / "summary.json"));
}

TEST_CASE("sweep") {
  const auto root = testing::scratch_dir("cli-sweep");
  auto r = cli({"sweep", "--config", fx("sweep.cfg"), "--seeds", "1..3", "--out", (root / "a").string(), "--jobs", "2"});
  CHECK(r.code == 0);
  const auto manifest = upacrl::io::load_json(root / "a" / "manifest.json");
  REQUIRE(manifest["cells"].size() == 6);
  std::size_t dirs = 0;
  for (const auto& e : fs::directory_iterator(root / "a")) dirs += e.is_directory() ? 1 : 0;
  CHECK(dirs == 6);
  for (const auto& cell : manifest["cells"]) CHECK(cell["status"] == "ok");

  // Rerun: identical data files and manifest.
  r = cli({"sweep", "--config", fx("sweep.cfg"), "--seeds", "1..3", "--out", (root / "b").string(), "--jobs", "1"});
  CHECK(r.code == 0);
  CHECK(slurp(root / "a" / "manifest.json") == slurp(root / "b" / "manifest.json"));
  for (const auto& cell : manifest["cells"]) {
    const std::string name = cell["dir"];
    CHECK(slurp(root / "a" / name / "results.csv") == slurp(root / "b" / name / "results.csv"));
  }

  r = cli({"sweep", "--config", fx("sweep.cfg"), "--seeds", "5..4", "--out", (root / "c").string()});
  CHECK(r.code == 2);
  CHECK(cli({"sweep", "--config", fx("sweep.cfg"), "--seeds", "x..4"}).code == 2);

  // A failing cell: a missing instance file is only detected while running.
  r = cli({"sweep", "--config", fx("sweep.cfg"), "--seeds", "1..1", "--set", "instance=file", "--set",
           "instance_file=/no/such.json", "--out", (root / "d").string()});
  CHECK(r.code == 1);
  const auto failed = upacrl::io::load_json(root / "d" / "manifest.json");
  CHECK(failed["cells"][0]["status"] == "failed");
}

TEST_CASE("certify") {
  auto r = cli({"certify", fx("tabular_valid.json")});
  CHECK(r.code == 0);
  CHECK(r.out.find("PASS  kernel_normalized") != std::string::npos);

  r = cli({"certify", fx("corrupt_theta.json")});
  CHECK(r.code == 4);
  CHECK(r.err.find("kernel_normalized") != std::string::npos);
  CHECK(r.err.find("(h=1, s=1, a=0)") != std::string::npos);

  r = cli({"certify", fx("reward_over.json")});
  CHECK(r.code == 4);
  CHECK(r.err.find("reward_range") != std::string::npos);
  CHECK(r.err.find("(h=2, s=1, a=1)") != std::string::npos);

  CHECK(cli({"certify", fx("bandit_small.json")}).code == 0);
  CHECK(cli({"certify", "--config", fx("mdp_small.cfg")}).code == 0);
  CHECK(cli({"certify", fx("bandit_hard.cfg")}).code == 0);
  CHECK(cli({"certify"}).code == 2);
}

TEST_CASE("audit") {
  const auto dir = testing::scratch_dir("cli-audit");
  REQUIRE(cli({"run", "--config", fx("mdp_small.cfg"), "--out", (dir / "healthy").string()}).code == 0);
  auto r = cli({"audit", (dir / "healthy").string()});
  CHECK(r.code == 0);
  CHECK(r.out.find("PASS  regret_consistency") != std::string::npos);

  SUBCASE("negated gap") {
    fs::copy(dir / "healthy", dir / "neg", fs::copy_options::recursive);
    std::string csv = slurp(dir / "neg" / "results.csv");
    // Row 1 gap: negate the second field of the first data line.
    const auto line = csv.find('\n') + 1;
    const auto comma = csv.find(',', line);
    csv.insert(comma + 1, "-");
    std::ofstream(dir / "neg" / "results.csv") << csv;
    r = cli({"audit", (dir / "neg").string()});
    CHECK(r.code == 5);
    CHECK(r.err.find("regret_consistency") != std::string::npos);
  }
  SUBCASE("occupancy above cap") {
    fs::copy(dir / "healthy", dir / "occ", fs::copy_options::recursive);
    auto j = upacrl::io::load_json(dir / "occ" / "summary.json");
    j["occupancy"][0]["max_size"] = 1e9;
    upacrl::io::save_json(dir / "occ" / "summary.json", j);
    r = cli({"audit", (dir / "occ").string()});
    CHECK(r.code == 5);
    CHECK(r.err.find("level_caps") != std::string::npos);
  }
  SUBCASE("weight norm above cap") {
    fs::copy(dir / "healthy", dir / "w", fs::copy_options::recursive);
    auto j = upacrl::io::load_json(dir / "w" / "summary.json");
    j["weight_norms"][0]["max_norm"] = 1e9;
    upacrl::io::save_json(dir / "w" / "summary.json", j);
    r = cli({"audit", (dir / "w").string()});
    CHECK(r.code == 5);
    CHECK(r.err.find("weight_norm_caps") != std::string::npos);
  }
  SUBCASE("missing run") { CHECK(cli({"audit", (dir / "nothing").string()}).code == 5); }
}

TEST_CASE("seed ranges") {
  using upacrl::cli::parse_seed_range;
  CHECK(parse_seed_range("1..3") == std::vector<std::uint64_t>{1, 2, 3});
  CHECK(parse_seed_range("4").size() == 1);
  CHECK(parse_seed_range("5..4").empty());
}
