// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any fails.

#include <array>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

#include "flute_oracle.hpp"
#include "support.hpp"
#include "upacrl/audit.hpp"
#include "upacrl/cli.hpp"
#include "upacrl/harness.hpp"
#include "upacrl/io.hpp"
#include "upacrl/rng.hpp"

using namespace upacrl;
using harness::RunConfig;
using harness::RunMetrics;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool passed = false;
  std::string detail;
};

RunConfig bandit_run(std::uint64_t seed, int dim, std::uint64_t T) {
  RunConfig c;
  c.seed = seed;
  c.dim = dim;
  c.budget = T;
  return c;
}

RunConfig flute_run(std::uint64_t seed, std::uint64_t K) {
  RunConfig c;
  c.track = harness::Track::kMdp;
  c.algorithm = "flute";
  c.instance = "random-tabular";
  c.num_states = 3;
  c.mdp_actions = 2;
  c.horizon = 3;
  c.seed = seed;
  c.budget = K;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome linalg_oracle() {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> len(1, 1000);
  std::normal_distribution<double> noise(0.0, 1.0);
  double worst = 0.0;
  for (int seq = 0; seq < 200; ++seq) {
    const int d = std::array<int, 3>{2, 5, 16}[static_cast<std::size_t>(seq % 3)];
    const int n = len(rng);
    RegularizedDesign design(d, 1.0);
    Matrix cov = Matrix::Identity(d, d);
    Vector b = Vector::Zero(d);
    for (int i = 1; i <= n; ++i) {
      const Vector x = testing::random_in_ball(d, rng);
      const double y = noise(rng);
      design.rank_one_update(x);
      design.accumulate_target(x, y);
      cov += x * x.transpose();
      b += y * x;
      if (i % 97 == 0 || i == n) {
        const Matrix inv = cov.inverse();
        worst = std::max(worst, testing::max_abs(design.cov_inv() - inv));
        worst = std::max(worst, (design.ridge_solve() - inv * b).cwiseAbs().maxCoeff());
        const Vector probe = testing::random_in_ball(d, rng);
        worst = std::max(worst, std::abs(design.elliptical_norm(probe) - std::sqrt(probe.dot(inv * probe))));
      }
    }
  }
  std::ostringstream os;
  os << "max error " << worst;
  return {worst <= 1e-7, os.str()};
}

// Runs shared by the capacity and weight-norm criteria.
std::vector<RunMetrics> capacity_runs;

Outcome level_capacity() {
  std::uint64_t violations = 0;
  std::uint64_t checked = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    capacity_runs.push_back(harness::run_experiment(bandit_run(seed, 5, 50000)));
    capacity_runs.push_back(harness::run_experiment(flute_run(seed, 5000)));
  }
  for (const RunMetrics& m : capacity_runs) {
    // Every snapshot, against caps recomputed here.
    for (const auto& snap : m.occupancy_series) {
      for (std::size_t h = 0; h < snap.sizes.size(); ++h) {
        for (std::size_t l = 0; l < snap.sizes[h].size(); ++l) {
          const int level = static_cast<int>(l) + 1;
          const double cap = m.config.track == harness::Track::kBandit
                                 ? 17.0 * m.dim * level * std::pow(4.0, level)
                                 : 17.0 * m.dim * level * static_cast<double>(h + 1) * std::pow(4.0, level);
          ++checked;
          if (static_cast<double>(snap.sizes[h][l]) > cap) ++violations;
        }
      }
    }
    for (const auto& o : m.occupancy) {
      ++checked;
      if (static_cast<double>(o.max_size) > o.cap) ++violations;
    }
  }
  std::ostringstream os;
  os << violations << " violations in " << checked << " checks over " << capacity_runs.size() << " runs";
  return {violations == 0 && checked > 0, os.str()};
}

Outcome coverage() {
  int violating = 0;
  std::uint64_t rounds = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    RunConfig c = bandit_run(seed, 3, 10000);
    c.check_coverage = true;
    const RunMetrics m = harness::run_experiment(c);
    if (m.coverage_violations > 0) ++violating;
    rounds += m.coverage_violations;
  }
  std::ostringstream os;
  os << violating << "/100 runs with a violation (" << rounds << " violating rounds)";
  return {violating <= 5, os.str()};
}

Outcome weight_norms() {
  std::uint64_t violations = 0;
  std::uint64_t checked = 0;
  for (const RunMetrics& m : capacity_runs) {
    if (m.config.track != harness::Track::kMdp) continue;
    for (const auto& w : m.weight_norms) {
      const double cap = 9.0 * m.dim * std::pow(2.0, w.level) *
                         std::sqrt(std::pow(m.horizon, 3) * w.level) / std::sqrt(m.config.lambda);
      ++checked;
      if (w.max_norm > cap) ++violations;
    }
  }
  std::ostringstream os;
  os << violations << " violations in " << checked << " (stage, level) records";
  return {violations == 0 && checked > 0, os.str()};
}

Outcome separation() {
  const int K = 256;
  const int phase_two = 4 * static_cast<int>(std::ceil(std::log2(K)));
  const std::size_t final_quarter = static_cast<std::size_t>(K + phase_two - phase_two / 4);
  int upac_plateaus = 0;
  int oful_late_mistakes = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    RunConfig c;
    c.instance = "hard";
    c.hard_k = K;
    c.noise = "none";
    c.budget = static_cast<std::uint64_t>(K + phase_two);
    c.seed = seed;
    c.eps_grid = {0.5};
    const RunMetrics upac = harness::run_experiment(c);
    const auto curve = harness::n_epsilon_curve(upac.gaps, upac.eps_grid)[0];
    // The last increase must come strictly before the final round.
    std::size_t last = 0;
    for (std::size_t k = 1; k < curve.size(); ++k) {
      if (curve[k] > curve[k - 1]) last = k;
    }
    if (last + 1 < curve.size()) ++upac_plateaus;

    c.algorithm = "oful-ball";
    c.tie_break = "random";
    const RunMetrics oful = harness::run_experiment(c);
    bool late = false;
    for (std::size_t k = final_quarter; k < oful.gaps.size(); ++k) late = late || oful.gaps[k] >= 1.0 - 1e-9;
    if (late) ++oful_late_mistakes;
  }
  std::ostringstream os;
  os << "UPAC-OFUL N_0.5 plateaus in " << upac_plateaus << "/20 seeds; OFUL-ball gap-1 round in final quarter in "
     << oful_late_mistakes << "/20 seeds";
  return {upac_plateaus == 20 && oful_late_mistakes > 10, os.str()};
}

Outcome sublinear() {
  const RunMetrics bandit = harness::run_experiment(bandit_run(1, 5, 100000));
  const RunMetrics flute = harness::run_experiment(flute_run(1, 10000));
  const double sb = testing::final_decade_slope(bandit.regret);
  const double sm = testing::final_decade_slope(flute.regret);
  std::ostringstream os;
  os << "UPAC-OFUL slope " << sb << ", FLUTE slope " << sm << " (c_beta = 1)";
  return {sb < 0.9 && sm < 0.9, os.str()};
}

Outcome optimism() {
  int violating = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    RunConfig c = flute_run(seed, 500);
    c.c_beta = mdp::kTheoryCBeta;
    c.instance_seed = 0;
    c.check_optimism = true;
    if (harness::run_experiment(c).optimism_violations > 0) ++violating;
  }
  std::ostringstream os;
  os << violating << "/50 runs with a pointwise violation";
  return {violating <= static_cast<int>(0.05 * 50), os.str()};
}

Outcome brute_force() {
  int checks = 0;
  int mismatches = 0;
  std::mt19937_64 pick(77);
  for (std::uint64_t seed = 0; checks < 1000; ++seed) {
    const bool simplex = seed % 2 == 1;
    const int H = 2 + static_cast<int>(seed % 2);
    const auto spec = simplex ? mdp::random_simplex_mdp(4, 3, 3, H, seed) : mdp::random_tabular_mdp(3, 4, H, seed);
    const double c_beta = std::array<double, 3>{0.02, 0.1, 0.5}[seed % 3];
    mdp::FluteAgent agent(spec.features(), spec.num_states(), spec.num_actions(), H,
                          mdp::AgentConfig{0.05, 1.0, c_beta});
    const std::uint64_t episodes = 20 + 40 * (seed % 5);
    for (std::uint64_t k = 1; k <= episodes; ++k) {
      auto rng = make_stream(seed, StreamTag::kTransition, k);
      (void)agent.run_episode(spec, rng);
    }
    agent.fit_episode_weights();
    const testing::Oracle o = testing::recompute(agent);
    const int S = spec.num_states();
    const int A = spec.num_actions();
    const int L = agent.fitted_levels();
    for (int i = 0; i < 50; ++i, ++checks) {
      const int h = 1 + static_cast<int>(pick() % static_cast<std::uint64_t>(H));
      const int l = 1 + static_cast<int>(pick() % static_cast<std::uint64_t>(L));
      const int s = static_cast<int>(pick() % static_cast<std::uint64_t>(S));
      const int a = static_cast<int>(pick() % static_cast<std::uint64_t>(A));
      const int l_prev = 1 + static_cast<int>(pick() % static_cast<std::uint64_t>(L + 1));
      const double q = o.q[static_cast<std::size_t>(h - 1)][static_cast<std::size_t>(l - 1)](s, a);
      const bool ok = std::abs(agent.q_value(h, l, s, a) - q) <= 1e-9 &&
                      std::abs(agent.v_value(h, l, s) - o.v(h, l, s, A)) <= 1e-9 &&
                      agent.flute_act(h, s, l_prev) == o.act(h, s, l_prev, A);
      if (!ok) ++mismatches;
    }
  }
  std::ostringstream os;
  os << mismatches << " mismatches in " << checks << " spot checks";
  return {mismatches == 0, os.str()};
}

int audit_code(const fs::path& dir) {
  std::ostringstream out, err;
  return cli::run_cli({"audit", dir.string()}, out, err);
}

Outcome determinism_and_audit() {
  const fs::path root = testing::scratch_dir("acceptance");
  std::vector<RunConfig> configs;
  for (const char* alg : {"upac-oful", "oful", "oful-ball"}) {
    for (std::uint64_t seed : {1, 2}) {
      RunConfig c = bandit_run(seed, 4, 3000);
      c.algorithm = alg;
      c.tie_break = "random";
      configs.push_back(c);
    }
  }
  for (const char* alg : {"flute", "lsvi-ucb"}) {
    for (std::uint64_t seed : {1, 2}) {
      RunConfig c = flute_run(seed, 500);
      c.algorithm = alg;
      configs.push_back(c);
    }
  }
  RunConfig hard;
  hard.instance = "hard";
  hard.noise = "none";
  hard.budget = 300;
  configs.push_back(hard);

  int nondeterministic = 0;
  int audit_failures = 0;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    const fs::path a = root / ("run" + std::to_string(i) + "a");
    const fs::path b = root / ("run" + std::to_string(i) + "b");
    io::write_results(harness::run_experiment(configs[i]), a);
    io::write_results(harness::run_experiment(configs[i]), b);
    auto ja = io::load_json(a / io::kSummaryName);
    auto jb = io::load_json(b / io::kSummaryName);
    ja.erase("runtime_seconds");
    jb.erase("runtime_seconds");
    if (ja != jb || slurp(a / io::kCsvName) != slurp(b / io::kCsvName)) ++nondeterministic;
    if (audit_code(a) != cli::kOk) ++audit_failures;
  }

  // Faults injected into copies of a healthy FLUTE run (configs index 6).
  const fs::path healthy = root / "run6a";
  int caught = 0;
  {
    const fs::path dir = root / "fault-gap";
    fs::copy(healthy, dir, fs::copy_options::recursive);
    std::string csv = slurp(dir / io::kCsvName);
    const auto line = csv.find('\n') + 1;
    csv.insert(csv.find(',', line) + 1, "-");
    std::ofstream(dir / io::kCsvName) << csv;
    if (audit_code(dir) == cli::kAuditFailed) ++caught;
  }
  {
    const fs::path dir = root / "fault-occupancy";
    fs::copy(healthy, dir, fs::copy_options::recursive);
    auto j = io::load_json(dir / io::kSummaryName);
    j["occupancy"][0]["max_size"] = j["occupancy"][0]["cap"].get<double>() + 1.0;
    io::save_json(dir / io::kSummaryName, j);
    if (audit_code(dir) == cli::kAuditFailed) ++caught;
  }
  {
    const fs::path dir = root / "fault-neps";
    fs::copy(healthy, dir, fs::copy_options::recursive);
    auto j = io::load_json(dir / io::kSummaryName);
    j["final_n_eps"][0] = j["final_n_eps"][0].get<std::uint64_t>() + 1;
    io::save_json(dir / io::kSummaryName, j);
    if (audit_code(dir) == cli::kAuditFailed) ++caught;
  }
  std::ostringstream os;
  os << nondeterministic << "/" << configs.size() << " runs differ on replay, " << audit_failures
     << " healthy runs fail audit, " << caught << "/3 faults caught with exit 5";
  return {nondeterministic == 0 && audit_failures == 0 && caught == 3, os.str()};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"1 linalg oracle equivalence", linalg_oracle},
      {"2 level-capacity bounds", level_capacity},
      {"3 confidence coverage", coverage},
      {"4 weight-norm bound", weight_norms},
      {"5 uniform-PAC separation", separation},
      {"6 sublinear regret", sublinear},
      {"7 optimism", optimism},
      {"8 max-min brute force", brute_force},
      {"9 determinism and audit", determinism_and_audit},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome r;
    try {
      r = check();
    } catch (const std::exception& e) {
      r = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << (r.passed ? "PASS" : "FAIL") << "  " << name << ": " << r.detail << " [" << secs << " s]"
              << std::endl;
    if (!r.passed) ++failed;
  }
  std::cout << (criteria.size() - static_cast<std::size_t>(failed)) << "/" << criteria.size()
            << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
