#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "upacrl/bandit.hpp"
#include "upacrl/mdp.hpp"

namespace upacrl::harness {

enum class Track { kBandit, kMdp };

std::string to_string(Track track);

/// Everything that determines a run. Together with `seed` it fixes every
/// output byte apart from wall-clock fields.
struct RunConfig {
  Track track = Track::kBandit;
  /// bandit: upac-oful | oful | oful-ball; mdp: flute | lsvi-ucb.
  std::string algorithm = "upac-oful";
  /// bandit: random | fixed | hard; mdp: random-tabular | random-simplex | file.
  std::string instance = "random";
  /// T rounds (bandit) or K episodes (mdp).
  std::uint64_t budget = 1000;
  double delta = 0.05;
  double lambda = 1.0;
  double c_beta = 1.0;
  std::uint64_t seed = 0;
  /// Seed of the random instance; defaults to `seed`.
  std::optional<std::uint64_t> instance_seed;
  /// Thresholds for N_eps, strictly positive and descending. Empty selects
  /// 2^{-i} (bandit) or H * 2^{-i} (mdp) for i = 1..10.
  std::vector<double> eps_grid;
  std::string out;
  /// Cadence of level-occupancy snapshots; 0 picks max(1, budget / 100).
  std::uint64_t flush_every = 0;
  std::size_t recondition_every = RegularizedDesign::kDefaultReconditionEvery;
  std::string tie_break = "lowest";
  /// Count rounds where some level's estimate leaves its confidence ellipsoid.
  bool check_coverage = false;
  /// Count episodes where some fitted Q^l falls below Q*.
  bool check_optimism = false;

  // Bandit instance parameters.
  int dim = 5;
  int num_actions = 10;
  std::string noise = "gaussian";
  double noise_scale = 1.0;
  int hard_k = 64;
  double mu_norm = 1.0;

  // MDP instance parameters.
  int num_states = 3;
  int mdp_actions = 2;
  int horizon = 3;
  int feature_dim = 2;
  std::string instance_file;

  [[nodiscard]] std::uint64_t effective_instance_seed() const {
    return instance_seed.value_or(seed);
  }
};

/// Throws ConfigError naming the offending key.
void validate(const RunConfig& config);

/// eps_grid of the config, or the track default.
std::vector<double> effective_eps_grid(const RunConfig& config, int horizon);

/// Whether the algorithm partitions its samples into levels.
bool is_leveled(const std::string& algorithm);

struct LevelOccupancy {
  int stage = 1;
  int level = 1;
  std::uint64_t max_size = 0;
  double cap = 0.0;
};

struct WeightNormRecord {
  int stage = 1;
  int level = 1;
  double max_norm = 0.0;
  double cap = 0.0;
};

struct OccupancySnapshot {
  std::uint64_t index = 0;
  /// sizes[h-1][l-1] = |C_h^l| (a single stage for bandits).
  std::vector<std::vector<std::uint64_t>> sizes;
};

struct RunMetrics {
  RunConfig config;
  int dim = 0;
  int horizon = 1;
  std::vector<double> gaps;
  std::vector<double> regret;
  /// Level chosen each round (stage-1 level for MDP runs; 1 for baselines).
  std::vector<int> levels;
  /// Realized episode returns (MDP runs only).
  std::vector<double> returns;
  std::vector<double> eps_grid;
  std::vector<std::uint64_t> final_n_eps;
  std::vector<LevelOccupancy> occupancy;
  std::vector<WeightNormRecord> weight_norms;
  std::vector<OccupancySnapshot> occupancy_series;
  int max_level = 1;
  std::uint64_t coverage_violations = 0;
  std::uint64_t optimism_violations = 0;
  std::uint64_t level_overflow_diagnostics = 0;
  std::vector<std::string> invariant_violations;
  double runtime_seconds = 0.0;
};

/// cumulative[i][k] = #{j <= k : gaps[j] > grid[i]}. Throws
/// std::invalid_argument on an empty grid.
std::vector<std::vector<std::uint64_t>> n_epsilon_curve(const std::vector<double>& gaps,
                                                        const std::vector<double>& grid);

bandit::BanditInstance make_bandit_instance(const RunConfig& config);
mdp::LinearMdpSpec make_mdp_instance(const RunConfig& config);

RunMetrics run_bandit_experiment(const RunConfig& config);
RunMetrics run_mdp_experiment(const RunConfig& config);
/// Dispatches on config.track.
RunMetrics run_experiment(const RunConfig& config);

}  // namespace upacrl::harness
