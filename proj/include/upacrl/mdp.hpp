#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "upacrl/bandit.hpp"
#include "upacrl/linalg.hpp"

namespace upacrl::mdp {

using bandit::CertificationCheck;

/// Uncertified description of an episodic linear MDP:
///   P_h(s'|s,a) = <phi(s,a), theta_h(s')>,   r_h(s,a) = <phi(s,a), mu_h>.
/// Stages are 1-based in every API; containers indexed by stage store
/// stage h at position h - 1.
struct LinearMdpData {
  int dim = 0;
  int horizon = 0;
  int num_states = 0;
  int num_actions = 0;
  /// (S*A) x d; row s*A + a is phi(s, a).
  Matrix features;
  /// Per stage, d x S; column s' is theta_h(s').
  std::vector<Matrix> theta;
  /// Per stage reward weights.
  std::vector<Vector> mu;
  int initial_state = 0;
  /// Optional start distribution over states; empty means a point mass on
  /// initial_state.
  Vector initial_distribution;
};

/// Tolerances of the structural checks.
inline constexpr double kKernelNegativeTolerance = 1e-12;
inline constexpr double kKernelSumTolerance = 1e-9;
inline constexpr double kRewardTolerance = 1e-12;
inline constexpr double kNormTolerance = 1e-9;

/// Runs every structural check (shapes, kernel validity, reward range, norm
/// bounds) and reports each one; failures name the offending (h, s, a).
std::vector<CertificationCheck> certify(const LinearMdpData& data);

/// A linear MDP that passed certification, with reward and kernel tables
/// materialized for simulation and dynamic programming.
class LinearMdpSpec {
 public:
  /// Throws CertificationError naming the first failed check.
  explicit LinearMdpSpec(LinearMdpData data);

  [[nodiscard]] const LinearMdpData& data() const { return data_; }
  [[nodiscard]] int dim() const { return data_.dim; }
  [[nodiscard]] int horizon() const { return data_.horizon; }
  [[nodiscard]] int num_states() const { return data_.num_states; }
  [[nodiscard]] int num_actions() const { return data_.num_actions; }
  [[nodiscard]] int initial_state() const { return data_.initial_state; }
  [[nodiscard]] const Matrix& features() const { return data_.features; }

  [[nodiscard]] Vector feature(int s, int a) const;
  [[nodiscard]] double reward(int h, int s, int a) const;
  /// Row (P_h(s'|s,a))_{s'}.
  [[nodiscard]] Eigen::Ref<const Eigen::RowVectorXd> transition_row(int h, int s, int a) const;
  /// Reward table of stage h, S x A.
  [[nodiscard]] const Matrix& rewards(int h) const { return rewards_[static_cast<std::size_t>(h - 1)]; }
  /// Kernel of stage h, (S*A) x S.
  [[nodiscard]] const Matrix& kernel(int h) const { return kernels_[static_cast<std::size_t>(h - 1)]; }

  /// Draws s_1 (always initial_state unless a start distribution is set).
  int sample_initial_state(std::mt19937_64& rng) const;

 private:
  LinearMdpData data_;
  std::vector<Matrix> rewards_;
  std::vector<Matrix> kernels_;
};

/// Indicator-feature embedding of a finite MDP: d = S*A, phi(s,a) = e_{sA+a}.
/// `transitions[h-1]` is (S*A) x S, `rewards[h-1]` is S x A.
LinearMdpSpec tabular_to_linear(int num_states, int num_actions, int horizon,
                                const std::vector<Matrix>& transitions,
                                const std::vector<Matrix>& rewards);

/// Random finite MDP (Dirichlet(1) kernel rows, U[0,1] rewards), embedded
/// with indicator features.
LinearMdpSpec random_tabular_mdp(int num_states, int num_actions, int horizon,
                                 std::uint64_t seed);

/// Random linear MDP with simplex features: phi(s,a) ~ Dirichlet(1) on the
/// d-simplex, each theta_h row a distribution over states, mu_h ~ U[0,1]^d.
LinearMdpSpec random_simplex_mdp(int num_states, int num_actions, int horizon, int dim,
                                 std::uint64_t seed);

struct StepOutcome {
  double reward = 0.0;
  int next_state = 0;
};

/// Deterministic reward plus an inverse-CDF draw of the next state.
StepOutcome sample_transition(const LinearMdpSpec& spec, int s, int a, int h,
                              std::mt19937_64& rng);

/// policy[h-1][s] is the action taken in state s at stage h.
using Policy = std::vector<std::vector<int>>;

struct ValueTables {
  /// H + 1 entries of length S; values[H] is identically zero.
  std::vector<Vector> values;
  /// H entries of shape S x A.
  std::vector<Matrix> q_values;

  [[nodiscard]] double value(int h, int s) const {
    return values[static_cast<std::size_t>(h - 1)](s);
  }
  [[nodiscard]] double q(int h, int s, int a) const {
    return q_values[static_cast<std::size_t>(h - 1)](s, a);
  }
};

/// Backward induction on the Bellman optimality equation.
ValueTables exact_optimal_values(const LinearMdpSpec& spec);
/// Backward evaluation of a deterministic Markov policy.
ValueTables evaluate_policy(const LinearMdpSpec& spec, const Policy& policy);
/// Greedy policy of a table set, lowest action on ties.
Policy greedy_policy(const ValueTables& tables);

/// C * d * H * l * sqrt(log(d * l * H / delta)). Throws std::invalid_argument
/// when d * l * H / delta <= 1.
double beta_flute(int level, int dim, int horizon, double delta, double c_beta);

/// 17 * d * l * h * 4^l.
double stage_level_capacity(int dim, int level, int stage);
/// 9 * d * 2^l * sqrt(H^3 * l) / sqrt(lambda).
double weight_norm_cap(int dim, int level, int horizon, double lambda);

struct AgentConfig {
  double delta = 0.05;
  double lambda = 1.0;
  double c_beta = 1.0;
  std::size_t recondition_every = RegularizedDesign::kDefaultReconditionEvery;
};

/// Radius constant for runs that must stay optimistic with high probability.
inline constexpr double kTheoryCBeta = 16.0;

struct Transition {
  int state = 0;
  int action = 0;
  double reward = 0.0;
  int next_state = 0;
  std::uint64_t episode = 0;
};

struct EpisodeRecord {
  std::uint64_t episode = 0;
  /// S_k in force during the episode.
  int total_level = 1;
  std::vector<int> states;   // H + 1 visited states
  std::vector<int> actions;  // H
  std::vector<double> rewards;
  /// Realized levels l_1..l_H (all 1 for single-design agents).
  std::vector<int> levels;
  double episode_return = 0.0;
  /// Full state-to-action map the episode's action rule induces, used for
  /// exact evaluation of the suboptimality gap.
  Policy policy;
};

/// Regression state of one (stage, level) cell.
struct StageLevel {
  RegularizedDesign design;
  std::vector<Transition> members;
  double beta = 0.0;
  Vector weight;
  /// Q-table fitted for the current episode, S x A.
  Matrix q;
  /// Per (s,a): number of stored transitions into each next state, and
  /// the summed observed rewards. Regression targets are rebuilt from these.
  Matrix next_state_counts;
  Vector reward_sums;
  Vector pair_counts;
};

/// Least-squares value iteration with a multi-level partition of the
/// stored transitions at each stage and max-min value estimates.
class FluteAgent {
 public:
  /// `features` is (S*A) x d with rows phi(s, a), row index s*A + a.
  FluteAgent(Matrix features, int num_states, int num_actions, int horizon, AgentConfig config);

  /// Rebuilds regression targets and refits every level l <= S_k from stage
  /// H down to 1, then tabulates Q^l and the max-min values.
  void fit_episode_weights();

  [[nodiscard]] double q_value(int h, int l, int s, int a) const;
  /// max_a min_{1<=i<=l} Q^i_h(s, a).
  [[nodiscard]] double v_value(int h, int l, int s) const;
  /// argmax_a min_{1<=i<=max(1, l_prev-1)} Q^i_h(s, a), lowest action on ties.
  [[nodiscard]] int flute_act(int h, int s, int l_prev) const;
  /// Level for a new stage-h sample with features phi. Does not store it.
  [[nodiscard]] int flute_assign_level(int h, const VectorRef& phi, int l_prev,
                                       std::vector<double>* trace = nullptr) const;
  /// Appends a transition to C_h^level and updates that cell's covariance.
  void store(int h, int level, const Transition& t);

  /// One full episode: fit, act, file transitions, update S.
  EpisodeRecord run_episode(const LinearMdpSpec& env, std::mt19937_64& rng);

  /// Stage-wise map a(s, h) = argmax_a min_{i <= chain[h-1] - 1} Q^i_h(s, a)
  /// with chain[0] = S_k + 1 and chain[h] the level realized at stage h.
  [[nodiscard]] Policy realized_policy(const std::vector<int>& levels) const;

  [[nodiscard]] int total_level() const { return total_level_; }
  [[nodiscard]] int fitted_levels() const { return fitted_levels_; }
  [[nodiscard]] int num_levels(int h) const;
  [[nodiscard]] const StageLevel& level(int h, int l) const;
  [[nodiscard]] std::uint64_t episodes() const { return episodes_; }
  [[nodiscard]] int horizon() const { return horizon_; }
  [[nodiscard]] int dim() const { return dim_; }
  [[nodiscard]] int num_states() const { return num_states_; }
  [[nodiscard]] int num_actions() const { return num_actions_; }
  [[nodiscard]] const AgentConfig& config() const { return config_; }
  [[nodiscard]] const Matrix& features() const { return features_; }
  /// Episodes in which a deeper stage held a level above S_{k+1}.
  [[nodiscard]] std::uint64_t level_overflow_diagnostics() const { return overflow_diagnostics_; }

 private:
  StageLevel& ensure_level(int h, int l);
  [[nodiscard]] const Matrix& min_q(int h, int l) const;

  Matrix features_;
  int num_states_;
  int num_actions_;
  int horizon_;
  int dim_;
  AgentConfig config_;
  std::vector<std::vector<StageLevel>> stages_;
  /// min_q_[h-1][l-1] = min_{i<=l} Q^i_h, refreshed by fit_episode_weights.
  std::vector<std::vector<Matrix>> min_q_;
  int total_level_ = 1;
  int fitted_levels_ = 0;
  std::uint64_t episodes_ = 0;
  std::uint64_t overflow_diagnostics_ = 0;
};

/// LSVI-UCB: one design per stage over every past transition and the
/// constant radius c * d * H * sqrt(log(d * K * H / delta)).
class LsviUcbAgent {
 public:
  LsviUcbAgent(Matrix features, int num_states, int num_actions, int horizon,
               std::uint64_t episode_budget, AgentConfig config);

  void fit_episode_weights();
  [[nodiscard]] double q_value(int h, int s, int a) const;
  [[nodiscard]] int act(int h, int s) const;
  EpisodeRecord run_episode(const LinearMdpSpec& env, std::mt19937_64& rng);

  [[nodiscard]] double beta() const { return beta_; }
  [[nodiscard]] const StageLevel& stage(int h) const;
  [[nodiscard]] std::uint64_t episodes() const { return episodes_; }

 private:
  Matrix features_;
  int num_states_;
  int num_actions_;
  int horizon_;
  int dim_;
  AgentConfig config_;
  double beta_;
  std::vector<StageLevel> stages_;
  std::uint64_t episodes_ = 0;
};

}  // namespace upacrl::mdp
