#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "upacrl/linalg.hpp"

namespace upacrl::bandit {

/// Finite decision set; each column is one action.
using DecisionSet = Matrix;

/// 6 * sqrt(d * l * log(d * l / delta)). Throws std::invalid_argument when
/// d * l / delta <= 1.
double beta_bandit(int level, int dim, double delta);

/// 17 * d * l * 4^l, the most samples a level set can ever hold.
double level_capacity(int dim, int level);

enum class NoiseKind { kGaussian, kUniform, kNone };

/// Additive reward noise. kGaussian draws N(0, scale^2); kUniform draws
/// U[-scale, scale]. Both are 1-sub-Gaussian for scale <= 1.
struct NoiseModel {
  NoiseKind kind = NoiseKind::kGaussian;
  double scale = 1.0;

  double sample(std::mt19937_64& rng) const;
};

NoiseKind parse_noise_kind(const std::string& name);
std::string to_string(NoiseKind kind);

/// Linear bandit environment: hidden weight mu_star, a deterministic
/// round -> decision-set generator, and per-round seeded reward noise.
class BanditInstance {
 public:
  using DecisionSetSource = std::function<DecisionSet(std::uint64_t round)>;

  BanditInstance(Vector mu_star, DecisionSetSource source, NoiseModel noise,
                 std::uint64_t noise_seed);

  [[nodiscard]] int dim() const { return static_cast<int>(mu_star_.size()); }
  [[nodiscard]] const Vector& mu_star() const { return mu_star_; }
  [[nodiscard]] const NoiseModel& noise() const { return noise_; }

  /// D_k for 1-based round k.
  [[nodiscard]] DecisionSet decision_set(std::uint64_t round) const;
  [[nodiscard]] double mean_reward(const VectorRef& x) const { return mu_star_.dot(x); }
  /// <mu*, x> plus the noise draw reserved for `round`.
  [[nodiscard]] double reward(std::uint64_t round, const VectorRef& x) const;
  /// max_{y in D} <mu*, y> - <mu*, D[:, chosen]>.
  [[nodiscard]] double gap(const DecisionSet& set, std::size_t chosen) const;

 private:
  Vector mu_star_;
  DecisionSetSource source_;
  NoiseModel noise_;
  std::uint64_t noise_seed_;
};

/// The two-phase instance on which OFUL-type algorithms keep making unit
/// mistakes: d = 2, mu* = (0, 1), no noise. Rounds 1..K offer
/// {(1,0), (-1,0)}; every later round offers {(0,1), (0,-1)}.
BanditInstance hard_instance(int phase_one_rounds);

/// Number of informative second-phase rounds, ceil(log2 K).
int hard_instance_phase_two_length(int phase_one_rounds);

/// mu* uniform on the sphere of radius `mu_norm`; each D_k holds
/// `num_actions` unit vectors drawn uniformly from the sphere. With
/// `fixed_set` the same D is offered every round.
BanditInstance random_instance(int dim, int num_actions, std::uint64_t instance_seed,
                               NoiseModel noise, std::uint64_t noise_seed, bool fixed_set = false,
                               double mu_norm = 1.0);

struct CertificationCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// ||mu*|| <= 1 and ||x|| <= 1 for every action of the first `rounds` sets.
std::vector<CertificationCheck> certify(const BanditInstance& instance, std::uint64_t rounds);

/// One cell C^l of the sample partition together with its regression state.
struct BanditLevel {
  RegularizedDesign design;
  std::vector<std::uint64_t> members;
  double beta = 0.0;
  Vector weight;
};

/// Uniform-PAC OFUL. Past rounds are partitioned into level sets; level l
/// keeps its own ridge estimate and radius beta_l, and the action score is
/// the minimum of the per-level optimistic predictions over l = 1..S.
class UpacOfulAgent {
 public:
  UpacOfulAgent(int dim, double delta, double lambda = 1.0,
                std::size_t recondition_every = RegularizedDesign::kDefaultReconditionEvery);

  /// min_{1<=l<=S} w_l . x + beta_l * ||x||_{Sigma_l^{-1}}.
  [[nodiscard]] double optimistic_score(const VectorRef& x) const;
  /// Prediction of a single level; `level` is 1-based and must exist.
  [[nodiscard]] double level_score(int level, const VectorRef& x) const;
  /// argmax of optimistic_score over the columns, lowest index on ties.
  [[nodiscard]] std::size_t select_action(const DecisionSet& set) const;

  /// Lowest level whose uncertainty for x exceeds 2^{-l}, capped at S + 1.
  /// Creates level S + 1 on demand. When `trace` is given, receives the
  /// elliptical norms tested by the loop, in order.
  int assign_level(const VectorRef& x, std::vector<double>* trace = nullptr);
  /// Files the current round under `level` and updates that level's fit.
  void observe_reward(const VectorRef& x, double reward, int level);

  [[nodiscard]] int dim() const { return dim_; }
  [[nodiscard]] double delta() const { return delta_; }
  [[nodiscard]] double lambda() const { return lambda_; }
  [[nodiscard]] int total_level() const { return total_level_; }
  [[nodiscard]] int num_levels() const { return static_cast<int>(levels_.size()); }
  [[nodiscard]] const BanditLevel& level(int l) const;
  [[nodiscard]] std::uint64_t rounds_observed() const { return rounds_; }

 private:
  BanditLevel& ensure_level(int l);

  int dim_;
  double delta_;
  double lambda_;
  std::size_t recondition_every_;
  std::vector<BanditLevel> levels_;
  int total_level_ = 1;
  std::uint64_t rounds_ = 0;
};

enum class TieBreak { kLowest, kRandom };

TieBreak parse_tie_break(const std::string& name);

/// Single-design OFUL baseline with radius sqrt(d log((1+k)/delta)) + sqrt(lambda).
/// With `unit_ball` the optimistic parameter is additionally restricted to
/// the unit ball, and the action value becomes
///   max { <x, theta> : ||theta - w||_Sigma <= beta, ||theta||_2 <= 1 }.
class OfulAgent {
 public:
  OfulAgent(int dim, double delta, double lambda = 1.0, bool unit_ball = false,
            TieBreak tie_break = TieBreak::kLowest, std::uint64_t seed = 0,
            std::size_t recondition_every = RegularizedDesign::kDefaultReconditionEvery);

  /// Radius used at round k (1-based).
  [[nodiscard]] double radius(std::uint64_t round) const;
  [[nodiscard]] double optimistic_value(const VectorRef& x) const;
  /// Chooses an action for the upcoming round. Random tie-breaking draws from
  /// a stream keyed on (seed, round), so replays are exact.
  [[nodiscard]] std::size_t select_action(const DecisionSet& set) const;
  void observe_reward(const VectorRef& x, double reward);

  [[nodiscard]] const RegularizedDesign& design() const { return design_; }
  [[nodiscard]] const Vector& weight() const { return weight_; }
  [[nodiscard]] std::uint64_t rounds_observed() const { return rounds_; }
  [[nodiscard]] bool unit_ball() const { return unit_ball_; }

  /// Relative tolerance under which two action values count as tied for
  /// random tie-breaking.
  static constexpr double kTieTolerance = 1e-9;

 private:
  int dim_;
  double delta_;
  double lambda_;
  bool unit_ball_;
  TieBreak tie_break_;
  std::uint64_t seed_;
  RegularizedDesign design_;
  Vector weight_;
  std::uint64_t rounds_ = 0;
};

/// max <x, theta> over {theta : ||theta - center||_cov <= radius} intersected
/// with the unit ball. Falls back to the ellipsoid-only maximum when the
/// intersection is empty.
double ball_constrained_ucb(const VectorRef& x, const VectorRef& center, const Matrix& cov,
                            const Matrix& cov_inv, double radius);

}  // namespace upacrl::bandit
