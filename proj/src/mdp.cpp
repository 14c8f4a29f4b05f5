#include "upacrl/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <utility>

#include "upacrl/errors.hpp"
#include "upacrl/rng.hpp"

namespace upacrl::mdp {

namespace {

std::string where(int h, int s, int a) {
  std::ostringstream os;
  os << "(h=" << h << ", s=" << s << ", a=" << a << ")";
  return os.str();
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}

// Lowest index attaining the row maximum.
int argmax_row(const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  int best = 0;
  for (Eigen::Index a = 1; a < row.size(); ++a) {
    if (row(a) > row(best)) best = static_cast<int>(a);
  }
  return best;
}

}  // namespace

// ---------------------------------------------------------------------------
// Certification

std::vector<CertificationCheck> certify(const LinearMdpData& m) {
  std::vector<CertificationCheck> checks;

  CertificationCheck shape{"shapes", true, "dimensions are consistent"};
  auto shape_fail = [&](const std::string& msg) {
    if (shape.passed) {
      shape.passed = false;
      shape.detail = msg;
    }
  };
  if (m.dim < 1 || m.horizon < 1 || m.num_states < 1 || m.num_actions < 1) {
    shape_fail("dim, horizon, num_states and num_actions must all be >= 1");
  } else {
    const Eigen::Index pairs = static_cast<Eigen::Index>(m.num_states) * m.num_actions;
    if (m.features.rows() != pairs || m.features.cols() != m.dim) {
      shape_fail("features must be (S*A) x d");
    }
    if (static_cast<int>(m.theta.size()) != m.horizon ||
        static_cast<int>(m.mu.size()) != m.horizon) {
      shape_fail("theta and mu need one entry per stage");
    }
    for (std::size_t h = 0; h < m.theta.size(); ++h) {
      if (m.theta[h].rows() != m.dim || m.theta[h].cols() != m.num_states) {
        shape_fail("theta at stage " + std::to_string(h + 1) + " must be d x S");
      }
    }
    for (std::size_t h = 0; h < m.mu.size(); ++h) {
      if (m.mu[h].size() != m.dim) {
        shape_fail("mu at stage " + std::to_string(h + 1) + " must have d entries");
      }
    }
    if (m.initial_state < 0 || m.initial_state >= m.num_states) {
      shape_fail("initial_state out of range");
    }
    if (m.initial_distribution.size() != 0) {
      if (m.initial_distribution.size() != m.num_states ||
          m.initial_distribution.minCoeff() < 0.0 ||
          std::abs(m.initial_distribution.sum() - 1.0) > kKernelSumTolerance) {
        shape_fail("initial_distribution must be a distribution over the S states");
      }
    }
  }
  checks.push_back(shape);
  if (!shape.passed) return checks;

  const int S = m.num_states;
  const int A = m.num_actions;
  const double sqrt_d = std::sqrt(static_cast<double>(m.dim));

  CertificationCheck feat{"feature_norms", true, "||phi(s,a)|| <= 1 everywhere"};
  for (int s = 0; s < S && feat.passed; ++s) {
    for (int a = 0; a < A && feat.passed; ++a) {
      const double n = m.features.row(s * A + a).norm();
      if (n > 1.0 + kNormTolerance) {
        feat.passed = false;
        feat.detail = "||phi|| = " + fmt(n) + " at (s=" + std::to_string(s) +
                      ", a=" + std::to_string(a) + ")";
      }
    }
  }
  checks.push_back(feat);

  CertificationCheck nonneg{"kernel_nonnegative", true, "all transition probabilities >= 0"};
  CertificationCheck normalized{"kernel_normalized", true, "all transition rows sum to 1"};
  CertificationCheck rewards{"reward_range", true, "all rewards lie in [0, 1]"};
  for (int h = 1; h <= m.horizon; ++h) {
    const Matrix kernel = m.features * m.theta[static_cast<std::size_t>(h - 1)];
    const Vector r = m.features * m.mu[static_cast<std::size_t>(h - 1)];
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) {
        const Eigen::Index row = s * A + a;
        if (nonneg.passed && kernel.row(row).minCoeff() < -kKernelNegativeTolerance) {
          nonneg.passed = false;
          nonneg.detail = "negative probability " + fmt(kernel.row(row).minCoeff()) + " at " +
                          where(h, s, a);
        }
        const double sum = kernel.row(row).sum();
        if (normalized.passed && std::abs(sum - 1.0) > kKernelSumTolerance) {
          normalized.passed = false;
          normalized.detail = "row sums to " + fmt(sum) + " at " + where(h, s, a);
        }
        if (rewards.passed && (r(row) < -kRewardTolerance || r(row) > 1.0 + kRewardTolerance)) {
          rewards.passed = false;
          rewards.detail = "reward " + fmt(r(row)) + " at " + where(h, s, a);
        }
      }
    }
  }
  checks.push_back(nonneg);
  checks.push_back(normalized);
  checks.push_back(rewards);

  CertificationCheck mu_norm{"mu_norms", true, "||mu_h|| <= sqrt(d)"};
  CertificationCheck theta_norm{"theta_total_norms", true, "||theta_h(S)|| <= sqrt(d)"};
  for (int h = 1; h <= m.horizon; ++h) {
    const double nm = m.mu[static_cast<std::size_t>(h - 1)].norm();
    if (mu_norm.passed && nm > sqrt_d + kNormTolerance) {
      mu_norm.passed = false;
      mu_norm.detail = "||mu_" + std::to_string(h) + "|| = " + fmt(nm);
    }
    const double nt = m.theta[static_cast<std::size_t>(h - 1)].rowwise().sum().norm();
    if (theta_norm.passed && nt > sqrt_d + kNormTolerance) {
      theta_norm.passed = false;
      theta_norm.detail = "||theta_" + std::to_string(h) + "(S)|| = " + fmt(nt);
    }
  }
  checks.push_back(mu_norm);
  checks.push_back(theta_norm);
  return checks;
}

LinearMdpSpec::LinearMdpSpec(LinearMdpData data) : data_(std::move(data)) {
  for (const auto& check : certify(data_)) {
    if (!check.passed) {
      throw CertificationError(check.name + ": " + check.detail);
    }
  }
  for (int h = 1; h <= data_.horizon; ++h) {
    const Vector r = data_.features * data_.mu[static_cast<std::size_t>(h - 1)];
    Matrix table(data_.num_states, data_.num_actions);
    for (int s = 0; s < data_.num_states; ++s) {
      for (int a = 0; a < data_.num_actions; ++a) table(s, a) = r(s * data_.num_actions + a);
    }
    rewards_.push_back(std::move(table));
    kernels_.push_back(data_.features * data_.theta[static_cast<std::size_t>(h - 1)]);
  }
}

Vector LinearMdpSpec::feature(int s, int a) const {
  return data_.features.row(s * data_.num_actions + a).transpose();
}

double LinearMdpSpec::reward(int h, int s, int a) const { return rewards(h)(s, a); }

Eigen::Ref<const Eigen::RowVectorXd> LinearMdpSpec::transition_row(int h, int s, int a) const {
  return kernel(h).row(s * data_.num_actions + a);
}

int LinearMdpSpec::sample_initial_state(std::mt19937_64& rng) const {
  if (data_.initial_distribution.size() == 0) return data_.initial_state;
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  double cum = 0.0;
  for (int s = 0; s < data_.num_states; ++s) {
    cum += data_.initial_distribution(s);
    if (u < cum) return s;
  }
  return data_.num_states - 1;
}

// ---------------------------------------------------------------------------
// Environment families

LinearMdpSpec tabular_to_linear(int num_states, int num_actions, int horizon,
                                const std::vector<Matrix>& transitions,
                                const std::vector<Matrix>& rewards) {
  if (num_states < 1 || num_actions < 1 || horizon < 1) {
    throw std::invalid_argument("tabular_to_linear: sizes must be >= 1");
  }
  if (static_cast<int>(transitions.size()) != horizon ||
      static_cast<int>(rewards.size()) != horizon) {
    throw std::invalid_argument("tabular_to_linear: need one table per stage");
  }
  const int d = num_states * num_actions;
  LinearMdpData data;
  data.dim = d;
  data.horizon = horizon;
  data.num_states = num_states;
  data.num_actions = num_actions;
  data.features = Matrix::Identity(d, d);
  for (int h = 0; h < horizon; ++h) {
    const Matrix& p = transitions[static_cast<std::size_t>(h)];
    const Matrix& r = rewards[static_cast<std::size_t>(h)];
    if (p.rows() != d || p.cols() != num_states || r.rows() != num_states ||
        r.cols() != num_actions) {
      throw std::invalid_argument("tabular_to_linear: table shape mismatch at stage " +
                                  std::to_string(h + 1));
    }
    data.theta.push_back(p);
    Vector mu(d);
    for (int s = 0; s < num_states; ++s) {
      for (int a = 0; a < num_actions; ++a) mu(s * num_actions + a) = r(s, a);
    }
    data.mu.push_back(std::move(mu));
  }
  return LinearMdpSpec(std::move(data));
}

namespace {

Eigen::RowVectorXd dirichlet_ones(int n, std::mt19937_64& rng) {
  std::exponential_distribution<double> expo(1.0);
  Eigen::RowVectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = expo(rng);
  return v / v.sum();
}

}  // namespace

LinearMdpSpec random_tabular_mdp(int num_states, int num_actions, int horizon,
                                 std::uint64_t seed) {
  auto rng = make_stream(seed, StreamTag::kInstance, 0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Matrix> transitions;
  std::vector<Matrix> rewards;
  for (int h = 0; h < horizon; ++h) {
    Matrix p(num_states * num_actions, num_states);
    for (Eigen::Index row = 0; row < p.rows(); ++row) p.row(row) = dirichlet_ones(num_states, rng);
    Matrix r(num_states, num_actions);
    for (int s = 0; s < num_states; ++s) {
      for (int a = 0; a < num_actions; ++a) r(s, a) = unit(rng);
    }
    transitions.push_back(std::move(p));
    rewards.push_back(std::move(r));
  }
  return tabular_to_linear(num_states, num_actions, horizon, transitions, rewards);
}

LinearMdpSpec random_simplex_mdp(int num_states, int num_actions, int horizon, int dim,
                                 std::uint64_t seed) {
  if (num_states < 1 || num_actions < 1 || horizon < 1 || dim < 1) {
    throw std::invalid_argument("random_simplex_mdp: sizes must be >= 1");
  }
  auto rng = make_stream(seed, StreamTag::kInstance, 0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  LinearMdpData data;
  data.dim = dim;
  data.horizon = horizon;
  data.num_states = num_states;
  data.num_actions = num_actions;
  data.features.resize(static_cast<Eigen::Index>(num_states) * num_actions, dim);
  for (Eigen::Index row = 0; row < data.features.rows(); ++row) {
    data.features.row(row) = dirichlet_ones(dim, rng);
  }
  for (int h = 0; h < horizon; ++h) {
    Matrix theta(dim, num_states);
    for (int i = 0; i < dim; ++i) theta.row(i) = dirichlet_ones(num_states, rng);
    Vector mu(dim);
    for (int i = 0; i < dim; ++i) mu(i) = unit(rng);
    data.theta.push_back(std::move(theta));
    data.mu.push_back(std::move(mu));
  }
  return LinearMdpSpec(std::move(data));
}

StepOutcome sample_transition(const LinearMdpSpec& spec, int s, int a, int h,
                              std::mt19937_64& rng) {
  const auto row = spec.transition_row(h, s, a);
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  double cum = 0.0;
  int last_positive = 0;
  for (Eigen::Index next = 0; next < row.size(); ++next) {
    const double p = std::max(0.0, row(next));
    if (p > 0.0) last_positive = static_cast<int>(next);
    cum += p;
    if (u < cum) return {spec.reward(h, s, a), static_cast<int>(next)};
  }
  return {spec.reward(h, s, a), last_positive};
}

// ---------------------------------------------------------------------------
// Dynamic programming

namespace {

Matrix bellman_backup(const LinearMdpSpec& spec, int h, const Vector& next_values) {
  const Vector expected = spec.kernel(h) * next_values;
  Matrix q = spec.rewards(h);
  for (int s = 0; s < spec.num_states(); ++s) {
    for (int a = 0; a < spec.num_actions(); ++a) q(s, a) += expected(s * spec.num_actions() + a);
  }
  return q;
}

}  // namespace

ValueTables exact_optimal_values(const LinearMdpSpec& spec) {
  const int H = spec.horizon();
  ValueTables t;
  t.values.assign(static_cast<std::size_t>(H + 1), Vector::Zero(spec.num_states()));
  t.q_values.resize(static_cast<std::size_t>(H));
  for (int h = H; h >= 1; --h) {
    Matrix q = bellman_backup(spec, h, t.values[static_cast<std::size_t>(h)]);
    t.values[static_cast<std::size_t>(h - 1)] = q.rowwise().maxCoeff();
    t.q_values[static_cast<std::size_t>(h - 1)] = std::move(q);
  }
  return t;
}

ValueTables evaluate_policy(const LinearMdpSpec& spec, const Policy& policy) {
  const int H = spec.horizon();
  if (static_cast<int>(policy.size()) != H) {
    throw std::invalid_argument("evaluate_policy: policy needs one row per stage");
  }
  ValueTables t;
  t.values.assign(static_cast<std::size_t>(H + 1), Vector::Zero(spec.num_states()));
  t.q_values.resize(static_cast<std::size_t>(H));
  for (int h = H; h >= 1; --h) {
    const auto& rule = policy[static_cast<std::size_t>(h - 1)];
    if (static_cast<int>(rule.size()) != spec.num_states()) {
      throw std::invalid_argument("evaluate_policy: policy row has wrong length");
    }
    Matrix q = bellman_backup(spec, h, t.values[static_cast<std::size_t>(h)]);
    Vector v(spec.num_states());
    for (int s = 0; s < spec.num_states(); ++s) {
      const int a = rule[static_cast<std::size_t>(s)];
      if (a < 0 || a >= spec.num_actions()) {
        throw std::invalid_argument("evaluate_policy: action out of range");
      }
      v(s) = q(s, a);
    }
    t.values[static_cast<std::size_t>(h - 1)] = std::move(v);
    t.q_values[static_cast<std::size_t>(h - 1)] = std::move(q);
  }
  return t;
}

Policy greedy_policy(const ValueTables& tables) {
  Policy p;
  for (const Matrix& q : tables.q_values) {
    std::vector<int> rule(static_cast<std::size_t>(q.rows()));
    for (Eigen::Index s = 0; s < q.rows(); ++s) rule[static_cast<std::size_t>(s)] = argmax_row(q.row(s));
    p.push_back(std::move(rule));
  }
  return p;
}

// ---------------------------------------------------------------------------
// Radii and caps

double beta_flute(int level, int dim, int horizon, double delta, double c_beta) {
  if (level < 1 || dim < 1 || horizon < 1 || !(delta > 0.0)) {
    throw std::invalid_argument("beta_flute: need level, dim, horizon >= 1 and delta > 0");
  }
  const double arg = static_cast<double>(dim) * level * horizon / delta;
  if (!(arg > 1.0)) throw std::invalid_argument("beta_flute: d*l*H/delta must exceed 1");
  if (c_beta < 0.0) throw std::invalid_argument("beta_flute: c_beta must be >= 0");
  return c_beta * dim * horizon * level * std::sqrt(std::log(arg));
}

double stage_level_capacity(int dim, int level, int stage) {
  return 17.0 * dim * level * stage * std::pow(4.0, level);
}

double weight_norm_cap(int dim, int level, int horizon, double lambda) {
  const double h = horizon;
  return 9.0 * dim * std::pow(2.0, level) * std::sqrt(h * h * h * level) / std::sqrt(lambda);
}

// ---------------------------------------------------------------------------
// Shared regression helpers

namespace {

StageLevel make_stage_level(int dim, int pairs, int num_states, double beta,
                            const AgentConfig& config) {
  return StageLevel{RegularizedDesign(dim, config.lambda, config.recondition_every),
                    {},
                    beta,
                    Vector::Zero(dim),
                    Matrix(),
                    Matrix::Zero(pairs, num_states),
                    Vector::Zero(pairs),
                    Vector::Zero(pairs)};
}

void record_transition(StageLevel& lv, const Matrix& features, int num_actions,
                       const Transition& t) {
  const Eigen::Index pair = static_cast<Eigen::Index>(t.state) * num_actions + t.action;
  lv.members.push_back(t);
  lv.design.rank_one_update(features.row(pair).transpose());
  lv.next_state_counts(pair, t.next_state) += 1.0;
  lv.reward_sums(pair) += t.reward;
  lv.pair_counts(pair) += 1.0;
}

// Rebuilds b = sum_i phi_i [r_i + V(s'_i)] from the per-pair aggregates,
// solves for the weight and tabulates min{H, w.phi + beta ||phi||}.
void refit(StageLevel& lv, const Matrix& features, const Vector& next_values, int num_states,
           int num_actions, double horizon) {
  lv.design.reset_targets();
  for (Eigen::Index pair = 0; pair < features.rows(); ++pair) {
    if (lv.pair_counts(pair) == 0.0) continue;
    const double y = lv.reward_sums(pair) + lv.next_state_counts.row(pair).dot(next_values);
    lv.design.accumulate_target(features.row(pair).transpose(), y);
  }
  lv.weight = lv.design.ridge_solve();
  lv.q.resize(num_states, num_actions);
  for (int s = 0; s < num_states; ++s) {
    for (int a = 0; a < num_actions; ++a) {
      const auto phi = features.row(static_cast<Eigen::Index>(s) * num_actions + a).transpose();
      const double raw = lv.weight.dot(phi) + lv.beta * lv.design.elliptical_norm(phi);
      lv.q(s, a) = std::min(horizon, raw);
    }
  }
}

void check_features(const Matrix& features, int num_states, int num_actions, int horizon) {
  if (num_states < 1 || num_actions < 1 || horizon < 1) {
    throw std::invalid_argument("agent: sizes must be >= 1");
  }
  if (features.rows() != static_cast<Eigen::Index>(num_states) * num_actions ||
      features.cols() < 1) {
    throw std::invalid_argument("agent: features must be (S*A) x d");
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// FLUTE

FluteAgent::FluteAgent(Matrix features, int num_states, int num_actions, int horizon,
                       AgentConfig config)
    : features_(std::move(features)), num_states_(num_states), num_actions_(num_actions),
      horizon_(horizon), dim_(static_cast<int>(features_.cols())), config_(config) {
  check_features(features_, num_states_, num_actions_, horizon_);
  if (!(config_.delta > 0.0 && config_.delta < 1.0)) {
    throw std::invalid_argument("FluteAgent: delta must lie in (0, 1)");
  }
  stages_.resize(static_cast<std::size_t>(horizon_));
  min_q_.resize(static_cast<std::size_t>(horizon_));
  for (int h = 1; h <= horizon_; ++h) ensure_level(h, 1);
}

StageLevel& FluteAgent::ensure_level(int h, int l) {
  auto& levels = stages_[static_cast<std::size_t>(h - 1)];
  while (static_cast<int>(levels.size()) < l) {
    const int next = static_cast<int>(levels.size()) + 1;
    levels.push_back(make_stage_level(
        dim_, num_states_ * num_actions_, num_states_,
        beta_flute(next, dim_, horizon_, config_.delta, config_.c_beta), config_));
  }
  return levels[static_cast<std::size_t>(l - 1)];
}

int FluteAgent::num_levels(int h) const {
  return static_cast<int>(stages_.at(static_cast<std::size_t>(h - 1)).size());
}

const StageLevel& FluteAgent::level(int h, int l) const {
  if (h < 1 || h > horizon_ || l < 1 || l > num_levels(h)) {
    throw std::out_of_range("FluteAgent: no such (stage, level)");
  }
  return stages_[static_cast<std::size_t>(h - 1)][static_cast<std::size_t>(l - 1)];
}

void FluteAgent::fit_episode_weights() {
  const int levels = total_level_;
  for (int h = 1; h <= horizon_; ++h) ensure_level(h, levels);

  // next_values[l-1] = V^l_{h+1}; zero past the horizon.
  std::vector<Vector> next_values(static_cast<std::size_t>(levels), Vector::Zero(num_states_));
  for (int h = horizon_; h >= 1; --h) {
    auto& stage = stages_[static_cast<std::size_t>(h - 1)];
    auto& mins = min_q_[static_cast<std::size_t>(h - 1)];
    mins.resize(static_cast<std::size_t>(levels));
    for (int l = 1; l <= levels; ++l) {
      StageLevel& lv = stage[static_cast<std::size_t>(l - 1)];
      refit(lv, features_, next_values[static_cast<std::size_t>(l - 1)], num_states_,
            num_actions_, horizon_);
      mins[static_cast<std::size_t>(l - 1)] =
          l == 1 ? lv.q : Matrix(mins[static_cast<std::size_t>(l - 2)].cwiseMin(lv.q));
    }
    for (int l = 1; l <= levels; ++l) {
      next_values[static_cast<std::size_t>(l - 1)] =
          mins[static_cast<std::size_t>(l - 1)].rowwise().maxCoeff();
    }
  }
  fitted_levels_ = levels;
}

const Matrix& FluteAgent::min_q(int h, int l) const {
  if (h < 1 || h > horizon_ || l < 1 || l > fitted_levels_) {
    throw std::out_of_range("FluteAgent: level " + std::to_string(l) +
                            " not fitted for this episode");
  }
  return min_q_[static_cast<std::size_t>(h - 1)][static_cast<std::size_t>(l - 1)];
}

double FluteAgent::q_value(int h, int l, int s, int a) const {
  if (l < 1 || l > fitted_levels_) {
    throw std::out_of_range("FluteAgent: level not fitted for this episode");
  }
  return level(h, l).q(s, a);
}

double FluteAgent::v_value(int h, int l, int s) const { return min_q(h, l).row(s).maxCoeff(); }

int FluteAgent::flute_act(int h, int s, int l_prev) const {
  if (l_prev < 1) throw std::invalid_argument("flute_act: l_prev must be >= 1");
  // l_prev = 1 leaves the min over i <= l_prev - 1 empty; fall back to Q^1.
  return argmax_row(min_q(h, std::max(1, l_prev - 1)).row(s));
}

int FluteAgent::flute_assign_level(int h, const VectorRef& phi, int l_prev,
                                   std::vector<double>* trace) const {
  if (l_prev < 1) throw std::invalid_argument("flute_assign_level: l_prev must be >= 1");
  int l = 1;
  while (l <= l_prev - 1) {
    const double norm = level(h, l).design.elliptical_norm(phi);
    if (trace) trace->push_back(norm);
    if (norm > std::ldexp(1.0, -l)) break;
    ++l;
  }
  return l;
}

void FluteAgent::store(int h, int l, const Transition& t) {
  record_transition(ensure_level(h, l), features_, num_actions_, t);
}

Policy FluteAgent::realized_policy(const std::vector<int>& levels) const {
  if (static_cast<int>(levels.size()) != horizon_) {
    throw std::invalid_argument("realized_policy: need one level per stage");
  }
  Policy policy(static_cast<std::size_t>(horizon_), std::vector<int>(num_states_, 0));
  int l_prev = fitted_levels_ + 1;
  for (int h = 1; h <= horizon_; ++h) {
    const Matrix& m = min_q(h, std::max(1, l_prev - 1));
    for (int s = 0; s < num_states_; ++s) {
      policy[static_cast<std::size_t>(h - 1)][static_cast<std::size_t>(s)] = argmax_row(m.row(s));
    }
    l_prev = levels[static_cast<std::size_t>(h - 1)];
  }
  return policy;
}

EpisodeRecord FluteAgent::run_episode(const LinearMdpSpec& env, std::mt19937_64& rng) {
  if (env.num_states() != num_states_ || env.num_actions() != num_actions_ ||
      env.horizon() != horizon_ || env.dim() != dim_) {
    throw std::invalid_argument("FluteAgent::run_episode: environment shape mismatch");
  }
  fit_episode_weights();
  ++episodes_;

  EpisodeRecord rec;
  rec.episode = episodes_;
  rec.total_level = total_level_;
  int s = env.sample_initial_state(rng);
  rec.states.push_back(s);
  int l_prev = total_level_ + 1;
  for (int h = 1; h <= horizon_; ++h) {
    const int a = flute_act(h, s, l_prev);
    const auto phi = features_.row(static_cast<Eigen::Index>(s) * num_actions_ + a).transpose();
    const int l = flute_assign_level(h, phi, l_prev);
    const StepOutcome out = sample_transition(env, s, a, h, rng);
    store(h, l, Transition{s, a, out.reward, out.next_state, episodes_});

    rec.actions.push_back(a);
    rec.rewards.push_back(out.reward);
    rec.levels.push_back(l);
    rec.episode_return += out.reward;
    rec.states.push_back(out.next_state);
    l_prev = l;
    s = out.next_state;
  }
  rec.policy = realized_policy(rec.levels);

  int highest = 1;
  const auto& first = stages_.front();
  for (int l = 1; l <= static_cast<int>(first.size()); ++l) {
    if (!first[static_cast<std::size_t>(l - 1)].members.empty()) highest = l;
  }
  total_level_ = highest;
  for (int h = 2; h <= horizon_; ++h) {
    const auto& stage = stages_[static_cast<std::size_t>(h - 1)];
    for (int l = total_level_ + 1; l <= static_cast<int>(stage.size()); ++l) {
      if (!stage[static_cast<std::size_t>(l - 1)].members.empty()) {
        ++overflow_diagnostics_;
        h = horizon_;
        break;
      }
    }
  }
  return rec;
}

// ---------------------------------------------------------------------------
// LSVI-UCB

LsviUcbAgent::LsviUcbAgent(Matrix features, int num_states, int num_actions, int horizon,
                           std::uint64_t episode_budget, AgentConfig config)
    : features_(std::move(features)), num_states_(num_states), num_actions_(num_actions),
      horizon_(horizon), dim_(static_cast<int>(features_.cols())), config_(config) {
  check_features(features_, num_states_, num_actions_, horizon_);
  if (!(config_.delta > 0.0 && config_.delta < 1.0)) {
    throw std::invalid_argument("LsviUcbAgent: delta must lie in (0, 1)");
  }
  if (episode_budget < 1) throw std::invalid_argument("LsviUcbAgent: episode budget must be >= 1");
  const double arg = static_cast<double>(dim_) * static_cast<double>(episode_budget) * horizon_ /
                     config_.delta;
  beta_ = config_.c_beta * dim_ * horizon_ * std::sqrt(std::log(arg));
  for (int h = 0; h < horizon_; ++h) {
    stages_.push_back(make_stage_level(dim_, num_states_ * num_actions_, num_states_, beta_, config_));
  }
}

const StageLevel& LsviUcbAgent::stage(int h) const {
  return stages_.at(static_cast<std::size_t>(h - 1));
}

void LsviUcbAgent::fit_episode_weights() {
  Vector next_values = Vector::Zero(num_states_);
  for (int h = horizon_; h >= 1; --h) {
    StageLevel& lv = stages_[static_cast<std::size_t>(h - 1)];
    refit(lv, features_, next_values, num_states_, num_actions_, horizon_);
    next_values = lv.q.rowwise().maxCoeff();
  }
}

double LsviUcbAgent::q_value(int h, int s, int a) const { return stage(h).q(s, a); }

int LsviUcbAgent::act(int h, int s) const { return argmax_row(stage(h).q.row(s)); }

EpisodeRecord LsviUcbAgent::run_episode(const LinearMdpSpec& env, std::mt19937_64& rng) {
  if (env.num_states() != num_states_ || env.num_actions() != num_actions_ ||
      env.horizon() != horizon_ || env.dim() != dim_) {
    throw std::invalid_argument("LsviUcbAgent::run_episode: environment shape mismatch");
  }
  fit_episode_weights();
  ++episodes_;
  EpisodeRecord rec;
  rec.episode = episodes_;
  int s = env.sample_initial_state(rng);
  rec.states.push_back(s);
  for (int h = 1; h <= horizon_; ++h) {
    const int a = act(h, s);
    const StepOutcome out = sample_transition(env, s, a, h, rng);
    record_transition(stages_[static_cast<std::size_t>(h - 1)], features_, num_actions_,
                      Transition{s, a, out.reward, out.next_state, episodes_});
    rec.actions.push_back(a);
    rec.rewards.push_back(out.reward);
    rec.levels.push_back(1);
    rec.episode_return += out.reward;
    rec.states.push_back(out.next_state);
    s = out.next_state;
  }
  rec.policy.resize(static_cast<std::size_t>(horizon_));
  for (int h = 1; h <= horizon_; ++h) {
    for (int st = 0; st < num_states_; ++st) rec.policy[static_cast<std::size_t>(h - 1)].push_back(act(h, st));
  }
  return rec;
}

}  // namespace upacrl::mdp
