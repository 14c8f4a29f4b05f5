#include "upacrl/bandit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>

#include "upacrl/errors.hpp"
#include "upacrl/rng.hpp"

namespace upacrl::bandit {

double beta_bandit(int level, int dim, double delta) {
  if (level < 1 || dim < 1 || !(delta > 0.0)) {
    throw std::invalid_argument("beta_bandit: need level >= 1, dim >= 1, delta > 0");
  }
  const double arg = static_cast<double>(dim) * level / delta;
  if (!(arg > 1.0)) {
    throw std::invalid_argument("beta_bandit: d*l/delta must exceed 1");
  }
  return 6.0 * std::sqrt(static_cast<double>(dim) * level * std::log(arg));
}

double level_capacity(int dim, int level) {
  return 17.0 * dim * level * std::pow(4.0, level);
}

double NoiseModel::sample(std::mt19937_64& rng) const {
  switch (kind) {
    case NoiseKind::kGaussian:
      return std::normal_distribution<double>(0.0, scale)(rng);
    case NoiseKind::kUniform:
      return std::uniform_real_distribution<double>(-scale, scale)(rng);
    case NoiseKind::kNone:
      return 0.0;
  }
  return 0.0;
}

NoiseKind parse_noise_kind(const std::string& name) {
  if (name == "gaussian") return NoiseKind::kGaussian;
  if (name == "uniform") return NoiseKind::kUniform;
  if (name == "none") return NoiseKind::kNone;
  throw ConfigError("unknown noise model '" + name + "' (valid: gaussian, uniform, none)");
}

std::string to_string(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::kGaussian: return "gaussian";
    case NoiseKind::kUniform: return "uniform";
    case NoiseKind::kNone: return "none";
  }
  return "?";
}

TieBreak parse_tie_break(const std::string& name) {
  if (name == "lowest") return TieBreak::kLowest;
  if (name == "random") return TieBreak::kRandom;
  throw ConfigError("unknown tie_break '" + name + "' (valid: lowest, random)");
}

// ---------------------------------------------------------------------------
// Instances

BanditInstance::BanditInstance(Vector mu_star, DecisionSetSource source, NoiseModel noise,
                               std::uint64_t noise_seed)
    : mu_star_(std::move(mu_star)), source_(std::move(source)), noise_(noise),
      noise_seed_(noise_seed) {
  if (mu_star_.size() < 1) throw std::invalid_argument("BanditInstance: empty mu_star");
  if (!source_) throw std::invalid_argument("BanditInstance: missing decision-set source");
}

DecisionSet BanditInstance::decision_set(std::uint64_t round) const {
  DecisionSet set = source_(round);
  if (set.rows() != dim()) {
    throw std::logic_error("BanditInstance: decision set has wrong dimension");
  }
  return set;
}

double BanditInstance::reward(std::uint64_t round, const VectorRef& x) const {
  auto rng = make_stream(noise_seed_, StreamTag::kNoise, round);
  return mean_reward(x) + noise_.sample(rng);
}

double BanditInstance::gap(const DecisionSet& set, std::size_t chosen) const {
  const Eigen::RowVectorXd means = mu_star_.transpose() * set;
  return means.maxCoeff() - means(static_cast<Eigen::Index>(chosen));
}

int hard_instance_phase_two_length(int phase_one_rounds) {
  int m = 0;
  while ((std::int64_t{1} << m) < phase_one_rounds) ++m;
  return m;
}

BanditInstance hard_instance(int phase_one_rounds) {
  if (phase_one_rounds < 2) {
    throw std::invalid_argument("hard_instance: K must be >= 2");
  }
  const auto k_switch = static_cast<std::uint64_t>(phase_one_rounds);
  auto source = [k_switch](std::uint64_t round) {
    DecisionSet set(2, 2);
    if (round <= k_switch) {
      set << 1.0, -1.0,
             0.0, 0.0;
    } else {
      set << 0.0, 0.0,
             1.0, -1.0;
    }
    return set;
  };
  return BanditInstance(Vector::Unit(2, 1), source, NoiseModel{NoiseKind::kNone, 0.0}, 0);
}

namespace {

Vector random_unit_vector(int dim, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Vector v(dim);
  double n = 0.0;
  while (n == 0.0) {
    for (int i = 0; i < dim; ++i) v(i) = normal(rng);
    n = v.norm();
  }
  return v / n;
}

DecisionSet random_set(int dim, int num_actions, std::mt19937_64& rng) {
  DecisionSet set(dim, num_actions);
  for (int j = 0; j < num_actions; ++j) set.col(j) = random_unit_vector(dim, rng);
  return set;
}

}  // namespace

BanditInstance random_instance(int dim, int num_actions, std::uint64_t instance_seed,
                               NoiseModel noise, std::uint64_t noise_seed, bool fixed_set,
                               double mu_norm) {
  if (dim < 1 || num_actions < 1) {
    throw std::invalid_argument("random_instance: dim and num_actions must be >= 1");
  }
  if (!(mu_norm >= 0.0 && mu_norm <= 1.0)) {
    throw std::invalid_argument("random_instance: mu_norm must lie in [0, 1]");
  }
  auto rng = make_stream(instance_seed, StreamTag::kInstance, 0);
  Vector mu = mu_norm * random_unit_vector(dim, rng);

  BanditInstance::DecisionSetSource source;
  if (fixed_set) {
    DecisionSet set = random_set(dim, num_actions, rng);
    source = [set](std::uint64_t) { return set; };
  } else {
    source = [dim, num_actions, instance_seed](std::uint64_t round) {
      auto r = make_stream(instance_seed, StreamTag::kDecisionSet, round);
      return random_set(dim, num_actions, r);
    };
  }
  return BanditInstance(std::move(mu), std::move(source), noise, noise_seed);
}

std::vector<CertificationCheck> certify(const BanditInstance& instance, std::uint64_t rounds) {
  std::vector<CertificationCheck> checks;
  const double mu_norm = instance.mu_star().norm();
  checks.push_back({"mu_star_norm", mu_norm <= 1.0 + RegularizedDesign::kNormSlack,
                    "||mu*|| = " + std::to_string(mu_norm)});

  CertificationCheck actions{"action_norms", true, "all actions have ||x|| <= 1"};
  CertificationCheck nonempty{"decision_sets_nonempty", true, "every decision set is nonempty"};
  for (std::uint64_t k = 1; k <= rounds; ++k) {
    const DecisionSet set = instance.decision_set(k);
    if (set.cols() == 0 && nonempty.passed) {
      nonempty.passed = false;
      nonempty.detail = "round " + std::to_string(k) + " has an empty decision set";
    }
    for (Eigen::Index j = 0; j < set.cols() && actions.passed; ++j) {
      const double n = set.col(j).norm();
      if (n > 1.0 + RegularizedDesign::kNormSlack) {
        actions.passed = false;
        actions.detail = "round " + std::to_string(k) + " action " + std::to_string(j) +
                         " has norm " + std::to_string(n);
      }
    }
  }
  checks.push_back(std::move(actions));
  checks.push_back(std::move(nonempty));
  return checks;
}

// ---------------------------------------------------------------------------
// UPAC-OFUL

UpacOfulAgent::UpacOfulAgent(int dim, double delta, double lambda, std::size_t recondition_every)
    : dim_(dim), delta_(delta), lambda_(lambda), recondition_every_(recondition_every) {
  if (dim < 1) throw std::invalid_argument("UpacOfulAgent: dim must be >= 1");
  if (!(delta > 0.0 && delta < 1.0)) {
    throw std::invalid_argument("UpacOfulAgent: delta must lie in (0, 1)");
  }
  ensure_level(1);
}

BanditLevel& UpacOfulAgent::ensure_level(int l) {
  while (static_cast<int>(levels_.size()) < l) {
    const int next = static_cast<int>(levels_.size()) + 1;
    levels_.push_back(BanditLevel{RegularizedDesign(dim_, lambda_, recondition_every_), {},
                                  beta_bandit(next, dim_, delta_), Vector::Zero(dim_)});
  }
  return levels_[static_cast<std::size_t>(l - 1)];
}

const BanditLevel& UpacOfulAgent::level(int l) const {
  if (l < 1 || l > num_levels()) throw std::out_of_range("UpacOfulAgent: no such level");
  return levels_[static_cast<std::size_t>(l - 1)];
}

double UpacOfulAgent::level_score(int l, const VectorRef& x) const {
  const BanditLevel& lv = level(l);
  return lv.weight.dot(x) + lv.beta * lv.design.elliptical_norm(x);
}

double UpacOfulAgent::optimistic_score(const VectorRef& x) const {
  if (x.size() != dim_) throw std::invalid_argument("optimistic_score: dimension mismatch");
  double best = std::numeric_limits<double>::infinity();
  for (int l = 1; l <= total_level_; ++l) best = std::min(best, level_score(l, x));
  return best;
}

std::size_t UpacOfulAgent::select_action(const DecisionSet& set) const {
  if (set.cols() == 0) throw std::invalid_argument("select_action: empty decision set");
  if (set.rows() != dim_) throw std::invalid_argument("select_action: dimension mismatch");
  std::size_t best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < set.cols(); ++j) {
    const double s = optimistic_score(set.col(j));
    if (s > best_score) {
      best_score = s;
      best = static_cast<std::size_t>(j);
    }
  }
  return best;
}

int UpacOfulAgent::assign_level(const VectorRef& x, std::vector<double>* trace) {
  int l = 1;
  while (l <= total_level_) {
    const double norm = levels_[static_cast<std::size_t>(l - 1)].design.elliptical_norm(x);
    if (trace) trace->push_back(norm);
    if (norm > std::ldexp(1.0, -l)) break;
    ++l;
  }
  ensure_level(l);
  return l;
}

void UpacOfulAgent::observe_reward(const VectorRef& x, double reward, int l) {
  if (l < 1 || l > total_level_ + 1) {
    throw std::invalid_argument("observe_reward: level outside [1, S+1]");
  }
  BanditLevel& lv = ensure_level(l);
  ++rounds_;
  lv.members.push_back(rounds_);
  lv.design.rank_one_update(x);
  lv.design.accumulate_target(x, reward);
  lv.weight = lv.design.ridge_solve();
  total_level_ = std::max(total_level_, l);
}

// ---------------------------------------------------------------------------
// OFUL baseline

OfulAgent::OfulAgent(int dim, double delta, double lambda, bool unit_ball, TieBreak tie_break,
                     std::uint64_t seed, std::size_t recondition_every)
    : dim_(dim), delta_(delta), lambda_(lambda), unit_ball_(unit_ball), tie_break_(tie_break),
      seed_(seed), design_(dim, lambda, recondition_every), weight_(Vector::Zero(dim)) {
  if (!(delta > 0.0 && delta < 1.0)) {
    throw std::invalid_argument("OfulAgent: delta must lie in (0, 1)");
  }
}

double OfulAgent::radius(std::uint64_t round) const {
  return std::sqrt(dim_ * std::log((1.0 + static_cast<double>(round)) / delta_)) +
         std::sqrt(lambda_);
}

double OfulAgent::optimistic_value(const VectorRef& x) const {
  const double beta = radius(rounds_ + 1);
  if (unit_ball_) {
    return ball_constrained_ucb(x, weight_, design_.cov(), design_.cov_inv(), beta);
  }
  return weight_.dot(x) + beta * design_.elliptical_norm(x);
}

std::size_t OfulAgent::select_action(const DecisionSet& set) const {
  if (set.cols() == 0) throw std::invalid_argument("select_action: empty decision set");
  if (set.rows() != dim_) throw std::invalid_argument("select_action: dimension mismatch");
  std::vector<double> values(static_cast<std::size_t>(set.cols()));
  for (Eigen::Index j = 0; j < set.cols(); ++j) {
    values[static_cast<std::size_t>(j)] = optimistic_value(set.col(j));
  }
  const auto best_it = std::max_element(values.begin(), values.end());
  const auto best = static_cast<std::size_t>(best_it - values.begin());
  if (tie_break_ == TieBreak::kLowest) return best;

  const double tol = kTieTolerance * std::max(1.0, std::abs(*best_it));
  std::vector<std::size_t> tied;
  for (std::size_t j = 0; j < values.size(); ++j) {
    if (values[j] >= *best_it - tol) tied.push_back(j);
  }
  auto rng = make_stream(seed_, StreamTag::kTieBreak, rounds_ + 1);
  std::uniform_int_distribution<std::size_t> pick(0, tied.size() - 1);
  return tied[pick(rng)];
}

void OfulAgent::observe_reward(const VectorRef& x, double reward) {
  design_.rank_one_update(x);
  design_.accumulate_target(x, reward);
  weight_ = design_.ridge_solve();
  ++rounds_;
}

// ---------------------------------------------------------------------------
// max <x, theta> over ellipsoid intersected with the unit ball.
//
// When neither single-constraint maximizer is feasible for the other set,
// both constraints bind. We then minimize the Lagrangian dual in the ball
// multiplier eta,
//   g(eta) = eta + max_{theta in E} <x, theta> - eta ||theta||^2,
// which is convex in eta. The inner problem is solved in the eigenbasis of
// cov, where its KKT condition reduces to a monotone scalar equation in the
// ellipsoid multiplier.

namespace {

struct EigenFrame {
  Vector lam;  // eigenvalues of cov
  Vector x;    // x in the eigenbasis
  Vector w;    // center in the eigenbasis
};

// Largest nu >= 0 bracket on which f(nu) <= target, f decreasing; bisect.
template <typename F>
double solve_decreasing(F f, double target) {
  double lo = 0.0;
  double hi = 1.0;
  while (f(hi) > target) {
    hi *= 2.0;
    if (hi > 1e300) break;
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    if (f(mid) > target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return hi;
}

double inner_value(const EigenFrame& fr, double eta, double radius) {
  const Eigen::Index d = fr.lam.size();
  // Offset of the unconstrained maximizer x / (2 eta) from the center, scaled by eta.
  Vector a(d);
  for (Eigen::Index i = 0; i < d; ++i) a(i) = 0.5 * fr.x(i) - eta * fr.w(i);
  auto constraint = [&](double nu) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < d; ++i) {
      const double denom = eta + nu * fr.lam(i);
      s += fr.lam(i) * a(i) * a(i) / (denom * denom);
    }
    return s;
  };
  const double r2 = radius * radius;
  const double nu = constraint(0.0) <= r2 ? 0.0 : solve_decreasing(constraint, r2);
  Vector theta(d);
  for (Eigen::Index i = 0; i < d; ++i) theta(i) = fr.w(i) + a(i) / (eta + nu * fr.lam(i));
  return fr.x.dot(theta) - eta * theta.squaredNorm();
}

double min_norm_in_ellipsoid(const EigenFrame& fr, double radius) {
  const Eigen::Index d = fr.lam.size();
  double wnorm2 = 0.0;
  for (Eigen::Index i = 0; i < d; ++i) wnorm2 += fr.lam(i) * fr.w(i) * fr.w(i);
  if (wnorm2 <= radius * radius) return 0.0;
  auto constraint = [&](double nu) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < d; ++i) {
      const double denom = 1.0 + nu * fr.lam(i);
      s += fr.lam(i) * fr.w(i) * fr.w(i) / (denom * denom);
    }
    return s;
  };
  const double nu = solve_decreasing(constraint, radius * radius);
  double n2 = 0.0;
  for (Eigen::Index i = 0; i < d; ++i) {
    const double t = nu * fr.lam(i) * fr.w(i) / (1.0 + nu * fr.lam(i));
    n2 += t * t;
  }
  return std::sqrt(n2);
}

}  // namespace

double ball_constrained_ucb(const VectorRef& x, const VectorRef& center, const Matrix& cov,
                            const Matrix& cov_inv, double radius) {
  const double xnorm = x.norm();
  if (xnorm == 0.0) return 0.0;
  const Vector cinv_x = cov_inv * x;
  const double ell = std::sqrt(std::max(0.0, x.dot(cinv_x)));
  const double ellipsoid_only = center.dot(x) + radius * ell;

  const Vector theta_e = center + (radius / ell) * cinv_x;
  if (theta_e.norm() <= 1.0) return ellipsoid_only;

  const Vector theta_b = x / xnorm;
  const Vector diff = theta_b - center;
  if (diff.dot(cov * diff) <= radius * radius) return xnorm;

  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
  EigenFrame fr{eig.eigenvalues(), eig.eigenvectors().transpose() * x,
                eig.eigenvectors().transpose() * center};
  if (min_norm_in_ellipsoid(fr, radius) > 1.0) return ellipsoid_only;

  auto g = [&](double eta) { return eta + inner_value(fr, eta, radius); };
  // Bracket the minimizer of the convex dual, then golden-section search.
  double hi = 1.0;
  while (g(2.0 * hi) < g(hi) && hi < 1e12) hi *= 2.0;
  double lo = 0.0;
  hi *= 2.0;
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double m1 = hi - phi * (hi - lo);
  double m2 = lo + phi * (hi - lo);
  double g1 = g(m1);
  double g2 = g(m2);
  for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, hi); ++it) {
    if (g1 < g2) {
      hi = m2;
      m2 = m1;
      g2 = g1;
      m1 = hi - phi * (hi - lo);
      g1 = g(m1);
    } else {
      lo = m1;
      m1 = m2;
      g1 = g2;
      m2 = lo + phi * (hi - lo);
      g2 = g(m2);
    }
  }
  return std::min({g1, g2, ellipsoid_only, xnorm});
}

}  // namespace upacrl::bandit
