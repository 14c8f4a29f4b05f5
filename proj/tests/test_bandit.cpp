#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <numeric>
#include <random>
#include <set>

#include "support.hpp"
#include "upacrl/bandit.hpp"
#include "upacrl/errors.hpp"

using namespace upacrl;
using namespace upacrl::bandit;

namespace {

DecisionSet set_of(std::initializer_list<std::initializer_list<double>> actions) {
  const auto n = static_cast<Eigen::Index>(actions.size());
  const auto d = static_cast<Eigen::Index>(actions.begin()->size());
  DecisionSet set(d, n);
  Eigen::Index j = 0;
  for (const auto& a : actions) {
    Eigen::Index i = 0;
    for (double v : a) set(i++, j) = v;
    ++j;
  }
  return set;
}

Vector vec(std::initializer_list<double> values) {
  Vector v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v(i++) = x;
  return v;
}

}  // namespace

TEST_CASE("beta_bandit") {
  // 6 sqrt(2 log 20) and 6 sqrt(4 log 40).
  CHECK(beta_bandit(1, 2, 0.1) == doctest::Approx(14.686481).epsilon(1e-6));
  CHECK(beta_bandit(2, 2, 0.1) == doctest::Approx(23.047747).epsilon(1e-6));
  CHECK(beta_bandit(1, 2, 0.1) == doctest::Approx(6.0 * std::sqrt(2.0 * std::log(20.0))));
  CHECK_THROWS_AS(beta_bandit(1, 1, 1.0), std::invalid_argument);
  CHECK(level_capacity(2, 1) == 136.0);
}

TEST_CASE("optimistic_score") {
  UpacOfulAgent fresh(2, 0.1);
  CHECK(fresh.optimistic_score(vec({1, 0})) == doctest::Approx(14.686481).epsilon(1e-6));
  CHECK(fresh.optimistic_score(vec({0, 0})) == 0.0);
  CHECK_THROWS_AS((void)fresh.optimistic_score(vec({1, 0, 0})), std::invalid_argument);

  // Seed level 2 with a high-reward sample; the score is the min over levels.
  UpacOfulAgent agent(2, 0.1);
  agent.observe_reward(vec({0, 1}), 0.0, 1);
  agent.observe_reward(vec({1, 0}), 1.0, 2);
  REQUIRE(agent.total_level() == 2);
  const Vector probe = vec({0.6, 0.8});
  const double s1 = agent.level_score(1, probe);
  const double s2 = agent.level_score(2, probe);
  CHECK(agent.optimistic_score(probe) == doctest::Approx(std::min(s1, s2)));
  CHECK(agent.optimistic_score(probe) <= s1);
}

TEST_CASE("select_action") {
  UpacOfulAgent fresh(2, 0.1);
  CHECK(fresh.select_action(set_of({{1, 0}, {0.5, 0}})) == 0);
  CHECK(fresh.select_action(set_of({{0.3, 0.4}})) == 0);
  CHECK(fresh.select_action(set_of({{0.6, 0.8}, {0.6, 0.8}})) == 0);
  CHECK_THROWS_AS((void)fresh.select_action(DecisionSet(2, 0)), std::invalid_argument);
}

TEST_CASE("assign_level") {
  SUBCASE("first round is level 1") {
    UpacOfulAgent agent(3, 0.05);
    CHECK(agent.assign_level(vec({0, 0, 1})) == 1);
  }
  SUBCASE("zero vector falls through to a new level") {
    UpacOfulAgent agent(2, 0.05);
    CHECK(agent.assign_level(vec({0, 0})) == 2);
    CHECK(agent.num_levels() == 2);
    CHECK(agent.total_level() == 1);
  }
  SUBCASE("three copies at level 1, the fourth goes to level 2") {
    UpacOfulAgent agent(2, 0.05);
    const Vector x = vec({1, 0});
    for (int n = 0; n < 3; ++n) {
      const int l = agent.assign_level(x);
      CHECK(l == 1);
      agent.observe_reward(x, 0.0, l);
    }
    // Oracle: (1 + n)^{-1/2} with n = 3.
    CHECK(agent.level(1).design.elliptical_norm(x) == doctest::Approx(0.5));
    CHECK(agent.assign_level(x) == 2);
  }
  SUBCASE("loop trace justifies every promotion") {
    std::mt19937_64 rng(11);
    UpacOfulAgent agent(3, 0.05);
    for (int k = 0; k < 2000; ++k) {
      const Vector x = testing::random_unit(3, rng);
      std::vector<double> trace;
      const int s = agent.total_level();
      const int l = agent.assign_level(x, &trace);
      CHECK(l >= 1);
      CHECK(l <= s + 1);
      for (int i = 1; i < l; ++i) CHECK(trace[static_cast<std::size_t>(i - 1)] <= std::ldexp(1.0, -i));
      if (l <= s) CHECK(trace[static_cast<std::size_t>(l - 1)] > std::ldexp(1.0, -l));
      agent.observe_reward(x, 0.0, l);
      CHECK(agent.total_level() <= s + 1);
    }
  }
}

TEST_CASE("observe_reward partition") {
  UpacOfulAgent first(2, 0.05);
  first.observe_reward(vec({1, 0}), 0.5, first.assign_level(vec({1, 0})));
  CHECK(first.level(1).members.size() == 1);
  CHECK(first.total_level() == 1);

  auto instance = random_instance(5, 10, 3, {NoiseKind::kGaussian, 1.0}, 3);
  UpacOfulAgent agent(5, 0.05);
  for (std::uint64_t k = 1; k <= 10000; ++k) {
    const DecisionSet set = instance.decision_set(k);
    const Vector x = set.col(static_cast<Eigen::Index>(agent.select_action(set)));
    const int s = agent.total_level();
    const int l = agent.assign_level(x);
    agent.observe_reward(x, instance.reward(k, x), l);
    if (l == s + 1) CHECK(agent.total_level() == s + 1);
  }
  std::set<std::uint64_t> seen;
  std::size_t total = 0;
  int highest_nonempty = 0;
  for (int l = 1; l <= agent.num_levels(); ++l) {
    const auto& members = agent.level(l).members;
    total += members.size();
    seen.insert(members.begin(), members.end());
    if (!members.empty()) highest_nonempty = l;
    CHECK(static_cast<double>(members.size()) <= level_capacity(5, l));
  }
  CHECK(total == 10000);
  CHECK(seen.size() == 10000);
  CHECK(*seen.begin() == 1);
  CHECK(*seen.rbegin() == 10000);
  CHECK(agent.total_level() == highest_nonempty);
}

TEST_CASE("hard_instance") {
  const auto inst = hard_instance(16);
  CHECK(inst.dim() == 2);
  CHECK(inst.decision_set(3) == set_of({{1, 0}, {-1, 0}}));
  CHECK(inst.decision_set(16) == set_of({{1, 0}, {-1, 0}}));
  CHECK(inst.decision_set(17) == set_of({{0, 1}, {0, -1}}));
  CHECK(inst.decision_set(1000) == set_of({{0, 1}, {0, -1}}));
  for (std::uint64_t k : {1, 20, 77}) {
    CHECK(inst.reward(k, vec({0, 1})) == 1.0);
    CHECK(inst.reward(k, vec({1, 0})) == 0.0);
  }
  CHECK(hard_instance_phase_two_length(16) == 4);
  CHECK(hard_instance_phase_two_length(256) == 8);
  CHECK(hard_instance_phase_two_length(100) == 7);
  CHECK_THROWS_AS(hard_instance(1), std::invalid_argument);
}

TEST_CASE("random_instance") {
  const auto a = random_instance(4, 6, 9, {NoiseKind::kGaussian, 1.0}, 9);
  const auto b = random_instance(4, 6, 9, {NoiseKind::kGaussian, 1.0}, 9);
  CHECK(a.mu_star().norm() == doctest::Approx(1.0));
  for (std::uint64_t k = 1; k <= 20; ++k) {
    CHECK(a.decision_set(k) == b.decision_set(k));
    CHECK(a.reward(k, a.decision_set(k).col(0)) == b.reward(k, b.decision_set(k).col(0)));
    CHECK(a.decision_set(k).colwise().norm().maxCoeff() <= 1.0 + 1e-12);
  }
  const auto fixed = random_instance(3, 5, 1, {NoiseKind::kNone, 0.0}, 1, true);
  CHECK(fixed.decision_set(1) == fixed.decision_set(50));
  for (const auto& c : certify(a, 100)) CHECK_MESSAGE(c.passed, c.name);
}

TEST_CASE("gap") {
  const BanditInstance inst(vec({0, 1}), [](std::uint64_t) { return set_of({{0, 1}, {1, 0}}); },
                            {NoiseKind::kNone, 0.0}, 0);
  const DecisionSet set = inst.decision_set(1);
  CHECK(inst.gap(set, 0) == 0.0);
  CHECK(inst.gap(set, 1) == 1.0);
}

TEST_CASE("OFUL baseline") {
  OfulAgent fresh(2, 0.05);
  CHECK(fresh.select_action(set_of({{0.2, 0.1}})) == 0);
  CHECK(fresh.radius(1) == doctest::Approx(std::sqrt(2.0 * std::log(2.0 / 0.05)) + 1.0));
  CHECK_THROWS_AS((void)fresh.select_action(DecisionSet(2, 0)), std::invalid_argument);

  SUBCASE("zero noise, fixed two-point set: sublinear regret") {
    const DecisionSet D = set_of({{0.6, 0.8}, {1, 0}});
    const BanditInstance inst(vec({0, 1}), [D](std::uint64_t) { return D; },
                              {NoiseKind::kNone, 0.0}, 0);
    OfulAgent agent(2, 0.05);
    std::vector<double> regret;
    double total = 0.0;
    for (std::uint64_t k = 1; k <= 100; ++k) {
      const std::size_t i = agent.select_action(D);
      total += inst.gap(D, i);
      regret.push_back(total);
      agent.observe_reward(D.col(static_cast<Eigen::Index>(i)), inst.reward(k, D.col(static_cast<Eigen::Index>(i))));
    }
    CHECK(std::isfinite(total));
    CHECK(testing::final_decade_slope(regret) < 1.0);
  }

  SUBCASE("replay determinism with random ties") {
    auto run = [] {
      const auto inst = hard_instance(32);
      OfulAgent agent(2, 0.05, 1.0, true, TieBreak::kRandom, 5);
      std::vector<std::size_t> picks;
      for (std::uint64_t k = 1; k <= 60; ++k) {
        const DecisionSet set = inst.decision_set(k);
        const std::size_t i = agent.select_action(set);
        picks.push_back(i);
        agent.observe_reward(set.col(static_cast<Eigen::Index>(i)), inst.reward(k, set.col(static_cast<Eigen::Index>(i))));
      }
      return picks;
    };
    const auto a = run();
    CHECK(a == run());
    // Phase one is a perfect tie, so both arms get pulled.
    CHECK(std::count(a.begin(), a.begin() + 32, std::size_t{0}) > 0);
    CHECK(std::count(a.begin(), a.begin() + 32, std::size_t{1}) > 0);
  }
}

TEST_CASE("ball_constrained_ucb against boundary enumeration") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int interior = 0;
  for (int trial = 0; trial < 100; ++trial) {
    Matrix cov = Matrix::Identity(2, 2);
    const int n = 1 + trial % 7;
    for (int i = 0; i < n; ++i) {
      const Vector z = testing::random_unit(2, rng) * (0.3 + 0.7 * u(rng));
      cov += 3.0 * z * z.transpose();
    }
    const Matrix cov_inv = cov.inverse();
    const Vector center = testing::random_in_ball(2, rng);
    const Vector x = testing::random_in_ball(2, rng);
    const double radius = 0.2 + 2.0 * u(rng);

    // The maximum of a linear function over ball ∩ ellipsoid lies on the
    // boundary: either on the circle inside the ellipsoid or on the ellipse
    // inside the ball.
    const Eigen::LLT<Matrix> llt(cov);
    const Matrix L_inv_t = llt.matrixL().transpose().solve(Matrix::Identity(2, 2));
    double best = -1e300;
    const int steps = 200000;
    for (int i = 0; i < steps; ++i) {
      const double t = 2.0 * M_PI * i / steps;
      const Vector dir = vec({std::cos(t), std::sin(t)});
      const Vector diff = dir - center;
      if (diff.dot(cov * diff) <= radius * radius) best = std::max(best, x.dot(dir));
      const Vector e = center + radius * L_inv_t * dir;
      if (e.norm() <= 1.0) best = std::max(best, x.dot(e));
    }
    const double got = ball_constrained_ucb(x, center, cov, cov_inv, radius);
    CHECK(got == doctest::Approx(best).epsilon(1e-4));
    CHECK(got <= x.norm() + 1e-12);
    CHECK(got <= center.dot(x) + radius * std::sqrt(x.dot(cov_inv * x)) + 1e-12);
    const Vector theta_e = center + radius / std::sqrt(x.dot(cov_inv * x)) * (cov_inv * x);
    const Vector theta_b = x / x.norm();
    if (theta_e.norm() > 1.0 && (theta_b - center).dot(cov * (theta_b - center)) > radius * radius) {
      ++interior;
    }
  }
  // Several trials must exercise the two-constraint dual solve.
  CHECK(interior >= 5);
}
