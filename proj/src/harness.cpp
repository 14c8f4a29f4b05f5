#include "upacrl/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "upacrl/errors.hpp"
#include "upacrl/io.hpp"
#include "upacrl/rng.hpp"

namespace upacrl::harness {

std::string to_string(Track track) { return track == Track::kBandit ? "bandit" : "mdp"; }

bool is_leveled(const std::string& algorithm) {
  return algorithm == "upac-oful" || algorithm == "flute";
}

namespace {

const std::vector<std::string> kBanditAlgorithms = {"upac-oful", "oful", "oful-ball"};
const std::vector<std::string> kMdpAlgorithms = {"flute", "lsvi-ucb"};
const std::vector<std::string> kBanditInstances = {"random", "fixed", "hard", "file"};
const std::vector<std::string> kMdpInstances = {"random-tabular", "random-simplex", "file"};

std::string join(const std::vector<std::string>& items) {
  std::string s;
  for (const auto& item : items) s += (s.empty() ? "" : ", ") + item;
  return s;
}

bool contains(const std::vector<std::string>& items, const std::string& x) {
  return std::find(items.begin(), items.end(), x) != items.end();
}

}  // namespace

void validate(const RunConfig& c) {
  const bool bandit = c.track == Track::kBandit;
  const auto& algorithms = bandit ? kBanditAlgorithms : kMdpAlgorithms;
  if (!contains(algorithms, c.algorithm)) {
    throw ConfigError("algorithm: unknown id '" + c.algorithm + "' for track " +
                      to_string(c.track) + " (valid: " + join(algorithms) + ")");
  }
  const auto& instances = bandit ? kBanditInstances : kMdpInstances;
  if (!contains(instances, c.instance)) {
    throw ConfigError("instance: unknown id '" + c.instance + "' for track " +
                      to_string(c.track) + " (valid: " + join(instances) + ")");
  }
  if (!(c.delta > 0.0 && c.delta < 1.0)) {
    throw ConfigError("delta: must lie in (0, 1)");
  }
  if (!(c.lambda > 0.0)) throw ConfigError("lambda: must be positive");
  if (!(c.c_beta >= 0.0)) throw ConfigError("c_beta: must be nonnegative");
  if (c.budget < 1) throw ConfigError(std::string(bandit ? "T" : "K") + ": budget must be >= 1");
  for (std::size_t i = 0; i < c.eps_grid.size(); ++i) {
    if (!(c.eps_grid[i] > 0.0)) throw ConfigError("eps_grid: entries must be positive");
    if (i > 0 && !(c.eps_grid[i] < c.eps_grid[i - 1])) {
      throw ConfigError("eps_grid: entries must be strictly descending");
    }
  }
  if (c.tie_break != "lowest" && c.tie_break != "random") {
    throw ConfigError("tie_break: must be 'lowest' or 'random'");
  }
  if (bandit) {
    if (c.dim < 1) throw ConfigError("bandit.dim: must be >= 1");
    if (c.num_actions < 1) throw ConfigError("bandit.num_actions: must be >= 1");
    if (c.instance == "hard" && c.hard_k < 2) throw ConfigError("bandit.hard_k: must be >= 2");
    if (!(c.mu_norm >= 0.0 && c.mu_norm <= 1.0)) {
      throw ConfigError("bandit.mu_norm: must lie in [0, 1]");
    }
    if (!(c.noise_scale >= 0.0)) throw ConfigError("bandit.noise_scale: must be >= 0");
    try {
      (void)bandit::parse_noise_kind(c.noise);
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("bandit.noise: ") + e.what());
    }
  } else {
    if (c.num_states < 1) throw ConfigError("mdp.num_states: must be >= 1");
    if (c.mdp_actions < 1) throw ConfigError("mdp.num_actions: must be >= 1");
    if (c.horizon < 1) throw ConfigError("mdp.horizon: must be >= 1");
    if (c.feature_dim < 1) throw ConfigError("mdp.dim: must be >= 1");
  }
  if (c.instance == "file" && c.instance_file.empty()) {
    throw ConfigError("instance_file: required when instance = file");
  }
}

std::vector<double> effective_eps_grid(const RunConfig& c, int horizon) {
  if (!c.eps_grid.empty()) return c.eps_grid;
  const double scale = c.track == Track::kMdp ? static_cast<double>(horizon) : 1.0;
  std::vector<double> grid;
  for (int i = 1; i <= 10; ++i) grid.push_back(scale * std::ldexp(1.0, -i));
  return grid;
}

std::vector<std::vector<std::uint64_t>> n_epsilon_curve(const std::vector<double>& gaps,
                                                        const std::vector<double>& grid) {
  if (grid.empty()) throw std::invalid_argument("n_epsilon_curve: empty grid");
  std::vector<std::vector<std::uint64_t>> curves(grid.size(),
                                                 std::vector<std::uint64_t>(gaps.size()));
  for (std::size_t i = 0; i < grid.size(); ++i) {
    std::uint64_t count = 0;
    for (std::size_t k = 0; k < gaps.size(); ++k) {
      if (gaps[k] > grid[i]) ++count;
      curves[i][k] = count;
    }
  }
  return curves;
}

bandit::BanditInstance make_bandit_instance(const RunConfig& c) {
  const bandit::NoiseModel noise{bandit::parse_noise_kind(c.noise), c.noise_scale};
  if (c.instance == "hard") return bandit::hard_instance(c.hard_k);
  if (c.instance == "file") return io::load_bandit_instance(c.instance_file, noise, c.seed);
  return bandit::random_instance(c.dim, c.num_actions, c.effective_instance_seed(), noise, c.seed,
                                 c.instance == "fixed", c.mu_norm);
}

mdp::LinearMdpSpec make_mdp_instance(const RunConfig& c) {
  if (c.instance == "file") return mdp::LinearMdpSpec(io::load_mdp_data(c.instance_file));
  if (c.instance == "random-simplex") {
    return mdp::random_simplex_mdp(c.num_states, c.mdp_actions, c.horizon, c.feature_dim,
                                   c.effective_instance_seed());
  }
  return mdp::random_tabular_mdp(c.num_states, c.mdp_actions, c.horizon,
                                 c.effective_instance_seed());
}

namespace {

using Clock = std::chrono::steady_clock;

std::uint64_t flush_cadence(const RunConfig& c) {
  return c.flush_every > 0 ? c.flush_every : std::max<std::uint64_t>(1, c.budget / 100);
}

void start_metrics(RunMetrics& m, const RunConfig& c, int dim, int horizon) {
  m.config = c;
  m.dim = dim;
  m.horizon = horizon;
  m.eps_grid = effective_eps_grid(c, horizon);
  m.gaps.reserve(c.budget);
  m.regret.reserve(c.budget);
  m.levels.reserve(c.budget);
}

void record_gap(RunMetrics& m, double gap, int level) {
  if (gap < -1e-9) {
    std::ostringstream os;
    os << "negative gap " << gap << " at index " << m.gaps.size() + 1;
    m.invariant_violations.push_back(os.str());
  }
  m.gaps.push_back(gap);
  m.regret.push_back((m.regret.empty() ? 0.0 : m.regret.back()) + gap);
  m.levels.push_back(level);
  m.max_level = std::max(m.max_level, level);
}

void finish_metrics(RunMetrics& m, Clock::time_point start) {
  m.final_n_eps.assign(m.eps_grid.size(), 0);
  for (std::size_t i = 0; i < m.eps_grid.size(); ++i) {
    m.final_n_eps[i] = static_cast<std::uint64_t>(
        std::count_if(m.gaps.begin(), m.gaps.end(), [&](double g) { return g > m.eps_grid[i]; }));
  }
  m.runtime_seconds = std::chrono::duration<double>(Clock::now() - start).count();
}

void capacity_breach(RunMetrics& m, std::uint64_t index, int stage, int level, std::size_t size,
                     double cap) {
  std::ostringstream os;
  os << "level capacity exceeded at index " << index << ": |C_" << stage << "^" << level
     << "| = " << size << " > " << cap;
  m.invariant_violations.push_back(os.str());
}

}  // namespace

RunMetrics run_bandit_experiment(const RunConfig& c) {
  validate(c);
  if (c.track != Track::kBandit) throw ConfigError("track: expected bandit");
  const auto start = Clock::now();
  const bandit::BanditInstance instance = make_bandit_instance(c);
  const int d = instance.dim();
  if (c.instance != "hard" && c.instance != "file" && d != c.dim) {
    throw ConfigError("bandit.dim: instance dimension mismatch");
  }

  RunMetrics m;
  start_metrics(m, c, d, 1);
  const std::uint64_t cadence = flush_cadence(c);
  const auto tie = bandit::parse_tie_break(c.tie_break);

  if (c.algorithm == "upac-oful") {
    bandit::UpacOfulAgent agent(d, c.delta, c.lambda, c.recondition_every);
    for (std::uint64_t k = 1; k <= c.budget; ++k) {
      const bandit::DecisionSet set = instance.decision_set(k);
      const std::size_t idx = agent.select_action(set);
      const Vector x = set.col(static_cast<Eigen::Index>(idx));
      const int level = agent.assign_level(x);
      agent.observe_reward(x, instance.reward(k, x), level);
      record_gap(m, instance.gap(set, idx), level);

      const std::size_t size = agent.level(level).members.size();
      const double cap = bandit::level_capacity(d, level);
      if (static_cast<double>(size) > cap) capacity_breach(m, k, 1, level, size, cap);

      if (c.check_coverage) {
        for (int l = 1; l <= agent.num_levels(); ++l) {
          const auto& lv = agent.level(l);
          if (lv.design.design_norm(lv.weight - instance.mu_star()) > lv.beta) {
            ++m.coverage_violations;
            break;
          }
        }
      }
      if (k % cadence == 0 || k == c.budget) {
        OccupancySnapshot snap{k, {{}}};
        for (int l = 1; l <= agent.num_levels(); ++l) snap.sizes[0].push_back(agent.level(l).members.size());
        m.occupancy_series.push_back(std::move(snap));
      }
    }
    for (int l = 1; l <= agent.num_levels(); ++l) {
      m.occupancy.push_back({1, l, agent.level(l).members.size(), bandit::level_capacity(d, l)});
    }
  } else {
    bandit::OfulAgent agent(d, c.delta, c.lambda, c.algorithm == "oful-ball", tie, c.seed,
                            c.recondition_every);
    for (std::uint64_t k = 1; k <= c.budget; ++k) {
      const bandit::DecisionSet set = instance.decision_set(k);
      const std::size_t idx = agent.select_action(set);
      const Vector x = set.col(static_cast<Eigen::Index>(idx));
      agent.observe_reward(x, instance.reward(k, x));
      record_gap(m, instance.gap(set, idx), 1);
      if (k % cadence == 0 || k == c.budget) {
        m.occupancy_series.push_back({k, {{k}}});
      }
    }
    m.occupancy.push_back({1, 1, c.budget, 0.0});
  }
  finish_metrics(m, start);
  return m;
}

RunMetrics run_mdp_experiment(const RunConfig& c) {
  validate(c);
  if (c.track != Track::kMdp) throw ConfigError("track: expected mdp");
  const auto start = Clock::now();
  const mdp::LinearMdpSpec spec = make_mdp_instance(c);
  const int d = spec.dim();
  const int H = spec.horizon();
  const mdp::ValueTables optimal = mdp::exact_optimal_values(spec);
  const mdp::AgentConfig agent_config{c.delta, c.lambda, c.c_beta, c.recondition_every};

  RunMetrics m;
  start_metrics(m, c, d, H);
  m.returns.reserve(c.budget);
  const std::uint64_t cadence = flush_cadence(c);

  auto record_episode = [&](const mdp::EpisodeRecord& rec) {
    const int s1 = rec.states.front();
    const mdp::ValueTables realized = mdp::evaluate_policy(spec, rec.policy);
    record_gap(m, optimal.value(1, s1) - realized.value(1, s1), rec.levels.front());
    m.returns.push_back(rec.episode_return);
  };

  if (c.algorithm == "flute") {
    mdp::FluteAgent agent(spec.features(), spec.num_states(), spec.num_actions(), H, agent_config);
    std::vector<std::vector<double>> max_norms(static_cast<std::size_t>(H));
    for (std::uint64_t k = 1; k <= c.budget; ++k) {
      auto rng = make_stream(c.seed, StreamTag::kTransition, k);
      const mdp::EpisodeRecord rec = agent.run_episode(spec, rng);
      record_episode(rec);

      const int fitted = agent.fitted_levels();
      bool optimism_broken = false;
      for (int h = 1; h <= H; ++h) {
        auto& norms = max_norms[static_cast<std::size_t>(h - 1)];
        if (static_cast<int>(norms.size()) < fitted) norms.resize(static_cast<std::size_t>(fitted), 0.0);
        for (int l = 1; l <= fitted; ++l) {
          const auto& lv = agent.level(h, l);
          const double norm = lv.weight.norm();
          norms[static_cast<std::size_t>(l - 1)] = std::max(norms[static_cast<std::size_t>(l - 1)], norm);
          const double cap = mdp::weight_norm_cap(d, l, H, c.lambda);
          if (norm > cap) {
            std::ostringstream os;
            os << "weight norm exceeded at episode " << k << ": ||w_" << h << "^" << l
               << "|| = " << norm << " > " << cap;
            m.invariant_violations.push_back(os.str());
          }
          if (c.check_optimism && !optimism_broken) {
            const Matrix& qstar = optimal.q_values[static_cast<std::size_t>(h - 1)];
            if ((lv.q - qstar).minCoeff() < -1e-9) optimism_broken = true;
          }
        }
        const int level = rec.levels[static_cast<std::size_t>(h - 1)];
        const std::size_t size = agent.level(h, level).members.size();
        const double cap = mdp::stage_level_capacity(d, level, h);
        if (static_cast<double>(size) > cap) capacity_breach(m, k, h, level, size, cap);
      }
      if (optimism_broken) ++m.optimism_violations;

      if (k % cadence == 0 || k == c.budget) {
        OccupancySnapshot snap{k, {}};
        for (int h = 1; h <= H; ++h) {
          std::vector<std::uint64_t> sizes;
          for (int l = 1; l <= agent.num_levels(h); ++l) sizes.push_back(agent.level(h, l).members.size());
          snap.sizes.push_back(std::move(sizes));
        }
        m.occupancy_series.push_back(std::move(snap));
      }
    }
    for (int h = 1; h <= H; ++h) {
      for (int l = 1; l <= agent.num_levels(h); ++l) {
        m.occupancy.push_back(
            {h, l, agent.level(h, l).members.size(), mdp::stage_level_capacity(d, l, h)});
      }
      const auto& norms = max_norms[static_cast<std::size_t>(h - 1)];
      for (std::size_t l = 1; l <= norms.size(); ++l) {
        m.weight_norms.push_back({h, static_cast<int>(l), norms[l - 1],
                                  mdp::weight_norm_cap(d, static_cast<int>(l), H, c.lambda)});
      }
    }
    m.level_overflow_diagnostics = agent.level_overflow_diagnostics();
  } else {
    mdp::LsviUcbAgent agent(spec.features(), spec.num_states(), spec.num_actions(), H, c.budget,
                            agent_config);
    for (std::uint64_t k = 1; k <= c.budget; ++k) {
      auto rng = make_stream(c.seed, StreamTag::kTransition, k);
      record_episode(agent.run_episode(spec, rng));
      if (c.check_optimism) {
        for (int h = 1; h <= H; ++h) {
          const Matrix& qstar = optimal.q_values[static_cast<std::size_t>(h - 1)];
          if ((agent.stage(h).q - qstar).minCoeff() < -1e-9) {
            ++m.optimism_violations;
            break;
          }
        }
      }
      if (k % cadence == 0 || k == c.budget) {
        OccupancySnapshot snap{k, {}};
        for (int h = 1; h <= H; ++h) snap.sizes.push_back({k});
        m.occupancy_series.push_back(std::move(snap));
      }
    }
    for (int h = 1; h <= H; ++h) m.occupancy.push_back({h, 1, c.budget, 0.0});
  }
  finish_metrics(m, start);
  return m;
}

RunMetrics run_experiment(const RunConfig& config) {
  return config.track == Track::kBandit ? run_bandit_experiment(config)
                                        : run_mdp_experiment(config);
}

}  // namespace upacrl::harness
