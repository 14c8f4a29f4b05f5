#include "upacrl/cli.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <thread>

#include <CLI11.hpp>

#include "upacrl/audit.hpp"
#include "upacrl/config.hpp"
#include "upacrl/errors.hpp"
#include "upacrl/harness.hpp"
#include "upacrl/io.hpp"

namespace upacrl::cli {

namespace fs = std::filesystem;

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string seeds;
  std::vector<std::string> sets;
  std::string out;
  unsigned jobs = 0;
  std::string path;
};

fs::path out_root() {
  const char* env = std::getenv(kOutEnv);
  return env != nullptr && *env != '\0' ? fs::path(env) : fs::path(kDefaultOutRoot);
}

config::KeyValues load_config(const Options& o) {
  config::KeyValues kv;
  if (!o.config.empty()) {
    kv = config::load_key_values(o.config);
    // Instance files named in a config are relative to that config.
    if (auto it = kv.find("instance_file"); it != kv.end() && fs::path(it->second).is_relative()) {
      it->second = (fs::path(o.config).parent_path() / it->second).lexically_normal().string();
    }
  }
  for (const auto& s : o.sets) config::apply_override(kv, s);
  if (o.seed) kv["seed"] = std::to_string(*o.seed);
  return kv;
}

config::KeyValues take_sweep_keys(config::KeyValues& kv) {
  config::KeyValues sweep;
  for (auto it = kv.begin(); it != kv.end();) {
    if (it->first.rfind("sweep.", 0) == 0) {
      sweep.emplace(it->first.substr(6), it->second);
      it = kv.erase(it);
    } else {
      ++it;
    }
  }
  return sweep;
}

std::string summary_line(const harness::RunMetrics& m, const fs::path& dir) {
  std::ostringstream os;
  const double eps = m.eps_grid.back();
  os << harness::to_string(m.config.track) << ' ' << m.config.algorithm << " seed=" << m.config.seed
     << " final_regret=" << config::format_double(m.regret.empty() ? 0.0 : m.regret.back())
     << " n_eps@" << config::format_double(eps) << '=' << m.final_n_eps.back()
     << " max_level=" << m.max_level << " out=" << dir.string();
  return os.str();
}

int cmd_run(const Options& o, std::ostream& out, std::ostream& err) {
  config::KeyValues kv = load_config(o);
  take_sweep_keys(kv);
  const harness::RunConfig c = config::to_run_config(kv);
  fs::path dir;
  if (!o.out.empty()) {
    dir = o.out;
  } else if (!c.out.empty()) {
    dir = c.out;
  } else {
    dir = out_root() / (harness::to_string(c.track) + "-" + c.algorithm + "-seed" + std::to_string(c.seed));
  }
  harness::RunMetrics m;
  try {
    m = harness::run_experiment(c);
  } catch (const InvariantViolation& e) {
    err << "invariant breach: " << e.what() << '\n';
    return kInvariantBreach;
  } catch (const NumericalError& e) {
    err << "invariant breach: " << e.what() << '\n';
    return kInvariantBreach;
  }
  io::write_results(m, dir);
  out << summary_line(m, dir) << '\n';
  if (!m.invariant_violations.empty()) {
    for (const auto& v : m.invariant_violations) err << "invariant breach: " << v << '\n';
    return kInvariantBreach;
  }
  return kOk;
}

struct Cell {
  std::uint64_t seed = 0;
  config::KeyValues overrides;
  std::string name;
  harness::RunConfig config;
  std::string status = "pending";
  std::string error;
  double final_regret = 0.0;
};

std::vector<std::string> split_values(const std::string& key, const std::string& raw) {
  std::vector<std::string> values;
  std::stringstream ss(raw);
  for (std::string item; std::getline(ss, item, ',');) {
    const auto first = item.find_first_not_of(" \t");
    const auto last = item.find_last_not_of(" \t");
    if (first == std::string::npos) throw ConfigError("sweep." + key + ": empty value");
    values.push_back(item.substr(first, last - first + 1));
  }
  if (values.empty()) throw ConfigError("sweep." + key + ": no values");
  return values;
}

void run_cell(Cell& cell, const fs::path& dir) {
  try {
    const harness::RunMetrics m = harness::run_experiment(cell.config);
    io::write_results(m, dir);
    cell.final_regret = m.regret.empty() ? 0.0 : m.regret.back();
    if (m.invariant_violations.empty()) {
      cell.status = "ok";
    } else {
      cell.status = "failed";
      cell.error = "invariant breach: " + m.invariant_violations.front();
    }
  } catch (const std::exception& e) {
    cell.status = "failed";
    cell.error = e.what();
  }
}

int cmd_sweep(const Options& o, std::ostream& out, std::ostream& err) {
  config::KeyValues kv = load_config(o);
  config::KeyValues sweep = take_sweep_keys(kv);

  std::vector<std::uint64_t> seeds;
  if (!o.seeds.empty()) {
    seeds = parse_seed_range(o.seeds);
  } else if (const auto it = sweep.find("seeds"); it != sweep.end()) {
    seeds = parse_seed_range(it->second);
  } else {
    seeds.push_back(config::to_run_config(kv).seed);
  }
  sweep.erase("seeds");
  if (seeds.empty()) throw ConfigError("seeds: empty seed range");

  const auto& known = config::known_keys();
  std::vector<std::pair<std::string, std::vector<std::string>>> grid;
  for (const auto& [key, raw] : sweep) {
    if (std::find(known.begin(), known.end(), key) == known.end() || key == "seed" ||
        key == "out" || key == "eps_grid") {
      throw ConfigError("sweep." + key + ": not a sweepable key");
    }
    grid.emplace_back(key, split_values(key, raw));
  }

  // Cross product of the grid, seeds varying fastest.
  std::vector<Cell> cells;
  std::vector<std::size_t> pos(grid.size(), 0);
  while (true) {
    for (std::uint64_t seed : seeds) {
      Cell cell;
      cell.seed = seed;
      config::KeyValues cell_kv = kv;
      for (std::size_t g = 0; g < grid.size(); ++g) {
        const std::string& value = grid[g].second[pos[g]];
        cell.overrides[grid[g].first] = value;
        cell_kv[grid[g].first] = value;
        cell.name += grid[g].first + "-" + value + "_";
      }
      cell_kv["seed"] = std::to_string(seed);
      cell.name += "seed-" + std::to_string(seed);
      cell.config = config::to_run_config(cell_kv);
      cells.push_back(std::move(cell));
    }
    std::size_t g = 0;
    while (g < grid.size() && ++pos[g] == grid[g].second.size()) pos[g++] = 0;
    if (g == grid.size()) break;
  }

  const harness::RunConfig base = config::to_run_config(kv);
  fs::path root;
  if (!o.out.empty()) {
    root = o.out;
  } else if (!base.out.empty()) {
    root = base.out;
  } else {
    root = out_root() / ("sweep-" + harness::to_string(base.track) + "-" + base.algorithm);
  }
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) throw IoError("cannot create output directory " + root.string() + ": " + ec.message());

  unsigned jobs = o.jobs > 0 ? o.jobs : std::max(1u, std::thread::hardware_concurrency());
  jobs = std::min<unsigned>(jobs, static_cast<unsigned>(cells.size()));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) run_cell(cells[i], root / cells[i].name);
  };
  std::vector<std::thread> threads;
  for (unsigned j = 1; j < jobs; ++j) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();

  io::Json manifest;
  manifest["schema"] = io::kSchemaVersion;
  manifest["cells"] = io::Json::array();
  std::size_t failed = 0;
  for (const Cell& cell : cells) {
    io::Json entry;
    entry["dir"] = cell.name;
    entry["seed"] = cell.seed;
    entry["overrides"] = cell.overrides;
    entry["status"] = cell.status;
    if (cell.status == "ok") {
      entry["final_regret"] = cell.final_regret;
    } else {
      entry["error"] = cell.error;
      ++failed;
      err << "cell " << cell.name << " failed: " << cell.error << '\n';
    }
    manifest["cells"].push_back(entry);
    out << std::left << std::setw(8) << cell.status << cell.name << '\n';
  }
  io::save_json(root / "manifest.json", manifest);
  out << cells.size() - failed << "/" << cells.size() << " cells ok, manifest "
      << (root / "manifest.json").string() << '\n';
  return failed > 0 ? kSweepCellFailed : kOk;
}

int report_checks(const std::vector<bandit::CertificationCheck>& checks, std::ostream& out,
                  std::ostream& err) {
  const bandit::CertificationCheck* first_failed = nullptr;
  for (const auto& c : checks) {
    out << (c.passed ? "PASS  " : "FAIL  ") << c.name;
    if (!c.detail.empty()) out << "  " << c.detail;
    out << '\n';
    if (!c.passed && first_failed == nullptr) first_failed = &c;
  }
  if (first_failed != nullptr) {
    err << "certify: check failed: " << first_failed->name << ": " << first_failed->detail << '\n';
    return kCertifyFailed;
  }
  return kOk;
}

int cmd_certify(const Options& o, std::ostream& out, std::ostream& err) {
  const std::string path = !o.path.empty() ? o.path : o.config;
  if (path.empty()) throw ConfigError("certify: an instance file or --config is required");
  try {
    if (fs::path(path).extension() == ".json") {
      const io::Json j = io::load_json(path);
      if (j.value("type", std::string("linear_mdp")) == "bandit") {
        const io::BanditFile f = io::bandit_file_from_json(j);
        const auto instance = io::make_bandit_instance(f, {bandit::NoiseKind::kNone, 0.0}, 0);
        return report_checks(bandit::certify(instance, f.decision_sets.size()), out, err);
      }
      return report_checks(mdp::certify(io::mdp_data_from_json(j)), out, err);
    }
    Options cfg = o;
    cfg.config = path;
    config::KeyValues kv = load_config(cfg);
    take_sweep_keys(kv);
    const harness::RunConfig c = config::to_run_config(kv);
    if (c.track == harness::Track::kBandit) {
      return report_checks(bandit::certify(harness::make_bandit_instance(c), c.budget), out, err);
    }
    if (c.instance == "file") return report_checks(mdp::certify(io::load_mdp_data(c.instance_file)), out, err);
    return report_checks(mdp::certify(harness::make_mdp_instance(c).data()), out, err);
  } catch (const CertificationError& e) {
    out << "FAIL  " << e.what() << '\n';
    err << "certify: check failed: " << e.what() << '\n';
    return kCertifyFailed;
  }
}

int cmd_audit(const Options& o, std::ostream& out, std::ostream& err) {
  std::vector<audit::AuditCheck> checks;
  try {
    checks = audit::audit_run(o.path);
  } catch (const IoError& e) {
    err << "audit: unreadable run output: " << e.what() << '\n';
    return kAuditFailed;
  }
  for (const auto& c : checks) {
    out << (c.passed ? "PASS  " : "FAIL  ") << std::left << std::setw(20) << c.name << c.detail
        << '\n';
  }
  for (const auto& c : checks) {
    if (!c.passed) {
      err << "audit: check failed: " << c.name << ": " << c.detail << '\n';
      return kAuditFailed;
    }
  }
  return kOk;
}

}  // namespace

std::vector<std::uint64_t> parse_seed_range(const std::string& text) {
  const auto dots = text.find("..");
  std::uint64_t a = 0;
  std::uint64_t b = 0;
  auto parse = [&](std::string_view s, std::uint64_t& v) {
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    return ec == std::errc() && ptr == s.data() + s.size() && !s.empty();
  };
  const std::string_view sv = text;
  if (dots == std::string::npos) {
    if (!parse(sv, a)) throw ConfigError("seeds: expected a..b, got '" + text + "'");
    return {a};
  }
  if (!parse(sv.substr(0, dots), a) || !parse(sv.substr(dots + 2), b)) {
    throw ConfigError("seeds: expected a..b, got '" + text + "'");
  }
  std::vector<std::uint64_t> seeds;
  for (std::uint64_t s = a; s <= b; ++s) {
    seeds.push_back(s);
    if (s == b) break;
  }
  return seeds;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Uniform-PAC linear bandit and linear MDP experiments", "upacrl"};
  app.require_subcommand(1, 1);
  Options o;

  auto* run = app.add_subcommand("run", "Execute one run and write results.csv and summary.json");
  run->add_option("--config", o.config, "Run config file")->check(CLI::ExistingFile);
  run->add_option("--seed", o.seed, "Seed override");
  run->add_option("--set", o.sets, "Override a config key (key=value), repeatable");
  run->add_option("--out", o.out, "Output directory");

  auto* sweep = app.add_subcommand("sweep", "Run the [sweep] grid over a seed range");
  sweep->add_option("--config", o.config, "Run config file with a [sweep] section")
      ->check(CLI::ExistingFile);
  sweep->add_option("--seeds", o.seeds, "Seed range a..b (inclusive)");
  sweep->add_option("--set", o.sets, "Override a config key (key=value), repeatable");
  sweep->add_option("--out", o.out, "Sweep root directory");
  sweep->add_option("--jobs", o.jobs, "Concurrent runs (default: all cores)");

  auto* certify = app.add_subcommand("certify", "Check an instance file or config");
  certify->add_option("path", o.path, "Instance .json file or run config");
  certify->add_option("--config", o.config, "Run config file");
  certify->add_option("--set", o.sets, "Override a config key (key=value), repeatable");

  auto* audit_cmd = app.add_subcommand("audit", "Re-verify a run from its output files");
  audit_cmd->add_option("dir", o.path, "Run output directory")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*run) return cmd_run(o, out, err);
    if (*sweep) return cmd_sweep(o, out, err);
    if (*certify) return cmd_certify(o, out, err);
    return cmd_audit(o, out, err);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
  } catch (const CertificationError& e) {
    err << "config error: instance invalid: " << e.what() << '\n';
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << '\n';
  }
  return kConfigError;
}

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace upacrl::cli
