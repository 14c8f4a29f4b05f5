#include "upacrl/audit.hpp"

#include <cmath>
#include <sstream>

#include "upacrl/bandit.hpp"
#include "upacrl/config.hpp"
#include "upacrl/errors.hpp"
#include "upacrl/harness.hpp"
#include "upacrl/mdp.hpp"

namespace upacrl::audit {

namespace {

constexpr double kGapTolerance = 1e-9;

AuditCheck fail(AuditCheck c, const std::string& detail) {
  c.passed = false;
  c.detail = detail;
  return c;
}

AuditCheck check_regret(const io::RunOutput& out) {
  AuditCheck c{"regret_consistency", true, ""};
  const auto& t = out.table;
  const int gi = t.column("gap");
  const int ri = t.column("regret");
  if (gi < 0 || ri < 0) return fail(c, "missing gap or regret column");
  double prev = 0.0;
  for (std::size_t k = 0; k < t.rows.size(); ++k) {
    const double gap = t.rows[k][static_cast<std::size_t>(gi)];
    const double regret = t.rows[k][static_cast<std::size_t>(ri)];
    if (gap < -kGapTolerance) {
      return fail(c, "negative gap " + config::format_double(gap) + " at row " + std::to_string(k + 1));
    }
    const double tol = 1e-9 * std::max(1.0, std::abs(regret));
    if (std::abs((regret - prev) - gap) > tol) {
      return fail(c, "regret increment differs from gap at row " + std::to_string(k + 1));
    }
    prev = regret;
  }
  const double final_regret = out.summary.value("final_regret", 0.0);
  if (prev != final_regret) {
    return fail(c, "last regret " + config::format_double(prev) + " != final_regret " +
                       config::format_double(final_regret));
  }
  c.detail = std::to_string(t.rows.size()) + " rows";
  return c;
}

AuditCheck check_n_eps(const io::RunOutput& out) {
  AuditCheck c{"n_eps_monotone", true, ""};
  const auto& t = out.table;
  const int gi = t.column("gap");
  std::vector<double> grid;
  std::vector<int> cols;
  for (std::size_t i = 0; i < t.columns.size(); ++i) {
    const std::string& name = t.columns[i];
    if (name.rfind("n_eps@", 0) != 0) continue;
    grid.push_back(std::stod(name.substr(6)));
    cols.push_back(static_cast<int>(i));
  }
  if (gi < 0 || grid.empty()) return fail(c, "missing gap or n_eps columns");
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!(grid[i] < grid[i - 1])) return fail(c, "eps grid not strictly descending");
  }
  std::vector<std::uint64_t> recount(grid.size(), 0);
  for (std::size_t k = 0; k < t.rows.size(); ++k) {
    const auto& row = t.rows[k];
    const double gap = row[static_cast<std::size_t>(gi)];
    for (std::size_t i = 0; i < grid.size(); ++i) {
      if (gap > grid[i]) ++recount[i];
      const double v = row[static_cast<std::size_t>(cols[i])];
      if (v != static_cast<double>(recount[i])) {
        return fail(c, "n_eps@" + config::format_double(grid[i]) + " differs from recount at row " +
                           std::to_string(k + 1));
      }
      if (k > 0 && v < t.rows[k - 1][static_cast<std::size_t>(cols[i])]) {
        return fail(c, "n_eps decreases in time at row " + std::to_string(k + 1));
      }
      if (i > 0 && v < row[static_cast<std::size_t>(cols[i - 1])]) {
        return fail(c, "n_eps increases with eps at row " + std::to_string(k + 1));
      }
    }
  }
  const auto& final_json = out.summary.value("final_n_eps", io::Json::array());
  if (final_json.size() != grid.size()) return fail(c, "final_n_eps length mismatch");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (final_json[i].get<std::uint64_t>() != recount[i]) {
      return fail(c, "final_n_eps[" + std::to_string(i) + "] differs from recount");
    }
  }
  c.detail = std::to_string(grid.size()) + " grid points";
  return c;
}

AuditCheck check_level_caps(const io::RunOutput& out) {
  AuditCheck c{"level_caps", true, ""};
  const auto& s = out.summary;
  const std::string algorithm = s.value("algorithm", std::string());
  if (!harness::is_leveled(algorithm)) {
    c.detail = "skipped (" + algorithm + " has no levels)";
    return c;
  }
  const bool mdp = s.value("track", std::string()) == "mdp";
  const int d = s.at("dim").get<int>();
  auto cap_of = [&](int stage, int level) {
    return mdp ? mdp::stage_level_capacity(d, level, stage) : bandit::level_capacity(d, level);
  };
  std::size_t checked = 0;
  for (const auto& o : s.at("occupancy")) {
    const int stage = o.at("stage").get<int>();
    const int level = o.at("level").get<int>();
    const double size = o.at("max_size").get<double>();
    const double cap = cap_of(stage, level);
    if (size > cap) {
      std::ostringstream os;
      os << "|C_" << stage << "^" << level << "| = " << size << " > cap " << cap;
      return fail(c, os.str());
    }
    ++checked;
  }
  for (const auto& snap : s.at("occupancy_series")) {
    const auto& sizes = snap.at("sizes");
    for (std::size_t h = 0; h < sizes.size(); ++h) {
      for (std::size_t l = 0; l < sizes[h].size(); ++l) {
        const double size = sizes[h][l].get<double>();
        const double cap = cap_of(static_cast<int>(h + 1), static_cast<int>(l + 1));
        if (size > cap) {
          std::ostringstream os;
          os << "snapshot " << snap.at("index").get<std::uint64_t>() << ": |C_" << h + 1 << "^"
             << l + 1 << "| = " << size << " > cap " << cap;
          return fail(c, os.str());
        }
        ++checked;
      }
    }
  }
  c.detail = std::to_string(checked) + " entries";
  return c;
}

AuditCheck check_weight_norms(const io::RunOutput& out) {
  AuditCheck c{"weight_norm_caps", true, ""};
  const auto& s = out.summary;
  if (s.value("track", std::string()) != "mdp" || s.value("algorithm", std::string()) != "flute") {
    c.detail = "skipped (flute runs only)";
    return c;
  }
  const int d = s.at("dim").get<int>();
  const int H = s.at("horizon").get<int>();
  const double lambda = s.at("lambda").get<double>();
  std::size_t checked = 0;
  for (const auto& w : s.at("weight_norms")) {
    const int stage = w.at("stage").get<int>();
    const int level = w.at("level").get<int>();
    const double norm = w.at("max_norm").get<double>();
    const double cap = mdp::weight_norm_cap(d, level, H, lambda);
    if (norm > cap) {
      std::ostringstream os;
      os << "||w_" << stage << "^" << level << "|| = " << norm << " > cap " << cap;
      return fail(c, os.str());
    }
    ++checked;
  }
  c.detail = std::to_string(checked) + " entries";
  return c;
}

template <typename F>
AuditCheck guarded(const std::string& name, F&& check, const io::RunOutput& out) {
  try {
    return check(out);
  } catch (const std::exception& e) {
    return AuditCheck{name, false, std::string("malformed summary: ") + e.what()};
  }
}

}  // namespace

std::vector<AuditCheck> audit_output(const io::RunOutput& out) {
  return {guarded("regret_consistency", check_regret, out),
          guarded("n_eps_monotone", check_n_eps, out),
          guarded("level_caps", check_level_caps, out),
          guarded("weight_norm_caps", check_weight_norms, out)};
}

std::vector<AuditCheck> audit_run(const std::filesystem::path& dir) {
  return audit_output(io::read_results(dir));
}

bool all_passed(const std::vector<AuditCheck>& checks) {
  for (const auto& c : checks) {
    if (!c.passed) return false;
  }
  return true;
}

}  // namespace upacrl::audit
