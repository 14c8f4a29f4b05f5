#include <charconv>
#include <fstream>
#include <sstream>
#include <system_error>

#include "upacrl/config.hpp"
#include "upacrl/errors.hpp"
#include "upacrl/io.hpp"

namespace upacrl::io {

namespace {

Json vector_json(const Vector& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Vector vector_from(const Json& j, const std::string& what) {
  if (!j.is_array()) throw CertificationError(what + ": expected an array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  return v;
}

// Rows of equal length into a matrix.
Matrix rows_from(const Json& j, const std::string& what) {
  if (!j.is_array()) throw CertificationError(what + ": expected an array of rows");
  const std::size_t cols = j.empty() ? 0 : j[0].size();
  Matrix m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (!j[r].is_array() || j[r].size() != cols) {
      throw CertificationError(what + ": ragged rows");
    }
    for (std::size_t c = 0; c < cols; ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = j[r][c].get<double>();
    }
  }
  return m;
}

Json matrix_json(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(vector_json(m.row(r).transpose()));
  return rows;
}

}  // namespace

Json mdp_data_to_json(const mdp::LinearMdpData& data) {
  Json j;
  j["type"] = "linear_mdp";
  j["dim"] = data.dim;
  j["horizon"] = data.horizon;
  j["num_states"] = data.num_states;
  j["num_actions"] = data.num_actions;
  j["initial_state"] = data.initial_state;
  j["features"] = matrix_json(data.features);
  j["theta"] = Json::array();
  for (const Matrix& t : data.theta) j["theta"].push_back(matrix_json(t));
  j["mu"] = Json::array();
  for (const Vector& m : data.mu) j["mu"].push_back(vector_json(m));
  if (data.initial_distribution.size() > 0) {
    j["initial_distribution"] = vector_json(data.initial_distribution);
  }
  return j;
}

mdp::LinearMdpData mdp_data_from_json(const Json& j) {
  try {
    if (j.value("type", std::string("linear_mdp")) != "linear_mdp") {
      throw CertificationError("instance file: type must be linear_mdp");
    }
    mdp::LinearMdpData data;
    data.dim = j.at("dim").get<int>();
    data.horizon = j.at("horizon").get<int>();
    data.num_states = j.at("num_states").get<int>();
    data.num_actions = j.at("num_actions").get<int>();
    data.initial_state = j.value("initial_state", 0);
    data.features = rows_from(j.at("features"), "features");
    for (const Json& t : j.at("theta")) data.theta.push_back(rows_from(t, "theta"));
    for (const Json& m : j.at("mu")) data.mu.push_back(vector_from(m, "mu"));
    if (j.contains("initial_distribution")) {
      data.initial_distribution = vector_from(j.at("initial_distribution"), "initial_distribution");
    }
    return data;
  } catch (const nlohmann::json::exception& e) {
    throw CertificationError(std::string("instance file: ") + e.what());
  }
}

Json load_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

void save_json(const std::filesystem::path& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

mdp::LinearMdpData load_mdp_data(const std::filesystem::path& path) {
  return mdp_data_from_json(load_json(path));
}

BanditFile bandit_file_from_json(const Json& j) {
  try {
    if (j.value("type", std::string()) != "bandit") {
      throw CertificationError("instance file: type must be bandit");
    }
    BanditFile f;
    f.mu_star = vector_from(j.at("mu_star"), "mu_star");
    for (const Json& set : j.at("decision_sets")) {
      // Stored as a list of actions; columns of the decision set.
      f.decision_sets.push_back(rows_from(set, "decision_sets").transpose());
      if (f.decision_sets.back().rows() != f.mu_star.size()) {
        throw CertificationError("decision_sets: set " + std::to_string(f.decision_sets.size()) +
                                 " has actions of the wrong dimension");
      }
    }
    if (f.decision_sets.empty()) throw CertificationError("decision_sets: empty");
    return f;
  } catch (const nlohmann::json::exception& e) {
    throw CertificationError(std::string("instance file: ") + e.what());
  }
}

bandit::BanditInstance make_bandit_instance(const BanditFile& file, bandit::NoiseModel noise,
                                            std::uint64_t noise_seed) {
  auto sets = file.decision_sets;
  auto source = [sets](std::uint64_t round) {
    const std::size_t i = std::min<std::size_t>(static_cast<std::size_t>(round - 1), sets.size() - 1);
    return sets[i];
  };
  return bandit::BanditInstance(file.mu_star, source, noise, noise_seed);
}

bandit::BanditInstance load_bandit_instance(const std::filesystem::path& path,
                                            bandit::NoiseModel noise, std::uint64_t noise_seed) {
  return make_bandit_instance(bandit_file_from_json(load_json(path)), noise, noise_seed);
}

// ---------------------------------------------------------------------------

std::vector<std::string> csv_columns(const harness::RunMetrics& m) {
  std::vector<std::string> cols = {"index", "gap", "regret", "level"};
  if (m.config.track == harness::Track::kMdp) cols.emplace_back("return");
  for (double e : m.eps_grid) cols.push_back("n_eps@" + config::format_double(e));
  return cols;
}

Json summary_json(const harness::RunMetrics& m) {
  Json j;
  j["schema"] = kSchemaVersion;
  j["track"] = harness::to_string(m.config.track);
  j["algorithm"] = m.config.algorithm;
  j["instance"] = m.config.instance;
  j["seed"] = m.config.seed;
  j["dim"] = m.dim;
  j["horizon"] = m.horizon;
  j["lambda"] = m.config.lambda;
  j["budget"] = m.config.budget;
  Json cfg = Json::object();
  for (const auto& [k, v] : config::to_key_values(m.config)) cfg[k] = v;
  j["config"] = cfg;
  j["final_regret"] = m.regret.empty() ? 0.0 : m.regret.back();
  j["eps_grid"] = m.eps_grid;
  j["final_n_eps"] = m.final_n_eps;
  j["max_level"] = m.max_level;
  const bool leveled = harness::is_leveled(m.config.algorithm);
  j["occupancy"] = Json::array();
  for (const auto& o : m.occupancy) {
    Json e{{"stage", o.stage}, {"level", o.level}, {"max_size", o.max_size}};
    e["cap"] = leveled ? Json(o.cap) : Json(nullptr);
    j["occupancy"].push_back(e);
  }
  j["weight_norms"] = Json::array();
  for (const auto& w : m.weight_norms) {
    j["weight_norms"].push_back(
        {{"stage", w.stage}, {"level", w.level}, {"max_norm", w.max_norm}, {"cap", w.cap}});
  }
  j["occupancy_series"] = Json::array();
  for (const auto& s : m.occupancy_series) {
    j["occupancy_series"].push_back({{"index", s.index}, {"sizes", s.sizes}});
  }
  j["coverage_violations"] = m.coverage_violations;
  j["optimism_violations"] = m.optimism_violations;
  j["level_overflow_diagnostics"] = m.level_overflow_diagnostics;
  j["invariant_violations"] = m.invariant_violations;
  j["runtime_seconds"] = m.runtime_seconds;
  return j;
}

void write_results(const harness::RunMetrics& m, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());

  const auto csv_path = dir / kCsvName;
  std::ofstream out(csv_path);
  if (!out) throw IoError("cannot write " + csv_path.string());
  const auto cols = csv_columns(m);
  out << "# ";
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
  const auto curves = harness::n_epsilon_curve(m.gaps, m.eps_grid);
  const bool with_return = m.config.track == harness::Track::kMdp;
  for (std::size_t k = 0; k < m.gaps.size(); ++k) {
    out << (k + 1) << ',' << config::format_double(m.gaps[k]) << ','
        << config::format_double(m.regret[k]) << ',' << m.levels[k];
    if (with_return) out << ',' << config::format_double(m.returns[k]);
    for (const auto& curve : curves) out << ',' << curve[k];
    out << '\n';
  }
  out.close();
  if (!out) throw IoError("write failed: " + csv_path.string());
  save_json(dir / kSummaryName, summary_json(m));
}

int CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i] == name) return static_cast<int>(i);
  }
  return -1;
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  CsvTable t;
  std::string line;
  if (!std::getline(in, line) || line.empty() || line.front() != '#') {
    throw IoError(path.string() + ": missing '#' header line");
  }
  std::string header = line.substr(1);
  if (!header.empty() && header.front() == ' ') header.erase(0, 1);
  std::stringstream hs(header);
  for (std::string col; std::getline(hs, col, ',');) t.columns.push_back(col);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream rs(line);
    for (std::string cell; std::getline(rs, cell, ',');) {
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc() || ptr != cell.data() + cell.size()) {
        throw IoError(path.string() + ":" + std::to_string(line_no) + ": bad number '" + cell + "'");
      }
      row.push_back(v);
    }
    if (row.size() != t.columns.size()) {
      throw IoError(path.string() + ":" + std::to_string(line_no) + ": wrong column count");
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

RunOutput read_results(const std::filesystem::path& dir) {
  return RunOutput{read_csv(dir / kCsvName), load_json(dir / kSummaryName)};
}

}  // namespace upacrl::io
