#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "upacrl/bandit.hpp"
#include "upacrl/harness.hpp"
#include "upacrl/mdp.hpp"

namespace upacrl::io {

using Json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kCsvName = "results.csv";
inline constexpr const char* kSummaryName = "summary.json";

// Instance files --------------------------------------------------------------
//
// Linear MDP:
//   {"type": "linear_mdp", "dim": d, "horizon": H, "num_states": S,
//    "num_actions": A, "initial_state": s1,
//    "features": [[...d...] x (S*A)],            row s*A + a
//    "theta": [[[...S...] x d] x H],             theta[h][i][s']
//    "mu": [[...d...] x H],
//    "initial_distribution": [...S...]}          optional
//
// Bandit:
//   {"type": "bandit", "mu_star": [...d...],
//    "decision_sets": [[[...d...] x n_k] x rounds]}
//   Rounds past the listed sets repeat the last one.

Json mdp_data_to_json(const mdp::LinearMdpData& data);
mdp::LinearMdpData mdp_data_from_json(const Json& j);
mdp::LinearMdpData load_mdp_data(const std::filesystem::path& path);
void save_json(const std::filesystem::path& path, const Json& j);
Json load_json(const std::filesystem::path& path);

struct BanditFile {
  Vector mu_star;
  std::vector<bandit::DecisionSet> decision_sets;
};
BanditFile bandit_file_from_json(const Json& j);
bandit::BanditInstance load_bandit_instance(const std::filesystem::path& path,
                                            bandit::NoiseModel noise, std::uint64_t noise_seed);
bandit::BanditInstance make_bandit_instance(const BanditFile& file, bandit::NoiseModel noise,
                                            std::uint64_t noise_seed);

// Run outputs -----------------------------------------------------------------
//
// results.csv: one '#'-prefixed header line naming the columns
//   index,gap,regret,level[,return],n_eps@<eps>...
// followed by one row per round or episode.
// summary.json: config echo, final metrics, occupancy against the level caps,
// runtime; "schema": 1.

std::vector<std::string> csv_columns(const harness::RunMetrics& metrics);
Json summary_json(const harness::RunMetrics& metrics);
/// Writes results.csv and summary.json into `dir`, creating it if needed.
/// Throws IoError naming the path on failure.
void write_results(const harness::RunMetrics& metrics, const std::filesystem::path& dir);

struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  /// Index of a named column, or -1.
  [[nodiscard]] int column(const std::string& name) const;
};

CsvTable read_csv(const std::filesystem::path& path);

struct RunOutput {
  CsvTable table;
  Json summary;
};

RunOutput read_results(const std::filesystem::path& dir);

}  // namespace upacrl::io
