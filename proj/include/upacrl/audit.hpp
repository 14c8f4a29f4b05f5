#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "upacrl/io.hpp"

namespace upacrl::audit {

struct AuditCheck {
  std::string name;
  bool passed = true;
  std::string detail;
};

/// Re-verifies a run from its emitted files only:
///   regret_consistency  regret(k) - regret(k-1) = gap(k), gaps >= -1e-9,
///                       last regret equals the summary's final_regret
///   n_eps_monotone      each N_eps column nondecreasing in time and
///                       nonincreasing in eps, equal to a recount of the gaps
///   level_caps          max |C^l| within the recomputed capacity
///   weight_norm_caps    max ||w|| within the recomputed cap (MDP runs)
std::vector<AuditCheck> audit_output(const io::RunOutput& output);
std::vector<AuditCheck> audit_run(const std::filesystem::path& dir);

bool all_passed(const std::vector<AuditCheck>& checks);

}  // namespace upacrl::audit
