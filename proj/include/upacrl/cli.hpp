#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace upacrl::cli {

enum ExitCode : int {
  kOk = 0,
  kSweepCellFailed = 1,
  kConfigError = 2,
  kInvariantBreach = 3,
  kCertifyFailed = 4,
  kAuditFailed = 5,
};

/// Default output root when neither --out nor the config's `out` is given.
inline constexpr const char* kOutEnv = "UPACRL_OUT";
inline constexpr const char* kDefaultOutRoot = "runs";

/// Parses "a..b" (inclusive). An empty range (b < a) yields no seeds.
std::vector<std::uint64_t> parse_seed_range(const std::string& text);

/// Entry point shared by the executable and the tests. `args` excludes the
/// program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int main(int argc, char** argv);

}  // namespace upacrl::cli
