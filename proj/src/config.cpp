#include "upacrl/config.hpp"

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <fstream>
#include <sstream>

#include "upacrl/errors.hpp"

namespace upacrl::config {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

const std::vector<std::string> kSections = {"bandit", "mdp", "sweep"};

double parse_double(const std::string& key, const std::string& raw) {
  double v = 0.0;
  const char* end = raw.data() + raw.size();
  const auto [ptr, ec] = std::from_chars(raw.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError(key + ": expected a number, got '" + raw + "'");
  }
  return v;
}

std::uint64_t parse_u64(const std::string& key, const std::string& raw) {
  std::uint64_t v = 0;
  const char* end = raw.data() + raw.size();
  const auto [ptr, ec] = std::from_chars(raw.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError(key + ": expected a nonnegative integer, got '" + raw + "'");
  }
  return v;
}

int parse_int(const std::string& key, const std::string& raw) {
  int v = 0;
  const char* end = raw.data() + raw.size();
  const auto [ptr, ec] = std::from_chars(raw.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError(key + ": expected an integer, got '" + raw + "'");
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& raw) {
  if (raw == "true" || raw == "1" || raw == "yes") return true;
  if (raw == "false" || raw == "0" || raw == "no") return false;
  throw ConfigError(key + ": expected true or false, got '" + raw + "'");
}

std::vector<double> parse_list(const std::string& key, const std::string& raw) {
  std::vector<double> out;
  std::string_view rest = raw;
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    const std::string item(trim(rest.substr(0, comma)));
    if (item.empty()) throw ConfigError(key + ": empty list entry");
    out.push_back(parse_double(key, item));
    if (comma == std::string_view::npos) break;
    rest = rest.substr(comma + 1);
  }
  return out;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

const std::vector<std::string>& known_keys() {
  static const std::vector<std::string> keys = {
      "track", "algorithm", "instance", "T", "K", "delta", "lambda", "c_beta", "seed",
      "instance_seed", "eps_grid", "out", "flush_every", "recondition_every", "tie_break",
      "check_coverage", "check_optimism", "instance_file",
      "bandit.dim", "bandit.num_actions", "bandit.noise", "bandit.noise_scale", "bandit.hard_k",
      "bandit.mu_norm",
      "mdp.num_states", "mdp.num_actions", "mdp.horizon", "mdp.dim"};
  return keys;
}

KeyValues parse_key_values(std::string_view text, const std::string& origin) {
  KeyValues values;
  std::string section;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    const std::string_view raw_line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    const std::string_view line = trim(raw_line);
    const std::string where = origin + ":" + std::to_string(line_no) + ": ";
    if (line.empty() || line.front() == '#') continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + "unterminated section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      if (std::find(kSections.begin(), kSections.end(), section) == kSections.end()) {
        throw ConfigError(where + "unknown section [" + section + "] (valid: bandit, mdp, sweep)");
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(where + "expected key = value");
    const std::string key(trim(line.substr(0, eq)));
    const std::string value(trim(line.substr(eq + 1)));
    if (key.empty()) throw ConfigError(where + "empty key");
    const std::string full = section.empty() ? key : section + "." + key;
    if (!values.emplace(full, value).second) throw ConfigError(where + "duplicate key " + full);
  }
  return values;
}

KeyValues load_key_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_key_values(ss.str(), path.string());
}

void apply_override(KeyValues& values, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw ConfigError("--set: expected key=value, got '" + std::string(assignment) + "'");
  }
  const std::string key(trim(assignment.substr(0, eq)));
  if (key.empty()) throw ConfigError("--set: empty key");
  values[key] = std::string(trim(assignment.substr(eq + 1)));
}

harness::RunConfig to_run_config(const KeyValues& values) {
  const auto& known = known_keys();
  for (const auto& [key, value] : values) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ConfigError(key + ": unknown key");
    }
  }
  harness::RunConfig c;
  auto get = [&](const std::string& key) -> const std::string* {
    const auto it = values.find(key);
    return it == values.end() ? nullptr : &it->second;
  };

  if (const auto* v = get("track")) {
    if (*v == "bandit") {
      c.track = harness::Track::kBandit;
    } else if (*v == "mdp") {
      c.track = harness::Track::kMdp;
    } else {
      throw ConfigError("track: must be bandit or mdp, got '" + *v + "'");
    }
  }
  if (c.track == harness::Track::kMdp) {
    c.algorithm = "flute";
    c.instance = "random-tabular";
  }
  if (const auto* v = get("algorithm")) c.algorithm = *v;
  if (const auto* v = get("instance")) c.instance = *v;
  const std::string budget_key = c.track == harness::Track::kBandit ? "T" : "K";
  if (const auto* v = get(budget_key)) c.budget = parse_u64(budget_key, *v);
  if (const auto* v = get("delta")) c.delta = parse_double("delta", *v);
  if (const auto* v = get("lambda")) c.lambda = parse_double("lambda", *v);
  if (const auto* v = get("c_beta")) c.c_beta = parse_double("c_beta", *v);
  if (const auto* v = get("seed")) c.seed = parse_u64("seed", *v);
  if (const auto* v = get("instance_seed")) c.instance_seed = parse_u64("instance_seed", *v);
  if (const auto* v = get("eps_grid")) c.eps_grid = parse_list("eps_grid", *v);
  if (const auto* v = get("out")) c.out = *v;
  if (const auto* v = get("flush_every")) c.flush_every = parse_u64("flush_every", *v);
  if (const auto* v = get("recondition_every")) {
    c.recondition_every = parse_u64("recondition_every", *v);
    if (c.recondition_every == 0) throw ConfigError("recondition_every: must be >= 1");
  }
  if (const auto* v = get("tie_break")) c.tie_break = *v;
  if (const auto* v = get("check_coverage")) c.check_coverage = parse_bool("check_coverage", *v);
  if (const auto* v = get("check_optimism")) c.check_optimism = parse_bool("check_optimism", *v);
  if (const auto* v = get("instance_file")) c.instance_file = *v;

  if (const auto* v = get("bandit.dim")) c.dim = parse_int("bandit.dim", *v);
  if (const auto* v = get("bandit.num_actions")) c.num_actions = parse_int("bandit.num_actions", *v);
  if (const auto* v = get("bandit.noise")) c.noise = *v;
  if (const auto* v = get("bandit.noise_scale")) c.noise_scale = parse_double("bandit.noise_scale", *v);
  if (const auto* v = get("bandit.hard_k")) c.hard_k = parse_int("bandit.hard_k", *v);
  if (const auto* v = get("bandit.mu_norm")) c.mu_norm = parse_double("bandit.mu_norm", *v);

  if (const auto* v = get("mdp.num_states")) c.num_states = parse_int("mdp.num_states", *v);
  if (const auto* v = get("mdp.num_actions")) c.mdp_actions = parse_int("mdp.num_actions", *v);
  if (const auto* v = get("mdp.horizon")) c.horizon = parse_int("mdp.horizon", *v);
  if (const auto* v = get("mdp.dim")) c.feature_dim = parse_int("mdp.dim", *v);

  harness::validate(c);
  return c;
}

KeyValues to_key_values(const harness::RunConfig& c) {
  KeyValues kv;
  const bool bandit = c.track == harness::Track::kBandit;
  kv["track"] = harness::to_string(c.track);
  kv["algorithm"] = c.algorithm;
  kv["instance"] = c.instance;
  kv[bandit ? "T" : "K"] = std::to_string(c.budget);
  kv["delta"] = format_double(c.delta);
  kv["lambda"] = format_double(c.lambda);
  kv["c_beta"] = format_double(c.c_beta);
  kv["seed"] = std::to_string(c.seed);
  kv["instance_seed"] = std::to_string(c.effective_instance_seed());
  std::string grid;
  for (double e : c.eps_grid) grid += (grid.empty() ? "" : ",") + format_double(e);
  if (!grid.empty()) kv["eps_grid"] = grid;
  kv["flush_every"] = std::to_string(c.flush_every);
  kv["recondition_every"] = std::to_string(c.recondition_every);
  kv["tie_break"] = c.tie_break;
  kv["check_coverage"] = c.check_coverage ? "true" : "false";
  kv["check_optimism"] = c.check_optimism ? "true" : "false";
  if (!c.instance_file.empty()) kv["instance_file"] = c.instance_file;
  if (bandit) {
    kv["bandit.dim"] = std::to_string(c.dim);
    kv["bandit.num_actions"] = std::to_string(c.num_actions);
    kv["bandit.noise"] = c.noise;
    kv["bandit.noise_scale"] = format_double(c.noise_scale);
    kv["bandit.hard_k"] = std::to_string(c.hard_k);
    kv["bandit.mu_norm"] = format_double(c.mu_norm);
  } else {
    kv["mdp.num_states"] = std::to_string(c.num_states);
    kv["mdp.num_actions"] = std::to_string(c.mdp_actions);
    kv["mdp.horizon"] = std::to_string(c.horizon);
    kv["mdp.dim"] = std::to_string(c.feature_dim);
  }
  return kv;
}

}  // namespace upacrl::config
