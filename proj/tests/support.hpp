#pragma once

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "upacrl/linalg.hpp"

namespace testing {

inline upacrl::Vector random_unit(int d, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  upacrl::Vector v(d);
  for (int i = 0; i < d; ++i) v(i) = n(rng);
  return v / v.norm();
}

/// Random vector with norm uniform in [0, 1].
inline upacrl::Vector random_in_ball(int d, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return random_unit(d, rng) * u(rng);
}

inline double max_abs(const upacrl::Matrix& m) { return m.cwiseAbs().maxCoeff(); }

/// Least-squares slope of log y against log x.
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lx = std::log(x[i]);
    const double ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

/// Slope over the final decade [T/10, T] of a cumulative-regret series
/// indexed from 1. Points with zero regret are skipped.
inline double final_decade_slope(const std::vector<double>& regret) {
  std::vector<double> x, y;
  const std::size_t T = regret.size();
  for (std::size_t k = std::max<std::size_t>(1, T / 10); k <= T; ++k) {
    if (regret[k - 1] > 0.0) {
      x.push_back(static_cast<double>(k));
      y.push_back(regret[k - 1]);
    }
  }
  if (x.size() < 2) return 0.0;
  return loglog_slope(x, y);
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("upacrl-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::filesystem::path fixture(const std::string& name) {
  return std::filesystem::path(UPACRL_FIXTURES) / name;
}

}  // namespace testing
