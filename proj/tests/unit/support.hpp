#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <string>

#include "dkhac/dkhac.hpp"

namespace testing_support {

inline dkhac::SeriesMatrix gaussian(long T, long p, std::uint64_t seed) {
  dkhac::NormalStream z(seed);
  dkhac::SeriesMatrix V(T, p);
  for (long t = 0; t < T; ++t)
    for (long c = 0; c < p; ++c) V(t, c) = z();
  return V;
}

/// x_t = a x_{t-1} + sd u_t started from the stationary law.
inline dkhac::SeriesMatrix ar1(long T, double a, double sd, std::uint64_t seed) {
  dkhac::NormalStream z(seed);
  dkhac::SeriesMatrix V(T, 1);
  double x = z() * sd / std::sqrt(1.0 - a * a);
  for (long t = 0; t < T; ++t) {
    x = a * x + sd * z();
    V(t, 0) = x;
  }
  return V;
}

inline const dkhac::FixedBCriticalValues& cached_fixed_b() {
  static const auto cv = dkhac::load_or_generate_fixed_b(std::string(DKHAC_DATA_DIR) + "/fixedb_bartlett_b1.json",
                                                         dkhac::kFixedBGrid, dkhac::kFixedBReplications,
                                                         dkhac::kFixedBSeed);
  return cv;
}

inline std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::path(DKHAC_TEST_TMP) / name;
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace testing_support
