#pragma once

// Self-check suites run by `mflow verify`: each returns one row per check
// with the measured worst value and its tolerance.

#include <cstdint>
#include <string>
#include <vector>

namespace mflow {

struct CheckRow {
  std::string check;
  double value = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

const std::vector<std::string>& suite_names();

/// Throws std::invalid_argument for an unknown suite.
std::vector<CheckRow> run_suite(const std::string& name, std::uint64_t seed);

}  // namespace mflow
