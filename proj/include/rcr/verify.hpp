#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

namespace rcr {

/// Grid over which the closed forms are checked against the generic oracle.
struct VerifyGrid {
  std::vector<int> J{2, 3, 4};
  std::vector<int> n{1, 2, 3};
  std::vector<int> m{1, 2, 3};
  std::vector<int> K{1, 2, 3};
  std::vector<double> u{0.5, 1.0, 2.0};
  std::vector<double> v{0.5, 1.0, 2.0};
  std::vector<double> sigma2{1.0, 2.0};
  int datasets = 5;
  std::uint64_t seed = 20240601;
};

struct CheckResult {
  std::string name;
  int cases = 0;
  double worst = 0.0;  // largest observed relative deviation
  double tolerance = 0.0;
  std::string failure; // first failing case, empty on success

  bool passed() const { return failure.empty() && worst <= tolerance; }
};

/// Runs every closed-form versus oracle comparison over the grid.
std::vector<CheckResult> run_verification(const VerifyGrid& grid = {});

/// Largest absolute entry difference divided by the largest absolute entry of
/// the reference, or by `floor` when that is larger (use the data magnitude
/// for predictions that are exactly zero in theory).
template <typename A, typename B>
double scaled_difference(const A& actual, const B& reference, double floor = 0.0) {
  const double peak = std::max(floor, reference.cwiseAbs().maxCoeff());
  const double scale = peak > 0.0 ? peak : 1.0;
  return (actual - reference).cwiseAbs().maxCoeff() / scale;
}

}  // namespace rcr
