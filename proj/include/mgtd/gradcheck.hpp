// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mgtd/tensor.hpp"

namespace mgtd {

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  std::size_t max_coords_per_param = 24;  // sampled without replacement
  std::uint64_t seed = 0;
};

struct GradCheckEntry {
  std::string name;
  std::size_t coords_checked = 0;
  double max_rel_error = 0.0;
  std::size_t worst_coord = 0;
  double analytic = 0.0;  // at the worst coordinate
  double numeric = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;  // one per non-frozen parameter
  double tolerance = 0.0;

  double max_rel_error() const;
  bool passed() const { return max_rel_error() < tolerance; }
  /// One line per parameter over tolerance, naming the coordinate.
  std::vector<std::string> failures() const;
};

/// Relative error |a - n| / max(|a|, |n|, 1e-8).
double relative_error(double analytic, double numeric);

/// Compares analytic gradients with central differences.
///
/// The checker zeroes every gradient buffer, calls loss(true) once so the
/// closure accumulates analytic gradients, then calls loss(false) twice per
/// sampled coordinate. The closure must be deterministic
/// (dropout off). Frozen parameters are skipped and absent from the report.
GradCheckReport grad_check(const std::function<double(bool)>& loss, const ParamRefs<double>& params,
                           const GradCheckOptions& options = {});

}  // namespace mgtd
