// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "mgtd/gradcheck.hpp"

namespace mgtd {

struct GradCheckCase {
  std::string name;
  GradCheckReport report;
};

struct GradCheckSuite {
  std::vector<GradCheckCase> cases;
  double tolerance = 1e-4;

  bool passed() const;
  double max_rel_error() const;
};

/// Finite-difference checks at double precision for every differentiable
/// primitive, the encoder (all-trainable, LoRA, top-1 unfrozen), all heads,
/// a full detector and both probe language models. Dropout is off except in
/// the dropout primitive's own check, which uses a fixed mask.
GradCheckSuite run_gradcheck_suite(std::uint64_t seed, double tolerance = 1e-4);

std::string render_gradcheck_suite(const GradCheckSuite& suite);
nlohmann::json gradcheck_suite_json(const GradCheckSuite& suite);

}  // namespace mgtd
