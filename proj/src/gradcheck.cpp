// SPDX-License-Identifier: Apache-2.0
#include "mgtd/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "mgtd/rng.hpp"

namespace mgtd {

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

double GradCheckReport::max_rel_error() const {
  double worst = 0.0;
  for (const auto& e : entries) worst = std::max(worst, e.max_rel_error);
  return worst;
}

std::vector<std::string> GradCheckReport::failures() const {
  std::vector<std::string> out;
  for (const auto& e : entries) {
    if (e.max_rel_error >= tolerance) {
      std::ostringstream os;
      os << e.name << "[" << e.worst_coord << "]: analytic " << e.analytic << " numeric " << e.numeric
         << " rel err " << e.max_rel_error;
      out.push_back(os.str());
    }
  }
  return out;
}

GradCheckReport grad_check(const std::function<double(bool)>& loss, const ParamRefs<double>& params,
                           const GradCheckOptions& options) {
  zero_grads(params);
  loss(true);

  GradCheckReport report;
  report.tolerance = options.tolerance;
  Rng rng(options.seed);
  for (auto* p : params) {
    if (p->frozen) continue;
    GradCheckEntry entry;
    entry.name = p->name;

    std::vector<std::size_t> coords(p->size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (coords.size() > options.max_coords_per_param) {
      rng.shuffle(coords.begin(), coords.end());
      coords.resize(options.max_coords_per_param);
      std::sort(coords.begin(), coords.end());
    }

    for (auto c : coords) {
      const double saved = p->value[c];
      p->value[c] = saved + options.step;
      const double up = loss(false);
      p->value[c] = saved - options.step;
      const double down = loss(false);
      p->value[c] = saved;
      const double numeric = (up - down) / (2.0 * options.step);
      const double analytic = p->grad[c];
      const double err = relative_error(analytic, numeric);
      if (err >= entry.max_rel_error) {
        entry.max_rel_error = err;
        entry.worst_coord = c;
        entry.analytic = analytic;
        entry.numeric = numeric;
      }
      ++entry.coords_checked;
    }
    report.entries.push_back(std::move(entry));
  }
  return report;
}

}  // namespace mgtd
