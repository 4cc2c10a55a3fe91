// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace mgtd {

/// Cell counts with machine (label 1) as the positive class.
struct Confusion {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;

  std::size_t total() const noexcept { return tp + fp + tn + fn; }
  /// The same predictions scored with human as the positive class.
  Confusion swapped() const noexcept { return {tn, fn, tp, fp}; }
  friend bool operator==(const Confusion&, const Confusion&) = default;
};

Confusion confusion(std::span<const int> predictions, std::span<const int> labels);

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  // Set when the value came from a 0/0 ratio and was reported as 0.
  bool precision_undefined = false;
  bool recall_undefined = false;
  bool f1_undefined = false;
};

struct Metrics {
  double accuracy = 0.0;
  std::array<ClassMetrics, 2> per_class;  // [human, machine]
  double precision_macro = 0.0;
  double recall_macro = 0.0;
  double f1_macro = 0.0;

  const ClassMetrics& positive() const { return per_class[1]; }
  bool any_undefined() const;
  /// Human-readable notes for every undefined ratio.
  std::vector<std::string> warnings() const;
};

/// Requires a non-empty confusion matrix.
Metrics metrics(const Confusion& c);

nlohmann::json metrics_json(const Metrics& m);

/// "0.7M" below one million, otherwise "4M"; half rounds up.
std::string round_millions(std::size_t count);

/// 3675138 -> "3,675,138".
std::string group_thousands(std::size_t count);

/// "3,675,138 (≈4M)".
std::string format_params(std::size_t count);

struct ReportRow {
  std::string model;
  Metrics metrics;
  std::size_t trainable_params = 0;
};

/// Aligned text table in input order; percentages to two decimals.
std::string render_report_table(std::span<const ReportRow> rows);

/// Array of {model, accuracy, f1_macro, f1_pos, precision_pos, recall_pos,
/// precision_macro, recall_macro, trainable_params}, values as fractions.
nlohmann::json report_json(std::span<const ReportRow> rows);

}  // namespace mgtd
