// SPDX-License-Identifier: Apache-2.0
#include "mgtd/eval.hpp"

#include <algorithm>
#include <cstdio>

#include "mgtd/errors.hpp"

namespace mgtd {

namespace {

struct Ratio {
  double value;
  bool undefined;
};

Ratio ratio(double num, double den) {
  if (den == 0.0) return {0.0, true};
  return {num / den, false};
}

ClassMetrics class_metrics(std::size_t tp, std::size_t fp, std::size_t fn) {
  ClassMetrics m;
  const Ratio p = ratio(static_cast<double>(tp), static_cast<double>(tp + fp));
  const Ratio r = ratio(static_cast<double>(tp), static_cast<double>(tp + fn));
  const Ratio f = ratio(2.0 * p.value * r.value, p.value + r.value);
  m.precision = p.value;
  m.recall = r.value;
  m.f1 = f.value;
  m.precision_undefined = p.undefined;
  m.recall_undefined = r.undefined;
  m.f1_undefined = f.undefined;
  return m;
}

std::string percent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * fraction);
  return buf;
}

// Display width, counting each UTF-8 code point once.
std::size_t display_width(const std::string& s) {
  return static_cast<std::size_t>(std::count_if(s.begin(), s.end(), [](char c) {
    return (static_cast<unsigned char>(c) & 0xc0) != 0x80;
  }));
}

std::string pad_left(const std::string& s, std::size_t width) {
  const std::size_t w = display_width(s);
  return w >= width ? s : std::string(width - w, ' ') + s;
}

std::string pad_right(const std::string& s, std::size_t width) {
  const std::size_t w = display_width(s);
  return w >= width ? s : s + std::string(width - w, ' ');
}

}  // namespace

Confusion confusion(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size()) {
    throw DataError("confusion: " + std::to_string(predictions.size()) + " predictions for " +
                    std::to_string(labels.size()) + " labels");
  }
  Confusion c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int p = predictions[i];
    const int l = labels[i];
    if ((p != 0 && p != 1) || (l != 0 && l != 1)) throw DataError("confusion: values must be 0 or 1");
    if (p == 1) {
      (l == 1 ? c.tp : c.fp) += 1;
    } else {
      (l == 0 ? c.tn : c.fn) += 1;
    }
  }
  return c;
}

bool Metrics::any_undefined() const {
  return std::any_of(per_class.begin(), per_class.end(), [](const ClassMetrics& m) {
    return m.precision_undefined || m.recall_undefined || m.f1_undefined;
  });
}

std::vector<std::string> Metrics::warnings() const {
  std::vector<std::string> out;
  const char* names[] = {"human", "machine"};
  for (std::size_t k = 0; k < 2; ++k) {
    const auto& m = per_class[k];
    if (m.precision_undefined) out.push_back(std::string(names[k]) + " precision undefined (no predictions), reported as 0");
    if (m.recall_undefined) out.push_back(std::string(names[k]) + " recall undefined (no true samples), reported as 0");
    if (m.f1_undefined) out.push_back(std::string(names[k]) + " F1 undefined (precision + recall = 0), reported as 0");
  }
  return out;
}

Metrics metrics(const Confusion& c) {
  if (c.total() == 0) throw DataError("metrics of an empty confusion matrix");
  Metrics m;
  m.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
  m.per_class[1] = class_metrics(c.tp, c.fp, c.fn);
  m.per_class[0] = class_metrics(c.tn, c.fn, c.fp);
  m.precision_macro = (m.per_class[0].precision + m.per_class[1].precision) / 2.0;
  m.recall_macro = (m.per_class[0].recall + m.per_class[1].recall) / 2.0;
  m.f1_macro = (m.per_class[0].f1 + m.per_class[1].f1) / 2.0;
  return m;
}

nlohmann::json metrics_json(const Metrics& m) {
  return {{"accuracy", m.accuracy},
          {"f1_macro", m.f1_macro},
          {"f1_pos", m.positive().f1},
          {"precision_pos", m.positive().precision},
          {"recall_pos", m.positive().recall},
          {"precision_macro", m.precision_macro},
          {"recall_macro", m.recall_macro}};
}

std::string round_millions(std::size_t count) {
  if (count < 1'000'000) {
    const std::size_t tenths = (count + 50'000) / 100'000;
    return std::to_string(tenths / 10) + "." + std::to_string(tenths % 10) + "M";
  }
  return std::to_string((count + 500'000) / 1'000'000) + "M";
}

std::string group_thousands(std::size_t count) {
  std::string digits = std::to_string(count);
  std::string out;
  for (std::size_t i = 0; i < digits.size(); ++i) {
    if (i > 0 && (digits.size() - i) % 3 == 0) out.push_back(',');
    out.push_back(digits[i]);
  }
  return out;
}

std::string format_params(std::size_t count) {
  return group_thousands(count) + " (≈" + round_millions(count) + ")";
}

std::string render_report_table(std::span<const ReportRow> rows) {
  const std::vector<std::string> header{"Model",     "Acc",       "F1 (macro)", "F1 (pos)", "P (pos)",
                                        "R (pos)",   "P (macro)", "R (macro)",  "Params*"};
  std::vector<std::vector<std::string>> cells{header};
  for (const auto& r : rows) {
    const auto& m = r.metrics;
    cells.push_back({r.model, percent(m.accuracy), percent(m.f1_macro), percent(m.positive().f1),
                     percent(m.positive().precision), percent(m.positive().recall), percent(m.precision_macro),
                     percent(m.recall_macro), format_params(r.trainable_params)});
  }
  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& row : cells) {
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], display_width(row[c]));
  }
  std::string out;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    std::string line;
    for (std::size_t c = 0; c < cells[i].size(); ++c) {
      if (c > 0) line += "  ";
      line += c == 0 ? pad_right(cells[i][c], width[c]) : pad_left(cells[i][c], width[c]);
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + "\n";
    if (i == 0) {
      std::size_t total = 0;
      for (std::size_t w : width) total += w;
      out += std::string(total + 2 * (width.size() - 1), '-') + "\n";
    }
  }
  return out;
}

nlohmann::json report_json(std::span<const ReportRow> rows) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::json j = metrics_json(r.metrics);
    j["model"] = r.model;
    j["trainable_params"] = r.trainable_params;
    out.push_back(std::move(j));
  }
  return out;
}

}  // namespace mgtd
