#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "fuzzforge/dataset_io.hpp"
#include "fuzzforge/error.hpp"
#include "fuzzforge/geometry.hpp"

namespace fuzzforge {

struct match_result {
  std::size_t detection = 0;  // index into the input detections
  bool matched = false;
  std::optional<std::size_t> truth;  // object index inside its image record
  double iou = 0;
  double confidence = 0;
};

/// Detection indices by descending confidence; equal confidences keep input order.
inline std::vector<std::size_t> confidence_order(const std::vector<detection_record>& detections) {
  std::vector<std::size_t> order(detections.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return detections[a].confidence > detections[b].confidence;
  });
  return order;
}

/// Greedy one-to-one matching. Results come back in descending-confidence order;
/// each detection takes the still-unmatched truth with the highest IoU in its
/// image when that IoU reaches the threshold.
inline std::vector<match_result> match(const std::vector<detection_record>& detections,
                                       const std::vector<annotation_record>& truths, double iou_threshold) {
  std::map<std::string, std::size_t> by_name;
  for (std::size_t i = 0; i < truths.size(); ++i) by_name.emplace(truths[i].image_name, i);
  std::vector<std::vector<bool>> used(truths.size());
  for (std::size_t i = 0; i < truths.size(); ++i) used[i].assign(truths[i].objects.size(), false);

  std::vector<match_result> out;
  out.reserve(detections.size());
  for (std::size_t d : confidence_order(detections)) {
    const auto& det = detections[d];
    match_result res{d, false, std::nullopt, 0.0, det.confidence};
    auto it = by_name.find(det.image_name);
    if (it != by_name.end()) {
      const auto& objs = truths[it->second].objects;
      auto& taken = used[it->second];
      double best = -1;
      std::size_t best_idx = 0;
      for (std::size_t g = 0; g < objs.size(); ++g) {
        if (taken[g]) continue;
        const double v = iou(det.box, objs[g].box);
        if (v > best) {
          best = v;
          best_idx = g;
        }
      }
      if (best >= iou_threshold && best > 0) {
        taken[best_idx] = true;
        res.matched = true;
        res.truth = best_idx;
        res.iou = best;
      }
    }
    out.push_back(res);
  }
  return out;
}

struct pr_point {
  double recall;
  double precision;
  double confidence;
};

/// Cumulative precision/recall along results already in descending confidence order.
inline std::vector<pr_point> pr_curve(const std::vector<match_result>& results, std::size_t total_truths) {
  std::vector<pr_point> out;
  std::size_t tp = 0;
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (results[i].matched) ++tp;
    const double recall = total_truths ? static_cast<double>(tp) / static_cast<double>(total_truths) : 0.0;
    out.push_back({recall, static_cast<double>(tp) / static_cast<double>(i + 1), results[i].confidence});
  }
  return out;
}

enum class ap_mode { coco101, area };

struct ap_value {
  double value = 0;
  bool undefined = false;  // no truths and no detections; reported as 0
};

/// Interpolated AP. coco101 averages the monotone precision envelope at recall
/// 0, 0.01, ..., 1; area integrates the envelope exactly.
inline ap_value average_precision(const std::vector<match_result>& results, std::size_t total_truths,
                                  ap_mode mode = ap_mode::coco101) {
  if (total_truths == 0) return {0.0, results.empty()};
  const auto curve = pr_curve(results, total_truths);
  if (curve.empty()) return {0.0, false};

  // envelope[i] = max precision over points i..end
  std::vector<double> envelope(curve.size());
  double running = 0;
  for (std::size_t i = curve.size(); i-- > 0;) {
    running = std::max(running, curve[i].precision);
    envelope[i] = running;
  }

  if (mode == ap_mode::area) {
    double area = 0, prev_recall = 0;
    for (std::size_t i = 0; i < curve.size(); ++i) {
      area += (curve[i].recall - prev_recall) * envelope[i];
      prev_recall = curve[i].recall;
    }
    return {area, false};
  }

  double sum = 0;
  std::size_t i = 0;
  for (int k = 0; k <= 100; ++k) {
    const double r = k / 100.0;
    while (i < curve.size() && curve[i].recall < r) ++i;
    if (i == curve.size()) break;
    sum += envelope[i];
  }
  return {sum / 101.0, false};
}

inline constexpr int threshold_count = 10;

/// IoU thresholds 0.50, 0.55, ..., 0.95.
inline double iou_threshold_at(int i) { return (50 + 5 * i) / 100.0; }

inline double fitness(double ap50, double ap) { return 0.1 * ap50 + 0.9 * ap; }

struct eval_report {
  std::array<double, threshold_count> ap_at{};
  double ap = 0;
  double ap50 = 0;
  double fitness = 0;
  bool undefined = false;
};

inline eval_report evaluate(const std::vector<detection_record>& detections, const dataset_manifest& truth,
                            ap_mode mode = ap_mode::coco101) {
  std::map<std::string, bool> names;
  std::size_t total = 0;
  for (const auto& r : truth.records) {
    names[r.image_name] = true;
    total += r.objects.size();
  }
  for (const auto& d : detections)
    if (!names.count(d.image_name)) throw error(errc::unknown_image, "detection for unknown image " + d.image_name);

  eval_report rep;
  double sum = 0;
  for (int t = 0; t < threshold_count; ++t) {
    const auto ap = average_precision(match(detections, truth.records, iou_threshold_at(t)), total, mode);
    rep.ap_at[static_cast<std::size_t>(t)] = ap.value;
    rep.undefined = rep.undefined || ap.undefined;
    sum += ap.value;
  }
  rep.ap = sum / threshold_count;
  rep.ap50 = rep.ap_at[0];
  rep.fitness = fitness(rep.ap50, rep.ap);
  return rep;
}

struct stat {
  double mean = 0;
  double std = 0;
};

/// Mean and sample standard deviation (n - 1 denominator, 0 for one value).
inline stat mean_std(const std::vector<double>& values) {
  if (values.empty()) throw error(errc::empty_input, "no values to aggregate");
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() == 1) return {mean, 0.0};
  double ss = 0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / (n - 1))};
}

struct seed_stats {
  stat ap;
  stat ap50;
  stat fitness;
};

inline seed_stats aggregate_seeds(const std::vector<eval_report>& reports) {
  if (reports.empty()) throw error(errc::empty_input, "no reports to aggregate");
  std::vector<double> ap, ap50, fit;
  for (const auto& r : reports) {
    ap.push_back(r.ap);
    ap50.push_back(r.ap50);
    fit.push_back(r.fitness);
  }
  return {mean_std(ap), mean_std(ap50), mean_std(fit)};
}

// Report I/O ----------------------------------------------------------------

inline std::string report_json(const eval_report& r) {
  nlohmann::ordered_json j;
  j["ap"] = r.ap;
  j["ap50"] = r.ap50;
  j["ap_per_threshold"] = r.ap_at;
  j["fitness"] = r.fitness;
  j["thresholds"] = nlohmann::ordered_json::array();
  for (int t = 0; t < threshold_count; ++t) j["thresholds"].push_back(iou_threshold_at(t));
  j["undefined"] = r.undefined;
  return j.dump(2) + "\n";
}

inline eval_report parse_report(const std::string& text, const std::string& source = "<report>") {
  const auto j = detail::parse_json(text, source);
  eval_report r;
  try {
    r.ap = j.at("ap").get<double>();
    r.ap50 = j.at("ap50").get<double>();
    r.fitness = j.at("fitness").get<double>();
    r.ap_at = j.at("ap_per_threshold").get<std::array<double, threshold_count>>();
    r.undefined = j.value("undefined", false);
  } catch (const nlohmann::json::exception& e) {
    throw error(errc::parse_error, source + ": " + e.what());
  }
  return r;
}

// Tables --------------------------------------------------------------------

enum class metric { ap50, ap, fitness };

inline const char* to_string(metric m) {
  switch (m) {
    case metric::ap50: return "AP50";
    case metric::ap: return "AP";
    case metric::fitness: return "Fitness";
  }
  return "?";
}

inline stat pick(const seed_stats& s, metric m) {
  switch (m) {
    case metric::ap50: return s.ap50;
    case metric::ap: return s.ap;
    case metric::fitness: return s.fitness;
  }
  return {};
}

struct table_row {
  std::string name;
  std::vector<seed_stats> per_test_set;  // one entry per test set, same order as the header
};

/// "42.30 ± 3.62": mean and std in percent with two decimals.
inline std::string percent_cell(const stat& s) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f ± %.2f", s.mean * 100.0, s.std * 100.0);
  return buf;
}

enum class table_format { markdown, csv };

/// Rows x (test set, metric) table. In Markdown the best mean of each column is
/// bold and the second best italic, compared at the displayed precision; ties
/// share the mark and are listed under the table.
inline std::string render_table(const std::vector<std::string>& test_sets, const std::vector<table_row>& rows,
                                const std::vector<metric>& metrics = {metric::ap50, metric::ap},
                                table_format format = table_format::markdown) {
  for (const auto& r : rows)
    if (r.per_test_set.size() != test_sets.size())
      throw error(errc::invalid_argument, "row " + r.name + " does not have one entry per test set");

  std::vector<std::string> headers;
  for (const auto& t : test_sets)
    for (metric m : metrics) headers.push_back(t + " " + to_string(m) + " (%)");

  auto value = [&](std::size_t row, std::size_t col) {
    return pick(rows[row].per_test_set[col / metrics.size()], metrics[col % metrics.size()]);
  };

  if (format == table_format::csv) {
    std::string s = "name";
    for (const auto& h : headers) s += "," + h + " mean," + h + " std";
    s += "\n";
    char buf[64];
    for (std::size_t r = 0; r < rows.size(); ++r) {
      s += rows[r].name;
      for (std::size_t c = 0; c < headers.size(); ++c) {
        const stat v = value(r, c);
        std::snprintf(buf, sizeof buf, ",%.2f,%.2f", v.mean * 100.0, v.std * 100.0);
        s += buf;
      }
      s += "\n";
    }
    return s;
  }

  // Rank on the rounded hundredths of a percent that the reader sees.
  auto shown = [&](std::size_t r, std::size_t c) { return std::llround(value(r, c).mean * 10000.0); };

  std::string notes;
  std::vector<std::vector<int>> mark(rows.size(), std::vector<int>(headers.size(), 0));  // 2 best, 1 second
  for (std::size_t c = 0; c < headers.size() && !rows.empty(); ++c) {
    std::vector<long long> distinct;
    for (std::size_t r = 0; r < rows.size(); ++r) distinct.push_back(shown(r, c));
    std::sort(distinct.begin(), distinct.end(), std::greater<>());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    std::vector<std::string> best_names;
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (shown(r, c) == distinct[0]) {
        mark[r][c] = 2;
        best_names.push_back(rows[r].name);
      } else if (distinct.size() > 1 && shown(r, c) == distinct[1]) {
        mark[r][c] = 1;
      }
    }
    if (best_names.size() > 1) {
      notes += "Tie for best in " + headers[c] + ":";
      for (const auto& n : best_names) notes += " " + n;
      notes += "\n";
    }
  }

  std::string s = "| Training set |";
  for (const auto& h : headers) s += " " + h + " |";
  s += "\n|---|";
  for (std::size_t c = 0; c < headers.size(); ++c) s += "---|";
  s += "\n";
  for (std::size_t r = 0; r < rows.size(); ++r) {
    s += "| " + rows[r].name + " |";
    for (std::size_t c = 0; c < headers.size(); ++c) {
      const std::string cell = percent_cell(value(r, c));
      if (mark[r][c] == 2)
        s += " **" + cell + "** |";
      else if (mark[r][c] == 1)
        s += " *" + cell + "* |";
      else
        s += " " + cell + " |";
    }
    s += "\n";
  }
  if (!notes.empty()) s += "\n" + notes;
  return s;
}

}  // namespace fuzzforge
