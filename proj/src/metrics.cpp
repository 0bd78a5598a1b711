#include "rgmm/metrics.hpp"

#include "rgmm/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

namespace rgmm {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

ErrorStats error_stats(const std::vector<double>& truth, const std::vector<double>& estimate) {
  if (truth.size() != estimate.size()) throw ValidationError("truth and estimate sizes differ");
  ErrorStats s;
  s.count = truth.size();
  if (truth.empty()) {
    s.r2 = kNaN;
    return s;
  }
  double abs_sum = 0.0, sq_sum = 0.0, mean = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    double e = truth[i] - estimate[i];
    abs_sum += std::abs(e);
    sq_sum += e * e;
    mean += truth[i];
  }
  const double n = static_cast<double>(truth.size());
  mean /= n;
  double tot = 0.0;
  for (double t : truth) tot += (t - mean) * (t - mean);
  s.mae = abs_sum / n;
  s.rmse = std::sqrt(sq_sum / n);
  s.r2 = tot > 0.0 ? 1.0 - sq_sum / tot : kNaN;
  return s;
}

std::string group_key(const ColumnDescriptor& c) { return c.indicator + ":" + to_string(c.statistic); }

ReconstructionScores reconstruction_scores(const std::vector<TruthEntry>& truth, const ImputationResult& imputed,
                                           const std::optional<ScalingTransform>& scaling) {
  const FeatureMatrix& done = imputed.completed;
  ScalingTransform t;
  if (scaling) {
    t = *scaling;
  } else {
    BoolMatrix observed_input = !imputed.imputed;
    t = fit_scaling(done.with_values(done.values(), observed_input));
  }
  if (t.min.size() != done.cols()) throw ValidationError("scaling does not match the matrix width");

  std::vector<double> all_t, all_e;
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> groups;
  std::map<int, std::pair<std::vector<double>, std::vector<double>>> acqs;
  for (const auto& e : truth) {
    if (e.row < 0 || e.col < 0 || e.row >= static_cast<int>(done.rows()) || e.col >= static_cast<int>(done.cols()))
      throw ValidationError("truth entry outside the matrix");
    if (!imputed.imputed(e.row, e.col))
      throw ValidationError(fmt::format("truth entry ({}, {}) was observed, not imputed", e.row, e.col));
    const ColumnDescriptor& c = done.columns()[e.col];
    double est = done.values()(e.row, e.col);
    double ts = t.scale(e.col, e.value), es = t.scale(e.col, est);
    all_t.push_back(ts);
    all_e.push_back(es);
    auto& g = groups[group_key(c)];
    g.first.push_back(e.value);
    g.second.push_back(est);
    if (c.sensor == Sensor::S2) {
      auto& a = acqs[c.acquisition_index];
      a.first.push_back(ts);
      a.second.push_back(es);
    }
  }
  ReconstructionScores out;
  out.overall_scaled = error_stats(all_t, all_e);
  for (auto& [k, v] : groups) out.by_group[k] = error_stats(v.first, v.second);
  for (auto& [k, v] : acqs) out.by_acquisition[k] = error_stats(v.first, v.second);
  return out;
}

ScalingTransform scaling_for_rows(const FeatureMatrix& masked, const std::vector<int>& rows) {
  return fit_scaling(masked.select_rows(rows));
}

std::vector<TruthEntry> filter_rows(const std::vector<TruthEntry>& truth, const std::vector<int>& rows) {
  std::set<int> keep(rows.begin(), rows.end());
  std::vector<TruthEntry> out;
  for (const auto& e : truth)
    if (keep.count(e.row)) out.push_back(e);
  return out;
}

std::vector<double> default_ratio_grid() {
  std::vector<double> out;
  for (int i = 1; i <= 20; ++i) out.push_back(0.02 * i);
  return out;
}

DetectionCurve precision_curve(const std::vector<double>& scores, const std::vector<bool>& labels,
                               const std::vector<double>& ratios) {
  if (ratios.empty()) throw ValidationError("empty ratio list");
  if (scores.size() != labels.size()) throw ValidationError("scores and labels differ in length");
  if (std::none_of(labels.begin(), labels.end(), [](bool b) { return b; }))
    throw ValidationError("labels contain no positive row");
  for (std::size_t i = 0; i < ratios.size(); ++i) {
    if (!(ratios[i] > 0.0 && ratios[i] <= 1.0)) throw ValidationError("ratios must lie in (0, 1]");
    if (i > 0 && !(ratios[i] > ratios[i - 1])) throw ValidationError("ratios must increase strictly");
  }
  for (double s : scores)
    if (std::isnan(s)) throw ValidationError("NaN outlier score");

  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<std::size_t> tp_prefix(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) tp_prefix[i + 1] = tp_prefix[i] + (labels[order[i]] ? 1 : 0);

  DetectionCurve c;
  c.ratios = ratios;
  for (double r : ratios) {
    auto flagged = static_cast<std::size_t>(std::ceil(r * static_cast<double>(n) - 1e-9));
    flagged = std::clamp<std::size_t>(flagged, 1, n);
    c.precision.push_back(static_cast<double>(tp_prefix[flagged]) / static_cast<double>(flagged));
  }
  for (std::size_t i = 1; i < ratios.size(); ++i)
    c.auc += 0.5 * (c.precision[i] + c.precision[i - 1]) * (ratios[i] - ratios[i - 1]);
  double span = ratios.back() - ratios.front();
  c.normalized_auc = span > 0.0 ? c.auc / span : c.precision.front();
  return c;
}

Aggregate aggregate(const std::vector<double>& values) {
  std::vector<double> v;
  for (double x : values)
    if (!std::isnan(x)) v.push_back(x);
  Aggregate a;
  a.count = v.size();
  if (v.empty()) {
    a.mean = a.median = a.std = a.min = a.max = kNaN;
    return a;
  }
  a.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - a.mean) * (x - a.mean);
  a.std = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
  std::sort(v.begin(), v.end());
  a.min = v.front();
  a.max = v.back();
  std::size_t h = v.size() / 2;
  a.median = v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
  return a;
}

}  // namespace rgmm
