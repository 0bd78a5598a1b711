#include "rgmm/masking.hpp"

#include "rgmm/errors.hpp"
#include "rgmm/random.hpp"
#include "rgmm/synthetic.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <tuple>

namespace rgmm {

void MaskingScenario::validate() const {
  if (!(pct_cloudy_images >= 0.0 && pct_cloudy_images <= 1.0))
    throw ValidationError("pct_cloudy_images must lie in [0, 1]");
  if (!(pct_affected_parcels >= 0.0 && pct_affected_parcels <= 1.0))
    throw ValidationError("pct_affected_parcels must lie in [0, 1]");
}

MaskedDataset apply_scenario(const FeatureMatrix& m, const MaskingScenario& s) {
  s.validate();
  std::vector<int> acqs = acquisitions(m, Sensor::S2);
  const int n = static_cast<int>(m.rows());
  Rng rng = make_rng(s.seed, 10);

  MaskedDataset out;
  if (s.cloudy_acquisitions) {
    out.cloudy_acquisitions = *s.cloudy_acquisitions;
    std::sort(out.cloudy_acquisitions.begin(), out.cloudy_acquisitions.end());
    if (std::adjacent_find(out.cloudy_acquisitions.begin(), out.cloudy_acquisitions.end()) !=
        out.cloudy_acquisitions.end())
      throw ValidationError("cloudy acquisition list has duplicates");
    for (int a : out.cloudy_acquisitions)
      if (!std::binary_search(acqs.begin(), acqs.end(), a))
        throw ValidationError(fmt::format("unknown S2 acquisition {}", a));
  } else {
    int n_images = round_count(s.pct_cloudy_images, static_cast<int>(acqs.size()));
    out.zero_mask_warning = s.pct_cloudy_images > 0.0 && n_images == 0;
    std::vector<int> pool = acqs;
    std::shuffle(pool.begin(), pool.end(), rng);
    out.cloudy_acquisitions.assign(pool.begin(), pool.begin() + n_images);
    std::sort(out.cloudy_acquisitions.begin(), out.cloudy_acquisitions.end());
  }

  BoolMatrix observed = m.observed();
  const int n_parcels = round_count(s.pct_affected_parcels, n);
  std::vector<int> rows(static_cast<std::size_t>(n));
  for (int a : out.cloudy_acquisitions) {
    std::vector<int> cols = m.columns_where(
        [a](const ColumnDescriptor& c) { return c.sensor == Sensor::S2 && c.acquisition_index == a; });
    std::iota(rows.begin(), rows.end(), 0);
    std::shuffle(rows.begin(), rows.end(), rng);
    for (int i = 0; i < n_parcels; ++i)
      for (int c : cols) observed(rows[i], c) = false;
  }

  for (int c = 0; c < static_cast<int>(m.cols()); ++c)
    for (int r = 0; r < n; ++r)
      if (m.is_observed(r, c) && !observed(r, c)) out.truth.push_back({r, c, m.values()(r, c)});
  std::sort(out.truth.begin(), out.truth.end(),
            [](const TruthEntry& x, const TruthEntry& y) { return std::tie(x.row, x.col) < std::tie(y.row, y.col); });
  out.masked = m.with_values(m.values(), std::move(observed));
  return out;
}

std::vector<MaskedDataset> day_by_day_scenarios(const FeatureMatrix& m, double pct_affected, std::uint64_t seed) {
  if (m.missing_count() != 0) throw ValidationError("day-by-day scenarios need a fully observed matrix");
  std::vector<MaskedDataset> out;
  std::vector<int> acqs = acquisitions(m, Sensor::S2);
  for (std::size_t j = 0; j < acqs.size(); ++j) {
    MaskingScenario s;
    s.cloudy_acquisitions = std::vector<int>{acqs[j]};
    s.pct_affected_parcels = pct_affected;
    s.seed = derive_seed(seed, {j});
    out.push_back(apply_scenario(m, s));
  }
  return out;
}

FeatureMatrix restore(const FeatureMatrix& masked, const std::vector<TruthEntry>& truth) {
  Eigen::MatrixXd values = masked.values();
  BoolMatrix observed = masked.observed();
  for (const auto& t : truth) {
    if (t.row < 0 || t.col < 0 || t.row >= values.rows() || t.col >= values.cols())
      throw ValidationError("truth entry outside the matrix");
    if (observed(t.row, t.col)) throw ValidationError("truth entry refers to an observed cell");
    values(t.row, t.col) = t.value;
    observed(t.row, t.col) = true;
  }
  return masked.with_values(std::move(values), std::move(observed));
}

std::string format_truth(const FeatureMatrix& m, const std::vector<TruthEntry>& truth) {
  std::string out = "parcel_id,column,value\n";
  for (const auto& t : truth)
    out += fmt::format("{},{},{}\n", m.row_ids().at(t.row), m.columns().at(t.col).header(), t.value);
  return out;
}

std::vector<TruthEntry> parse_truth(const std::string& text, const FeatureMatrix& m) {
  std::map<std::string, int> row_of;
  for (std::size_t i = 0; i < m.rows(); ++i) row_of[m.row_ids()[i]] = static_cast<int>(i);
  std::map<std::string, int> col_of;
  for (std::size_t c = 0; c < m.cols(); ++c) col_of[m.columns()[c].header()] = static_cast<int>(c);

  std::istringstream in(text);
  std::string line;
  std::vector<TruthEntry> out;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line_no == 1) {
      if (line != "parcel_id,column,value") throw ValidationError("truth file: unexpected header");
      continue;
    }
    auto c1 = line.find(',');
    auto c2 = line.rfind(',');
    if (c1 == std::string::npos || c2 == c1) throw ValidationError(fmt::format("truth file line {}: malformed", line_no));
    std::string id = line.substr(0, c1), col = line.substr(c1 + 1, c2 - c1 - 1), val = line.substr(c2 + 1);
    auto r = row_of.find(id);
    auto c = col_of.find(col);
    if (r == row_of.end() || c == col_of.end())
      throw ValidationError(fmt::format("truth file line {}: unknown parcel or column", line_no));
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(val.data(), val.data() + val.size(), v);
    if (ec != std::errc() || ptr != val.data() + val.size())
      throw ValidationError(fmt::format("truth file line {}: bad value", line_no));
    out.push_back({r->second, c->second, v});
  }
  return out;
}

void save_truth(const FeatureMatrix& m, const std::vector<TruthEntry>& truth, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ValidationError(fmt::format("cannot write '{}'", path.string()));
  f << format_truth(m, truth);
}

std::vector<TruthEntry> load_truth(const std::filesystem::path& path, const FeatureMatrix& m) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ValidationError(fmt::format("cannot read '{}'", path.string()));
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_truth(ss.str(), m);
}

}  // namespace rgmm
