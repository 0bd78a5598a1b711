#include "rgmm/data_model.hpp"

#include "rgmm/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

namespace rgmm {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::optional<double> parse_number(const std::string& cell) {
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (first != last && *first == '+') ++first;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) return std::nullopt;
  return v;
}

}  // namespace

std::string to_string(Sensor s) { return s == Sensor::S1 ? "S1" : "S2"; }
std::string to_string(Statistic s) { return s == Statistic::Median ? "median" : "IQR"; }

std::string ColumnDescriptor::header() const {
  std::string h = fmt::format("{}:{}:{}:{}", to_string(sensor), indicator,
                              to_string(statistic), acquisition_index);
  if (acquisition_date) h += ":" + *acquisition_date;
  return h;
}

ColumnDescriptor ColumnDescriptor::parse(const std::string& text) {
  const auto parts = split(trim(text), ':');
  if (parts.size() != 4 && parts.size() != 5)
    throw ValidationError(fmt::format("malformed column header '{}'", text));
  ColumnDescriptor d;
  if (parts[0] == "S1") {
    d.sensor = Sensor::S1;
  } else if (parts[0] == "S2") {
    d.sensor = Sensor::S2;
  } else {
    throw ValidationError(fmt::format("unknown sensor in header '{}'", text));
  }
  if (parts[1].empty())
    throw ValidationError(fmt::format("empty indicator in header '{}'", text));
  d.indicator = parts[1];
  if (parts[2] == "median") {
    d.statistic = Statistic::Median;
  } else if (parts[2] == "IQR") {
    d.statistic = Statistic::IQR;
  } else {
    throw ValidationError(fmt::format("unknown statistic in header '{}'", text));
  }
  int acq = -1;
  auto [ptr, ec] = std::from_chars(parts[3].data(), parts[3].data() + parts[3].size(), acq);
  if (ec != std::errc() || ptr != parts[3].data() + parts[3].size() || acq < 0)
    throw ValidationError(fmt::format("bad acquisition index in header '{}'", text));
  d.acquisition_index = acq;
  if (parts.size() == 5 && !parts[4].empty()) d.acquisition_date = parts[4];
  return d;
}

bool ColumnDescriptor::same_key(const ColumnDescriptor& o) const {
  return sensor == o.sensor && indicator == o.indicator && statistic == o.statistic &&
         acquisition_index == o.acquisition_index;
}

FeatureMatrix::FeatureMatrix(Eigen::MatrixXd values, BoolMatrix observed,
                             std::vector<ColumnDescriptor> columns,
                             std::vector<std::string> row_ids)
    : values_(std::move(values)),
      observed_(std::move(observed)),
      columns_(std::move(columns)),
      row_ids_(std::move(row_ids)) {
  if (observed_.rows() != values_.rows() || observed_.cols() != values_.cols())
    throw ValidationError("mask shape does not match values");
  if (static_cast<std::size_t>(values_.cols()) != columns_.size())
    throw ValidationError(fmt::format("{} columns but {} descriptors", values_.cols(),
                                      columns_.size()));
  if (static_cast<std::size_t>(values_.rows()) != row_ids_.size())
    throw ValidationError(fmt::format("{} rows but {} row ids", values_.rows(),
                                      row_ids_.size()));

  std::set<std::tuple<int, std::string, int, int>> keys;
  for (const auto& c : columns_) {
    if (c.sensor == Sensor::S1 && c.statistic == Statistic::IQR)
      throw ValidationError(fmt::format("column {}: IQR is not defined for S1", c.header()));
    auto key = std::make_tuple(static_cast<int>(c.sensor), c.indicator,
                               static_cast<int>(c.statistic), c.acquisition_index);
    if (!keys.insert(key).second)
      throw ValidationError(fmt::format("duplicate column {}", c.header()));
  }

  for (Eigen::Index r = 0; r < values_.rows(); ++r) {
    bool any = false;
    for (Eigen::Index c = 0; c < values_.cols(); ++c) {
      if (observed_(r, c)) {
        if (!std::isfinite(values_(r, c)))
          throw ValidationError(fmt::format("row '{}' has a non-finite observed value",
                                            row_ids_[r]));
        any = true;
      } else {
        values_(r, c) = kNaN;
      }
    }
    if (!any && values_.cols() > 0)
      throw ValidationError(fmt::format("row '{}' has no observed entries", row_ids_[r]));
  }
}

FeatureMatrix FeatureMatrix::complete(Eigen::MatrixXd values,
                                      std::vector<ColumnDescriptor> columns,
                                      std::vector<std::string> row_ids) {
  BoolMatrix obs = BoolMatrix::Constant(values.rows(), values.cols(), true);
  return FeatureMatrix(std::move(values), std::move(obs), std::move(columns),
                       std::move(row_ids));
}

std::size_t FeatureMatrix::missing_count() const {
  return static_cast<std::size_t>((!observed_).count());
}

std::vector<int> FeatureMatrix::observed_indices(std::size_t row) const {
  std::vector<int> idx;
  for (Eigen::Index c = 0; c < observed_.cols(); ++c)
    if (observed_(static_cast<Eigen::Index>(row), c)) idx.push_back(static_cast<int>(c));
  return idx;
}

std::vector<int> FeatureMatrix::missing_indices(std::size_t row) const {
  std::vector<int> idx;
  for (Eigen::Index c = 0; c < observed_.cols(); ++c)
    if (!observed_(static_cast<Eigen::Index>(row), c)) idx.push_back(static_cast<int>(c));
  return idx;
}

FeatureMatrix FeatureMatrix::select_columns(const std::vector<int>& keep) const {
  Eigen::MatrixXd v(values_.rows(), static_cast<Eigen::Index>(keep.size()));
  BoolMatrix o(values_.rows(), static_cast<Eigen::Index>(keep.size()));
  std::vector<ColumnDescriptor> cols;
  for (std::size_t j = 0; j < keep.size(); ++j) {
    v.col(static_cast<Eigen::Index>(j)) = values_.col(keep[j]);
    o.col(static_cast<Eigen::Index>(j)) = observed_.col(keep[j]);
    cols.push_back(columns_.at(static_cast<std::size_t>(keep[j])));
  }
  return FeatureMatrix(std::move(v), std::move(o), std::move(cols), row_ids_);
}

FeatureMatrix FeatureMatrix::select_rows(const std::vector<int>& keep) const {
  Eigen::MatrixXd v(static_cast<Eigen::Index>(keep.size()), values_.cols());
  BoolMatrix o(static_cast<Eigen::Index>(keep.size()), values_.cols());
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < keep.size(); ++i) {
    v.row(static_cast<Eigen::Index>(i)) = values_.row(keep[i]);
    o.row(static_cast<Eigen::Index>(i)) = observed_.row(keep[i]);
    ids.push_back(row_ids_.at(static_cast<std::size_t>(keep[i])));
  }
  return FeatureMatrix(std::move(v), std::move(o), columns_, std::move(ids));
}

FeatureMatrix FeatureMatrix::with_values(Eigen::MatrixXd values, BoolMatrix observed) const {
  return FeatureMatrix(std::move(values), std::move(observed), columns_, row_ids_);
}

FeatureMatrix parse_matrix(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("empty matrix file");
  auto header = split(trim(line), ',');
  if (header.empty() || trim(header[0]) != "parcel_id")
    throw ValidationError("malformed header: first field must be 'parcel_id'");
  std::vector<ColumnDescriptor> cols;
  for (std::size_t j = 1; j < header.size(); ++j) cols.push_back(ColumnDescriptor::parse(header[j]));

  std::vector<std::vector<double>> rows;
  std::vector<std::vector<bool>> masks;
  std::vector<std::string> ids;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto cells = split(line, ',');
    if (cells.size() != cols.size() + 1)
      throw ValidationError(fmt::format("line {}: expected {} fields, found {}", line_no,
                                        cols.size() + 1, cells.size()));
    std::vector<double> vals(cols.size(), kNaN);
    std::vector<bool> mask(cols.size(), false);
    bool any = false;
    for (std::size_t j = 0; j < cols.size(); ++j) {
      const std::string cell = trim(cells[j + 1]);
      if (cell.empty()) continue;
      auto v = parse_number(cell);
      if (!v)
        throw ValidationError(fmt::format("line {}: non-numeric cell '{}' in column {}",
                                          line_no, cell, cols[j].header()));
      vals[j] = *v;
      mask[j] = true;
      any = true;
    }
    const std::string id = trim(cells[0]);
    if (!any) throw ValidationError(fmt::format("row '{}' has no observed entries", id));
    ids.push_back(id);
    rows.push_back(std::move(vals));
    masks.push_back(std::move(mask));
  }

  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto d = static_cast<Eigen::Index>(cols.size());
  Eigen::MatrixXd values(n, d);
  BoolMatrix observed(n, d);
  for (Eigen::Index r = 0; r < n; ++r)
    for (Eigen::Index c = 0; c < d; ++c) {
      values(r, c) = rows[r][c];
      observed(r, c) = masks[r][c];
    }
  return FeatureMatrix(std::move(values), std::move(observed), std::move(cols), std::move(ids));
}

FeatureMatrix load_matrix(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(fmt::format("cannot open '{}'", path.string()));
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_matrix(buf.str());
}

std::string format_matrix(const FeatureMatrix& m) {
  std::string out = "parcel_id";
  for (const auto& c : m.columns()) {
    out += ',';
    out += c.header();
  }
  out += '\n';
  for (std::size_t r = 0; r < m.rows(); ++r) {
    out += m.row_ids()[r];
    for (std::size_t c = 0; c < m.cols(); ++c) {
      out += ',';
      if (m.is_observed(r, c)) out += fmt::format("{}", m.values()(r, c));
    }
    out += '\n';
  }
  return out;
}

void save_matrix(const FeatureMatrix& m, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError(fmt::format("cannot write '{}'", path.string()));
  out << format_matrix(m);
}

ColumnCounts column_counts(const std::vector<ColumnDescriptor>& columns) {
  ColumnCounts counts;
  for (Sensor sensor : {Sensor::S1, Sensor::S2}) {
    std::set<int> acqs;
    std::set<std::string> indicators;
    std::set<int> stats;
    std::set<std::tuple<int, std::string, int>> present;
    for (const auto& c : columns) {
      if (c.sensor != sensor) continue;
      acqs.insert(c.acquisition_index);
      indicators.insert(c.indicator);
      stats.insert(static_cast<int>(c.statistic));
      present.emplace(c.acquisition_index, c.indicator, static_cast<int>(c.statistic));
    }
    // Every acquisition must carry every (indicator, statistic) pair seen for the sensor.
    std::set<std::pair<std::string, int>> combos;
    for (const auto& [a, ind, st] : present) combos.emplace(ind, st);
    if (combos.size() != indicators.size() * stats.size())
      throw ValidationError(fmt::format("ragged grid for {}: indicator/statistic pairs "
                                        "are not a full product",
                                        to_string(sensor)));
    for (int a : acqs)
      for (const auto& [ind, st] : combos)
        if (!present.count({a, ind, st}))
          throw ValidationError(fmt::format(
              "ragged grid: {} acquisition {} lacks column {}:{}", to_string(sensor), a, ind,
              to_string(static_cast<Statistic>(st))));
    const int ni = static_cast<int>(acqs.size());
    const int nf = static_cast<int>(indicators.size());
    const int ns = static_cast<int>(stats.size());
    if (sensor == Sensor::S1) {
      counts.n1_images = ni;
      counts.n1_features = nf;
      counts.n1_stats = ns;
    } else {
      counts.n2_images = ni;
      counts.n2_features = nf;
      counts.n2_stats = ns;
    }
  }
  counts.n_columns = counts.n1_images * counts.n1_features * counts.n1_stats +
                     counts.n2_images * counts.n2_features * counts.n2_stats;
  return counts;
}

ColumnCounts column_counts(const FeatureMatrix& m) { return column_counts(m.columns()); }

std::vector<int> acquisitions(const FeatureMatrix& m, Sensor sensor) {
  std::set<int> acqs;
  for (const auto& c : m.columns())
    if (c.sensor == sensor) acqs.insert(c.acquisition_index);
  return {acqs.begin(), acqs.end()};
}

double ScalingTransform::scale(std::size_t col, double v) const {
  if (zero_span[col]) return 0.5;
  return (v - min[col]) / (max[col] - min[col]);
}

double ScalingTransform::unscale(std::size_t col, double v) const {
  if (zero_span[col]) return min[col];
  return v * (max[col] - min[col]) + min[col];
}

ScalingTransform fit_scaling(const FeatureMatrix& m) {
  ScalingTransform t;
  t.min.resize(m.cols());
  t.max.resize(m.cols());
  t.zero_span.resize(m.cols());
  for (std::size_t c = 0; c < m.cols(); ++c) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    std::size_t n = 0;
    for (std::size_t r = 0; r < m.rows(); ++r) {
      if (!m.is_observed(r, c)) continue;
      lo = std::min(lo, m.values()(r, c));
      hi = std::max(hi, m.values()(r, c));
      ++n;
    }
    if (n < 2)
      throw ValidationError(fmt::format("column {} has fewer than 2 observed entries",
                                        m.columns()[c].header()));
    t.min[c] = lo;
    t.max[c] = hi;
    t.zero_span[c] = !(hi > lo);
  }
  return t;
}

FeatureMatrix apply_scaling(const FeatureMatrix& m, const ScalingTransform& t) {
  if (t.min.size() != m.cols()) throw ValidationError("scaling transform width mismatch");
  Eigen::MatrixXd v = m.values();
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c)
      if (m.is_observed(r, c)) v(r, c) = t.scale(c, v(r, c));
  return m.with_values(std::move(v), m.observed());
}

FeatureMatrix invert_scaling(const FeatureMatrix& m, const ScalingTransform& t) {
  if (t.min.size() != m.cols()) throw ValidationError("scaling transform width mismatch");
  Eigen::MatrixXd v = m.values();
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c)
      if (m.is_observed(r, c)) v(r, c) = t.unscale(c, v(r, c));
  return m.with_values(std::move(v), m.observed());
}

}  // namespace rgmm
