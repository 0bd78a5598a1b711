#include "rgmm/synthetic.hpp"

#include "rgmm/errors.hpp"
#include "rgmm/random.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

namespace rgmm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kIqrFloor = 1e-3;

struct AffineMap {
  const char* name;
  double offset;
  double gain;
  double iqr_scale;
  double loading;
  double lower;
  double upper;
};

// Other S2 indicators are affine in NDVI for the built-in crops.
constexpr AffineMap kIndicatorMaps[] = {
    {"NDVI", 0.0, 1.0, 1.0, 1.0, -1.0, 1.0},
    {"NDWI_SWIR", -0.25, 0.9, 0.9, 0.9, -1.0, 1.0},
    {"NDWI_GREEN", 0.05, -0.85, 0.7, -0.8, -1.0, 1.0},
    {"GRVI", -0.15, 0.6, 0.6, 0.6, -1.0, 1.0},
    {"MCARI_OSAVI", 0.02, 0.3, 0.4, 0.7, 0.0, kInf},
};

PhenologyTemplate build_template(const std::string& crop, const Curve& ndvi) {
  PhenologyTemplate t;
  t.crop_type = crop;
  for (const auto& m : kIndicatorMaps) {
    IndicatorTemplate ind;
    ind.name = m.name;
    ind.vigor_loading = m.loading;
    ind.lower = m.lower;
    ind.upper = m.upper;
    for (const auto& p : ndvi) {
      ind.median.push_back({p.day, m.offset + m.gain * p.value});
      ind.iqr.push_back({p.day, m.iqr_scale * (0.08 + 0.08 * (1.0 - p.value))});
    }
    t.indicators.push_back(std::move(ind));
  }
  return t;
}

void check_curve(const Curve& c, const std::string& what) {
  if (c.empty()) throw ValidationError(fmt::format("{}: empty curve", what));
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (!std::isfinite(c[i].day) || !std::isfinite(c[i].value))
      throw ValidationError(fmt::format("{}: non-finite control point", what));
    if (i > 0 && c[i].day <= c[i - 1].day)
      throw ValidationError(fmt::format("{}: control days must increase", what));
  }
}

void check_template(const PhenologyTemplate& t, const std::vector<S1Link>& links) {
  if (t.indicators.empty())
    throw ValidationError(fmt::format("template '{}' has no indicators", t.crop_type));
  for (const auto& ind : t.indicators) {
    check_curve(ind.median, t.crop_type + "/" + ind.name + " median");
    check_curve(ind.iqr, t.crop_type + "/" + ind.name + " IQR");
    if (!(ind.lower < ind.upper))
      throw ValidationError(fmt::format("{}/{}: empty value range", t.crop_type, ind.name));
  }
  for (const auto& l : links) {
    auto it = std::find_if(t.indicators.begin(), t.indicators.end(),
                           [&](const IndicatorTemplate& i) { return i.name == l.indicator; });
    if (it == t.indicators.end())
      throw ValidationError(fmt::format("template '{}' lacks S1 driver '{}'", t.crop_type, l.indicator));
  }
}

std::string iso_date(const std::string& origin, double day) {
  int y = 0;
  unsigned m = 0, d = 0;
  if (std::sscanf(origin.c_str(), "%d-%u-%u", &y, &m, &d) != 3)
    throw ValidationError(fmt::format("bad season origin '{}'", origin));
  std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
  if (!ymd.ok()) throw ValidationError(fmt::format("bad season origin '{}'", origin));
  std::chrono::sys_days sd = std::chrono::sys_days{ymd} + std::chrono::days{static_cast<int>(std::lround(day))};
  std::chrono::year_month_day out{sd};
  return fmt::format("{:04d}-{:02d}-{:02d}", static_cast<int>(out.year()), static_cast<unsigned>(out.month()),
                     static_cast<unsigned>(out.day()));
}

std::vector<double> spaced(double first, double last, int n) {
  std::vector<double> out(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) out[j] = n == 1 ? first : first + (last - first) * j / (n - 1);
  return out;
}

struct Layout {
  std::vector<double> s2_days;
  std::vector<double> s1_days;
  std::vector<ColumnDescriptor> columns;
  std::vector<double> local_centers;
};

Layout make_layout(const SyntheticConfig& cfg) {
  Layout l;
  l.s2_days = spaced(cfg.season_first_day, cfg.season_last_day, cfg.n_s2_acquisitions);
  l.s1_days = spaced(cfg.season_first_day - 5.0, cfg.season_last_day + 5.0, cfg.n_s1_acquisitions);
  for (int j = 0; j < cfg.n_s2_acquisitions; ++j) {
    std::string date = iso_date(cfg.season_origin, l.s2_days[j]);
    for (const auto& ind : cfg.crop.indicators)
      for (Statistic st : {Statistic::Median, Statistic::IQR})
        l.columns.push_back({Sensor::S2, ind.name, st, j, date});
  }
  for (int j = 0; j < cfg.n_s1_acquisitions; ++j) {
    std::string date = iso_date(cfg.season_origin, l.s1_days[j]);
    for (const auto& link : cfg.s1_links) {
      l.columns.push_back({Sensor::S1, link.name, Statistic::Median, j, date});
    }
  }
  double lo = std::min(l.s1_days.front(), l.s2_days.front()) - cfg.local_spacing_days;
  double hi = std::max(l.s1_days.back(), l.s2_days.back()) + cfg.local_spacing_days;
  for (double c = lo; c <= hi + 1e-9; c += cfg.local_spacing_days) l.local_centers.push_back(c);
  return l;
}

struct RowLatent {
  double shift = 0.0;
  double amplitude = 1.0;
  double delay = 0.0;
  double vigor = 0.0;
  double slope = 0.0;
  double heterogeneity = 0.0;
  std::vector<double> local;
  int spike_start = -1;
};

class RowGenerator {
 public:
  RowGenerator(const SyntheticConfig& cfg, const Layout& layout) : cfg_(cfg), layout_(layout) {
    mid_ = 0.5 * (cfg.season_first_day + cfg.season_last_day);
    half_ = std::max(0.5 * (cfg.season_last_day - cfg.season_first_day), 1.0);
  }

  double tau(double day) const { return (day - mid_) / half_; }

  double local_value(const RowLatent& z, double day) const {
    if (z.local.empty()) return 0.0;
    double num = 0.0, den = 0.0;
    for (std::size_t b = 0; b < layout_.local_centers.size(); ++b) {
      double u = (day - layout_.local_centers[b]) / cfg_.local_width_days;
      double phi = std::exp(-0.5 * u * u);
      num += z.local[b] * phi;
      den += phi * phi;
    }
    return den > 0.0 ? num / std::sqrt(den) : 0.0;
  }

  double effective_day(const RowLatent& z, double day) const {
    double ramp = std::clamp((day - cfg_.season_first_day) / half_, 0.0, 1.0);
    return day - z.shift - z.delay * ramp;
  }

  // Shared parcel deviation of a median at `day`, before the indicator loading.
  double median_deviation(const RowLatent& z, double day) const {
    return cfg_.noise_scale *
           (cfg_.vigor_sd * z.vigor + cfg_.slope_sd * z.slope * tau(day) + cfg_.local_sd * local_value(z, day));
  }

  double s1_noise_sd(double day) const {
    double t = tau(day);
    double var = cfg_.vigor_sd * cfg_.vigor_sd + cfg_.slope_sd * cfg_.slope_sd * t * t +
                 cfg_.local_sd * cfg_.local_sd;
    double rho = cfg_.s1_correlation;
    return cfg_.noise_scale * std::sqrt(var) * std::sqrt(1.0 / (rho * rho) - 1.0);
  }

  /// Entry noise draws come from `rng` only when the noise scale is positive.
  void fill(const PhenologyTemplate& tmpl, const RowLatent& z, Rng& rng, Eigen::RowVectorXd& out) const {
    std::normal_distribution<double> normal(0.0, 1.0);
    const bool noisy = cfg_.noise_scale > 0.0;
    const double sigma = cfg_.noise_scale;
    Eigen::Index col = 0;
    for (int j = 0; j < cfg_.n_s2_acquisitions; ++j) {
      double day = layout_.s2_days[j];
      double eday = effective_day(z, day);
      double dev = median_deviation(z, day);
      double mult = cfg_.s2_noise_multipliers.empty() ? 1.0 : cfg_.s2_noise_multipliers[j];
      bool spiked = z.spike_start >= 0 && j >= z.spike_start && j < z.spike_start + cfg_.spike_width;
      for (const auto& ind : tmpl.indicators) {
        double med = z.amplitude * evaluate_curve(ind.median, eday) + ind.vigor_loading * dev;
        if (noisy) med += sigma * mult * std::abs(ind.vigor_loading) * cfg_.entry_noise_sd * normal(rng);
        out(col++) = std::clamp(med, ind.lower, ind.upper);

        double rel = sigma * cfg_.iqr_heterogeneity_sd * z.heterogeneity;
        if (noisy) rel += sigma * mult * cfg_.iqr_noise_sd * normal(rng);
        double iqr = evaluate_curve(ind.iqr, eday) * (1.0 + rel);
        if (spiked) iqr += cfg_.heterogeneity_spike;
        out(col++) = std::max(iqr, kIqrFloor);
      }
    }
    for (int j = 0; j < cfg_.n_s1_acquisitions; ++j) {
      double day = layout_.s1_days[j];
      double eday = effective_day(z, day);
      double dev = median_deviation(z, day);
      double link_sd = s1_noise_sd(day);
      for (const auto& link : cfg_.s1_links) {
        const auto& driver = *std::find_if(tmpl.indicators.begin(), tmpl.indicators.end(),
                                           [&](const IndicatorTemplate& i) { return i.name == link.indicator; });
        double x = z.amplitude * evaluate_curve(driver.median, eday) + driver.vigor_loading * dev;
        double v = link.offset + link.gain * x;
        if (noisy) v += link.gain * link_sd * normal(rng);
        out(col++) = v;
      }
    }
  }

  RowLatent draw(Rng& rng) const {
    std::normal_distribution<double> normal(0.0, 1.0);
    RowLatent z;
    z.vigor = normal(rng);
    z.slope = normal(rng);
    z.heterogeneity = normal(rng);
    z.local.resize(layout_.local_centers.size());
    for (double& a : z.local) a = normal(rng);
    return z;
  }

  double cluster_shift(int c) const {
    return (c - (cfg_.n_latent_clusters - 1) / 2.0) * cfg_.cluster_shift_days;
  }
  double cluster_amplitude(int c) const {
    return 1.0 + (c - (cfg_.n_latent_clusters - 1) / 2.0) * cfg_.cluster_amplitude_step;
  }

 private:
  const SyntheticConfig& cfg_;
  const Layout& layout_;
  double mid_ = 0.0;
  double half_ = 1.0;
};

std::vector<std::string> make_ids(const std::string& prefix, std::size_t start, std::size_t n) {
  std::vector<std::string> ids;
  ids.reserve(n);
  for (std::size_t i = 0; i < n; ++i) ids.push_back(fmt::format("{}{:05d}", prefix, start + i));
  return ids;
}

}  // namespace

PhenologyTemplate template_from_ndvi(const std::string& crop_type, const Curve& ndvi) {
  check_curve(ndvi, crop_type + "/NDVI");
  return build_template(crop_type, ndvi);
}

double evaluate_curve(const Curve& c, double day) {
  if (c.empty()) throw ValidationError("empty curve");
  if (day <= c.front().day) return c.front().value;
  if (day >= c.back().day) return c.back().value;
  auto hi = std::upper_bound(c.begin(), c.end(), day,
                             [](double d, const ControlPoint& p) { return d < p.day; });
  auto lo = hi - 1;
  double t = (day - lo->day) / (hi->day - lo->day);
  return lo->value + t * (hi->value - lo->value);
}

std::string to_string(RowLabel l) {
  switch (l) {
    case RowLabel::Normal: return "normal";
    case RowLabel::GrowthDelay: return "growth_delay";
    case RowLabel::HeterogeneitySpike: return "heterogeneity_spike";
    case RowLabel::Contaminant: return "contaminant";
  }
  return "normal";
}

RowLabel parse_row_label(const std::string& s) {
  for (RowLabel l : {RowLabel::Normal, RowLabel::GrowthDelay, RowLabel::HeterogeneitySpike, RowLabel::Contaminant})
    if (to_string(l) == s) return l;
  throw ValidationError(fmt::format("unknown row label '{}'", s));
}

PhenologyTemplate SyntheticConfig::default_rapeseed_template() {
  return build_template("rapeseed", {{0, 0.25}, {40, 0.6}, {80, 0.82}, {150, 0.72},
                                    {200, 0.86}, {235, 0.62}, {260, 0.75}, {300, 0.3}});
}

std::vector<PhenologyTemplate> SyntheticConfig::default_contaminant_templates() {
  return {
      build_template("wheat", {{0, 0.2}, {60, 0.35}, {120, 0.45}, {180, 0.8}, {230, 0.85}, {270, 0.5}, {300, 0.25}}),
      build_template("maize", {{0, 0.15}, {180, 0.18}, {220, 0.5}, {260, 0.85}, {300, 0.7}}),
      build_template("sunflower", {{0, 0.15}, {200, 0.2}, {240, 0.7}, {280, 0.8}, {300, 0.6}}),
      build_template("barley", {{0, 0.2}, {50, 0.45}, {110, 0.5}, {170, 0.85}, {220, 0.75}, {250, 0.35}, {300, 0.2}}),
      build_template("sugar_beet", {{0, 0.15}, {220, 0.2}, {260, 0.6}, {300, 0.85}}),
  };
}

std::vector<S1Link> SyntheticConfig::default_s1_links() {
  return {{"VV", "NDVI", -14.0, 6.0}, {"VH", "NDVI", -22.0, 7.0}};
}

void SyntheticConfig::validate() const {
  auto frac = [](double f, const char* name) {
    if (!(f >= 0.0 && f <= 1.0)) throw ValidationError(fmt::format("{} must lie in [0, 1]", name));
  };
  auto count = [](long long n, const char* name) {
    if (n < 1) throw ValidationError(fmt::format("{} must be at least 1", name));
  };
  count(n_parcels, "n_parcels");
  count(n_s2_acquisitions, "n_s2_acquisitions");
  count(n_s1_acquisitions, "n_s1_acquisitions");
  count(n_latent_clusters, "n_latent_clusters");
  count(spike_width, "spike_width");
  frac(anomaly_fraction, "anomaly_fraction");
  frac(contamination_fraction, "contamination_fraction");
  if (spike_width > n_s2_acquisitions) throw ValidationError("spike_width exceeds the S2 acquisition count");
  if (!(season_last_day >= season_first_day)) throw ValidationError("season ends before it starts");
  if (!(noise_scale >= 0.0)) throw ValidationError("noise_scale must be nonnegative");
  for (double v : {vigor_sd, slope_sd, local_sd, entry_noise_sd, iqr_heterogeneity_sd, iqr_noise_sd,
                   growth_delay_days, heterogeneity_spike, cluster_shift_days, contaminant_shift_days})
    if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError("noise and anomaly parameters must be nonnegative");
  if (!(local_spacing_days > 0.0) || !(local_width_days > 0.0))
    throw ValidationError("local spacing and width must be positive");
  if (!(s1_correlation > 0.0 && s1_correlation <= 1.0)) throw ValidationError("s1_correlation must lie in (0, 1]");
  if (!s2_noise_multipliers.empty()) {
    if (static_cast<int>(s2_noise_multipliers.size()) != n_s2_acquisitions)
      throw ValidationError("s2_noise_multipliers must have one entry per S2 acquisition");
    for (double m : s2_noise_multipliers)
      if (!(m >= 0.0)) throw ValidationError("noise multipliers must be nonnegative");
  }
  if (anomaly_fraction > 0.0) {
    if (anomaly_kinds.empty()) throw ValidationError("anomaly_fraction > 0 needs at least one anomaly kind");
    for (RowLabel k : anomaly_kinds)
      if (k != RowLabel::GrowthDelay && k != RowLabel::HeterogeneitySpike)
        throw ValidationError("anomaly kinds are growth_delay and heterogeneity_spike");
  }
  if (s1_links.empty()) throw ValidationError("at least one S1 link is required");
  for (const auto& l : s1_links)
    if (l.name.empty()) throw ValidationError("S1 links need a column name");
  check_template(crop, s1_links);
  if (contamination_fraction > 0.0 && contaminants.empty())
    throw ValidationError("contamination requested but no contaminant templates given");
  for (const auto& t : contaminants) {
    check_template(t, s1_links);
    if (t.indicators.size() != crop.indicators.size())
      throw ValidationError(fmt::format("template '{}' indicator set differs from the crop", t.crop_type));
    for (std::size_t i = 0; i < t.indicators.size(); ++i)
      if (t.indicators[i].name != crop.indicators[i].name)
        throw ValidationError(fmt::format("template '{}' indicator set differs from the crop", t.crop_type));
  }
  iso_date(season_origin, 0.0);
}

int round_count(double fraction, int total) {
  return static_cast<int>(std::floor(fraction * total + 0.5 + 1e-9));
}

std::vector<int> LabeledDataset::rows_with(RowLabel label) const {
  std::vector<int> out;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == label) out.push_back(static_cast<int>(i));
  return out;
}

std::vector<int> LabeledDataset::rows_without(RowLabel label) const {
  std::vector<int> out;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] != label) out.push_back(static_cast<int>(i));
  return out;
}

Eigen::VectorXd cluster_template(const SyntheticConfig& cfg, int cluster) {
  cfg.validate();
  if (cluster < 0 || cluster >= cfg.n_latent_clusters) throw ValidationError("cluster index out of range");
  Layout layout = make_layout(cfg);
  SyntheticConfig quiet = cfg;
  quiet.noise_scale = 0.0;
  RowGenerator gen(quiet, layout);
  RowLatent z;
  z.shift = gen.cluster_shift(cluster);
  z.amplitude = gen.cluster_amplitude(cluster);
  Rng unused(0);
  Eigen::RowVectorXd row(static_cast<Eigen::Index>(layout.columns.size()));
  gen.fill(cfg.crop, z, unused, row);
  return row.transpose();
}

LabeledDataset generate(const SyntheticConfig& cfg) {
  cfg.validate();
  Layout layout = make_layout(cfg);
  RowGenerator gen(cfg, layout);
  const int n = cfg.n_parcels;
  const auto d = static_cast<Eigen::Index>(layout.columns.size());

  Rng assign_rng = make_rng(cfg.seed, 1);
  std::vector<int> cluster(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) cluster[i] = i % cfg.n_latent_clusters;
  std::shuffle(cluster.begin(), cluster.end(), assign_rng);

  std::vector<RowLabel> labels(static_cast<std::size_t>(n), RowLabel::Normal);
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), assign_rng);
  int n_anomalies = round_count(cfg.anomaly_fraction, n);
  for (int a = 0; a < n_anomalies; ++a)
    labels[order[a]] = cfg.anomaly_kinds[static_cast<std::size_t>(a) % cfg.anomaly_kinds.size()];

  Rng rng = make_rng(cfg.seed, 2);
  std::uniform_int_distribution<int> spike_pos(0, cfg.n_s2_acquisitions - cfg.spike_width);
  Eigen::MatrixXd values(n, d);
  Eigen::RowVectorXd row(d);
  for (int i = 0; i < n; ++i) {
    RowLatent z = gen.draw(rng);
    z.shift = gen.cluster_shift(cluster[i]);
    z.amplitude = gen.cluster_amplitude(cluster[i]);
    if (labels[i] == RowLabel::GrowthDelay) z.delay = cfg.growth_delay_days;
    if (labels[i] == RowLabel::HeterogeneitySpike) z.spike_start = spike_pos(rng);
    gen.fill(cfg.crop, z, rng, row);
    values.row(i) = row;
  }

  LabeledDataset out{FeatureMatrix::complete(std::move(values), layout.columns, make_ids("p", 0, n)),
                     std::move(labels),
                     std::move(cluster),
                     cfg,
                     layout.s2_days,
                     layout.s1_days};
  if (cfg.contamination_fraction > 0.0)
    out = inject_contamination(out, cfg.contamination_fraction, derive_seed(cfg.seed, {3}));
  return out;
}

LabeledDataset inject_contamination(const LabeledDataset& d, double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction <= 0.5)) throw ValidationError("contamination fraction must lie in [0, 0.5]");
  const int n0 = static_cast<int>(d.matrix.rows());
  const int extra = round_count(fraction, n0);
  if (extra == 0) return d;
  const SyntheticConfig& cfg = d.config;
  if (cfg.contaminants.empty()) throw ValidationError("no contaminant templates configured");
  Layout layout = make_layout(cfg);
  if (layout.columns.size() != d.matrix.cols()) throw ValidationError("dataset layout does not match its config");
  RowGenerator gen(cfg, layout);

  Rng rng = make_rng(seed, 4);
  std::uniform_int_distribution<std::size_t> pick(0, cfg.contaminants.size() - 1);
  std::uniform_real_distribution<double> shift(-cfg.contaminant_shift_days, cfg.contaminant_shift_days);
  std::uniform_real_distribution<double> amp(0.8, 1.15);

  Eigen::MatrixXd values(n0 + extra, d.matrix.cols());
  values.topRows(n0) = d.matrix.values();
  Eigen::RowVectorXd row(d.matrix.cols());
  for (int i = 0; i < extra; ++i) {
    const PhenologyTemplate& tmpl = cfg.contaminants[pick(rng)];
    RowLatent z = gen.draw(rng);
    z.shift = shift(rng);
    z.amplitude = amp(rng);
    gen.fill(tmpl, z, rng, row);
    values.row(n0 + i) = row;
  }

  std::vector<std::string> ids = d.matrix.row_ids();
  std::size_t existing = static_cast<std::size_t>(
      std::count_if(d.labels.begin(), d.labels.end(), [](RowLabel l) { return l == RowLabel::Contaminant; }));
  for (auto& id : make_ids("c", existing, static_cast<std::size_t>(extra))) ids.push_back(id);

  BoolMatrix observed = BoolMatrix::Constant(values.rows(), values.cols(), true);
  observed.topRows(n0) = d.matrix.observed();
  LabeledDataset out = d;
  out.matrix = FeatureMatrix(std::move(values), std::move(observed), d.matrix.columns(), std::move(ids));
  out.labels.insert(out.labels.end(), static_cast<std::size_t>(extra), RowLabel::Contaminant);
  out.cluster.insert(out.cluster.end(), static_cast<std::size_t>(extra), -1);
  return out;
}

std::string format_labels(const LabeledDataset& d) {
  std::string out = "parcel_id,label,cluster\n";
  for (std::size_t i = 0; i < d.labels.size(); ++i)
    out += fmt::format("{},{},{}\n", d.matrix.row_ids()[i], to_string(d.labels[i]), d.cluster[i]);
  return out;
}

}  // namespace rgmm
