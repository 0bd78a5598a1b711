#include "rgmm/config.hpp"

#include "rgmm/errors.hpp"

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace rgmm {

namespace {

template <typename T>
T as(const YAML::Node& n, const std::string& key) {
  try {
    return n.as<T>();
  } catch (const YAML::Exception&) {
    throw ValidationError(fmt::format("config key '{}' has the wrong type", key));
  }
}

void require_map(const YAML::Node& n, const std::string& where) {
  if (!n.IsMap()) throw ValidationError(fmt::format("'{}' must be a mapping", where));
}

/// Dispatches every key of a mapping to a handler, rejecting unknown keys.
void for_each_key(const YAML::Node& n, const std::string& where,
                  const std::map<std::string, std::function<void(const YAML::Node&)>>& handlers) {
  require_map(n, where);
  for (const auto& kv : n) {
    auto key = kv.first.as<std::string>();
    auto it = handlers.find(key);
    if (it == handlers.end()) throw ValidationError(fmt::format("unknown key '{}' in {}", key, where));
    it->second(kv.second);
  }
}

Curve parse_curve(const YAML::Node& n, const std::string& where) {
  if (!n.IsSequence()) throw ValidationError(fmt::format("{} must be a list of [day, value] pairs", where));
  Curve c;
  for (const auto& p : n) {
    if (!p.IsSequence() || p.size() != 2)
      throw ValidationError(fmt::format("{} must be a list of [day, value] pairs", where));
    c.push_back({as<double>(p[0], where), as<double>(p[1], where)});
  }
  return c;
}

template <typename T>
std::vector<T> parse_list(const YAML::Node& n, const std::string& key) {
  if (!n.IsSequence()) throw ValidationError(fmt::format("'{}' must be a list", key));
  std::vector<T> out;
  for (const auto& v : n) out.push_back(as<T>(v, key));
  return out;
}

PhenologyTemplate parse_template(const YAML::Node& n, const std::string& where) {
  std::string crop;
  std::optional<Curve> ndvi;
  std::vector<IndicatorTemplate> indicators;
  for_each_key(n, where,
               {{"crop_type", [&](const YAML::Node& v) { crop = as<std::string>(v, "crop_type"); }},
                {"ndvi", [&](const YAML::Node& v) { ndvi = parse_curve(v, where + ".ndvi"); }},
                {"indicators", [&](const YAML::Node& v) {
                   if (!v.IsSequence()) throw ValidationError(where + ".indicators must be a list");
                   for (const auto& item : v) {
                     IndicatorTemplate ind;
                     for_each_key(item, where + ".indicators",
                                  {{"name", [&](const YAML::Node& x) { ind.name = as<std::string>(x, "name"); }},
                                   {"median", [&](const YAML::Node& x) { ind.median = parse_curve(x, "median"); }},
                                   {"iqr", [&](const YAML::Node& x) { ind.iqr = parse_curve(x, "iqr"); }},
                                   {"loading", [&](const YAML::Node& x) { ind.vigor_loading = as<double>(x, "loading"); }},
                                   {"lower", [&](const YAML::Node& x) { ind.lower = as<double>(x, "lower"); }},
                                   {"upper", [&](const YAML::Node& x) { ind.upper = as<double>(x, "upper"); }}});
                     if (ind.name.empty()) throw ValidationError(where + ": indicator without a name");
                     indicators.push_back(std::move(ind));
                   }
                 }}});
  if (crop.empty()) throw ValidationError(where + ": crop_type is required");
  if (ndvi && !indicators.empty()) throw ValidationError(where + ": give either ndvi or indicators, not both");
  if (ndvi) return template_from_ndvi(crop, *ndvi);
  if (indicators.empty()) throw ValidationError(where + ": ndvi or indicators is required");
  return PhenologyTemplate{crop, std::move(indicators)};
}

void parse_synthetic_into(const YAML::Node& n, SyntheticConfig& c) {
  auto dbl = [](double& f, const char* key) {
    return [&f, key](const YAML::Node& v) { f = as<double>(v, key); };
  };
  auto integer = [](int& f, const char* key) {
    return [&f, key](const YAML::Node& v) { f = as<int>(v, key); };
  };
  for_each_key(
      n, "dataset",
      {{"n_parcels", integer(c.n_parcels, "n_parcels")},
       {"n_s2_acquisitions", integer(c.n_s2_acquisitions, "n_s2_acquisitions")},
       {"n_s1_acquisitions", integer(c.n_s1_acquisitions, "n_s1_acquisitions")},
       {"season_first_day", dbl(c.season_first_day, "season_first_day")},
       {"season_last_day", dbl(c.season_last_day, "season_last_day")},
       {"season_origin", [&](const YAML::Node& v) { c.season_origin = as<std::string>(v, "season_origin"); }},
       {"n_latent_clusters", integer(c.n_latent_clusters, "n_latent_clusters")},
       {"cluster_shift_days", dbl(c.cluster_shift_days, "cluster_shift_days")},
       {"cluster_amplitude_step", dbl(c.cluster_amplitude_step, "cluster_amplitude_step")},
       {"noise_scale", dbl(c.noise_scale, "noise_scale")},
       {"vigor_sd", dbl(c.vigor_sd, "vigor_sd")},
       {"slope_sd", dbl(c.slope_sd, "slope_sd")},
       {"local_sd", dbl(c.local_sd, "local_sd")},
       {"local_spacing_days", dbl(c.local_spacing_days, "local_spacing_days")},
       {"local_width_days", dbl(c.local_width_days, "local_width_days")},
       {"entry_noise_sd", dbl(c.entry_noise_sd, "entry_noise_sd")},
       {"iqr_heterogeneity_sd", dbl(c.iqr_heterogeneity_sd, "iqr_heterogeneity_sd")},
       {"iqr_noise_sd", dbl(c.iqr_noise_sd, "iqr_noise_sd")},
       {"s1_correlation", dbl(c.s1_correlation, "s1_correlation")},
       {"s2_noise_multipliers",
        [&](const YAML::Node& v) { c.s2_noise_multipliers = parse_list<double>(v, "s2_noise_multipliers"); }},
       {"anomaly_fraction", dbl(c.anomaly_fraction, "anomaly_fraction")},
       {"anomaly_kinds",
        [&](const YAML::Node& v) {
          c.anomaly_kinds.clear();
          for (const auto& s : parse_list<std::string>(v, "anomaly_kinds")) c.anomaly_kinds.push_back(parse_row_label(s));
        }},
       {"growth_delay_days", dbl(c.growth_delay_days, "growth_delay_days")},
       {"heterogeneity_spike", dbl(c.heterogeneity_spike, "heterogeneity_spike")},
       {"spike_width", integer(c.spike_width, "spike_width")},
       {"contamination_fraction", dbl(c.contamination_fraction, "contamination_fraction")},
       {"contaminant_shift_days", dbl(c.contaminant_shift_days, "contaminant_shift_days")},
       {"seed", [&](const YAML::Node& v) { c.seed = as<std::uint64_t>(v, "seed"); }},
       {"crop", [&](const YAML::Node& v) { c.crop = parse_template(v, "crop"); }},
       {"contaminants",
        [&](const YAML::Node& v) {
          if (!v.IsSequence()) throw ValidationError("'contaminants' must be a list");
          c.contaminants.clear();
          for (const auto& t : v) c.contaminants.push_back(parse_template(t, "contaminants"));
        }},
       {"s1_links", [&](const YAML::Node& v) {
          if (!v.IsSequence()) throw ValidationError("'s1_links' must be a list");
          c.s1_links.clear();
          for (const auto& item : v) {
            S1Link l;
            for_each_key(item, "s1_links",
                         {{"name", [&](const YAML::Node& x) { l.name = as<std::string>(x, "name"); }},
                          {"indicator", [&](const YAML::Node& x) { l.indicator = as<std::string>(x, "indicator"); }},
                          {"offset", [&](const YAML::Node& x) { l.offset = as<double>(x, "offset"); }},
                          {"gain", [&](const YAML::Node& x) { l.gain = as<double>(x, "gain"); }}});
            c.s1_links.push_back(l);
          }
        }}});
}

YAML::Node load_yaml(const std::string& text) {
  try {
    YAML::Node n = YAML::Load(text);
    if (n.IsNull()) return YAML::Node(YAML::NodeType::Map);
    return n;
  } catch (const YAML::Exception& e) {
    throw ValidationError(fmt::format("malformed config: {}", e.what()));
  }
}

std::string num(double v) { return fmt::format("{}", v); }

template <typename T, typename F>
std::string flow_list(const std::vector<T>& v, F f) {
  std::string out = "[";
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + f(v[i]);
  return out + "]";
}

std::string format_curve(const Curve& c) {
  return flow_list(c, [](const ControlPoint& p) { return fmt::format("[{}, {}]", p.day, p.value); });
}

void format_template(std::string& out, const PhenologyTemplate& t, const std::string& indent) {
  out += fmt::format("{}crop_type: {}\n{}indicators:\n", indent, t.crop_type, indent);
  for (const auto& ind : t.indicators) {
    out += fmt::format("{}  - name: {}\n", indent, ind.name);
    out += fmt::format("{}    median: {}\n", indent, format_curve(ind.median));
    out += fmt::format("{}    iqr: {}\n", indent, format_curve(ind.iqr));
    out += fmt::format("{}    loading: {}\n", indent, num(ind.vigor_loading));
    out += fmt::format("{}    lower: {}\n", indent, num(ind.lower));
    out += fmt::format("{}    upper: {}\n", indent, std::isinf(ind.upper) ? ".inf" : num(ind.upper));
  }
}

std::string format_synthetic_body(const SyntheticConfig& c, const std::string& in) {
  std::string o;
  auto line = [&](const char* k, const std::string& v) { o += fmt::format("{}{}: {}\n", in, k, v); };
  line("n_parcels", std::to_string(c.n_parcels));
  line("n_s2_acquisitions", std::to_string(c.n_s2_acquisitions));
  line("n_s1_acquisitions", std::to_string(c.n_s1_acquisitions));
  line("season_first_day", num(c.season_first_day));
  line("season_last_day", num(c.season_last_day));
  line("season_origin", c.season_origin);
  line("n_latent_clusters", std::to_string(c.n_latent_clusters));
  line("cluster_shift_days", num(c.cluster_shift_days));
  line("cluster_amplitude_step", num(c.cluster_amplitude_step));
  line("noise_scale", num(c.noise_scale));
  line("vigor_sd", num(c.vigor_sd));
  line("slope_sd", num(c.slope_sd));
  line("local_sd", num(c.local_sd));
  line("local_spacing_days", num(c.local_spacing_days));
  line("local_width_days", num(c.local_width_days));
  line("entry_noise_sd", num(c.entry_noise_sd));
  line("iqr_heterogeneity_sd", num(c.iqr_heterogeneity_sd));
  line("iqr_noise_sd", num(c.iqr_noise_sd));
  line("s1_correlation", num(c.s1_correlation));
  line("s2_noise_multipliers", flow_list(c.s2_noise_multipliers, num));
  line("anomaly_fraction", num(c.anomaly_fraction));
  line("anomaly_kinds", flow_list(c.anomaly_kinds, [](RowLabel l) { return to_string(l); }));
  line("growth_delay_days", num(c.growth_delay_days));
  line("heterogeneity_spike", num(c.heterogeneity_spike));
  line("spike_width", std::to_string(c.spike_width));
  line("contamination_fraction", num(c.contamination_fraction));
  line("contaminant_shift_days", num(c.contaminant_shift_days));
  line("seed", std::to_string(c.seed));
  o += in + "s1_links:\n";
  for (const auto& l : c.s1_links)
    o += fmt::format("{}  - {{name: {}, indicator: {}, offset: {}, gain: {}}}\n", in, l.name, l.indicator,
                     num(l.offset), num(l.gain));
  o += in + "crop:\n";
  format_template(o, c.crop, in + "  ");
  o += in + "contaminants:\n";
  for (const auto& t : c.contaminants) {
    std::string block;
    format_template(block, t, in + "    ");
    block.replace(in.size(), 4, "  - ");
    o += block;
  }
  return o;
}

}  // namespace

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ValidationError(fmt::format("cannot read '{}'", path.string()));
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

SyntheticConfig parse_synthetic_config(const std::string& yaml_text) {
  SyntheticConfig c;
  parse_synthetic_into(load_yaml(yaml_text), c);
  c.validate();
  return c;
}

SyntheticConfig load_synthetic_config(const std::filesystem::path& path) {
  return parse_synthetic_config(read_text_file(path));
}

std::string format_synthetic_config(const SyntheticConfig& cfg) { return format_synthetic_body(cfg, ""); }

ExperimentSpec parse_experiment_spec(const std::string& yaml_text) {
  YAML::Node root = load_yaml(yaml_text);
  ExperimentSpec s;
  bool has_kind = false, has_grid = false;
  auto if_block = [](IfConfig& f, const std::string& where) {
    return [&f, where](const YAML::Node& v) {
      for_each_key(v, where,
                   {{"n_trees", [&](const YAML::Node& x) { f.n_trees = as<int>(x, "n_trees"); }},
                    {"subsample_size", [&](const YAML::Node& x) { f.subsample_size = as<int>(x, "subsample_size"); }},
                    {"max_depth", [&](const YAML::Node& x) { f.max_depth = as<int>(x, "max_depth"); }}});
    };
  };
  for_each_key(
      root, "experiment spec",
      {{"kind",
        [&](const YAML::Node& v) {
          s.kind = parse_experiment_kind(as<std::string>(v, "kind"));
          has_kind = true;
        }},
       {"name", [&](const YAML::Node& v) { s.name = as<std::string>(v, "name"); }},
       {"dataset", [&](const YAML::Node& v) { parse_synthetic_into(v, s.dataset); }},
       {"methods",
        [&](const YAML::Node& v) {
          s.methods.clear();
          for (const auto& m : parse_list<std::string>(v, "methods")) s.methods.push_back(parse_method(m));
        }},
       {"grid",
        [&](const YAML::Node& v) {
          s.grid = parse_list<double>(v, "grid");
          has_grid = true;
        }},
       {"n_runs", [&](const YAML::Node& v) { s.n_runs = as<int>(v, "n_runs"); }},
       {"base_seed", [&](const YAML::Node& v) { s.base_seed = as<std::uint64_t>(v, "base_seed"); }},
       {"pct_affected", [&](const YAML::Node& v) { s.pct_affected = as<double>(v, "pct_affected"); }},
       {"pct_cloudy_images", [&](const YAML::Node& v) { s.pct_cloudy_images = as<double>(v, "pct_cloudy_images"); }},
       {"compare_s1", [&](const YAML::Node& v) { s.compare_s1 = as<bool>(v, "compare_s1"); }},
       {"em",
        [&](const YAML::Node& v) {
          auto& e = s.em;
          for_each_key(
              v, "em",
              {{"k_range", [&](const YAML::Node& x) { e.k_range = parse_list<int>(x, "k_range"); }},
               {"max_iterations", [&](const YAML::Node& x) { e.max_iterations = as<int>(x, "max_iterations"); }},
               {"loglik_tolerance",
                [&](const YAML::Node& x) { e.loglik_tolerance = as<double>(x, "loglik_tolerance"); }},
               {"scree_threshold", [&](const YAML::Node& x) { e.scree_threshold = as<double>(x, "scree_threshold"); }},
               {"regularize", [&](const YAML::Node& x) { e.regularize = as<bool>(x, "regularize"); }},
               {"min_occupancy", [&](const YAML::Node& x) { e.min_occupancy = as<double>(x, "min_occupancy"); }},
               {"min_occupancy_fraction",
                [&](const YAML::Node& x) { e.min_occupancy_fraction = as<double>(x, "min_occupancy_fraction"); }},
               {"abort_on_collapse",
                [&](const YAML::Node& x) { e.abort_on_collapse = as<bool>(x, "abort_on_collapse"); }},
               {"kmeans_restarts",
                [&](const YAML::Node& x) { e.kmeans_restarts = as<int>(x, "kmeans_restarts"); }}});
        }},
       {"robust",
        [&](const YAML::Node& v) {
          auto& r = s.robust;
          for_each_key(v, "robust",
                       {{"alpha", [&](const YAML::Node& x) { r.alpha = as<double>(x, "alpha"); }},
                        {"th", [&](const YAML::Node& x) { r.th = as<double>(x, "th"); }},
                        {"forest", if_block(r.forest, "robust.forest")}});
        }},
       {"knn_k", [&](const YAML::Node& v) { s.knn_k = as<int>(v, "knn_k"); }},
       {"detector", if_block(s.detector, "detector")},
       {"ratios", [&](const YAML::Node& v) { s.ratios = parse_list<double>(v, "ratios"); }},
       {"n_inits", [&](const YAML::Node& v) { s.n_inits = as<int>(v, "n_inits"); }},
       {"histogram_bins", [&](const YAML::Node& v) { s.histogram_bins = as<int>(v, "histogram_bins"); }}});
  if (!has_kind) throw ValidationError("experiment spec needs a 'kind'");
  if (!has_grid && s.kind == ExperimentKind::ContaminationSweep) s.grid = {0.0, 0.05, 0.10, 0.15, 0.20, 0.25, 0.30};
  s.validate();
  return s;
}

ExperimentSpec load_experiment_spec(const std::filesystem::path& path) {
  return parse_experiment_spec(read_text_file(path));
}

std::string format_experiment_spec(const ExperimentSpec& s) {
  std::string o;
  auto line = [&](const char* k, const std::string& v) { o += fmt::format("{}: {}\n", k, v); };
  auto forest = [](const IfConfig& f, const std::string& in) {
    std::string b = fmt::format("{}n_trees: {}\n{}subsample_size: {}\n", in, f.n_trees, in, f.subsample_size);
    if (f.max_depth) b += fmt::format("{}max_depth: {}\n", in, *f.max_depth);
    return b;
  };
  line("kind", to_string(s.kind));
  line("name", fmt::format("\"{}\"", s.name));
  line("methods", flow_list(s.methods, [](Method m) { return to_string(m); }));
  line("grid", flow_list(s.grid, num));
  line("n_runs", std::to_string(s.n_runs));
  line("base_seed", std::to_string(s.base_seed));
  line("pct_affected", num(s.pct_affected));
  line("pct_cloudy_images", num(s.pct_cloudy_images));
  line("compare_s1", s.compare_s1 ? "true" : "false");
  o += "em:\n";
  o += fmt::format("  k_range: {}\n", flow_list(s.em.k_range, [](int k) { return std::to_string(k); }));
  o += fmt::format("  max_iterations: {}\n  loglik_tolerance: {}\n  scree_threshold: {}\n", s.em.max_iterations,
                   num(s.em.loglik_tolerance), num(s.em.scree_threshold));
  o += fmt::format("  regularize: {}\n  min_occupancy: {}\n  min_occupancy_fraction: {}\n  abort_on_collapse: {}\n",
                   s.em.regularize ? "true" : "false", num(s.em.min_occupancy), num(s.em.min_occupancy_fraction),
                   s.em.abort_on_collapse ? "true" : "false");
  o += fmt::format("  kmeans_restarts: {}\n", s.em.kmeans_restarts);
  o += fmt::format("robust:\n  alpha: {}\n  th: {}\n  forest:\n", num(s.robust.alpha), num(s.robust.th));
  o += forest(s.robust.forest, "    ");
  line("knn_k", std::to_string(s.knn_k));
  o += "detector:\n" + forest(s.detector, "  ");
  line("ratios", flow_list(s.ratios, num));
  line("n_inits", std::to_string(s.n_inits));
  line("histogram_bins", std::to_string(s.histogram_bins));
  o += "dataset:\n" + format_synthetic_body(s.dataset, "  ");
  return o;
}

}  // namespace rgmm
