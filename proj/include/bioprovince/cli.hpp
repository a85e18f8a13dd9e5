#pragma once

// Command implementations behind the bioprovince tool: run configuration,
// key = value config files, output writers and the reproducibility manifest.

#include <openssl/evp.h>

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "bioprovince/biocluster.hpp"
#include "bioprovince/csv.hpp"
#include "bioprovince/data.hpp"
#include "bioprovince/distance.hpp"
#include "bioprovince/errors.hpp"
#include "bioprovince/province.hpp"
#include "bioprovince/report.hpp"
#include "bioprovince/stability.hpp"
#include "bioprovince/svg.hpp"
#include "bioprovince/tuning.hpp"

namespace bioprovince::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

struct RunConfig {
  // inputs
  std::string composition;
  std::string meta;
  std::string grid;
  std::string group_map;
  std::string external_labels;  // CSV sample_id,external_province

  // hyperparameters; the pipeline refuses to guess these
  std::optional<double> r;
  std::optional<double> alpha;
  std::optional<int> K;
  std::optional<int> k;

  std::string zero_policy = "multiplicative";
  std::string input_kind = "auto";  // auto | counts | fractions
  double lat_window = 3.0;
  double depth_window = 10.0;
  double p_threshold = 0.05;
  std::string weighting = "pairs";  // pairs | samples
  std::size_t L = 100;
  std::vector<double> alphas{0.0, 0.05, 0.1, 0.15, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  std::vector<int> Ks;  // empty: 1..min(n, 20)
  std::size_t replicates = 100;
  double fraction = 0.7;
  std::uint64_t seed = 1;
  std::string rescale = "union";  // union | samples
  std::string out = "out";

  // synth
  int synth_provinces = 3;
  std::size_t synth_samples = 150;
  std::size_t synth_asvs = 300;
  std::size_t synth_grid = 2000;
  std::size_t synth_cruises = 2;
  double synth_noise = 0.15;

  bool operator==(const RunConfig&) const = default;
};

// ---------------------------------------------------------------------------
// key = value config text
// ---------------------------------------------------------------------------

namespace detail {

template <typename T>
std::string list_text(const std::vector<T>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    if constexpr (std::is_floating_point_v<T>) s += csv::format_double(v[i]);
    else s += std::to_string(v[i]);
  }
  return s;
}

inline double to_double(const std::string& key, const std::string& v) {
  try {
    return csv::parse_double(v, key);
  } catch (const DataError&) {
    throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
  }
}

inline long long to_int(const std::string& key, const std::string& v) {
  const double d = to_double(key, v);
  if (d != std::floor(d) || std::abs(d) > 9.0e15)
    throw ConfigError("config key '" + key + "': expected an integer, got '" + v + "'");
  return static_cast<long long>(d);
}

inline std::size_t to_count(const std::string& key, const std::string& v) {
  const long long x = to_int(key, v);
  if (x < 0) throw ConfigError("config key '" + key + "' must be nonnegative");
  return static_cast<std::size_t>(x);
}

template <typename T>
std::vector<T> to_list(const std::string& key, const std::string& v) {
  std::vector<T> out;
  if (csv::trim(v).empty()) return out;
  for (const auto& item : csv::split_line(v)) {
    if constexpr (std::is_floating_point_v<T>) out.push_back(to_double(key, item));
    else out.push_back(static_cast<T>(to_int(key, item)));
  }
  return out;
}

}  // namespace detail

// Ordered (key, value) pairs describing every field; optional values that are
// unset are omitted.
inline std::vector<std::pair<std::string, std::string>> config_entries(const RunConfig& c) {
  using csv::format_double;
  std::vector<std::pair<std::string, std::string>> e{
      {"composition", c.composition}, {"meta", c.meta}, {"grid", c.grid},
      {"group_map", c.group_map},     {"external_labels", c.external_labels}};
  if (c.r) e.emplace_back("r", format_double(*c.r));
  if (c.alpha) e.emplace_back("alpha", format_double(*c.alpha));
  if (c.K) e.emplace_back("K", std::to_string(*c.K));
  if (c.k) e.emplace_back("k", std::to_string(*c.k));
  e.insert(e.end(), {{"zero_policy", c.zero_policy},
                     {"input_kind", c.input_kind},
                     {"lat_window", format_double(c.lat_window)},
                     {"depth_window", format_double(c.depth_window)},
                     {"p_threshold", format_double(c.p_threshold)},
                     {"weighting", c.weighting},
                     {"L", std::to_string(c.L)},
                     {"alphas", detail::list_text(c.alphas)},
                     {"Ks", detail::list_text(c.Ks)},
                     {"replicates", std::to_string(c.replicates)},
                     {"fraction", format_double(c.fraction)},
                     {"seed", std::to_string(c.seed)},
                     {"rescale", c.rescale},
                     {"out", c.out},
                     {"synth_provinces", std::to_string(c.synth_provinces)},
                     {"synth_samples", std::to_string(c.synth_samples)},
                     {"synth_asvs", std::to_string(c.synth_asvs)},
                     {"synth_grid", std::to_string(c.synth_grid)},
                     {"synth_cruises", std::to_string(c.synth_cruises)},
                     {"synth_noise", format_double(c.synth_noise)}});
  return e;
}

inline void set_config_value(RunConfig& c, const std::string& key, const std::string& v) {
  using namespace detail;
  if (key == "composition") c.composition = v;
  else if (key == "meta") c.meta = v;
  else if (key == "grid") c.grid = v;
  else if (key == "group_map") c.group_map = v;
  else if (key == "external_labels") c.external_labels = v;
  else if (key == "r") c.r = to_double(key, v);
  else if (key == "alpha") c.alpha = to_double(key, v);
  else if (key == "K") c.K = static_cast<int>(to_int(key, v));
  else if (key == "k") c.k = static_cast<int>(to_int(key, v));
  else if (key == "zero_policy") c.zero_policy = v;
  else if (key == "input_kind") c.input_kind = v;
  else if (key == "lat_window") c.lat_window = to_double(key, v);
  else if (key == "depth_window") c.depth_window = to_double(key, v);
  else if (key == "p_threshold") c.p_threshold = to_double(key, v);
  else if (key == "weighting") c.weighting = v;
  else if (key == "L") c.L = to_count(key, v);
  else if (key == "alphas") c.alphas = to_list<double>(key, v);
  else if (key == "Ks") c.Ks = to_list<int>(key, v);
  else if (key == "replicates") c.replicates = to_count(key, v);
  else if (key == "fraction") c.fraction = to_double(key, v);
  else if (key == "seed") c.seed = to_count(key, v);
  else if (key == "rescale") c.rescale = v;
  else if (key == "out") c.out = v;
  else if (key == "synth_provinces") c.synth_provinces = static_cast<int>(to_int(key, v));
  else if (key == "synth_samples") c.synth_samples = to_count(key, v);
  else if (key == "synth_asvs") c.synth_asvs = to_count(key, v);
  else if (key == "synth_grid") c.synth_grid = to_count(key, v);
  else if (key == "synth_cruises") c.synth_cruises = to_count(key, v);
  else if (key == "synth_noise") c.synth_noise = to_double(key, v);
  else throw ConfigError("unknown config key '" + key + "'");
}

inline std::string config_to_text(const RunConfig& c) {
  std::string out;
  for (const auto& [k, v] : config_entries(c)) out += k + " = " + v + "\n";
  return out;
}

// Lines are `key = value`; blank lines and lines starting with '#' are skipped.
inline RunConfig parse_config_text(const std::string& text, RunConfig base = {}) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = csv::trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
    set_config_value(base, csv::trim(t.substr(0, eq)), csv::trim(t.substr(eq + 1)));
  }
  return base;
}

inline RunConfig load_config_file(const std::string& path, RunConfig base = {}) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config_text(ss.str(), std::move(base));
}

// ---------------------------------------------------------------------------
// Validation helpers
// ---------------------------------------------------------------------------

inline void require_file(const std::string& path, const std::string& role) {
  if (path.empty()) throw ConfigError("missing required input: " + role);
  if (!fs::is_regular_file(path)) throw ConfigError(role + " file '" + path + "' does not exist");
}

inline void check_optional_file(const std::string& path, const std::string& role) {
  if (!path.empty()) require_file(path, role);
}

inline double require_r(const RunConfig& c) {
  if (!c.r) throw ConfigError("r is required (run tune-r or pass --r)");
  MixParams{0.0, *c.r}.validate();
  return *c.r;
}

inline PipelineParams require_params(const RunConfig& c) {
  if (!c.r) throw ConfigError("r is required (run tune-r or pass --r)");
  if (!c.alpha) throw ConfigError("alpha is required (run tune-alpha or pass --alpha)");
  if (!c.K) throw ConfigError("K is required (run tune-k or pass --K)");
  if (!c.k) throw ConfigError("k is required (pass --k)");
  PipelineParams p{*c.r, *c.alpha, *c.K, *c.k};
  p.validate();
  return p;
}

inline InputKind input_kind(const RunConfig& c) {
  if (c.input_kind == "auto") return InputKind::automatic;
  if (c.input_kind == "counts") return InputKind::counts;
  if (c.input_kind == "fractions") return InputKind::fractions;
  throw ConfigError("input_kind must be auto, counts or fractions");
}

inline RTuningOptions r_options(const RunConfig& c) {
  RTuningOptions o;
  o.lat_window = c.lat_window;
  o.depth_window = c.depth_window;
  if (!(c.p_threshold > 0.0 && c.p_threshold < 1.0))
    throw ConfigError("p_threshold must lie in (0, 1)");
  o.p_threshold = c.p_threshold;
  if (c.weighting == "pairs") o.weighting = CruiseWeighting::pairs;
  else if (c.weighting == "samples") o.weighting = CruiseWeighting::samples;
  else throw ConfigError("weighting must be pairs or samples");
  if (!(o.lat_window > 0.0) || !(o.depth_window > 0.0))
    throw ConfigError("lat_window and depth_window must be positive");
  return o;
}

inline PredictOptions predict_options(const RunConfig& c) {
  if (c.rescale == "union") return {true};
  if (c.rescale == "samples") return {false};
  throw ConfigError("rescale must be union or samples");
}

// Prints the soft-bound warning for k; k < 1 is rejected.
inline void warn_k(int k, std::ostream& err) {
  if (knn_k_warning(k)) {
    const auto [lo, hi] = knn_k_bounds();
    err << "warning: k = " << k << " is outside the recommended range [" << lo << ", " << hi
        << "]\n";
  }
}

// Runs one stage and prefixes any error message with the stage name.
template <typename F>
auto staged(const std::string& stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    throw Error(e.kind(), "[" + stage + "] " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Hashing and manifest
// ---------------------------------------------------------------------------

inline std::string sha256_hex(const std::string& bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(), nullptr) != 1)
    throw NumericalError("SHA-256 digest failed");
  std::ostringstream out;
  for (unsigned int i = 0; i < len; ++i)
    out << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return out.str();
}

inline std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

inline std::string sha256_file(const std::string& path) { return sha256_hex(read_file(path)); }

// Collects output files of one command, written under the output directory.
class Outputs {
 public:
  explicit Outputs(std::string dir) : dir_(std::move(dir)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw ConfigError("cannot create output directory '" + dir_ + "': " + ec.message());
  }

  const std::string& dir() const { return dir_; }
  std::string path(const std::string& name) const { return (fs::path(dir_) / name).string(); }

  void write(const std::string& name, const std::string& content) {
    std::ofstream f(path(name), std::ios::binary);
    if (!f) throw DataError("cannot write '" + path(name) + "'");
    f << content;
    if (!f) throw DataError("failed writing '" + path(name) + "'");
    files_.emplace_back(name, sha256_hex(content));
  }

  const std::vector<std::pair<std::string, std::string>>& files() const { return files_; }

 private:
  std::string dir_;
  std::vector<std::pair<std::string, std::string>> files_;
};

inline json config_json(const RunConfig& c) {
  json j = json::object();
  for (const auto& [k, v] : config_entries(c)) j[k] = v;
  return j;
}

inline RunConfig config_from_json(const json& j) {
  RunConfig c;
  if (!j.is_object()) throw ConfigError("manifest config must be an object");
  for (const auto& [k, v] : j.items()) {
    if (!v.is_string()) throw ConfigError("manifest config value for '" + k + "' must be a string");
    set_config_value(c, k, v.get<std::string>());
  }
  return c;
}

// The manifest records the command, the full configuration, and content
// hashes of every input and output. No timestamps or host details, so it is
// itself reproducible.
inline json make_manifest(const std::string& command, const RunConfig& c, const Outputs& outs) {
  json m;
  m["tool"] = "bioprovince";
  m["manifest_version"] = 1;
  m["command"] = command;
  m["config"] = config_json(c);
  json inputs = json::array();
  const std::array<std::pair<const char*, const std::string*>, 5> roles{
      {{"composition", &c.composition},
       {"meta", &c.meta},
       {"grid", &c.grid},
       {"group_map", &c.group_map},
       {"external_labels", &c.external_labels}}};
  for (const auto& [role, path] : roles)
    if (!path->empty() && fs::is_regular_file(*path))
      inputs.push_back({{"role", role}, {"path", *path}, {"sha256", sha256_file(*path)}});
  m["inputs"] = inputs;
  json outputs = json::array();
  for (const auto& [name, hash] : outs.files()) outputs.push_back({{"file", name}, {"sha256", hash}});
  m["outputs"] = outputs;
  return m;
}

struct ManifestRun {
  std::string command;
  RunConfig config;
};

// Reads a manifest and checks that every recorded input still has the
// recorded content.
inline ManifestRun load_manifest(const std::string& path) {
  json m;
  try {
    m = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ConfigError("manifest '" + path + "' is not valid JSON: " + e.what());
  } catch (const DataError&) {
    throw ConfigError("cannot open manifest '" + path + "'");
  }
  if (!m.contains("command") || !m.contains("config"))
    throw ConfigError("manifest '" + path + "' lacks command or config");
  ManifestRun run{m["command"].get<std::string>(), config_from_json(m["config"])};
  if (m.contains("inputs"))
    for (const auto& in : m["inputs"]) {
      const auto p = in.at("path").get<std::string>();
      require_file(p, in.at("role").get<std::string>());
      if (sha256_file(p) != in.at("sha256").get<std::string>())
        throw DataError("input '" + p + "' does not match the manifest hash");
    }
  return run;
}

inline void write_manifest(Outputs& outs, const std::string& command, const RunConfig& c) {
  const auto m = make_manifest(command, c, outs);
  std::ofstream f(outs.path("manifest.json"), std::ios::binary);
  if (!f) throw DataError("cannot write manifest");
  f << m.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Input loading
// ---------------------------------------------------------------------------

inline void apply_external_labels(std::vector<SampleMeta>& meta, const std::string& path) {
  const auto t = csv::read(path);
  const auto c_id = t.require_column("sample_id", path);
  const auto c_lab = t.require_column("external_province", path);
  std::unordered_map<std::string, std::string> labels;
  for (const auto& r : t.rows)
    if (!labels.emplace(r[c_id], r[c_lab]).second)
      throw DataError(path + ": duplicate sample id '" + r[c_id] + "'");
  for (auto& m : meta) {
    auto it = labels.find(m.sample_id);
    if (it != labels.end() && !it->second.empty()) m.external_province = it->second;
  }
}

inline SampleSet load_inputs(const RunConfig& c) {
  require_file(c.composition, "composition");
  require_file(c.meta, "meta");
  check_optional_file(c.external_labels, "external labels");
  const auto policy = ZeroPolicy::parse(c.zero_policy);
  const auto kind = input_kind(c);
  auto set = staged("load", [&] { return load_samples(c.composition, c.meta, policy, kind); });
  if (!c.external_labels.empty())
    staged("load", [&] { apply_external_labels(set.meta, c.external_labels); });
  return set;
}

inline GridSpec load_grid_input(const RunConfig& c) {
  require_file(c.grid, "grid");
  return staged("load", [&] { return load_grid(c.grid); });
}

// ---------------------------------------------------------------------------
// Output writers
// ---------------------------------------------------------------------------

inline std::string memberships_csv(const CompositionTable& t, const std::vector<SampleMeta>& meta,
                                   std::span<const int> m) {
  std::ostringstream s;
  csv::Writer w(s);
  w.row("sample_id", "latitude", "depth", "cruise", "membership");
  for (std::size_t i = 0; i < m.size(); ++i)
    w.row(t.sample_ids[i], meta[i].latitude, meta[i].depth, meta[i].cruise, m[i]);
  return s.str();
}

inline std::string merges_csv(const std::vector<Merge>& merges) {
  std::ostringstream s;
  csv::Writer w(s);
  w.row("step", "left", "right", "height");
  for (std::size_t i = 0; i < merges.size(); ++i)
    w.row(i + 1, merges[i].left, merges[i].right, merges[i].height);
  return s.str();
}

inline std::string provinces_csv(const GridSpec& g, const ProvinceMap& p) {
  std::ostringstream s;
  csv::Writer w(s);
  w.row("grid_id", "latitude", "depth", "membership", "k_prime", "tie_broken", "fallback_used");
  for (std::size_t j = 0; j < g.size(); ++j)
    w.row(g.grid_ids[j], g.latitude[j], g.depth[j], p.memberships[j], p.provenance[j].k_prime,
          p.provenance[j].tie_broken, p.provenance[j].fallback_used);
  return s.str();
}

inline std::string stability_csv(const GridSpec& g, const StabilityMap& m) {
  std::ostringstream s;
  csv::Writer w(s);
  w.row("grid_id", "latitude", "depth", "modal_cluster", "stability");
  for (std::size_t j = 0; j < g.size(); ++j)
    w.row(g.grid_ids[j], g.latitude[j], g.depth[j], m.modal_cluster[j], m.stability[j]);
  return s.str();
}

inline void write_crosstab(Outputs& outs, const CrossTab& ct) {
  std::ostringstream s;
  csv::Writer w(s);
  std::vector<std::string> header{"external_province"};
  for (int c : ct.col_labels) header.push_back(std::to_string(c));
  w.row(header);
  std::vector<std::vector<double>> values(ct.row_labels.size());
  for (std::size_t r = 0; r < ct.row_labels.size(); ++r) {
    std::vector<std::string> row{ct.row_labels[r]};
    for (std::size_t c = 0; c < ct.col_labels.size(); ++c) {
      const double v = ct.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
      row.push_back(csv::format_double(v));
      values[r].push_back(v);
    }
    w.row(row);
  }
  outs.write("crosstab.csv", s.str());
  std::vector<std::string> cols;
  for (int c : ct.col_labels) cols.push_back(std::to_string(c));
  outs.write("crosstab.svg",
             svg::heatmap(ct.row_labels, cols, values, "external vs estimated provinces").str());
}

inline void write_composition(Outputs& outs, const GroupedComposition& g) {
  std::ostringstream s;
  csv::Writer w(s);
  w.row("cluster", "group", "mean_fraction");
  std::vector<std::vector<double>> shares;
  std::vector<std::string> cats;
  for (std::size_t c = 0; c < g.cluster_labels.size(); ++c) {
    cats.push_back(std::to_string(g.cluster_labels[c]));
    shares.emplace_back();
    for (std::size_t j = 0; j < g.groups.size(); ++j) {
      const double v = g.values(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(j));
      w.row(g.cluster_labels[c], g.groups[j], v);
      shares.back().push_back(v);
    }
  }
  outs.write("composition.csv", s.str());
  outs.write("composition.svg",
             svg::stacked_bar(cats, g.groups, shares, "mean composition per cluster").str());
}

inline void write_homogeneity(Outputs& outs, std::span<const int> memberships,
                              const std::vector<SampleMeta>& meta) {
  std::vector<std::string> cruises;
  for (const auto& m : meta) cruises.push_back(m.cruise);
  const auto kl = cluster_source_homogeneity(memberships, cruises);
  std::ostringstream s;
  csv::Writer w(s);
  w.row("cluster", "kl_divergence");
  for (std::size_t c = 0; c < kl.size(); ++c) w.row(c + 1, kl[c]);
  outs.write("homogeneity.csv", s.str());
}

inline void write_province_svg(Outputs& outs, const std::string& name, const GridSpec& g,
                               std::span<const int> labels, std::span<const double> opacity,
                               const std::string& title) {
  outs.write(name, svg::raster_map(g.latitude, g.depth, labels, opacity, title).str());
}

// ---------------------------------------------------------------------------
// Commands. Each returns 0 and writes its files plus manifest.json under
// config.out; errors propagate as bioprovince::Error.
// ---------------------------------------------------------------------------

inline RTuningResult cmd_tune_r(const RunConfig& c, std::ostream& log = std::cout) {
  const auto opts = r_options(c);
  const auto set = load_inputs(c);
  Outputs outs(c.out);
  const auto d_bio = staged("distance", [&] { return bio_distance_matrix(set.table); });
  const auto res = staged("tune-r", [&] { return tune_r(d_bio, set.meta, opts); });

  std::ostringstream s;
  csv::Writer w(s);
  w.row("cruise", "dimension", "n_samples", "n_pairs", "slope", "intercept", "slope_std_err",
        "t_stat", "p_value", "used");
  for (const auto& cf : res.per_cruise) {
    auto emit = [&](const char* dim, const std::optional<RegressionFit>& f, bool used) {
      if (f)
        w.row(cf.cruise, dim, cf.n_samples, cf.n_pairs, f->slope, f->intercept, f->slope_std_err,
              f->t_stat, f->p_value, used);
      else
        w.row(cf.cruise, dim, cf.n_samples, cf.n_pairs, "", "", "", "", "", false);
    };
    emit("latitude", cf.lat_fit, cf.lat_used);
    emit("depth", cf.depth_fit, cf.depth_used);
  }
  outs.write("tune_r_fits.csv", s.str());

  // Pooled pair scatter with the weighted slopes, anchored at the pooled means.
  std::vector<double> xl, xd, y;
  for (const auto& cf : res.per_cruise)
    for (const auto& p : qualifying_pairs(d_bio, set.meta, cf.cruise, opts)) {
      xl.push_back(p.d_lat);
      xd.push_back(p.d_depth);
      y.push_back(p.d_bio);
    }
  auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
  };
  outs.write("tune_r_latitude.svg",
             svg::scatter_fit(xl, y, res.b1, mean(y) - res.b1 * mean(xl), "distance decay: latitude",
                              "|delta latitude| (deg)", "Aitchison distance")
                 .str());
  outs.write("tune_r_depth.svg",
             svg::scatter_fit(xd, y, res.b2, mean(y) - res.b2 * mean(xd), "distance decay: depth",
                              "|delta depth| (m)", "Aitchison distance")
                 .str());

  json summary;
  summary["b1"] = res.b1;
  summary["b2"] = res.b2;
  summary["r"] = res.r;
  summary["lat_window"] = opts.lat_window;
  summary["depth_window"] = opts.depth_window;
  summary["p_threshold"] = opts.p_threshold;
  summary["weighting"] = c.weighting;
  json per = json::array();
  for (const auto& cf : res.per_cruise)
    per.push_back({{"cruise", cf.cruise},
                   {"n_samples", cf.n_samples},
                   {"n_pairs", cf.n_pairs},
                   {"latitude_slope", cf.lat_fit ? json(cf.lat_fit->slope) : json(nullptr)},
                   {"latitude_p", cf.lat_fit ? json(cf.lat_fit->p_value) : json(nullptr)},
                   {"depth_slope", cf.depth_fit ? json(cf.depth_fit->slope) : json(nullptr)},
                   {"depth_p", cf.depth_fit ? json(cf.depth_fit->p_value) : json(nullptr)},
                   {"latitude_used", cf.lat_used},
                   {"depth_used", cf.depth_used}});
  summary["per_cruise"] = per;
  outs.write("tune_r.json", summary.dump(2) + "\n");
  write_manifest(outs, "tune-r", c);
  log << "r = " << csv::format_double(res.r) << " (b1 = " << csv::format_double(res.b1)
      << ", b2 = " << csv::format_double(res.b2) << ")\n";
  return res;
}

inline AlphaCurve cmd_tune_alpha(const RunConfig& c, std::ostream& log = std::cout) {
  const double r = require_r(c);
  if (c.L < 1) throw ConfigError("L must be at least 1");
  const auto set = load_inputs(c);
  Outputs outs(c.out);
  const auto curve = staged("tune-alpha", [&] {
    return alpha_saturation_curve(set.table, set.meta, r, c.alphas, c.L, c.seed);
  });
  std::ostringstream s;
  csv::Writer w(s);
  w.row("alpha", "replicate", "score", "null_score");
  for (std::size_t a = 0; a < curve.alphas.size(); ++a)
    for (std::size_t l = 0; l < c.L; ++l)
      w.row(curve.alphas[a], l + 1, curve.scores[a][l], curve.null_scores[a][l]);
  outs.write("alpha_curve.csv", s.str());

  svg::Series sc{"score", {}, {}, {}}, nu{"null score", {}, {}, {}};
  for (std::size_t a = 0; a < curve.alphas.size(); ++a) {
    sc.y.push_back(quantile(curve.scores[a], 0.5));
    sc.lower.push_back(curve.score_bands[a].lower);
    sc.upper.push_back(curve.score_bands[a].upper);
    nu.y.push_back(quantile(curve.null_scores[a], 0.5));
    nu.lower.push_back(curve.null_bands[a].lower);
    nu.upper.push_back(curve.null_bands[a].upper);
  }
  outs.write("alpha_curve.svg",
             svg::line_plot(curve.alphas, {sc, nu}, "saturation score", "alpha", "fraction in hull").str());
  write_manifest(outs, "tune-alpha", c);
  if (curve.degenerate_hulls > 0)
    log << "warning: " << curve.degenerate_hulls << " degenerate corner hulls scored 0\n";
  log << "suggested alpha = " << csv::format_double(curve.suggested_alpha) << "\n";
  return curve;
}

inline KCurve cmd_tune_k(const RunConfig& c, std::ostream& log = std::cout) {
  const double r = require_r(c);
  if (!c.alpha) throw ConfigError("alpha is required (run tune-alpha or pass --alpha)");
  MixParams{*c.alpha, r}.validate();
  const auto set = load_inputs(c);
  Outputs outs(c.out);
  std::vector<int> Ks = c.Ks;
  if (Ks.empty())
    for (int K = 1; K <= static_cast<int>(std::min<std::size_t>(set.table.n(), 20)); ++K) Ks.push_back(K);
  const auto d_alpha = staged("distance", [&] {
    return mix_distance_matrix(bio_distance_matrix(set.table), spatial_distance_matrix(set.meta, r),
                               *c.alpha);
  });
  const auto curve = staged("tune-k", [&] { return k_elbow_curve(d_alpha, Ks); });
  std::ostringstream s;
  csv::Writer w(s);
  w.row("K", "wcd");
  for (std::size_t i = 0; i < curve.Ks.size(); ++i) w.row(curve.Ks[i], curve.wcd[i]);
  outs.write("k_curve.csv", s.str());
  std::vector<double> xs(curve.Ks.begin(), curve.Ks.end());
  outs.write("k_curve.svg", svg::line_plot(xs, {{"within-cluster distance", curve.wcd, {}, {}}},
                                           "elbow curve", "K", "within-cluster distance")
                                .str());
  write_manifest(outs, "tune-k", c);
  log << "suggested K = " << curve.suggested_K << "\n";
  return curve;
}

struct ClusterStage {
  SampleSet set;
  DistanceMatrix d_bio;
  DistanceMatrix d_spatial;
  ClusterResult clusters;
};

inline ClusterStage run_cluster_stage(const RunConfig& c, const PipelineParams& p) {
  ClusterStage st{load_inputs(c), {}, {}, {}};
  st.d_bio = staged("distance", [&] { return bio_distance_matrix(st.set.table); });
  st.d_spatial = staged("distance", [&] { return spatial_distance_matrix(st.set.meta, p.r); });
  st.clusters = staged("cluster", [&] {
    if (static_cast<std::size_t>(p.K) > st.set.table.n()) throw ConfigError("K exceeds the number of samples");
    return cluster(mix_distance_matrix(st.d_bio, st.d_spatial, p.alpha), p.K, st.set.meta);
  });
  return st;
}

inline ClusterResult cmd_cluster(const RunConfig& c, std::ostream& log = std::cout) {
  if (!c.r || !c.alpha || !c.K) throw ConfigError("cluster needs r, alpha and K");
  PipelineParams p{*c.r, *c.alpha, *c.K, c.k.value_or(1)};
  p.validate();
  auto st = run_cluster_stage(c, p);
  Outputs outs(c.out);
  outs.write("memberships.csv", memberships_csv(st.set.table, st.set.meta, st.clusters.memberships));
  outs.write("merges.csv", merges_csv(st.clusters.merge_history));
  write_manifest(outs, "cluster", c);
  log << "clustered " << st.set.table.n() << " samples into K = " << p.K << "\n";
  return st.clusters;
}

inline ProvinceMap cmd_predict(const RunConfig& c, std::ostream& log = std::cout,
                               std::ostream& err = std::cerr) {
  const auto p = require_params(c);
  warn_k(p.k, err);
  const auto popts = predict_options(c);
  const auto grid = load_grid_input(c);
  auto st = run_cluster_stage(c, p);
  const auto map = staged("predict", [&] {
    return predict(grid, st.set.meta, st.clusters.memberships, p.k, p.r, popts);
  });
  Outputs outs(c.out);
  outs.write("memberships.csv", memberships_csv(st.set.table, st.set.meta, st.clusters.memberships));
  outs.write("provinces.csv", provinces_csv(grid, map));
  write_province_svg(outs, "provinces.svg", grid, map.memberships, {}, "predicted provinces");
  write_manifest(outs, "predict", c);
  log << "predicted " << grid.size() << " grid points\n";
  return map;
}

inline StabilityResult cmd_stability(const RunConfig& c, std::ostream& log = std::cout,
                                     std::ostream& err = std::cerr) {
  const auto p = require_params(c);
  warn_k(p.k, err);
  StabilityOptions so;
  so.fraction = c.fraction;
  so.replicates = c.replicates;
  so.seed = c.seed;
  so.predict = predict_options(c);
  const auto grid = load_grid_input(c);
  const auto set = load_inputs(c);
  const auto res = staged("stability", [&] { return run_stability(set.table, set.meta, grid, p, so); });
  Outputs outs(c.out);
  outs.write("stability.csv", stability_csv(grid, res.map));
  write_province_svg(outs, "stability.svg", grid, res.map.modal_cluster, res.map.stability,
                     "modal province, opacity = stability");
  write_manifest(outs, "stability", c);
  log << "stability over " << res.map.n_replicates << " replicates written\n";
  return res;
}

// Summaries for a clustering: cross-tabulation (when labels exist), grouped
// mean compositions and cruise homogeneity.
inline void write_reports(Outputs& outs, const RunConfig& c, const SampleSet& set,
                          std::span<const int> memberships, std::ostream& err) {
  bool labelled = false;
  for (const auto& m : set.meta) labelled = labelled || m.external_province.has_value();
  if (labelled) {
    const auto ct = staged("report", [&] { return cross_tabulate(memberships, set.meta); });
    if (ct.excluded > 0)
      err << "warning: " << ct.excluded << " samples without an external province label excluded\n";
    write_crosstab(outs, ct);
  }
  check_optional_file(c.group_map, "group map");
  const auto groups = c.group_map.empty() ? std::unordered_map<std::string, std::string>{}
                                          : load_group_map(c.group_map);
  write_composition(outs, staged("report", [&] {
                      return mean_cluster_composition(set.table, memberships, groups);
                    }));
  staged("report", [&] { write_homogeneity(outs, memberships, set.meta); });
}

inline void cmd_report(const RunConfig& c, std::ostream& log = std::cout,
                       std::ostream& err = std::cerr) {
  if (!c.r || !c.alpha || !c.K) throw ConfigError("report needs r, alpha and K");
  PipelineParams p{*c.r, *c.alpha, *c.K, c.k.value_or(1)};
  p.validate();
  const auto st = run_cluster_stage(c, p);
  Outputs outs(c.out);
  write_reports(outs, c, st.set, st.clusters.memberships, err);
  write_manifest(outs, "report", c);
  log << "reports written to " << outs.dir() << "\n";
}

// Full run at fixed hyperparameters: cluster, predict, report.
inline ProvinceRun cmd_pipeline(const RunConfig& c, std::ostream& log = std::cout,
                                std::ostream& err = std::cerr) {
  const auto p = require_params(c);
  warn_k(p.k, err);
  const auto popts = predict_options(c);
  const auto grid = load_grid_input(c);
  auto st = run_cluster_stage(c, p);
  ProvinceRun run;
  run.clusters = st.clusters;
  run.provinces = staged("predict", [&] {
    return predict(grid, st.set.meta, st.clusters.memberships, p.k, p.r, popts);
  });
  Outputs outs(c.out);
  outs.write("memberships.csv", memberships_csv(st.set.table, st.set.meta, run.clusters.memberships));
  outs.write("merges.csv", merges_csv(run.clusters.merge_history));
  outs.write("provinces.csv", provinces_csv(grid, run.provinces));
  write_province_svg(outs, "provinces.svg", grid, run.provinces.memberships, {},
                     "predicted provinces");
  write_reports(outs, c, st.set, run.clusters.memberships, err);
  write_manifest(outs, "pipeline", c);
  log << "pipeline outputs written to " << outs.dir() << "\n";
  return run;
}

inline SyntheticData cmd_synth(const RunConfig& c, std::ostream& log = std::cout) {
  SyntheticSpec s;
  s.n_provinces = c.synth_provinces;
  s.n_samples = c.synth_samples;
  s.n_asvs = c.synth_asvs;
  s.n_grid = c.synth_grid;
  s.n_cruises = c.synth_cruises;
  s.noise = c.synth_noise;
  s.seed = c.seed;
  const auto data = staged("synth", [&] { return generate_synthetic(s); });
  Outputs outs(c.out);
  const auto& t = data.samples.table;
  {
    std::ostringstream o;
    csv::Writer w(o);
    std::vector<std::string> header{"sample_id"};
    header.insert(header.end(), t.asv_ids.begin(), t.asv_ids.end());
    w.row(header);
    for (std::size_t i = 0; i < t.n(); ++i) {
      std::vector<std::string> row{t.sample_ids[i]};
      for (std::size_t j = 0; j < t.d(); ++j)
        row.push_back(csv::format_double(t.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))));
      w.row(row);
    }
    outs.write("composition.csv", o.str());
  }
  {
    std::ostringstream o;
    csv::Writer w(o);
    w.row("sample_id", "latitude", "depth", "temperature", "salinity", "cruise", "external_province");
    for (const auto& m : data.samples.meta)
      w.row(m.sample_id, m.latitude, m.depth, m.temperature, m.salinity, m.cruise,
            m.external_province.value_or(""));
    outs.write("meta.csv", o.str());
  }
  {
    std::ostringstream o;
    csv::Writer w(o);
    w.row("grid_id", "latitude", "depth", "temperature", "salinity");
    const auto& g = data.grid;
    for (std::size_t j = 0; j < g.size(); ++j)
      w.row(g.grid_ids[j], g.latitude[j], g.depth[j], g.temperature[j], g.salinity[j]);
    outs.write("grid.csv", o.str());
  }
  {
    std::ostringstream o;
    csv::Writer w(o);
    w.row("grid_id", "province");
    for (std::size_t j = 0; j < data.grid.size(); ++j) w.row(data.grid.grid_ids[j], data.grid_truth[j]);
    outs.write("grid_truth.csv", o.str());
  }
  write_manifest(outs, "synth", c);
  log << "synthetic data written to " << outs.dir() << "\n";
  return data;
}

// Layers the configuration for one command: manifest first, then the config
// file, then explicit (key, value) overrides.
inline RunConfig resolve_config(const std::string& command, const std::string& manifest_path,
                                const std::string& config_path,
                                const std::vector<std::pair<std::string, std::string>>& overrides) {
  RunConfig cfg;
  if (!manifest_path.empty()) {
    const auto run = load_manifest(manifest_path);
    if (run.command != command)
      throw ConfigError("manifest was written by '" + run.command + "', not '" + command + "'");
    cfg = run.config;
  }
  if (!config_path.empty()) cfg = load_config_file(config_path, cfg);
  for (const auto& [key, value] : overrides) set_config_value(cfg, key, value);
  return cfg;
}

// Dispatch by command name, used for manifest replays.
inline void run_command(const std::string& command, const RunConfig& c) {
  if (command == "tune-r") cmd_tune_r(c);
  else if (command == "tune-alpha") cmd_tune_alpha(c);
  else if (command == "tune-k") cmd_tune_k(c);
  else if (command == "cluster") cmd_cluster(c);
  else if (command == "predict") cmd_predict(c);
  else if (command == "stability") cmd_stability(c);
  else if (command == "report") cmd_report(c);
  else if (command == "pipeline") cmd_pipeline(c);
  else if (command == "synth") cmd_synth(c);
  else throw ConfigError("unknown command '" + command + "'");
}

}  // namespace bioprovince::cli
