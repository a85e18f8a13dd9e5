// bioprovince: command-line driver for tuning, clustering, province
// prediction, stability and reports.

#include <CLI11.hpp>

#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "bioprovince/cli.hpp"

namespace {

using bioprovince::cli::RunConfig;

// Every flag maps onto the config key of the same name ('-' becomes '_').
const std::vector<std::pair<std::string, std::string>> kFlags{
    {"composition", "composition CSV (sample_id,<asv>...)"},
    {"meta", "sample meta CSV"},
    {"grid", "grid CSV (grid_id,latitude,depth,temperature,salinity)"},
    {"group-map", "ASV group CSV (asv_id,group)"},
    {"external-labels", "external province CSV (sample_id,external_province)"},
    {"r", "latitude-to-depth scale, meters per degree"},
    {"alpha", "spatial weight of the mixed distance, in [0, 1]"},
    {"K", "number of clusters"},
    {"k", "nearest-neighbor count"},
    {"zero-policy", "multiplicative | pseudocount:<value>"},
    {"input-kind", "auto | counts | fractions"},
    {"lat-window", "latitude window for r tuning, degrees"},
    {"depth-window", "depth window for r tuning, meters"},
    {"p-threshold", "significance level for slopes"},
    {"weighting", "cruise weights for r tuning: pairs | samples"},
    {"L", "replicates for the alpha curve"},
    {"alphas", "comma-separated alpha grid"},
    {"Ks", "comma-separated K candidates"},
    {"replicates", "stability replicates"},
    {"fraction", "ASV subsample fraction"},
    {"seed", "random seed"},
    {"rescale", "abiotic rescaling reference: union | samples"},
    {"out", "output directory"},
    {"synth-provinces", "synthetic provinces"},
    {"synth-samples", "synthetic samples"},
    {"synth-asvs", "synthetic ASVs"},
    {"synth-grid", "synthetic grid points"},
    {"synth-cruises", "synthetic cruises"},
    {"synth-noise", "synthetic clr noise"},
};

struct Sub {
  CLI::App* app = nullptr;
  std::string config_path;
  std::string manifest_path;
  std::map<std::string, std::string> values;
};

std::string key_of(std::string flag) {
  for (auto& ch : flag)
    if (ch == '-') ch = '_';
  return flag;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Biological province clustering on latitude-depth sections"};
  app.require_subcommand(1);

  const std::vector<std::pair<std::string, std::string>> commands{
      {"tune-r", "estimate r from within-cruise distance decay"},
      {"tune-alpha", "saturation-score curve for alpha"},
      {"tune-k", "within-cluster distance curve for K"},
      {"cluster", "cluster samples on the mixed distance"},
      {"predict", "predict provinces on the grid"},
      {"stability", "province stability under ASV subsampling"},
      {"report", "cross-tabulation, mean compositions, cruise homogeneity"},
      {"synth", "write a planted synthetic dataset"},
      {"pipeline", "cluster, predict and report at fixed hyperparameters"},
  };
  std::vector<Sub> subs(commands.size());
  for (std::size_t i = 0; i < commands.size(); ++i) {
    auto& s = subs[i];
    s.app = app.add_subcommand(commands[i].first, commands[i].second);
    s.app->add_option("--config", s.config_path, "key = value config file");
    s.app->add_option("--from-manifest", s.manifest_path, "replay the configuration of a manifest");
    for (const auto& [flag, help] : kFlags) s.app->add_option("--" + flag, s.values[flag], help);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    for (std::size_t i = 0; i < subs.size(); ++i) {
      auto& s = subs[i];
      if (!s.app->parsed()) continue;
      const std::string command = commands[i].first;
      std::vector<std::pair<std::string, std::string>> overrides;
      for (const auto& [flag, help] : kFlags)
        if (s.app->count("--" + flag) > 0) overrides.emplace_back(key_of(flag), s.values[flag]);
      const RunConfig cfg =
          bioprovince::cli::resolve_config(command, s.manifest_path, s.config_path, overrides);
      bioprovince::cli::run_command(command, cfg);
    }
  } catch (const bioprovince::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(bioprovince::ErrorKind::numerical);
  }
  return 0;
}
