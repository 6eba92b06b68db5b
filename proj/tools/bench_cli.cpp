// Monte-Carlo driver for the sketch-based device detection schemes: runs
// parameter sweeps over seeded trials and emits one CSV row of aggregates per
// (sweep point, scheme).

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "blocksketch/config.hpp"
#include "blocksketch/experiment.hpp"

namespace {

struct CliOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> trials;
  std::string out_path = "-";
  std::string schemes;
  std::string sweep;
  std::string mode;
  std::optional<double> collision_threshold;
  bool no_normalize = false;
  bool no_refine = false;
  std::optional<int> threads;
  std::optional<double> snr_db;
  bool noiseless = false;
};

int run(const CliOptions& opt) {
  blocksketch::ExperimentConfig cfg;
  if (!opt.config_path.empty()) {
    cfg = blocksketch::load_config_file(opt.config_path);
  }
  if (opt.seed) cfg.seed = *opt.seed;
  if (opt.trials) cfg.trials = *opt.trials;
  if (!opt.schemes.empty()) cfg.schemes = blocksketch::parse_scheme_list(opt.schemes);
  if (!opt.sweep.empty()) blocksketch::apply_sweep_spec(cfg, opt.sweep);
  if (!opt.mode.empty()) blocksketch::apply_config_key(cfg, "mode", opt.mode);
  if (opt.collision_threshold) cfg.collision_threshold = *opt.collision_threshold;
  if (opt.no_normalize) cfg.normalize_columns = false;
  if (opt.no_refine) cfg.refine = false;
  if (opt.threads) cfg.threads = *opt.threads;
  if (opt.noiseless) cfg.snr_db.reset();
  if (opt.snr_db) cfg.snr_db = *opt.snr_db;
  cfg.validate();

  const auto records = blocksketch::run_experiment(cfg);
  const auto summaries = blocksketch::summarize(cfg, records);

  if (opt.out_path == "-") {
    blocksketch::write_csv(std::cout, summaries);
  } else {
    std::ofstream out(opt.out_path, std::ios::binary);
    if (!out) {
      throw std::runtime_error("cannot open output file '" + opt.out_path + "'");
    }
    blocksketch::write_csv(out, summaries);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monte-Carlo harness for sketch-based device detection"};
  CliOptions opt;

  app.add_option("--config", opt.config_path, "Key-value config file");
  app.add_option("--seed", opt.seed, "Master seed");
  app.add_option("--trials", opt.trials, "Trials per sweep point");
  app.add_option("--out", opt.out_path, "CSV output path, '-' for stdout")
      ->capture_default_str();
  app.add_option("--schemes", opt.schemes,
                 "Comma list of proposed,std_omp,lte_ra,cluster_head");
  app.add_option("--sweep", opt.sweep, "Sweep spec, e.g. K=10,20,50 or M=200,400");
  app.add_option("--mode", opt.mode, "full_duplex or half_duplex");
  app.add_option("--collision-threshold", opt.collision_threshold,
                 "Stage deviation flagged as collided");
  app.add_flag("--no-normalize", opt.no_normalize,
               "Correlate against raw columns instead of unit-norm columns");
  app.add_flag("--no-refine", opt.no_refine,
               "Skip the replacement sweeps after the greedy rounds");
  app.add_option("--threads", opt.threads, "Worker pool size, 0 = hardware");
  app.add_option("--snr-db", opt.snr_db, "Channel SNR in dB");
  app.add_flag("--noiseless", opt.noiseless, "Disable channel noise");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    return run(opt);
  } catch (const blocksketch::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
