#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "blocksketch/baselines.hpp"
#include "blocksketch/channel.hpp"
#include "blocksketch/model.hpp"

namespace blocksketch {

enum class Scheme { proposed, std_omp, lte_ra, cluster_head };

std::string to_string(Scheme s);
Scheme scheme_from_string(const std::string& name);

// Invalid configuration; the CLI maps this to exit code 1.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  // Network model. The activity knobs double as the model bounds: every trial
  // activates exactly `active_clusters` clusters with `active_per_cluster`
  // devices each (or up to that many under uniform sizing).
  int clusters = 20;
  int cluster_size = 20;
  int active_clusters = 3;
  int active_per_cluster = 3;
  InBlockSizing sizing = InBlockSizing::fixed;

  // Measurement matrix. Explicit values win; otherwise rows come from the
  // (active_clusters, theta) sizing rule and stages from delta, or from the
  // measurement budget when one is given.
  std::optional<int> rows_per_stage;
  std::optional<int> stages;
  double theta = 0.75;
  double delta = 0.05;
  std::optional<int> measurement_budget;
  double alpha = 1.0;

  // Channel and noise. Absent snr_db means noiseless.
  std::optional<double> snr_db;
  double magnitude_floor = 0.1;
  DuplexMode mode = DuplexMode::full_duplex;

  // Decoding.
  std::optional<double> collision_threshold;  // absent = derived default
  bool normalize_columns = true;
  bool refine = true;     // replacement sweeps after the greedy rounds
  bool self_seed = true;  // listeners condition on their own activity bit

  // Baselines.
  RaParams ra;
  int aggregation_overhead = 2;
  std::optional<double> omp_residual_tol;
  std::optional<int> omp_max_iterations;

  // Run control.
  int trials = 1000;
  std::uint64_t seed = 1;
  std::vector<Scheme> schemes = {Scheme::proposed};
  std::string sweep_var;  // "", "M", "K" or "snr_db"
  std::vector<double> sweep_values;
  int threads = 0;  // 0 = hardware concurrency

  void validate() const;  // throws ConfigError with a precise message
};

// Key-value text config: one `key = value` per line, '#' starts a comment.
// Unknown keys are errors.
ExperimentConfig load_config(std::istream& in);
ExperimentConfig load_config_file(const std::string& path);

// Applies one key to a config; shared by the file loader and CLI overrides.
void apply_config_key(ExperimentConfig& cfg, const std::string& key, const std::string& value);

// Parses "var=v1,v2,..." sweep descriptions.
void apply_sweep_spec(ExperimentConfig& cfg, const std::string& spec);

std::vector<Scheme> parse_scheme_list(const std::string& csv);

}  // namespace blocksketch
