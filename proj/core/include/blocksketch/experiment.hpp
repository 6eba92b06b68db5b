#pragma once

#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "blocksketch/config.hpp"
#include "blocksketch/structured_matrix.hpp"

namespace blocksketch {

struct TrialRecord {
  Scheme scheme = Scheme::proposed;
  int sweep_index = 0;
  double sweep_value = 0.0;
  int trial = 0;
  bool block_detection_exact = false;  // cluster support and counts both exact
  bool full_pattern_exact = false;     // every device bit recovered
  int active_devices = 0;
  int device_successes = 0;   // devices whose own activity got through
  long total_iterations = 0;  // summed over in-cluster decodes
  int decodes = 0;
  std::map<int, int> iteration_counts;  // decodes per iteration count
  double delay_total = 0.0;  // summed per-device access delay, in protocol rounds
  double wall_ms = 0.0;
};

// Concrete parameters of one sweep point after applying the sweep variable
// and the sizing rules.
struct ResolvedPoint {
  ModelParams model;
  MatrixParams matrix;
  NoiseParams noise;
  int active_clusters = 0;
  int active_per_cluster = 0;
  double collision_threshold = 0.0;
  double sweep_value = 0.0;
};

int sweep_point_count(const ExperimentConfig& cfg);
ResolvedPoint resolve_point(const ExperimentConfig& cfg, int sweep_index);

// Runs every (sweep point, trial, scheme) combination. Trials execute on a
// bounded worker pool; records come back in deterministic
// (sweep point, trial, scheme) order no matter how many workers ran.
std::vector<TrialRecord> run_experiment(const ExperimentConfig& cfg);

// Single-trial runners behind run_experiment, exposed for tests and the
// acceptance suite. The trial seed fully determines the outcome.
TrialRecord run_proposed_trial(const ResolvedPoint& pt, const ExperimentConfig& cfg,
                               std::uint64_t trial_seed);
TrialRecord run_std_omp_trial(const ResolvedPoint& pt, const ExperimentConfig& cfg,
                              std::uint64_t trial_seed);
TrialRecord run_lte_ra_trial(const ResolvedPoint& pt, const ExperimentConfig& cfg,
                             std::uint64_t trial_seed);
TrialRecord run_cluster_head_trial(const ResolvedPoint& pt, const ExperimentConfig& cfg,
                                   std::uint64_t trial_seed);

struct SweepSummary {
  std::string sweep_var;
  double sweep_value = 0.0;
  Scheme scheme = Scheme::proposed;
  double det_prob_full = 0.0;    // fraction of trials recovering the whole pattern
  double det_prob_device = 0.0;  // fraction of active devices that got through
  double ci_half = 0.0;          // Wilson 95% half-width on det_prob_full
  double mean_iters = 0.0;       // per in-cluster decode
  double mean_delay = 0.0;       // per active device, protocol rounds
  int trials = 0;
  std::map<int, long> iteration_counts;  // decode counts per iteration count
};

// Empirical distribution of per-decode iteration counts: (iterations,
// cumulative fraction) points, nondecreasing and ending at one.
std::vector<std::pair<int, double>> iteration_cdf(const SweepSummary& summary);

std::vector<SweepSummary> summarize(const ExperimentConfig& cfg,
                                    const std::vector<TrialRecord>& records);

void write_csv(std::ostream& out, const std::vector<SweepSummary>& summaries);
std::string to_csv(const std::vector<SweepSummary>& summaries);

struct WilsonInterval {
  double lo = 0.0;
  double hi = 0.0;
  double half_width() const { return 0.5 * (hi - lo); }
};

// 95% Wilson score interval for a binomial proportion.
WilsonInterval wilson_interval(double p_hat, long n);

// Deterministic index-striped parallel loop used by the driver; exposed so
// the acceptance suite can reuse it.
void parallel_for(long n, int workers, const std::function<void(long)>& body);

}  // namespace blocksketch
