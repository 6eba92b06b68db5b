#include "blocksketch/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>
#include <unordered_map>

#include "blocksketch/baselines.hpp"
#include "blocksketch/channel.hpp"
#include "blocksketch/omp_decoder.hpp"
#include "blocksketch/sketch_decoder.hpp"

namespace blocksketch {

int sweep_point_count(const ExperimentConfig& cfg) {
  return cfg.sweep_var.empty() ? 1 : static_cast<int>(cfg.sweep_values.size());
}

ResolvedPoint resolve_point(const ExperimentConfig& cfg, int sweep_index) {
  cfg.validate();
  if (sweep_index < 0 || sweep_index >= sweep_point_count(cfg)) {
    throw ConfigError("sweep index out of range");
  }

  int k_clusters = cfg.active_clusters;
  std::optional<int> budget = cfg.measurement_budget;
  std::optional<double> snr = cfg.snr_db;
  double sweep_value = 0.0;

  if (!cfg.sweep_var.empty()) {
    sweep_value = cfg.sweep_values[static_cast<std::size_t>(sweep_index)];
    if (cfg.sweep_var == "K") {
      k_clusters = static_cast<int>(sweep_value) / cfg.active_per_cluster;
    } else if (cfg.sweep_var == "M") {
      budget = static_cast<int>(sweep_value);
    } else if (cfg.sweep_var == "snr_db") {
      snr = sweep_value;
    }
  }

  ResolvedPoint pt;
  pt.sweep_value = sweep_value;
  pt.active_clusters = k_clusters;
  pt.active_per_cluster = cfg.active_per_cluster;
  pt.model = ModelParams::make(cfg.clusters, cfg.cluster_size, k_clusters, cfg.active_per_cluster);

  const int rows = cfg.rows_per_stage
                       ? *cfg.rows_per_stage
                       : MatrixParams::min_rows_per_stage(k_clusters, cfg.theta);
  int stages = 0;
  if (cfg.sweep_var == "M") {
    stages = *budget / rows;
  } else if (cfg.stages) {
    stages = *cfg.stages;
  } else if (budget) {
    stages = *budget / rows;
  } else {
    stages = MatrixParams::min_stages(cfg.clusters, cfg.cluster_size, cfg.delta);
  }
  if (stages < 1) {
    throw ConfigError("measurement budget " + std::to_string(budget.value_or(0)) +
                      " cannot fit a single stage of " + std::to_string(rows) + " rows");
  }
  pt.matrix =
      MatrixParams{rows, stages, cfg.clusters, cfg.cluster_size, cfg.alpha};
  pt.matrix.validate();

  const int expected_active = k_clusters * cfg.active_per_cluster;
  pt.noise = snr ? NoiseParams::from_snr(*snr, pt.matrix, expected_active) : NoiseParams::none();
  pt.collision_threshold = cfg.collision_threshold
                               ? *cfg.collision_threshold
                               : default_collision_threshold(cfg.alpha, pt.noise.sigma);
  return pt;
}

namespace {

// Access delay of the sketch scheme in protocol rounds: signature round,
// broadcast round, granted transmission. Half-duplex adds the head's relay of
// the in-cluster ranking.
int proposed_delay_rounds(DuplexMode mode) {
  return mode == DuplexMode::full_duplex ? 3 : 4;
}

double elapsed_ms(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
      .count();
}

}  // namespace

TrialRecord run_proposed_trial(const ResolvedPoint& pt, const ExperimentConfig& cfg,
                               std::uint64_t trial_seed) {
  const auto start = std::chrono::steady_clock::now();
  TrialRecord rec;
  SplitMix64 rng(trial_seed);

  const bool half = cfg.mode == DuplexMode::half_duplex;
  const ActivationPattern pattern = generate_pattern(
      pt.model, pt.active_clusters, pt.active_per_cluster, cfg.sizing, rng, half);
  const StructuredMatrix matrix = StructuredMatrix::sample(pt.matrix, rng);
  const ChannelRealization ch =
      sample_channels(pt.model, listeners_for(pattern, cfg.mode), cfg.magnitude_floor, rng);
  const AcquisitionResult acq = acquire(matrix, pattern, ch, pt.noise, cfg.mode, rng);

  const BsDetection det = decode(matrix, acq.bs_received, pt.collision_threshold);
  const ResourceGrant grant = resources_for(det);

  rec.active_devices = pattern.popcount();
  rec.block_detection_exact =
      det.active_clusters == pattern.active_clusters && det.counts == pattern.cluster_counts();

  bool decodes_exact = true;
  std::unordered_map<int, int> slot_claims;
  std::vector<int> claimed_slots;  // per claiming device, aligned with devices below

  for (const ListenerObservation& obs : acq.listeners) {
    const int c = obs.cluster;
    if (det.counts[static_cast<std::size_t>(c)] == 0) {
      decodes_exact = false;  // cluster missed by the base station
      continue;
    }
    InBlockDetection in;
    try {
      DeviceSideProblem prob = build_problem(matrix, obs.cluster_gains, obs.received, c, det);
      prob.noise_floor =
          pt.noise.sigma *
          std::sqrt(std::max(1.0, static_cast<double>(prob.effective_rows.size()) -
                                      prob.target_size));
      if (cfg.self_seed) {
        if (half) {
          prob.known_inactive = pattern.offset_of(obs.listener);  // the head stays silent
        } else {
          prob.known_active = pattern.offset_of(obs.listener);
        }
      }
      RefineOptions refine;
      refine.enabled = cfg.refine;
      in = modified_omp(prob, cfg.normalize_columns, refine);
    } catch (const std::runtime_error&) {
      decodes_exact = false;  // every row discarded: the cluster cannot decode
      continue;
    }
    rec.total_iterations += in.iterations;
    rec.decodes += 1;
    rec.iteration_counts[in.iterations] += 1;
    if (in.support != pattern.cluster_actives[static_cast<std::size_t>(c)]) {
      decodes_exact = false;
    }

    const auto& slots = grant.cluster_slots[static_cast<std::size_t>(c)];
    const auto claim = [&](int offset) {
      const int rank = in.rank_of(offset);
      if (rank < 0 || rank >= static_cast<int>(slots.size())) return;
      const int slot = slots[static_cast<std::size_t>(rank)];
      ++slot_claims[slot];
      claimed_slots.push_back(slot);
    };
    if (half) {
      // The head decodes once for every member of its cluster.
      for (int offset : pattern.cluster_actives[static_cast<std::size_t>(c)]) {
        claim(offset);
      }
    } else {
      claim(pattern.offset_of(obs.listener));
    }
  }

  for (int slot : claimed_slots) {
    if (slot_claims[slot] == 1) ++rec.device_successes;
  }
  rec.full_pattern_exact = rec.block_detection_exact && decodes_exact;
  rec.delay_total =
      static_cast<double>(rec.active_devices) * proposed_delay_rounds(cfg.mode);
  rec.wall_ms = elapsed_ms(start);
  return rec;
}

TrialRecord run_std_omp_trial(const ResolvedPoint& pt, const ExperimentConfig& cfg,
                              std::uint64_t trial_seed) {
  const auto start = std::chrono::steady_clock::now();
  TrialRecord rec;
  SplitMix64 rng(trial_seed);

  const bool half = cfg.mode == DuplexMode::half_duplex;
  const ActivationPattern pattern = generate_pattern(
      pt.model, pt.active_clusters, pt.active_per_cluster, cfg.sizing, rng, half);
  const int measurements = pt.matrix.measurements();
  const GaussianMatrix g = GaussianMatrix::sample(measurements, pt.model.devices, rng);

  std::vector<int> truth;
  Eigen::VectorXd y = Eigen::VectorXd::Zero(measurements);
  for (int c : pattern.active_clusters) {
    for (int off : pattern.cluster_actives[static_cast<std::size_t>(c)]) {
      const int device = pattern.device_index(c, off);
      truth.push_back(device);
      y += g.entries.col(device);
    }
  }

  // Reference power of the unit-norm-column ensemble is popcount/measurements
  // per component; sigma matches the configured SNR under that convention.
  double sigma = 0.0;
  if (pt.noise.snr_db) {
    const double k = static_cast<double>(pt.active_clusters) * pt.active_per_cluster;
    sigma = std::sqrt(k / (measurements * std::pow(10.0, *pt.noise.snr_db / 10.0)));
  }
  if (sigma > 0.0) {
    for (int i = 0; i < measurements; ++i) {
      y[i] += sigma * gaussian(rng);
    }
  }

  OmpStop stop;
  stop.residual_tol = cfg.omp_residual_tol
                          ? *cfg.omp_residual_tol
                          : (sigma > 0.0 ? sigma * std::sqrt(static_cast<double>(measurements))
                                         : 1e-9 * y.norm());
  stop.max_iterations =
      cfg.omp_max_iterations ? *cfg.omp_max_iterations
                             : 2 * pt.active_clusters * pt.active_per_cluster;

  const OmpResult res = standard_omp(g.entries, y, stop);

  rec.active_devices = static_cast<int>(truth.size());
  rec.full_pattern_exact = res.support == truth;
  std::vector<int> est_clusters;
  for (int device : res.support) {
    const int c = device / pt.model.cluster_size;
    if (est_clusters.empty() || est_clusters.back() != c) est_clusters.push_back(c);
  }
  est_clusters.erase(std::unique(est_clusters.begin(), est_clusters.end()), est_clusters.end());
  rec.block_detection_exact = est_clusters == pattern.active_clusters;
  for (int device : truth) {
    rec.device_successes +=
        std::binary_search(res.support.begin(), res.support.end(), device) ? 1 : 0;
  }
  rec.total_iterations = res.iterations;
  rec.decodes = 1;
  rec.iteration_counts[res.iterations] = 1;
  rec.delay_total = 3.0 * rec.active_devices;
  rec.wall_ms = elapsed_ms(start);
  return rec;
}

TrialRecord run_lte_ra_trial(const ResolvedPoint& pt, const ExperimentConfig& cfg,
                             std::uint64_t trial_seed) {
  const auto start = std::chrono::steady_clock::now();
  TrialRecord rec;
  SplitMix64 rng(trial_seed);

  const bool half = cfg.mode == DuplexMode::half_duplex;
  const ActivationPattern pattern = generate_pattern(
      pt.model, pt.active_clusters, pt.active_per_cluster, cfg.sizing, rng, half);
  const int k = pattern.popcount();
  const RaOutcome out = lte_ra_trial(k, cfg.ra, rng);

  // Detection counts first-attempt successes (a collided preamble is a failed
  // detection); the delay accounts for the retry process.
  rec.active_devices = k;
  rec.device_successes = out.first_attempt_successes;
  rec.full_pattern_exact = out.first_attempt_successes == k;
  rec.block_detection_exact = rec.full_pattern_exact;
  for (int d : out.delay_units) rec.delay_total += d;
  rec.wall_ms = elapsed_ms(start);
  return rec;
}

TrialRecord run_cluster_head_trial(const ResolvedPoint& pt, const ExperimentConfig& cfg,
                                   std::uint64_t trial_seed) {
  const auto start = std::chrono::steady_clock::now();
  TrialRecord rec;
  SplitMix64 rng(trial_seed);

  const bool half = cfg.mode == DuplexMode::half_duplex;
  const ActivationPattern pattern = generate_pattern(
      pt.model, pt.active_clusters, pt.active_per_cluster, cfg.sizing, rng, half);
  const RaOutcome out = cluster_head_trial(pattern, cfg.ra, cfg.aggregation_overhead, rng);

  rec.active_devices = pattern.popcount();
  rec.device_successes = out.first_attempt_successes;
  rec.full_pattern_exact = out.first_attempt_successes == rec.active_devices;
  rec.block_detection_exact = rec.full_pattern_exact;
  for (int d : out.delay_units) rec.delay_total += d;
  rec.wall_ms = elapsed_ms(start);
  return rec;
}

namespace {

TrialRecord run_scheme_trial(Scheme scheme, const ResolvedPoint& pt, const ExperimentConfig& cfg,
                             std::uint64_t trial_seed) {
  switch (scheme) {
    case Scheme::proposed: return run_proposed_trial(pt, cfg, trial_seed);
    case Scheme::std_omp: return run_std_omp_trial(pt, cfg, trial_seed);
    case Scheme::lte_ra: return run_lte_ra_trial(pt, cfg, trial_seed);
    case Scheme::cluster_head: return run_cluster_head_trial(pt, cfg, trial_seed);
  }
  throw std::logic_error("unreachable scheme");
}

}  // namespace

void parallel_for(long n, int workers, const std::function<void(long)>& body) {
  if (n <= 0) return;
  workers = std::max(1, std::min(workers, static_cast<int>(std::min<long>(n, 1024))));
  if (workers == 1) {
    for (long i = 0; i < n; ++i) body(i);
    return;
  }
  std::mutex error_mutex;
  std::exception_ptr first_error;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (long i = w; i < n; i += workers) {
          body(i);
        }
      } catch (...) {
        const std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (std::thread& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

std::vector<TrialRecord> run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const int points = sweep_point_count(cfg);
  const int n_schemes = static_cast<int>(cfg.schemes.size());

  std::vector<ResolvedPoint> resolved;
  resolved.reserve(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i) {
    resolved.push_back(resolve_point(cfg, i));
  }

  const long tasks = static_cast<long>(points) * cfg.trials;
  std::vector<TrialRecord> records(static_cast<std::size_t>(tasks) *
                                   static_cast<std::size_t>(n_schemes));
  const int workers =
      cfg.threads > 0 ? cfg.threads
                      : std::max(1, static_cast<int>(std::thread::hardware_concurrency()));

  parallel_for(tasks, workers, [&](long task) {
    const int point = static_cast<int>(task / cfg.trials);
    const int trial = static_cast<int>(task % cfg.trials);
    const ResolvedPoint& pt = resolved[static_cast<std::size_t>(point)];
    for (int s = 0; s < n_schemes; ++s) {
      const Scheme scheme = cfg.schemes[static_cast<std::size_t>(s)];
      const std::uint64_t seed =
          derive_seed(cfg.seed, static_cast<std::uint64_t>(point),
                      static_cast<std::uint64_t>(trial), 1 + static_cast<std::uint64_t>(scheme));
      TrialRecord rec = run_scheme_trial(scheme, pt, cfg, seed);
      rec.scheme = scheme;
      rec.sweep_index = point;
      rec.sweep_value = pt.sweep_value;
      rec.trial = trial;
      records[static_cast<std::size_t>(task) * static_cast<std::size_t>(n_schemes) +
              static_cast<std::size_t>(s)] = rec;
    }
  });
  return records;
}

WilsonInterval wilson_interval(double p_hat, long n) {
  if (n <= 0) return {0.0, 1.0};
  constexpr double z = 1.959963984540054;  // 97.5% normal quantile
  const double z2 = z * z;
  const double denom = 1.0 + z2 / static_cast<double>(n);
  const double center = (p_hat + z2 / (2.0 * static_cast<double>(n))) / denom;
  const double spread =
      z *
      std::sqrt(p_hat * (1.0 - p_hat) / static_cast<double>(n) +
                z2 / (4.0 * static_cast<double>(n) * static_cast<double>(n))) /
      denom;
  return {std::max(0.0, center - spread), std::min(1.0, center + spread)};
}

std::vector<SweepSummary> summarize(const ExperimentConfig& cfg,
                                    const std::vector<TrialRecord>& records) {
  if (records.empty()) {
    throw std::invalid_argument("summarize: no records");
  }

  struct Accumulator {
    long trials = 0;
    long full = 0;
    long long successes = 0;
    long long active = 0;
    long long iterations = 0;
    long long decodes = 0;
    std::map<int, long> iteration_counts;
    double delay = 0.0;
    double sweep_value = 0.0;
    bool seen = false;
  };

  const auto scheme_order = [&](Scheme s) {
    const auto it = std::find(cfg.schemes.begin(), cfg.schemes.end(), s);
    if (it != cfg.schemes.end()) return static_cast<int>(it - cfg.schemes.begin());
    return static_cast<int>(cfg.schemes.size()) + static_cast<int>(s);
  };

  std::map<std::pair<int, int>, std::pair<Scheme, Accumulator>> groups;
  for (const TrialRecord& rec : records) {
    auto& entry = groups[{rec.sweep_index, scheme_order(rec.scheme)}];
    entry.first = rec.scheme;
    Accumulator& acc = entry.second;
    acc.trials += 1;
    acc.full += rec.full_pattern_exact ? 1 : 0;
    acc.successes += rec.device_successes;
    acc.active += rec.active_devices;
    acc.iterations += rec.total_iterations;
    acc.decodes += rec.decodes;
    for (const auto& [iters, count] : rec.iteration_counts) {
      acc.iteration_counts[iters] += count;
    }
    acc.delay += rec.delay_total;
    acc.sweep_value = rec.sweep_value;
    acc.seen = true;
  }

  std::vector<SweepSummary> out;
  out.reserve(groups.size());
  for (const auto& [key, entry] : groups) {
    const Accumulator& acc = entry.second;
    SweepSummary s;
    s.sweep_var = cfg.sweep_var.empty() ? "none" : cfg.sweep_var;
    s.sweep_value = acc.sweep_value;
    s.scheme = entry.first;
    s.trials = static_cast<int>(acc.trials);
    s.det_prob_full = static_cast<double>(acc.full) / static_cast<double>(acc.trials);
    s.det_prob_device = acc.active > 0 ? static_cast<double>(acc.successes) /
                                             static_cast<double>(acc.active)
                                       : 1.0;
    s.ci_half = wilson_interval(s.det_prob_full, acc.trials).half_width();
    s.mean_iters = acc.decodes > 0 ? static_cast<double>(acc.iterations) /
                                         static_cast<double>(acc.decodes)
                                   : 0.0;
    s.mean_delay =
        acc.active > 0 ? acc.delay / static_cast<double>(acc.active) : 0.0;
    s.iteration_counts = acc.iteration_counts;
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<std::pair<int, double>> iteration_cdf(const SweepSummary& summary) {
  long total = 0;
  for (const auto& [iters, count] : summary.iteration_counts) total += count;
  std::vector<std::pair<int, double>> points;
  if (total == 0) return points;
  long running = 0;
  for (const auto& [iters, count] : summary.iteration_counts) {
    running += count;
    points.emplace_back(iters, static_cast<double>(running) / static_cast<double>(total));
  }
  return points;
}

void write_csv(std::ostream& out, const std::vector<SweepSummary>& summaries) {
  out << "sweep_var,sweep_value,scheme,det_prob_full,det_prob_device,ci_half,mean_iters,mean_"
         "delay,trials\n";
  char line[320];
  for (const SweepSummary& s : summaries) {
    std::snprintf(line, sizeof(line), "%s,%.10g,%s,%.6f,%.6f,%.6f,%.6f,%.6f,%d\n",
                  s.sweep_var.c_str(), s.sweep_value, to_string(s.scheme).c_str(), s.det_prob_full,
                  s.det_prob_device, s.ci_half, s.mean_iters, s.mean_delay, s.trials);
    out << line;
  }
}

std::string to_csv(const std::vector<SweepSummary>& summaries) {
  std::ostringstream out;
  write_csv(out, summaries);
  return out.str();
}

}  // namespace blocksketch
