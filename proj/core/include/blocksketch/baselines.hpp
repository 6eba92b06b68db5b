#pragma once

#include <Eigen/Dense>
#include <vector>

#include "blocksketch/model.hpp"
#include "blocksketch/rng.hpp"

namespace blocksketch {

// Dense i.i.d. Gaussian measurement matrix with entries N(0, 1/rows), the
// conventional reference ensemble for unstructured recovery.
struct GaussianMatrix {
  Eigen::MatrixXd entries;

  static GaussianMatrix sample(int rows, int cols, SplitMix64& rng);
  int rows() const { return static_cast<int>(entries.rows()); }
  int cols() const { return static_cast<int>(entries.cols()); }
};

struct OmpStop {
  double residual_tol = 0.0;  // stop once the residual norm drops to this
  int max_iterations = 0;
};

struct OmpResult {
  std::vector<int> support;  // ascending
  int iterations = 0;
};

// Classic greedy pursuit without structure or a known support size: iterates
// until the residual norm reaches the tolerance or the iteration cap.
OmpResult standard_omp(const Eigen::MatrixXd& a, const Eigen::VectorXd& y, const OmpStop& stop);

struct RaParams {
  int preambles = 64;
  int max_attempts = 10;
  int backoff_slots = 20;
};

struct RaOutcome {
  int successes = 0;                // devices that got through within max_attempts
  int first_attempt_successes = 0;  // devices whose first preamble was uncollided
  std::vector<int> delay_units;     // per device: round of success, or of the last failed attempt
  std::vector<std::uint8_t> succeeded;      // per device
  std::vector<std::uint8_t> first_attempt;  // per device: succeeded on the first try
};

// Slotted preamble contention: every active device draws a preamble uniformly
// per attempt; a uniquely drawn preamble succeeds, colliding devices retry
// after a uniform backoff of 1..backoff_slots rounds, up to max_attempts.
RaOutcome lte_ra_trial(int k_active, const RaParams& p, SplitMix64& rng);

// Aggregation baseline: only the head of each active cluster contends, with
// the cluster's members succeeding iff their head does. Every member pays a
// fixed intra-cluster aggregation overhead on top of the head's delay.
// Outcome entries are per active device, in ascending device order.
RaOutcome cluster_head_trial(const ActivationPattern& x, const RaParams& p,
                             int aggregation_overhead, SplitMix64& rng);

}  // namespace blocksketch
