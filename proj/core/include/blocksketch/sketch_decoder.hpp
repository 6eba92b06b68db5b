#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "blocksketch/structured_matrix.hpp"

namespace blocksketch {

// Base-station output: which clusters look active, how many devices each one
// holds, and which of a cluster's measurement rows were spoiled by other
// clusters hashing onto them.
struct BsDetection {
  std::vector<int> active_clusters;             // counts > 0, ascending
  std::vector<int> counts;                      // per cluster, length clusters
  std::vector<std::vector<int>> collided_rows;  // per cluster, global rows, stage order
  Eigen::VectorXd raw_estimates;                // per-cluster median estimate, kept for diagnostics
};

// Per-stage cluster estimates: entry (stage, cluster) is the sign-corrected
// observation at that cluster's hashed row. All in-cluster entries of the
// back-projected signal coincide by construction, so one value per
// (stage, cluster) carries everything.
Eigen::MatrixXd stage_estimates(const StructuredMatrix& m, const Eigen::VectorXd& y);

struct DecodeStats {
  std::uint64_t values_touched = 0;
};

// Median sketch decode. A cluster's count is the rounded median of its stage
// estimates divided by alpha^2; stages deviating from the median by more than
// `collision_threshold` are flagged as collided. Runs in O(stages * clusters).
BsDetection decode(const StructuredMatrix& m, const Eigen::VectorXd& y,
                   double collision_threshold, DecodeStats* stats = nullptr);

// Half a device-count quantum plus a 3-sigma noise allowance on the
// sign-corrected estimates (their noise std is alpha * sigma).
double default_collision_threshold(double alpha, double noise_sigma);

// Deterministic slot assignment: each detected cluster receives exactly
// `count` slot ids, numbered consecutively in cluster order starting at 1.
struct ResourceGrant {
  std::vector<std::vector<int>> cluster_slots;  // per cluster, empty when undetected
  int total = 0;
};

ResourceGrant resources_for(const BsDetection& detection);

// Broadcast record: one line per detected cluster, "cluster count rows...",
// 1-based indices.
void write_detection(std::ostream& out, const BsDetection& detection);
BsDetection read_detection(std::istream& in, int clusters);

}  // namespace blocksketch
