#pragma once

#include <cstdint>
#include <vector>

#include "blocksketch/rng.hpp"

namespace blocksketch {

// Network dimensions and sparsity bounds. Devices are partitioned into
// `clusters` clusters of equal size `cluster_size`; at most
// `max_active_clusters` clusters hold active devices and each active cluster
// holds at most `max_active_per_cluster` of them.
struct ModelParams {
  int devices = 0;                 // clusters * cluster_size
  int clusters = 0;
  int cluster_size = 0;
  int max_active_clusters = 0;
  int max_active_per_cluster = 0;

  static ModelParams make(int clusters, int cluster_size, int max_active_clusters,
                          int max_active_per_cluster);

  // Throws std::invalid_argument on any violated bound.
  void validate() const;

  int total_active_bound() const { return max_active_clusters * max_active_per_cluster; }

  bool same_shape(const ModelParams& o) const {
    return devices == o.devices && clusters == o.clusters && cluster_size == o.cluster_size;
  }
};

// Ground-truth activation pattern: the binary activity vector over all
// devices together with its cluster-level support and the per-cluster device
// supports. The three views are kept consistent by construction. Device
// indices, cluster indices and in-cluster offsets are 0-based in code; text
// formats use 1-based indices.
struct ActivationPattern {
  ModelParams params;
  std::vector<std::uint8_t> bits;                 // length devices
  std::vector<int> active_clusters;               // ascending
  std::vector<std::vector<int>> cluster_actives;  // per cluster, ascending offsets

  // Builds a pattern from per-cluster offset lists, validating every bound.
  static ActivationPattern from_supports(const ModelParams& params,
                                         std::vector<std::vector<int>> per_cluster);

  bool is_active(int device) const { return bits[static_cast<std::size_t>(device)] != 0; }
  int cluster_of(int device) const { return device / params.cluster_size; }
  int offset_of(int device) const { return device % params.cluster_size; }
  int device_index(int cluster, int offset) const {
    return cluster * params.cluster_size + offset;
  }

  int popcount() const;
  std::vector<int> cluster_counts() const;  // active devices per cluster
};

enum class InBlockSizing {
  fixed,    // every active cluster holds exactly `active_per_cluster` devices
  uniform,  // uniform on {1, ..., active_per_cluster}
};

// Samples a pattern with exactly `active_clusters` active clusters chosen
// uniformly without replacement. `exclude_cluster_head` keeps the
// lowest-offset device of every cluster inactive so it can serve as a
// half-duplex listener.
ActivationPattern generate_pattern(const ModelParams& params, int active_clusters,
                                   int active_per_cluster, InBlockSizing sizing, SplitMix64& rng,
                                   bool exclude_cluster_head = false);

struct SupportDistance {
  int cluster_errors = 0;  // symmetric difference of cluster supports
  int bit_errors = 0;      // Hamming distance of the activity vectors
};

SupportDistance support_distance(const ActivationPattern& a, const ActivationPattern& b);

}  // namespace blocksketch
