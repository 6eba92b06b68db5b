#include "blocksketch/model.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>

namespace blocksketch {

ModelParams ModelParams::make(int clusters, int cluster_size, int max_active_clusters,
                              int max_active_per_cluster) {
  ModelParams p;
  p.clusters = clusters;
  p.cluster_size = cluster_size;
  p.devices = clusters * cluster_size;
  p.max_active_clusters = max_active_clusters;
  p.max_active_per_cluster = max_active_per_cluster;
  p.validate();
  return p;
}

void ModelParams::validate() const {
  if (clusters < 1 || cluster_size < 1) {
    throw std::invalid_argument("model: clusters and cluster_size must be positive");
  }
  if (devices != clusters * cluster_size) {
    throw std::invalid_argument("model: devices must equal clusters * cluster_size");
  }
  if (max_active_clusters < 1 || max_active_clusters > clusters) {
    throw std::invalid_argument("model: max_active_clusters must lie in [1, clusters]");
  }
  if (max_active_per_cluster < 1 || max_active_per_cluster > cluster_size) {
    throw std::invalid_argument("model: max_active_per_cluster must lie in [1, cluster_size]");
  }
}

ActivationPattern ActivationPattern::from_supports(const ModelParams& params,
                                                   std::vector<std::vector<int>> per_cluster) {
  params.validate();
  if (static_cast<int>(per_cluster.size()) != params.clusters) {
    throw std::invalid_argument("pattern: expected one offset list per cluster");
  }
  ActivationPattern x;
  x.params = params;
  x.bits.assign(static_cast<std::size_t>(params.devices), 0);
  x.cluster_actives.resize(per_cluster.size());
  int active = 0;
  for (int c = 0; c < params.clusters; ++c) {
    auto offsets = per_cluster[static_cast<std::size_t>(c)];
    std::sort(offsets.begin(), offsets.end());
    if (std::adjacent_find(offsets.begin(), offsets.end()) != offsets.end()) {
      throw std::invalid_argument("pattern: duplicate offset in cluster " + std::to_string(c + 1));
    }
    if (static_cast<int>(offsets.size()) > params.max_active_per_cluster) {
      throw std::invalid_argument("pattern: cluster " + std::to_string(c + 1) +
                                  " exceeds max_active_per_cluster");
    }
    for (int off : offsets) {
      if (off < 0 || off >= params.cluster_size) {
        throw std::invalid_argument("pattern: offset out of range in cluster " +
                                    std::to_string(c + 1));
      }
      x.bits[static_cast<std::size_t>(x.device_index(c, off))] = 1;
    }
    if (!offsets.empty()) {
      x.active_clusters.push_back(c);
      ++active;
    }
    x.cluster_actives[static_cast<std::size_t>(c)] = std::move(offsets);
  }
  if (active > params.max_active_clusters) {
    throw std::invalid_argument("pattern: active cluster count exceeds max_active_clusters");
  }
  return x;
}

int ActivationPattern::popcount() const {
  return static_cast<int>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

std::vector<int> ActivationPattern::cluster_counts() const {
  std::vector<int> counts(static_cast<std::size_t>(params.clusters), 0);
  for (int c = 0; c < params.clusters; ++c) {
    counts[static_cast<std::size_t>(c)] =
        static_cast<int>(cluster_actives[static_cast<std::size_t>(c)].size());
  }
  return counts;
}

namespace {

// k distinct values from [0, n) via partial Fisher-Yates, returned sorted.
std::vector<int> sample_without_replacement(int n, int k, SplitMix64& rng) {
  std::vector<int> pool(static_cast<std::size_t>(n));
  std::iota(pool.begin(), pool.end(), 0);
  for (int i = 0; i < k; ++i) {
    const int j = i + static_cast<int>(uniform_below(rng, static_cast<std::uint64_t>(n - i)));
    std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
  }
  pool.resize(static_cast<std::size_t>(k));
  std::sort(pool.begin(), pool.end());
  return pool;
}

}  // namespace

ActivationPattern generate_pattern(const ModelParams& params, int active_clusters,
                                   int active_per_cluster, InBlockSizing sizing, SplitMix64& rng,
                                   bool exclude_cluster_head) {
  params.validate();
  if (active_clusters < 0 || active_clusters > params.clusters) {
    throw std::invalid_argument("generate_pattern: active_clusters exceeds cluster count");
  }
  if (active_clusters > params.max_active_clusters) {
    throw std::invalid_argument("generate_pattern: active_clusters exceeds model bound");
  }
  if (active_per_cluster > params.cluster_size) {
    throw std::invalid_argument("generate_pattern: active_per_cluster exceeds cluster size");
  }
  if (active_per_cluster > params.max_active_per_cluster) {
    throw std::invalid_argument("generate_pattern: active_per_cluster exceeds model bound");
  }
  const int eligible = params.cluster_size - (exclude_cluster_head ? 1 : 0);
  if (active_clusters > 0 && (active_per_cluster < 1 || active_per_cluster > eligible)) {
    throw std::invalid_argument(
        "generate_pattern: active_per_cluster out of range for eligible devices");
  }

  std::vector<std::vector<int>> per_cluster(static_cast<std::size_t>(params.clusters));
  const std::vector<int> chosen = sample_without_replacement(params.clusters, active_clusters, rng);
  for (int c : chosen) {
    const int size = sizing == InBlockSizing::fixed
                         ? active_per_cluster
                         : uniform_int(rng, 1, active_per_cluster);
    std::vector<int> offsets = sample_without_replacement(eligible, size, rng);
    if (exclude_cluster_head) {
      for (int& off : offsets) ++off;  // offset 0 is the head
    }
    per_cluster[static_cast<std::size_t>(c)] = std::move(offsets);
  }
  return ActivationPattern::from_supports(params, std::move(per_cluster));
}

SupportDistance support_distance(const ActivationPattern& a, const ActivationPattern& b) {
  if (!a.params.same_shape(b.params)) {
    throw std::invalid_argument("support_distance: mismatched model dimensions");
  }
  SupportDistance d;
  std::vector<int> sym;
  std::set_symmetric_difference(a.active_clusters.begin(), a.active_clusters.end(),
                                b.active_clusters.begin(), b.active_clusters.end(),
                                std::back_inserter(sym));
  d.cluster_errors = static_cast<int>(sym.size());
  for (std::size_t i = 0; i < a.bits.size(); ++i) {
    d.bit_errors += a.bits[i] != b.bits[i];
  }
  return d;
}

}  // namespace blocksketch
