#include "blocksketch/channel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace blocksketch {

NoiseParams NoiseParams::from_sigma(double sigma) {
  if (sigma < 0.0) {
    throw std::invalid_argument("noise: sigma must be nonnegative");
  }
  NoiseParams n;
  n.sigma = sigma;
  return n;
}

NoiseParams NoiseParams::from_snr(double snr_db, const MatrixParams& m, int expected_active) {
  NoiseParams n;
  n.sigma = snr_to_sigma(snr_db, m, expected_active);
  n.snr_db = snr_db;
  return n;
}

double snr_to_sigma(double snr_db, const MatrixParams& m, int expected_active) {
  m.validate();
  if (expected_active < 1) {
    throw std::invalid_argument("snr_to_sigma: expected_active must be positive");
  }
  const double signal_power =
      m.alpha * m.alpha * static_cast<double>(expected_active) / m.rows_per_stage;
  return std::sqrt(signal_power / std::pow(10.0, snr_db / 10.0));
}

std::complex<double> ChannelRealization::uplink_gain(int stage, int device) const {
  SplitMix64 g(derive_seed(uplink_seed, static_cast<std::uint64_t>(stage),
                           static_cast<std::uint64_t>(device)));
  for (;;) {
    const std::complex<double> h = complex_gaussian(g);
    if (std::abs(h) >= magnitude_floor) return h;
    ++resamples;
  }
}

std::complex<double> ChannelRealization::crosslink_gain(int listener, int stage,
                                                        int device) const {
  SplitMix64 g(derive_seed(crosslink_seed, static_cast<std::uint64_t>(listener),
                           static_cast<std::uint64_t>(stage), static_cast<std::uint64_t>(device)));
  return complex_gaussian(g);
}

std::complex<double> ChannelRealization::effective_gain(int listener, int stage,
                                                        int device) const {
  return crosslink_gain(listener, stage, device) / uplink_gain(stage, device);
}

ChannelRealization sample_channels(const ModelParams& model, std::vector<int> listeners,
                                   double magnitude_floor, SplitMix64& rng) {
  model.validate();
  if (!(magnitude_floor > 0.0)) {
    throw std::invalid_argument("sample_channels: magnitude_floor must be positive");
  }
  for (int node : listeners) {
    if (node < 0 || node >= model.devices) {
      throw std::invalid_argument("sample_channels: listener index out of range");
    }
  }
  ChannelRealization ch;
  ch.model = model;
  ch.magnitude_floor = magnitude_floor;
  ch.listeners = std::move(listeners);
  ch.uplink_seed = rng();
  ch.crosslink_seed = rng();
  return ch;
}

int cluster_head(const ModelParams& model, int cluster) {
  if (cluster < 0 || cluster >= model.clusters) {
    throw std::out_of_range("cluster_head: cluster index out of range");
  }
  return cluster * model.cluster_size;
}

std::vector<int> listeners_for(const ActivationPattern& x, DuplexMode mode) {
  std::vector<int> nodes;
  if (mode == DuplexMode::full_duplex) {
    for (int c : x.active_clusters) {
      for (int off : x.cluster_actives[static_cast<std::size_t>(c)]) {
        nodes.push_back(x.device_index(c, off));
      }
    }
  } else {
    for (int c : x.active_clusters) {
      nodes.push_back(cluster_head(x.params, c));
    }
  }
  return nodes;
}

AcquisitionResult acquire(const StructuredMatrix& m, const ActivationPattern& x,
                          const ChannelRealization& ch, const NoiseParams& noise, DuplexMode mode,
                          SplitMix64& rng) {
  if (!x.params.same_shape(ch.model)) {
    throw std::invalid_argument("acquire: pattern and channel dimensions differ");
  }
  if (x.params.clusters != m.params().clusters ||
      x.params.cluster_size != m.params().cluster_size) {
    throw std::invalid_argument("acquire: pattern and matrix dimensions differ");
  }
  if (mode == DuplexMode::half_duplex) {
    for (int c : x.active_clusters) {
      if (x.is_active(cluster_head(x.params, c))) {
        throw std::invalid_argument("acquire: half-duplex cluster head is active in cluster " +
                                    std::to_string(c + 1));
      }
    }
  }

  const std::vector<int> nodes = listeners_for(x, mode);
  {
    std::unordered_set<int> available(ch.listeners.begin(), ch.listeners.end());
    for (int node : nodes) {
      if (!available.contains(node)) {
        throw std::invalid_argument("acquire: required listener missing from the realization");
      }
    }
  }

  const int measurements = m.params().measurements();
  const int stages = m.params().stages;
  const int cluster_size = m.params().cluster_size;
  const double sigma = noise.sigma;

  // Active (device, cluster) pairs, reused per listener below.
  std::vector<std::pair<int, int>> active;
  for (int c : x.active_clusters) {
    for (int off : x.cluster_actives[static_cast<std::size_t>(c)]) {
      active.emplace_back(x.device_index(c, off), c);
    }
  }

  AcquisitionResult out;
  out.bs_received = m.measure(x);
  if (sigma > 0.0) {
    for (int i = 0; i < measurements; ++i) {
      out.bs_received[i] += sigma * gaussian(rng);
    }
  }

  out.listeners.reserve(nodes.size());
  for (int node : nodes) {
    ListenerObservation obs;
    obs.listener = node;
    obs.cluster = node / cluster_size;
    obs.received = Eigen::VectorXcd::Zero(measurements);
    for (const auto& [device, cluster] : active) {
      for (int t = 0; t < stages; ++t) {
        obs.received[m.global_row(t, cluster)] +=
            ch.effective_gain(node, t, device) * m.sign_value(t, cluster);
      }
    }
    if (sigma > 0.0) {
      const double per_component = sigma * sigma;
      for (int i = 0; i < measurements; ++i) {
        obs.received[i] += complex_gaussian(rng, per_component);
      }
    }
    obs.cluster_gains.resize(stages, cluster_size);
    const int base = obs.cluster * cluster_size;
    for (int t = 0; t < stages; ++t) {
      for (int j = 0; j < cluster_size; ++j) {
        obs.cluster_gains(t, j) = ch.effective_gain(node, t, base + j);
      }
    }
    out.listeners.push_back(std::move(obs));
  }
  return out;
}

}  // namespace blocksketch
