#pragma once

#include <Eigen/Dense>
#include <complex>
#include <optional>
#include <vector>

#include "blocksketch/model.hpp"
#include "blocksketch/rng.hpp"
#include "blocksketch/structured_matrix.hpp"

namespace blocksketch {

struct NoiseParams {
  double sigma = 0.0;  // base-station noise std per real component; device noise E|e|^2 = sigma^2
  std::optional<double> snr_db;  // how sigma was derived, when it was

  bool noiseless() const { return sigma == 0.0; }

  static NoiseParams none() { return {}; }
  static NoiseParams from_sigma(double sigma);
  static NoiseParams from_snr(double snr_db, const MatrixParams& m, int expected_active);
};

// Noise std for a target SNR. Convention: the reference signal power is the
// per-component mean power of a noiseless observation with `expected_active`
// devices active in distinct clusters, i.e. alpha^2 * expected_active /
// rows_per_stage, so sigma^2 = alpha^2 * expected_active /
// (rows_per_stage * 10^(snr_db / 10)).
double snr_to_sigma(double snr_db, const MatrixParams& m, int expected_active);

// One fading realization. Gains are i.i.d. unit-variance circularly symmetric
// complex normals, independent per (stage, device) pair: each sketch stage is
// a separate channel use, so the effective device-side matrix has independent
// entries row by row. Uplink gains are resampled until their magnitude
// clears `magnitude_floor` (devices below the floor stay offline, so the
// floor never binds for a transmitting device).
//
// Gains are derived lazily from the stored seeds; nothing of size
// devices * stages is ever materialized per listener. The resample counter
// makes the lazy accessors non-reentrant: share a realization across threads
// only through values copied out of it (acquire() does exactly that).
struct ChannelRealization {
  ModelParams model;
  double magnitude_floor = 0.0;
  std::vector<int> listeners;  // global device indices allowed to decode
  std::uint64_t uplink_seed = 0;
  std::uint64_t crosslink_seed = 0;
  mutable long resamples = 0;  // floor rejections seen by uplink_gain so far

  // Device -> base station gain at one stage, |.| >= magnitude_floor.
  std::complex<double> uplink_gain(int stage, int device) const;
  // Device -> listener gain at one stage.
  std::complex<double> crosslink_gain(int listener, int stage, int device) const;
  // Column scale of the listener-side effective matrix after the transmitter
  // pre-corrects its uplink: crosslink / uplink.
  std::complex<double> effective_gain(int listener, int stage, int device) const;
};

ChannelRealization sample_channels(const ModelParams& model, std::vector<int> listeners,
                                   double magnitude_floor, SplitMix64& rng);

enum class DuplexMode { full_duplex, half_duplex };

// Lowest-indexed device of a cluster; reserved as listener in half-duplex.
int cluster_head(const ModelParams& model, int cluster);

// Which nodes decode in-cluster activity: every active device (full-duplex)
// or the head of every active cluster (half-duplex).
std::vector<int> listeners_for(const ActivationPattern& x, DuplexMode mode);

struct ListenerObservation {
  int listener = -1;  // global device index of the listening node
  int cluster = -1;   // cluster this node decodes
  Eigen::VectorXcd received;      // length measurements
  Eigen::MatrixXcd cluster_gains; // stages x cluster_size effective column gains
};

struct AcquisitionResult {
  Eigen::VectorXd bs_received;  // real observation after pre-channel correction
  std::vector<ListenerObservation> listeners;
};

// Simulates the acquisition phase: the base station sees the pre-corrected
// superposition plus real noise of variance sigma^2 per component, every
// listener sees the effective superposition plus complex noise with
// E|e|^2 = sigma^2 per component.
AcquisitionResult acquire(const StructuredMatrix& m, const ActivationPattern& x,
                          const ChannelRealization& ch, const NoiseParams& noise, DuplexMode mode,
                          SplitMix64& rng);

}  // namespace blocksketch
