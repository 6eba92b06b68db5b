#pragma once

#include <Eigen/Dense>
#include <vector>

#include "blocksketch/sketch_decoder.hpp"
#include "blocksketch/structured_matrix.hpp"

namespace blocksketch {

// In-cluster recovery problem as seen by one listening node: the collision
// filtered rows of its observation together with the effective sensing
// columns of its cluster, plus the device count announced by the base
// station. `known_active` / `known_inactive` carry the listener's knowledge
// of its own activity bit (a transmitting device knows it is in the support,
// an idle cluster head knows it is not); they are side information of the
// node, not broadcast state.
struct DeviceSideProblem {
  int cluster = -1;
  std::vector<int> effective_rows;  // surviving global rows, stage order
  Eigen::VectorXcd observed;        // observation restricted to those rows
  Eigen::MatrixXcd dictionary;      // effective_rows.size() x cluster_size
  int target_size = 0;              // devices to recover, from the broadcast
  bool target_clamped = false;      // broadcast count exceeded the cluster size
  int known_active = -1;            // offset certainly in the support, or -1
  int known_inactive = -1;          // offset certainly absent, or -1
  double noise_floor = 0.0;         // expected residual norm of a correct fit
};

// Restricts a listener's observation to its cluster's interference-free rows
// and expands the effective sensing columns from the sketch structure and the
// per-stage channel gains. The dense matrix of the whole network is never
// formed. Throws when the broadcast marks the cluster inactive or no rows
// survive the collision discard.
DeviceSideProblem build_problem(const StructuredMatrix& m, const Eigen::MatrixXcd& cluster_gains,
                                const Eigen::VectorXcd& y_dev, int cluster,
                                const BsDetection& broadcast);

// Local refinement applied after the greedy rounds: bounded single-atom
// replacement sweeps, plus one pair replacement pass over the highest
// correlated candidates when the fit still exceeds the noise floor. Greedy
// selection alone leaves a few percent of recoverable supports on the table
// once the collision discard has thinned the rows; the replacement sweeps
// close most of that gap at a cost far below one extra pursuit round.
struct RefineOptions {
  bool enabled = true;
  int max_passes = 8;              // single-replacement sweeps
  int escalation_candidates = 24;  // candidate pool width of the pair pass
};

struct InBlockDetection {
  std::vector<int> support;  // detected device offsets, ascending
  int iterations = 0;        // greedy pursuit rounds, always the broadcast count
  bool degenerate = false;   // a rank-deficient least-squares step occurred
  int refinement_swaps = 0;  // atoms exchanged by the replacement sweeps
  bool escalated = false;    // the pair replacement pass ran
  double residual_norm = 0.0;

  // Rank of an offset among the detected devices, -1 when absent.
  int rank_of(int offset) const;
};

// Greedy pursuit over the effective columns, run for exactly target_size
// rounds: per round pick the unselected column with the largest absolute
// complex correlation against the residual, then re-fit all chosen columns by
// least squares. With `normalize_columns` correlations are measured against
// unit-norm columns so unequal channel magnitudes do not bias selection.
// A known-active offset is seeded as the first atom and never swapped out; a
// known-inactive offset is excluded from selection.
InBlockDetection modified_omp(const DeviceSideProblem& p, bool normalize_columns = true,
                              const RefineOptions& refine = {});

// Slot granted to a device: the detected devices claim the cluster's slots in
// ascending offset order. Throws when the device is not among the detected.
int slot_for(const InBlockDetection& detection, int my_offset,
             const std::vector<int>& cluster_slots);

}  // namespace blocksketch
