#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <vector>

#include "blocksketch/model.hpp"
#include "blocksketch/rng.hpp"

namespace blocksketch {

struct MatrixParams {
  int rows_per_stage = 0;  // rows hashed into per stage
  int stages = 0;          // independent sketch stages stacked vertically
  int clusters = 0;
  int cluster_size = 0;
  double alpha = 1.0;      // magnitude of the nonzero entries

  int measurements() const { return rows_per_stage * stages; }
  int signal_length() const { return clusters * cluster_size; }

  void validate() const;

  // Smallest row count keeping the per-stage interference-free probability
  // bound 1 - (max_active_clusters - 1) / rows above theta, theta in (1/2, 1].
  static int min_rows_per_stage(int max_active_clusters, double theta = 0.75);

  // Smallest stage count with 2^stages >= clusters * cluster_size / delta.
  static int min_stages(int clusters, int cluster_size, double delta);
};

// Sparse representation of the structured random measurement matrix. Per
// (stage, cluster) pair the implied dense matrix has a single nonzero row
// whose `cluster_size` entries all share one signed magnitude; a column
// therefore has exactly `stages` nonzeros and all columns of a cluster are
// identical. Storage is stages * clusters values, independent of
// cluster_size.
class StructuredMatrix {
 public:
  static StructuredMatrix sample(const MatrixParams& params, SplitMix64& rng);

  const MatrixParams& params() const { return params_; }

  // Row hashed to by (stage, cluster), in [0, rows_per_stage).
  int row_index(int stage, int cluster) const {
    return rows_[index(stage, cluster)];
  }
  // Signed magnitude of the nonzero entries, one of +-alpha.
  double sign_value(int stage, int cluster) const {
    return values_[index(stage, cluster)];
  }
  // Global measurement row of (stage, cluster).
  int global_row(int stage, int cluster) const {
    return stage * params_.rows_per_stage + row_index(stage, cluster);
  }

  struct Signature {
    std::vector<int> rows;       // global measurement rows, one per stage
    std::vector<double> values;  // matching signed magnitudes
  };

  // Column of the implied dense matrix for one device, in sparse form.
  Signature signature(int device) const;

  // Global rows carrying a cluster's signature, ordered by stage.
  std::vector<int> cluster_rows(int cluster) const;

  // Noiseless observation of an activation pattern. Runs on the sparse
  // representation; the dense matrix is never formed.
  Eigen::VectorXd measure(const ActivationPattern& x) const;

  // Dense expansion. Test oracle only; production paths must stay sparse.
  Eigen::MatrixXd dense() const;

  // Text sidecar so separate processes can share one realization.
  void save(std::ostream& out) const;
  static StructuredMatrix load(std::istream& in);

 private:
  StructuredMatrix(MatrixParams params, std::vector<int> rows, std::vector<double> values)
      : params_(params), rows_(std::move(rows)), values_(std::move(values)) {}

  std::size_t index(int stage, int cluster) const {
    return static_cast<std::size_t>(stage) * static_cast<std::size_t>(params_.clusters) +
           static_cast<std::size_t>(cluster);
  }

  MatrixParams params_;
  std::vector<int> rows_;
  std::vector<double> values_;
};

}  // namespace blocksketch
