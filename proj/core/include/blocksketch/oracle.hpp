#pragma once

#include <Eigen/Dense>
#include <vector>

#include "blocksketch/omp_decoder.hpp"
#include "blocksketch/structured_matrix.hpp"

namespace blocksketch {

// Enumeration limits for the reference decoders. They exist to ground small
// instances, not to scale; anything bigger aborts loudly.
struct OracleBudget {
  int max_clusters = 4;                    // exhaustive cluster-count search
  int max_dimension = 12;                  // cluster size for support search
  long max_support_enumeration = 10000;    // candidate supports per call
};

// All cluster-count vectors consistent with a noiseless observation, found by
// exhaustive enumeration of {0..cluster_size}^clusters. Observations depend
// on the pattern only through per-cluster counts, so consistency is well
// defined at the count level. Deliberately shares nothing with the sketch
// decoder beyond the matrix accessors.
std::vector<std::vector<int>> exhaustive_block_decode(const StructuredMatrix& m,
                                                      const Eigen::VectorXd& y,
                                                      const OracleBudget& budget = {});

struct OracleInBlock {
  std::vector<int> support;       // best size-k support, ascending
  double best_residual = 0.0;     // residual norm at the best support
  double second_residual = 0.0;   // residual norm of the runner-up
  long evaluated = 0;             // candidates examined
};

// Maximum-likelihood reference for the in-cluster problem: evaluates every
// size-k support by least squares and returns the residual minimizer, with
// lexicographic tie-breaking. Independent of the greedy decoder.
OracleInBlock exhaustive_inblock_decode(const DeviceSideProblem& p, int k,
                                        const OracleBudget& budget = {});

}  // namespace blocksketch
