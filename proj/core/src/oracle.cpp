#include "blocksketch/oracle.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace blocksketch {

std::vector<std::vector<int>> exhaustive_block_decode(const StructuredMatrix& m,
                                                      const Eigen::VectorXd& y,
                                                      const OracleBudget& budget) {
  const MatrixParams& p = m.params();
  if (y.size() != p.measurements()) {
    throw std::invalid_argument("block oracle: observation length does not match the matrix");
  }
  if (p.clusters > budget.max_clusters || p.cluster_size > budget.max_dimension) {
    throw std::runtime_error("block oracle: instance exceeds the enumeration budget");
  }

  const double tol = 1e-9 * std::max(1.0, y.cwiseAbs().maxCoeff());
  std::vector<std::vector<int>> consistent;
  std::vector<int> counts(static_cast<std::size_t>(p.clusters), 0);
  Eigen::VectorXd candidate(p.measurements());

  for (;;) {
    candidate.setZero();
    for (int c = 0; c < p.clusters; ++c) {
      const int n = counts[static_cast<std::size_t>(c)];
      if (n == 0) continue;
      for (int t = 0; t < p.stages; ++t) {
        candidate[m.global_row(t, c)] += m.sign_value(t, c) * n;
      }
    }
    if ((candidate - y).cwiseAbs().maxCoeff() <= tol) {
      consistent.push_back(counts);
    }
    // odometer over {0..cluster_size}^clusters
    int pos = 0;
    while (pos < p.clusters) {
      if (++counts[static_cast<std::size_t>(pos)] <= p.cluster_size) break;
      counts[static_cast<std::size_t>(pos)] = 0;
      ++pos;
    }
    if (pos == p.clusters) break;
  }
  return consistent;
}

OracleInBlock exhaustive_inblock_decode(const DeviceSideProblem& p, int k,
                                        const OracleBudget& budget) {
  const int cols = static_cast<int>(p.dictionary.cols());
  const int rows = static_cast<int>(p.dictionary.rows());
  if (k < 1 || k > cols) {
    throw std::invalid_argument("inblock oracle: support size out of range");
  }
  if (cols > budget.max_dimension) {
    throw std::runtime_error("inblock oracle: dimension exceeds the enumeration budget");
  }
  double combos = 1.0;
  for (int i = 0; i < k; ++i) {
    combos *= static_cast<double>(cols - i) / (i + 1);
  }
  if (combos > static_cast<double>(budget.max_support_enumeration)) {
    throw std::runtime_error("inblock oracle: candidate count exceeds the enumeration budget");
  }

  OracleInBlock out;
  out.best_residual = std::numeric_limits<double>::infinity();
  out.second_residual = std::numeric_limits<double>::infinity();

  std::vector<int> support(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) support[static_cast<std::size_t>(i)] = i;
  Eigen::MatrixXcd atoms(rows, k);

  for (;;) {
    for (int i = 0; i < k; ++i) {
      atoms.col(i) = p.dictionary.col(support[static_cast<std::size_t>(i)]);
    }
    const Eigen::VectorXcd coef =
        Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXcd>(atoms).solve(p.observed);
    const double residual = (p.observed - atoms * coef).norm();
    ++out.evaluated;
    if (residual < out.best_residual) {
      out.second_residual = out.best_residual;
      out.best_residual = residual;
      out.support = support;  // lexicographic order of enumeration keeps ties deterministic
    } else if (residual < out.second_residual) {
      out.second_residual = residual;
    }

    // next combination in lexicographic order
    int pos = k - 1;
    while (pos >= 0 && support[static_cast<std::size_t>(pos)] == cols - k + pos) --pos;
    if (pos < 0) break;
    ++support[static_cast<std::size_t>(pos)];
    for (int i = pos + 1; i < k; ++i) {
      support[static_cast<std::size_t>(i)] = support[static_cast<std::size_t>(i - 1)] + 1;
    }
  }
  return out;
}

}  // namespace blocksketch
