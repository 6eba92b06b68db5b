#include "blocksketch/omp_decoder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace blocksketch {

DeviceSideProblem build_problem(const StructuredMatrix& m, const Eigen::MatrixXcd& cluster_gains,
                                const Eigen::VectorXcd& y_dev, int cluster,
                                const BsDetection& broadcast) {
  const MatrixParams& p = m.params();
  if (cluster < 0 || cluster >= p.clusters) {
    throw std::out_of_range("build_problem: cluster index out of range");
  }
  if (y_dev.size() != p.measurements()) {
    throw std::invalid_argument("build_problem: observation length does not match the matrix");
  }
  if (cluster_gains.rows() != p.stages || cluster_gains.cols() != p.cluster_size) {
    throw std::invalid_argument("build_problem: gain table must be stages x cluster_size");
  }
  if (static_cast<int>(broadcast.counts.size()) != p.clusters) {
    throw std::invalid_argument("build_problem: broadcast cluster count does not match");
  }
  const int announced = broadcast.counts[static_cast<std::size_t>(cluster)];
  if (announced <= 0) {
    throw std::invalid_argument("build_problem: cluster " + std::to_string(cluster + 1) +
                                " not detected as active");
  }

  const auto& collided = broadcast.collided_rows[static_cast<std::size_t>(cluster)];
  DeviceSideProblem prob;
  prob.cluster = cluster;
  std::vector<int> stages_kept;
  for (int t = 0; t < p.stages; ++t) {
    const int row = m.global_row(t, cluster);
    if (std::find(collided.begin(), collided.end(), row) != collided.end()) continue;
    // The node knows every signature and the detected cluster set, so it can
    // also drop rows shared with another detected cluster. The base station's
    // deviation test misses those when opposite-sign contributions cancel in
    // its own observation; they are still corrupted here.
    bool shared = false;
    for (int k : broadcast.active_clusters) {
      if (k != cluster && m.row_index(t, k) == m.row_index(t, cluster)) {
        shared = true;
        break;
      }
    }
    if (shared) continue;
    prob.effective_rows.push_back(row);
    stages_kept.push_back(t);
  }
  if (prob.effective_rows.empty()) {
    throw std::runtime_error("build_problem: no effective measurements after collision discard");
  }

  const int rows = static_cast<int>(prob.effective_rows.size());
  prob.observed.resize(rows);
  prob.dictionary.resize(rows, p.cluster_size);
  for (int j = 0; j < rows; ++j) {
    const int t = stages_kept[static_cast<std::size_t>(j)];
    prob.observed[j] = y_dev[prob.effective_rows[static_cast<std::size_t>(j)]];
    const double sign = m.sign_value(t, cluster);
    for (int i = 0; i < p.cluster_size; ++i) {
      prob.dictionary(j, i) = sign * cluster_gains(t, i);
    }
  }

  prob.target_size = announced;
  if (announced > p.cluster_size) {
    prob.target_size = p.cluster_size;
    prob.target_clamped = true;
  }
  return prob;
}

int InBlockDetection::rank_of(int offset) const {
  const auto it = std::lower_bound(support.begin(), support.end(), offset);
  if (it == support.end() || *it != offset) return -1;
  return static_cast<int>(it - support.begin());
}

namespace {

// Residual norms of candidate supports via the precomputed Gram matrix, so a
// replacement sweep costs O(k^3) per candidate instead of touching the rows.
class SupportEvaluator {
 public:
  SupportEvaluator(const Eigen::MatrixXcd& dict, const Eigen::VectorXcd& y)
      : gram_(dict.adjoint() * dict), dhy_(dict.adjoint() * y), y_sq_(y.squaredNorm()) {}

  double residual_norm(const std::vector<int>& support) const {
    const int k = static_cast<int>(support.size());
    Eigen::MatrixXcd g(k, k);
    Eigen::VectorXcd b(k);
    for (int i = 0; i < k; ++i) {
      b[i] = dhy_[support[static_cast<std::size_t>(i)]];
      for (int j = 0; j < k; ++j) {
        g(i, j) = gram_(support[static_cast<std::size_t>(i)], support[static_cast<std::size_t>(j)]);
      }
    }
    const Eigen::LDLT<Eigen::MatrixXcd> ldlt(g);
    if (ldlt.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
    const Eigen::VectorXcd coef = ldlt.solve(b);
    const double sq = y_sq_ - b.dot(coef).real();
    if (!std::isfinite(sq)) return std::numeric_limits<double>::infinity();
    return std::sqrt(std::max(0.0, sq));
  }

 private:
  Eigen::MatrixXcd gram_;
  Eigen::VectorXcd dhy_;
  double y_sq_;
};

// Steepest-descent single-atom replacement sweeps. Returns the residual norm
// of the (possibly updated) support.
double replacement_sweeps(const SupportEvaluator& eval, std::vector<int>& support, int cols,
                          int pinned, int excluded, int max_passes, double current, int& swaps) {
  const double tol = 1e-12 * (1.0 + current);
  for (int pass = 0; pass < max_passes; ++pass) {
    double best = current;
    int best_pos = -1, best_col = -1;
    std::vector<char> in_support(static_cast<std::size_t>(cols), 0);
    for (int s : support) in_support[static_cast<std::size_t>(s)] = 1;
    std::vector<int> candidate = support;
    for (std::size_t pos = 0; pos < support.size(); ++pos) {
      if (support[pos] == pinned) continue;
      const int original = candidate[pos];
      for (int col = 0; col < cols; ++col) {
        if (in_support[static_cast<std::size_t>(col)] || col == excluded) continue;
        candidate[pos] = col;
        const double r = eval.residual_norm(candidate);
        if (r < best - tol) {
          best = r;
          best_pos = static_cast<int>(pos);
          best_col = col;
        }
      }
      candidate[pos] = original;
    }
    if (best_pos < 0) break;
    support[static_cast<std::size_t>(best_pos)] = best_col;
    current = best;
    ++swaps;
  }
  return current;
}

// One pair replacement pass over the strongest free candidates.
double pair_replacement(const SupportEvaluator& eval, const Eigen::MatrixXcd& dict,
                        const Eigen::VectorXcd& residual, std::vector<int>& support, int pinned,
                        int excluded, int pool_width, double current, int& swaps) {
  const int cols = static_cast<int>(dict.cols());
  std::vector<char> in_support(static_cast<std::size_t>(cols), 0);
  for (int s : support) in_support[static_cast<std::size_t>(s)] = 1;

  // candidate pool: free columns ranked by normalized correlation
  std::vector<std::pair<double, int>> ranked;
  const Eigen::VectorXcd corr = dict.adjoint() * residual;
  for (int col = 0; col < cols; ++col) {
    if (in_support[static_cast<std::size_t>(col)] || col == excluded) continue;
    const double n = dict.col(col).norm();
    ranked.emplace_back(n > 0.0 ? std::abs(corr[col]) / n : 0.0, col);
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.first > b.first || (a.first == b.first && a.second < b.second);
  });
  const int pool = std::min<int>(pool_width, static_cast<int>(ranked.size()));

  std::vector<int> free_pos;
  for (std::size_t pos = 0; pos < support.size(); ++pos) {
    if (support[pos] != pinned) free_pos.push_back(static_cast<int>(pos));
  }

  double best = current;
  const double tol = 1e-12 * (1.0 + current);
  std::vector<int> best_support = support;
  std::vector<int> candidate = support;
  for (std::size_t a = 0; a < free_pos.size(); ++a) {
    for (std::size_t b = a + 1; b < free_pos.size(); ++b) {
      for (int i = 0; i < pool; ++i) {
        for (int j = i + 1; j < pool; ++j) {
          candidate = support;
          candidate[static_cast<std::size_t>(free_pos[a])] = ranked[static_cast<std::size_t>(i)].second;
          candidate[static_cast<std::size_t>(free_pos[b])] = ranked[static_cast<std::size_t>(j)].second;
          const double r = eval.residual_norm(candidate);
          if (r < best - tol) {
            best = r;
            best_support = candidate;
          }
        }
      }
    }
  }
  if (best_support != support) {
    support = best_support;
    swaps += 2;
    current = best;
  }
  return current;
}

}  // namespace

InBlockDetection modified_omp(const DeviceSideProblem& p, bool normalize_columns,
                              const RefineOptions& refine) {
  const int rows = static_cast<int>(p.dictionary.rows());
  const int cols = static_cast<int>(p.dictionary.cols());
  if (rows < 1 || p.observed.size() != rows) {
    throw std::invalid_argument("modified_omp: empty or inconsistent effective measurements");
  }
  if (p.target_size < 1) {
    throw std::invalid_argument("modified_omp: target support size must be positive");
  }
  if (p.known_active >= cols || p.known_inactive >= cols) {
    throw std::invalid_argument("modified_omp: side information offset out of range");
  }
  const int target = std::min(p.target_size, cols);
  // Side information is dropped when it cannot be honored (degenerate counts).
  const int pinned = p.known_active;
  const int excluded = (p.known_inactive >= 0 && target < cols) ? p.known_inactive : -1;

  Eigen::VectorXd inv_norms = Eigen::VectorXd::Ones(cols);
  if (normalize_columns) {
    for (int i = 0; i < cols; ++i) {
      const double n = p.dictionary.col(i).norm();
      inv_norms[i] = n > 0.0 ? 1.0 / n : 0.0;
    }
  }

  InBlockDetection det;
  std::vector<int> support;
  support.reserve(static_cast<std::size_t>(target));
  std::vector<char> selected(static_cast<std::size_t>(cols), 0);
  Eigen::VectorXcd residual = p.observed;
  Eigen::MatrixXcd atoms(rows, target);

  for (int k = 0; k < target; ++k) {
    int best = -1;
    if (k == 0 && pinned >= 0) {
      best = pinned;
    } else {
      const Eigen::VectorXcd correlation = p.dictionary.adjoint() * residual;
      double best_score = -1.0;
      for (int i = 0; i < cols; ++i) {
        if (selected[static_cast<std::size_t>(i)] || i == excluded) continue;
        const double score = std::abs(correlation[i]) * inv_norms[i];
        if (score > best_score) {
          best_score = score;
          best = i;
        }
      }
      if (best < 0) break;  // only possible when the exclusion exhausts the columns
    }
    selected[static_cast<std::size_t>(best)] = 1;
    support.push_back(best);
    atoms.col(k) = p.dictionary.col(best);

    const auto chosen = atoms.leftCols(k + 1);
    Eigen::VectorXcd coef;
    const Eigen::ColPivHouseholderQR<Eigen::MatrixXcd> qr(chosen);
    if (qr.rank() < k + 1) {
      det.degenerate = true;
      coef = Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXcd>(chosen).solve(p.observed);
    } else {
      coef = qr.solve(p.observed);
    }
    residual = p.observed - chosen * coef;
  }

  det.iterations = static_cast<int>(support.size());
  double res_norm = residual.norm();

  if (refine.enabled && !support.empty()) {
    const SupportEvaluator eval(p.dictionary, p.observed);
    res_norm = replacement_sweeps(eval, support, cols, pinned, excluded, refine.max_passes,
                                  res_norm, det.refinement_swaps);
    const double gate = std::max(p.noise_floor, 1e-8 * p.observed.norm());
    if (res_norm > gate && static_cast<int>(support.size()) >= 2) {
      det.escalated = true;
      // refresh the residual for candidate ranking
      Eigen::MatrixXcd chosen(rows, support.size());
      for (std::size_t i = 0; i < support.size(); ++i) {
        chosen.col(static_cast<Eigen::Index>(i)) = p.dictionary.col(support[i]);
      }
      const Eigen::VectorXcd coef =
          Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXcd>(chosen).solve(p.observed);
      const Eigen::VectorXcd r = p.observed - chosen * coef;
      res_norm = pair_replacement(eval, p.dictionary, r, support, pinned, excluded,
                                  refine.escalation_candidates, res_norm, det.refinement_swaps);
      res_norm = replacement_sweeps(eval, support, cols, pinned, excluded, refine.max_passes,
                                    res_norm, det.refinement_swaps);
    }
  }

  det.residual_norm = res_norm;
  det.support = std::move(support);
  std::sort(det.support.begin(), det.support.end());
  return det;
}

int slot_for(const InBlockDetection& detection, int my_offset,
             const std::vector<int>& cluster_slots) {
  const int rank = detection.rank_of(my_offset);
  if (rank < 0) {
    throw std::runtime_error("slot_for: device offset " + std::to_string(my_offset + 1) +
                             " was not detected");
  }
  if (rank >= static_cast<int>(cluster_slots.size())) {
    throw std::runtime_error("slot_for: grant holds fewer slots than detected devices");
  }
  return cluster_slots[static_cast<std::size_t>(rank)];
}

}  // namespace blocksketch
