#include "blocksketch/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace blocksketch {

GaussianMatrix GaussianMatrix::sample(int rows, int cols, SplitMix64& rng) {
  if (rows < 1 || cols < 1) {
    throw std::invalid_argument("gaussian matrix: dimensions must be positive");
  }
  GaussianMatrix m;
  m.entries.resize(rows, cols);
  const double scale = 1.0 / std::sqrt(static_cast<double>(rows));
  for (int j = 0; j < cols; ++j) {
    for (int i = 0; i < rows; ++i) {
      m.entries(i, j) = scale * gaussian(rng);
    }
  }
  return m;
}

OmpResult standard_omp(const Eigen::MatrixXd& a, const Eigen::VectorXd& y, const OmpStop& stop) {
  const int rows = static_cast<int>(a.rows());
  const int cols = static_cast<int>(a.cols());
  if (y.size() != rows) {
    throw std::invalid_argument("standard_omp: observation length does not match the matrix");
  }
  if (stop.max_iterations < 0 || stop.residual_tol < 0.0) {
    throw std::invalid_argument("standard_omp: invalid stopping rule");
  }
  const int cap = std::min({stop.max_iterations, rows, cols});

  OmpResult res;
  Eigen::VectorXd residual = y;
  std::vector<char> selected(static_cast<std::size_t>(cols), 0);
  Eigen::MatrixXd atoms(rows, std::max(cap, 1));

  Eigen::VectorXd inv_norms(cols);
  for (int i = 0; i < cols; ++i) {
    const double n = a.col(i).norm();
    inv_norms[i] = n > 0.0 ? 1.0 / n : 0.0;
  }

  int k = 0;
  while (k < cap && residual.norm() > stop.residual_tol) {
    const Eigen::VectorXd correlation = a.transpose() * residual;
    int best = -1;
    double best_score = -1.0;
    for (int i = 0; i < cols; ++i) {
      if (selected[static_cast<std::size_t>(i)]) continue;
      const double score = std::abs(correlation[i]) * inv_norms[i];
      if (score > best_score) {
        best_score = score;
        best = i;
      }
    }
    selected[static_cast<std::size_t>(best)] = 1;
    res.support.push_back(best);
    atoms.col(k) = a.col(best);
    ++k;

    const auto chosen = atoms.leftCols(k);
    const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(chosen);
    Eigen::VectorXd coef;
    if (qr.rank() < k) {
      coef = Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd>(chosen).solve(y);
    } else {
      coef = qr.solve(y);
    }
    residual = y - chosen * coef;
  }

  res.iterations = k;
  std::sort(res.support.begin(), res.support.end());
  return res;
}

RaOutcome lte_ra_trial(int k_active, const RaParams& p, SplitMix64& rng) {
  if (k_active < 0) {
    throw std::invalid_argument("lte_ra_trial: k_active must be nonnegative");
  }
  if (p.preambles < 1 || p.max_attempts < 1 || p.backoff_slots < 1) {
    throw std::invalid_argument("lte_ra_trial: invalid random access parameters");
  }

  RaOutcome out;
  out.delay_units.assign(static_cast<std::size_t>(k_active), 0);
  out.succeeded.assign(static_cast<std::size_t>(k_active), 0);
  out.first_attempt.assign(static_cast<std::size_t>(k_active), 0);
  if (k_active == 0) return out;

  struct Contender {
    int device;
    int attempts;
  };
  // round -> devices attempting in that round, processed in time order
  std::map<int, std::vector<Contender>> agenda;
  auto& first_round = agenda[1];
  for (int i = 0; i < k_active; ++i) {
    first_round.push_back({i, 0});
  }

  std::vector<int> draw(static_cast<std::size_t>(k_active));
  std::vector<int> uses(static_cast<std::size_t>(p.preambles));
  while (!agenda.empty()) {
    const auto node = agenda.begin();
    const int round = node->first;
    const std::vector<Contender> contenders = std::move(node->second);
    agenda.erase(node);

    std::fill(uses.begin(), uses.end(), 0);
    for (std::size_t i = 0; i < contenders.size(); ++i) {
      draw[i] = static_cast<int>(uniform_below(rng, static_cast<std::uint64_t>(p.preambles)));
      ++uses[static_cast<std::size_t>(draw[i])];
    }
    for (std::size_t i = 0; i < contenders.size(); ++i) {
      const Contender& c = contenders[i];
      const std::size_t dev = static_cast<std::size_t>(c.device);
      if (uses[static_cast<std::size_t>(draw[i])] == 1) {
        ++out.successes;
        out.succeeded[dev] = 1;
        if (c.attempts == 0) {
          ++out.first_attempt_successes;
          out.first_attempt[dev] = 1;
        }
        out.delay_units[dev] = round;
      } else if (c.attempts + 1 >= p.max_attempts) {
        out.delay_units[dev] = round;  // final failed attempt
      } else {
        const int wait = uniform_int(rng, 1, p.backoff_slots);
        agenda[round + wait].push_back({c.device, c.attempts + 1});
      }
    }
  }
  return out;
}

RaOutcome cluster_head_trial(const ActivationPattern& x, const RaParams& p,
                             int aggregation_overhead, SplitMix64& rng) {
  if (aggregation_overhead < 0) {
    throw std::invalid_argument("cluster_head_trial: aggregation_overhead must be nonnegative");
  }
  const int heads = static_cast<int>(x.active_clusters.size());
  const RaOutcome head_outcome = lte_ra_trial(heads, p, rng);

  RaOutcome out;
  for (int h = 0; h < heads; ++h) {
    const int cluster = x.active_clusters[static_cast<std::size_t>(h)];
    const std::size_t hs = static_cast<std::size_t>(h);
    const int members =
        static_cast<int>(x.cluster_actives[static_cast<std::size_t>(cluster)].size());
    for (int i = 0; i < members; ++i) {
      out.delay_units.push_back(head_outcome.delay_units[hs] + aggregation_overhead);
      out.succeeded.push_back(head_outcome.succeeded[hs]);
      out.first_attempt.push_back(head_outcome.first_attempt[hs]);
      out.successes += head_outcome.succeeded[hs];
      out.first_attempt_successes += head_outcome.first_attempt[hs];
    }
  }
  return out;
}

}  // namespace blocksketch
