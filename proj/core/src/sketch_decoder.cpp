#include "blocksketch/sketch_decoder.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace blocksketch {

Eigen::MatrixXd stage_estimates(const StructuredMatrix& m, const Eigen::VectorXd& y) {
  const MatrixParams& p = m.params();
  if (y.size() != p.measurements()) {
    throw std::invalid_argument("stage_estimates: observation length does not match the matrix");
  }
  Eigen::MatrixXd est(p.stages, p.clusters);
  for (int t = 0; t < p.stages; ++t) {
    for (int c = 0; c < p.clusters; ++c) {
      est(t, c) = m.sign_value(t, c) * y[m.global_row(t, c)];
    }
  }
  return est;
}

namespace {

// Median of the first n entries of scratch, which it reorders. Even n takes
// the mean of the two middle values.
double median_inplace(std::vector<double>& scratch, int n) {
  const auto mid = scratch.begin() + n / 2;
  std::nth_element(scratch.begin(), mid, scratch.begin() + n);
  if (n % 2 == 1) return *mid;
  const double upper = *mid;
  const double lower = *std::max_element(scratch.begin(), mid);
  return 0.5 * (lower + upper);
}

}  // namespace

BsDetection decode(const StructuredMatrix& m, const Eigen::VectorXd& y,
                   double collision_threshold, DecodeStats* stats) {
  const MatrixParams& p = m.params();
  if (y.size() != p.measurements()) {
    throw std::invalid_argument("decode: observation length does not match the matrix");
  }
  if (!(collision_threshold > 0.0)) {
    throw std::invalid_argument("decode: collision_threshold must be positive");
  }

  BsDetection det;
  det.counts.assign(static_cast<std::size_t>(p.clusters), 0);
  det.collided_rows.resize(static_cast<std::size_t>(p.clusters));
  det.raw_estimates = Eigen::VectorXd::Zero(p.clusters);

  std::uint64_t touched = 0;
  const double alpha_sq = p.alpha * p.alpha;
  std::vector<double> estimates(static_cast<std::size_t>(p.stages));
  std::vector<double> scratch(static_cast<std::size_t>(p.stages));

  for (int c = 0; c < p.clusters; ++c) {
    for (int t = 0; t < p.stages; ++t) {
      estimates[static_cast<std::size_t>(t)] = m.sign_value(t, c) * y[m.global_row(t, c)];
    }
    touched += static_cast<std::uint64_t>(p.stages);

    scratch = estimates;
    const double med = median_inplace(scratch, p.stages);
    touched += static_cast<std::uint64_t>(p.stages);
    det.raw_estimates[c] = med;

    const long long rounded = std::llround(med / alpha_sq);  // half away from zero
    const int count = static_cast<int>(std::clamp<long long>(rounded, 0, p.cluster_size));
    det.counts[static_cast<std::size_t>(c)] = count;
    if (count == 0) continue;

    det.active_clusters.push_back(c);
    auto& collided = det.collided_rows[static_cast<std::size_t>(c)];
    for (int t = 0; t < p.stages; ++t) {
      if (std::abs(estimates[static_cast<std::size_t>(t)] - med) > collision_threshold) {
        collided.push_back(m.global_row(t, c));
      }
    }
    touched += static_cast<std::uint64_t>(p.stages);
  }
  if (stats != nullptr) {
    stats->values_touched = touched;
  }
  return det;
}

double default_collision_threshold(double alpha, double noise_sigma) {
  return 0.5 * alpha * alpha + 3.0 * alpha * noise_sigma;
}

ResourceGrant resources_for(const BsDetection& detection) {
  ResourceGrant grant;
  grant.cluster_slots.resize(detection.counts.size());
  int next = 1;
  for (std::size_t c = 0; c < detection.counts.size(); ++c) {
    auto& slots = grant.cluster_slots[c];
    slots.reserve(static_cast<std::size_t>(detection.counts[c]));
    for (int k = 0; k < detection.counts[c]; ++k) {
      slots.push_back(next++);
    }
  }
  grant.total = next - 1;
  return grant;
}

void write_detection(std::ostream& out, const BsDetection& detection) {
  for (int c : detection.active_clusters) {
    out << c + 1 << ' ' << detection.counts[static_cast<std::size_t>(c)];
    for (int row : detection.collided_rows[static_cast<std::size_t>(c)]) {
      out << ' ' << row + 1;
    }
    out << '\n';
  }
}

BsDetection read_detection(std::istream& in, int clusters) {
  if (clusters < 1) {
    throw std::invalid_argument("read_detection: clusters must be positive");
  }
  BsDetection det;
  det.counts.assign(static_cast<std::size_t>(clusters), 0);
  det.collided_rows.resize(static_cast<std::size_t>(clusters));
  det.raw_estimates = Eigen::VectorXd::Zero(clusters);

  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    int cluster = 0, count = 0;
    if (!(fields >> cluster >> count) || cluster < 1 || cluster > clusters || count < 1) {
      throw std::runtime_error("read_detection: malformed record line");
    }
    const std::size_t c = static_cast<std::size_t>(cluster - 1);
    if (det.counts[c] != 0) {
      throw std::runtime_error("read_detection: duplicate cluster record");
    }
    det.counts[c] = count;
    det.active_clusters.push_back(cluster - 1);
    det.raw_estimates[cluster - 1] = static_cast<double>(count);
    int row = 0;
    while (fields >> row) {
      if (row < 1) {
        throw std::runtime_error("read_detection: collided row index out of range");
      }
      det.collided_rows[c].push_back(row - 1);
    }
  }
  std::sort(det.active_clusters.begin(), det.active_clusters.end());
  return det;
}

}  // namespace blocksketch
