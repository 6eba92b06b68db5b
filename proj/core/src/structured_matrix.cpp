#include "blocksketch/structured_matrix.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace blocksketch {

void MatrixParams::validate() const {
  if (rows_per_stage < 1 || stages < 1) {
    throw std::invalid_argument("matrix: rows_per_stage and stages must be positive");
  }
  if (clusters < 1 || cluster_size < 1) {
    throw std::invalid_argument("matrix: clusters and cluster_size must be positive");
  }
  if (!(alpha > 0.0)) {
    throw std::invalid_argument("matrix: alpha must be positive");
  }
}

int MatrixParams::min_rows_per_stage(int max_active_clusters, double theta) {
  if (!(theta > 0.5) || theta > 1.0) {
    throw std::invalid_argument("matrix: theta must lie in (1/2, 1]");
  }
  if (max_active_clusters < 1) {
    throw std::invalid_argument("matrix: max_active_clusters must be positive");
  }
  const double need = static_cast<double>(max_active_clusters - 1) / (1.0 - theta);
  return std::max(1, static_cast<int>(std::ceil(need)));
}

int MatrixParams::min_stages(int clusters, int cluster_size, double delta) {
  if (!(delta > 0.0) || delta >= 1.0) {
    throw std::invalid_argument("matrix: delta must lie in (0, 1)");
  }
  const double need = std::log2(static_cast<double>(clusters) * cluster_size / delta);
  return std::max(1, static_cast<int>(std::ceil(need)));
}

StructuredMatrix StructuredMatrix::sample(const MatrixParams& params, SplitMix64& rng) {
  params.validate();
  const std::size_t n = static_cast<std::size_t>(params.stages) * params.clusters;
  std::vector<int> rows(n);
  std::vector<double> values(n);
  for (std::size_t i = 0; i < n; ++i) {
    rows[i] = static_cast<int>(uniform_below(rng, static_cast<std::uint64_t>(params.rows_per_stage)));
    values[i] = (rng() & 1u) ? params.alpha : -params.alpha;
  }
  return StructuredMatrix(params, std::move(rows), std::move(values));
}

StructuredMatrix::Signature StructuredMatrix::signature(int device) const {
  if (device < 0 || device >= params_.signal_length()) {
    throw std::out_of_range("signature: device index out of range");
  }
  const int cluster = device / params_.cluster_size;
  Signature s;
  s.rows.reserve(static_cast<std::size_t>(params_.stages));
  s.values.reserve(static_cast<std::size_t>(params_.stages));
  for (int t = 0; t < params_.stages; ++t) {
    s.rows.push_back(global_row(t, cluster));
    s.values.push_back(sign_value(t, cluster));
  }
  return s;
}

std::vector<int> StructuredMatrix::cluster_rows(int cluster) const {
  if (cluster < 0 || cluster >= params_.clusters) {
    throw std::out_of_range("cluster_rows: cluster index out of range");
  }
  std::vector<int> rows(static_cast<std::size_t>(params_.stages));
  for (int t = 0; t < params_.stages; ++t) {
    rows[static_cast<std::size_t>(t)] = global_row(t, cluster);
  }
  return rows;
}

Eigen::VectorXd StructuredMatrix::measure(const ActivationPattern& x) const {
  if (x.params.clusters != params_.clusters || x.params.cluster_size != params_.cluster_size) {
    throw std::invalid_argument("measure: pattern dimensions do not match the matrix");
  }
  Eigen::VectorXd y = Eigen::VectorXd::Zero(params_.measurements());
  for (int c : x.active_clusters) {
    const double count =
        static_cast<double>(x.cluster_actives[static_cast<std::size_t>(c)].size());
    for (int t = 0; t < params_.stages; ++t) {
      y[global_row(t, c)] += sign_value(t, c) * count;
    }
  }
  return y;
}

Eigen::MatrixXd StructuredMatrix::dense() const {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(params_.measurements(), params_.signal_length());
  for (int t = 0; t < params_.stages; ++t) {
    for (int c = 0; c < params_.clusters; ++c) {
      const int row = global_row(t, c);
      const double v = sign_value(t, c);
      for (int j = 0; j < params_.cluster_size; ++j) {
        a(row, c * params_.cluster_size + j) = v;
      }
    }
  }
  return a;
}

void StructuredMatrix::save(std::ostream& out) const {
  out << "sketchmat v1\n";
  char header[128];
  std::snprintf(header, sizeof(header), "%d %d %d %d %.17g\n", params_.rows_per_stage,
                params_.stages, params_.clusters, params_.cluster_size, params_.alpha);
  out << header;
  char line[96];
  for (int t = 0; t < params_.stages; ++t) {
    for (int c = 0; c < params_.clusters; ++c) {
      std::snprintf(line, sizeof(line), "%d %d %d %.17g\n", t + 1, c + 1, row_index(t, c) + 1,
                    sign_value(t, c));
      out << line;
    }
  }
}

StructuredMatrix StructuredMatrix::load(std::istream& in) {
  std::string magic, version;
  if (!(in >> magic >> version) || magic != "sketchmat" || version != "v1") {
    throw std::runtime_error("matrix load: unrecognized header");
  }
  MatrixParams params;
  if (!(in >> params.rows_per_stage >> params.stages >> params.clusters >> params.cluster_size >>
        params.alpha)) {
    throw std::runtime_error("matrix load: malformed parameter line");
  }
  params.validate();
  const std::size_t n = static_cast<std::size_t>(params.stages) * params.clusters;
  std::vector<int> rows(n);
  std::vector<double> values(n);
  std::vector<std::uint8_t> seen(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    int t = 0, c = 0, q = 0;
    double s = 0.0;
    if (!(in >> t >> c >> q >> s)) {
      throw std::runtime_error("matrix load: truncated entry list");
    }
    if (t < 1 || t > params.stages || c < 1 || c > params.clusters || q < 1 ||
        q > params.rows_per_stage) {
      throw std::runtime_error("matrix load: entry indices out of range");
    }
    if (std::abs(std::abs(s) - params.alpha) > 1e-12 * params.alpha) {
      throw std::runtime_error("matrix load: entry magnitude does not match alpha");
    }
    const std::size_t idx =
        static_cast<std::size_t>(t - 1) * static_cast<std::size_t>(params.clusters) +
        static_cast<std::size_t>(c - 1);
    if (seen[idx]) {
      throw std::runtime_error("matrix load: duplicate (stage, cluster) entry");
    }
    seen[idx] = 1;
    rows[idx] = q - 1;
    values[idx] = s;
  }
  return StructuredMatrix(params, std::move(rows), std::move(values));
}

}  // namespace blocksketch
