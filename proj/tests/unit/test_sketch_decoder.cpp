#include <doctest.h>

#include <cmath>
#include <sstream>

#include "blocksketch/channel.hpp"
#include "blocksketch/sketch_decoder.hpp"

using namespace blocksketch;

TEST_SUITE_BEGIN("sketch_decoder");

namespace {

// Builds a matrix with hand-picked hashes and signs through the sidecar
// format. rows/signs are stage-major over clusters, 0-based rows, signs +-1.
StructuredMatrix make_matrix(int rows_per_stage, int stages, int clusters, int cluster_size,
                             const std::vector<int>& rows, const std::vector<double>& signs,
                             double alpha = 1.0) {
  std::ostringstream out;
  out << "sketchmat v1\n"
      << rows_per_stage << ' ' << stages << ' ' << clusters << ' ' << cluster_size << ' ' << alpha
      << '\n';
  for (int t = 0; t < stages; ++t) {
    for (int c = 0; c < clusters; ++c) {
      const std::size_t i = static_cast<std::size_t>(t * clusters + c);
      out << t + 1 << ' ' << c + 1 << ' ' << rows[i] + 1 << ' ' << signs[i] * alpha << '\n';
    }
  }
  std::istringstream in(out.str());
  return StructuredMatrix::load(in);
}

}  // namespace

TEST_CASE("stage estimates recover the sign-corrected rows") {
  SplitMix64 rng(51);
  const MatrixParams mp{4, 2, 3, 5, 1.0};
  const StructuredMatrix m = StructuredMatrix::sample(mp, rng);

  SUBCASE("zero observation gives zero estimates") {
    const Eigen::MatrixXd est = stage_estimates(m, Eigen::VectorXd::Zero(mp.measurements()));
    CHECK(est.cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("single active cluster shows its count on every stage") {
    const ModelParams model = ModelParams::make(3, 5, 3, 5);
    const ActivationPattern x = ActivationPattern::from_supports(model, {{}, {0, 2, 3}, {}});
    const Eigen::MatrixXd est = stage_estimates(m, m.measure(x));
    for (int t = 0; t < mp.stages; ++t) {
      CHECK(est(t, 1) == doctest::Approx(3.0));  // alpha^2 * count
    }
  }

  SUBCASE("dimension mismatch is rejected") {
    CHECK_THROWS_AS(stage_estimates(m, Eigen::VectorXd::Zero(3)), std::invalid_argument);
  }
}

TEST_CASE("colliding clusters superpose with the product of signs") {
  // two clusters forced onto one row in the only stage
  for (double s0 : {1.0, -1.0}) {
    for (double s1 : {1.0, -1.0}) {
      const StructuredMatrix m = make_matrix(2, 1, 2, 4, {1, 1}, {s0, s1});
      const ModelParams model = ModelParams::make(2, 4, 2, 4);
      const ActivationPattern x = ActivationPattern::from_supports(model, {{0}, {1, 2}});
      const Eigen::MatrixXd est = stage_estimates(m, m.measure(x));
      CHECK(est(0, 0) == doctest::Approx(1.0 + s0 * s1 * 2.0));
      CHECK(est(0, 1) == doctest::Approx(2.0 + s0 * s1 * 1.0));
    }
  }
}

TEST_CASE("the lone active cluster is counted exactly and never flagged") {
  SplitMix64 rng(52);
  const MatrixParams mp{4, 5, 6, 7, 1.0};
  const ModelParams model = ModelParams::make(6, 7, 1, 4);
  for (int draw = 0; draw < 50; ++draw) {
    const StructuredMatrix m = StructuredMatrix::sample(mp, rng);
    const ActivationPattern x = generate_pattern(model, 1, 4, InBlockSizing::uniform, rng);
    const BsDetection det = decode(m, m.measure(x), 0.5);
    const int active = x.active_clusters[0];
    REQUIRE(det.counts[static_cast<std::size_t>(active)] ==
            x.cluster_counts()[static_cast<std::size_t>(active)]);
    REQUIRE(det.collided_rows[static_cast<std::size_t>(active)].empty());
  }
  // with enough stage diversity the idle clusters stay silent as well
  const MatrixParams wide{16, 9, 6, 7, 1.0};
  for (int draw = 0; draw < 50; ++draw) {
    const StructuredMatrix m = StructuredMatrix::sample(wide, rng);
    const ActivationPattern x = generate_pattern(model, 1, 4, InBlockSizing::uniform, rng);
    const BsDetection det = decode(m, m.measure(x), 0.5);
    REQUIRE(det.counts == x.cluster_counts());
    REQUIRE(det.active_clusters == x.active_clusters);
  }
}

TEST_CASE("noiseless decode is exact for every cluster with a clean stage majority") {
  SplitMix64 rng(53);
  const MatrixParams mp{8, 9, 10, 6, 1.0};
  const ModelParams model = ModelParams::make(10, 6, 3, 4);
  long checked = 0;
  for (int draw = 0; draw < 400; ++draw) {
    const StructuredMatrix m = StructuredMatrix::sample(mp, rng);
    const ActivationPattern x = generate_pattern(model, 3, 4, InBlockSizing::uniform, rng);
    const BsDetection det = decode(m, m.measure(x), 0.5);
    const std::vector<int> truth = x.cluster_counts();
    for (int c = 0; c < mp.clusters; ++c) {
      int clean = 0;
      for (int t = 0; t < mp.stages; ++t) {
        bool hit = false;
        for (int k : x.active_clusters) {
          if (k != c && m.row_index(t, k) == m.row_index(t, c)) hit = true;
        }
        clean += hit ? 0 : 1;
      }
      if (2 * clean <= mp.stages) continue;  // exactness is only claimed on a clean majority
      ++checked;
      REQUIRE(det.counts[static_cast<std::size_t>(c)] == truth[static_cast<std::size_t>(c)]);
    }
  }
  CHECK(checked > 2000);
}

TEST_CASE("median shrugs off a minority of corrupted stages and flags them") {
  // exactly one of three stages collided; enumerate every sign assignment
  for (int bits = 0; bits < 64; ++bits) {
    std::vector<double> signs(6);
    for (int i = 0; i < 6; ++i) signs[static_cast<std::size_t>(i)] = (bits >> i) & 1 ? 1.0 : -1.0;
    // stage 0 collides on row 0; stages 1, 2 separate the clusters
    const StructuredMatrix m = make_matrix(2, 3, 2, 4, {0, 0, 0, 1, 1, 0}, signs);
    const ModelParams model = ModelParams::make(2, 4, 2, 4);
    const ActivationPattern x = ActivationPattern::from_supports(model, {{3}, {0, 2}});
    const BsDetection det = decode(m, m.measure(x), 0.5);
    REQUIRE(det.counts[0] == 1);
    REQUIRE(det.counts[1] == 2);
    // the corrupted stage lands in the collision set of both clusters
    REQUIRE(det.collided_rows[0] == std::vector<int>{m.global_row(0, 0)});
    REQUIRE(det.collided_rows[1] == std::vector<int>{m.global_row(0, 1)});
  }
}

TEST_CASE("per-stage interference-free frequency clears the union bound") {
  SplitMix64 rng(54);
  const int rows = 8;
  for (int k_clusters : {2, 4}) {
    const MatrixParams mp{rows, 1, 20, 3, 1.0};
    const ModelParams model = ModelParams::make(20, 3, k_clusters, 1);
    long clean = 0;
    const long samples = 20000;
    for (long i = 0; i < samples; ++i) {
      const StructuredMatrix m = StructuredMatrix::sample(mp, rng);
      const ActivationPattern x =
          generate_pattern(model, k_clusters, 1, InBlockSizing::fixed, rng);
      const int target = x.active_clusters[0];
      bool hit = false;
      for (int k : x.active_clusters) {
        if (k != target && m.row_index(0, k) == m.row_index(0, target)) hit = true;
      }
      clean += hit ? 0 : 1;
    }
    const double p = static_cast<double>(clean) / static_cast<double>(samples);
    const double bound = 1.0 - static_cast<double>(k_clusters - 1) / rows;
    const double se = std::sqrt(bound * (1.0 - bound) / static_cast<double>(samples));
    CHECK(p >= bound - 3.0 * se);
  }
}

TEST_CASE("sizing rule meets its advertised success target") {
  SplitMix64 rng(55);
  const ModelParams model = ModelParams::make(20, 20, 3, 3);
  const int rows = MatrixParams::min_rows_per_stage(3, 0.75);
  REQUIRE(rows == 8);
  for (double delta : {0.1, 0.05}) {
    const int stages = MatrixParams::min_stages(20, 20, delta);
    const MatrixParams mp{rows, stages, 20, 20, 1.0};
    long good = 0;
    const long trials = 4000;
    for (long i = 0; i < trials; ++i) {
      const StructuredMatrix m = StructuredMatrix::sample(mp, rng);
      const ActivationPattern x = generate_pattern(model, 3, 3, InBlockSizing::fixed, rng);
      const BsDetection det = decode(m, m.measure(x), 0.5);
      good += det.counts == x.cluster_counts() ? 1 : 0;
    }
    const double p = static_cast<double>(good) / static_cast<double>(trials);
    const double se = std::sqrt(p * (1.0 - p) / static_cast<double>(trials)) + 1e-9;
    CHECK(p >= 1.0 - delta - 3.0 * se);
  }
}

TEST_CASE("decode touches a stage-times-clusters number of values") {
  SplitMix64 rng(56);
  const MatrixParams mp{16, 14, 100, 10, 1.0};
  const StructuredMatrix m = StructuredMatrix::sample(mp, rng);
  const ModelParams model = ModelParams::make(100, 10, 4, 5);
  const ActivationPattern x = generate_pattern(model, 4, 5, InBlockSizing::fixed, rng);
  DecodeStats stats;
  decode(m, m.measure(x), 0.5, &stats);
  const std::uint64_t budget = 4ull * mp.stages * mp.clusters;
  CHECK(stats.values_touched >= static_cast<std::uint64_t>(mp.stages) * mp.clusters);
  CHECK(stats.values_touched <= budget);
}

TEST_CASE("counts round half away from zero and clamp to the cluster size") {
  const StructuredMatrix m = make_matrix(1, 1, 1, 3, {0}, {1.0});
  Eigen::VectorXd y(1);
  y << 1.5;
  CHECK(decode(m, y, 100.0).counts[0] == 2);  // half rounds away from zero
  y << -0.4;
  CHECK(decode(m, y, 100.0).counts[0] == 0);  // negatives clamp at zero
  y << 7.0;
  CHECK(decode(m, y, 100.0).counts[0] == 3);  // cluster size caps the count
  CHECK_THROWS_AS(decode(m, y, 0.0), std::invalid_argument);
}

TEST_CASE("resource grants number the detected clusters consecutively") {
  BsDetection det;
  det.counts = {0, 3, 0, 1};
  det.active_clusters = {1, 3};
  det.collided_rows.resize(4);
  const ResourceGrant grant = resources_for(det);
  CHECK(grant.cluster_slots[1] == std::vector<int>{1, 2, 3});
  CHECK(grant.cluster_slots[3] == std::vector<int>{4});
  CHECK(grant.cluster_slots[0].empty());
  CHECK(grant.total == 4);

  BsDetection idle;
  idle.counts = {0, 0};
  idle.collided_rows.resize(2);
  const ResourceGrant none = resources_for(idle);
  CHECK(none.total == 0);

  // conservation: total slots equal the summed counts
  BsDetection mixed;
  mixed.counts = {2, 0, 5, 1};
  mixed.active_clusters = {0, 2, 3};
  mixed.collided_rows.resize(4);
  CHECK(resources_for(mixed).total == 8);
}

TEST_CASE("broadcast record round-trips") {
  BsDetection det;
  det.counts = {0, 3, 0, 2};
  det.active_clusters = {1, 3};
  det.collided_rows.resize(4);
  det.collided_rows[1] = {4, 9};
  det.raw_estimates = Eigen::VectorXd::Zero(4);

  std::stringstream buffer;
  write_detection(buffer, det);
  const BsDetection back = read_detection(buffer, 4);
  CHECK(back.counts == det.counts);
  CHECK(back.active_clusters == det.active_clusters);
  CHECK(back.collided_rows[1] == det.collided_rows[1]);
  CHECK(back.collided_rows[3].empty());

  std::stringstream bad("5 2\n");
  CHECK_THROWS_AS(read_detection(bad, 4), std::runtime_error);
  std::stringstream dup("2 1\n2 2\n");
  CHECK_THROWS_AS(read_detection(dup, 4), std::runtime_error);
}

TEST_SUITE_END();
