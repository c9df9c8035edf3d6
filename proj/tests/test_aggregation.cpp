#include <doctest.h>

#include <cmath>
#include <cstring>
#include <limits>

#include "oracles.hpp"
#include "wsfl/aggregation.hpp"

using namespace wsfl;

namespace {

ClientUpdate make_update(const SpaceConfig& space, int id, const ArchDescriptor& arch, long n_k,
                         Rng& rng) {
  return ClientUpdate{id, canonicalize(space, arch),
                      test::random_subnet_weights(space, arch, rng), n_k};
}

// Random update set whose first member always holds the largest arch.
std::vector<ClientUpdate> random_updates(const SpaceConfig& space, int count, Rng& rng) {
  std::vector<ClientUpdate> updates;
  updates.push_back(make_update(space, 0, largest(space), rng.uniform_int(1, 50), rng));
  for (int k = 1; k < count; ++k)
    updates.push_back(make_update(space, k, random_arch(space, rng), rng.uniform_int(1, 50), rng));
  return updates;
}

ParamSet random_params(const SpaceConfig& space, Rng& rng) {
  ParamSet W = ParamSet::zeros(space);
  for (Eigen::Index i = 0; i < W.size(); ++i)
    for (Eigen::Index k = 0; k < W.tensor(i).size(); ++k) W.tensor(i).data()[k] = rng.normal();
  return W;
}

}  // namespace

TEST_SUITE("aggregation") {

TEST_CASE("coverage: single arch shared by all clients counts sum n_k everywhere") {
  SpaceConfig space;
  Rng rng(2);
  std::vector<ClientUpdate> updates;
  long total = 0;
  for (int k = 0; k < 4; ++k) {
    const long n_k = 10 + k;
    updates.push_back(make_update(space, k, largest(space), n_k, rng));
    total += n_k;
  }
  const Coverage cov = coverage(space, updates);
  for (Eigen::Index i = 0; i < cov.weight.size(); ++i) {
    CHECK(cov.weight.tensor(i).minCoeff() == static_cast<double>(total));
    CHECK(cov.weight.tensor(i).maxCoeff() == static_cast<double>(total));
    CHECK(cov.hits.tensor(i).minCoeff() == 4.0);
  }
}

TEST_CASE("coverage: one smallest-arch client hits only its mask") {
  SpaceConfig space;
  Rng rng(3);
  std::vector<ClientUpdate> updates{make_update(space, 0, smallest(space), 7, rng)};
  const Coverage cov = coverage(space, updates);
  const auto sel = test::materialize_mask(space, mask(space, smallest(space)));
  for (Eigen::Index i = 0; i < cov.weight.size(); ++i) {
    const auto& m = sel[static_cast<std::size_t>(i)];
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c)
        CHECK(cov.weight.tensor(i)(r, c) == (m(r, c) > 0 ? 7.0 : 0.0));
  }
}

TEST_CASE("coverage matches the per-index oracle on a random 5-client plan") {
  Rng rng(5);
  const SpaceConfig space = test::random_space(rng);
  const auto updates = random_updates(space, 5, rng);
  const Coverage cov = coverage(space, updates);
  // Oracle: count per index by scanning slices.
  std::vector<SliceMask> masks;
  for (const auto& upd : updates) masks.push_back(mask(space, upd.arch));
  const auto layout = tensor_layout(space);
  for (std::size_t i = 0; i < layout.size(); ++i) {
    for (Eigen::Index r = 0; r < layout[i].rows; ++r) {
      for (Eigen::Index c = 0; c < layout[i].cols; ++c) {
        double expect_w = 0.0, expect_h = 0.0;
        for (std::size_t u = 0; u < updates.size(); ++u)
          for (const Slice& s : masks[u].tensor_slices[i])
            if (s.contains(r, c)) {
              expect_w += static_cast<double>(updates[u].n_k);
              expect_h += 1.0;
            }
        CHECK(cov.weight.tensor(static_cast<Eigen::Index>(i))(r, c) == expect_w);
        CHECK(cov.hits.tensor(static_cast<Eigen::Index>(i))(r, c) == expect_h);
      }
    }
  }
}

TEST_CASE("aggregate_overlap reduces to FedAvg when all clients share the largest arch") {
  SpaceConfig space;
  Rng rng(7);
  const ParamSet W_t = random_params(space, rng);
  std::vector<ClientUpdate> updates;
  for (int k = 0; k < 5; ++k)
    updates.push_back(make_update(space, k, largest(space), 3 + 2 * k, rng));
  const ParamSet got = aggregate_overlap(space, W_t, updates);

  // Independent FedAvg: plain sample-weighted mean per tensor.
  double total = 0.0;
  for (const auto& u : updates) total += static_cast<double>(u.n_k);
  for (Eigen::Index i = 0; i < got.size(); ++i) {
    Eigen::MatrixXd expect = Eigen::MatrixXd::Zero(got.tensor(i).rows(), got.tensor(i).cols());
    for (const auto& u : updates)
      expect += static_cast<double>(u.n_k) / total * u.weights.tensors.tensor(i);
    CHECK((got.tensor(i) - expect).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("uncovered parameters keep W_t bit-for-bit") {
  SpaceConfig space;
  Rng rng(11);
  const ParamSet W_t = random_params(space, rng);
  // Only the kernel can be driven without a largest holder; the public
  // aggregators enforce the largest-present rule.
  std::vector<ClientUpdate> updates{make_update(space, 0, smallest(space), 5, rng)};
  const ParamSet got = detail::weighted_average(space, W_t, updates, {});
  const auto sel = test::materialize_mask(space, mask(space, smallest(space)));
  for (Eigen::Index i = 0; i < got.size(); ++i) {
    const auto& m = sel[static_cast<std::size_t>(i)];
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c)
        if (m(r, c) == 0.0) {
          const double a = got.tensor(i)(r, c);
          const double b = W_t.tensor(i)(r, c);
          CHECK(std::memcmp(&a, &b, sizeof(double)) == 0);
        }
  }
}

TEST_CASE("a covered parameter summing to exactly zero still averages") {
  SpaceConfig space;
  space.stages = 1;
  space.base_depth = 1;
  space.max_extra_depth = 0;
  space.ratio_choices = {1.0};
  space.hidden_width = 2;
  space.max_mid_width = 2;
  space.input_dim = 2;
  space.num_classes = 2;
  ParamSet W_t = ParamSet::zeros(space);
  W_t.tensor("stem.w").setConstant(99.0);
  Rng rng(1);
  SubnetWeights w = test::random_subnet_weights(space, largest(space), rng);
  for (Eigen::Index i = 0; i < w.tensors.size(); ++i) w.tensors.tensor(i).setZero();
  std::vector<ClientUpdate> updates{ClientUpdate{0, largest(space), w, 4}};
  const ParamSet got = aggregate_overlap(space, W_t, updates);
  // The zero *update value* wins over the old weight: coverage is decided by
  // the hit count, not by a value test.
  CHECK(got.tensor("stem.w").cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("aggregate_overlap rejects plans without the largest arch") {
  SpaceConfig space;
  Rng rng(13);
  std::vector<ClientUpdate> updates{make_update(space, 0, smallest(space), 5, rng)};
  CHECK_THROWS_WITH_AS(aggregate_overlap(space, ParamSet::zeros(space), updates),
                       doctest::Contains("largest"), std::invalid_argument);
}

TEST_CASE("aggregate_overlap rejects non-finite updates") {
  SpaceConfig space;
  Rng rng(17);
  auto updates = random_updates(space, 2, rng);
  updates[1].weights.tensors.tensor(0)(0, 0) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_WITH_AS(aggregate_overlap(space, ParamSet::zeros(space), updates),
                       doctest::Contains("non-finite"), std::invalid_argument);
}

TEST_CASE("both aggregators match the brute-force oracle on random instances") {
  Rng rng(19);
  for (int trial = 0; trial < 25; ++trial) {
    const SpaceConfig space = test::random_space(rng);
    const ParamSet W_t = random_params(space, rng);
    const int count = static_cast<int>(rng.uniform_int(2, 8));
    const auto updates = random_updates(space, count, rng);

    const ParamSet overlap = aggregate_overlap(space, W_t, updates);
    const ParamSet overlap_expect = test::brute_force_average(space, W_t, updates, {});
    CHECK(test::max_abs_diff(overlap, overlap_expect) < 1e-12);

    const double beta = 0.05 + 0.9 * rng.uniform01();
    const ParamSet mx = aggregate_maxnet(space, W_t, updates, 0, beta);
    std::vector<double> lambdas(updates.size(),
                                (1.0 - beta) / static_cast<double>(updates.size() - 1));
    lambdas[0] = beta;
    const ParamSet mx_expect = test::brute_force_average(space, W_t, updates, lambdas);
    CHECK(test::max_abs_diff(mx, mx_expect) < 1e-12);
  }
}

TEST_CASE("maxnet with a lone largest holder returns w_j exactly") {
  SpaceConfig space;
  Rng rng(23);
  const ParamSet W_t = random_params(space, rng);
  std::vector<ClientUpdate> updates{make_update(space, 3, largest(space), 17, rng)};
  const ParamSet got = aggregate_maxnet(space, W_t, updates, 3, 0.42);
  for (Eigen::Index i = 0; i < got.size(); ++i)
    CHECK(got.tensor(i) == updates[0].weights.tensors.tensor(i));
}

TEST_CASE("maxnet with beta = 1/|S| and equal n_k equals overlap averaging") {
  SpaceConfig space;
  Rng rng(29);
  const ParamSet W_t = random_params(space, rng);
  auto updates = random_updates(space, 5, rng);
  for (auto& u : updates) u.n_k = 12;
  const ParamSet a = aggregate_maxnet(space, W_t, updates, 0, 1.0 / 5.0);
  const ParamSet b = aggregate_overlap(space, W_t, updates);
  CHECK(test::max_abs_diff(a, b) < 1e-12);
}

TEST_CASE("maxnet validates the designated holder") {
  SpaceConfig space;
  Rng rng(31);
  auto updates = random_updates(space, 3, rng);
  CHECK_THROWS_AS(aggregate_maxnet(space, ParamSet::zeros(space), updates, 99, 0.5),
                  std::invalid_argument);
  // Lone client whose arch is not the largest.
  std::vector<ClientUpdate> lone{make_update(space, 0, smallest(space), 3, rng)};
  CHECK_THROWS_AS(aggregate_maxnet(space, ParamSet::zeros(space), lone, 0, 0.5),
                  std::invalid_argument);
}

TEST_CASE("outputs stay within the convex hull of contributions") {
  Rng rng(37);
  for (int trial = 0; trial < 10; ++trial) {
    const SpaceConfig space = test::random_space(rng);
    const ParamSet W_t = random_params(space, rng);
    const auto updates = random_updates(space, 4, rng);
    const ParamSet got = aggregate_overlap(space, W_t, updates);
    const auto layout = tensor_layout(space);
    std::vector<SliceMask> masks;
    std::vector<std::vector<Eigen::Index>> pos;  // layout tensor -> subnet tensor
    for (const auto& upd : updates) {
      masks.push_back(mask(space, upd.arch));
      std::vector<Eigen::Index> p(layout.size(), -1);
      Eigen::Index next = 0;
      for (std::size_t j = 0; j < layout.size(); ++j)
        if (!masks.back().tensor_slices[j].empty()) p[j] = next++;
      pos.push_back(std::move(p));
    }
    for (std::size_t i = 0; i < layout.size(); ++i) {
      for (Eigen::Index r = 0; r < layout[i].rows; ++r) {
        for (Eigen::Index c = 0; c < layout[i].cols; ++c) {
          double lo = std::numeric_limits<double>::infinity(), hi = -lo;
          bool covered = false;
          for (std::size_t u = 0; u < updates.size(); ++u) {
            for (const Slice& s : masks[u].tensor_slices[i]) {
              if (!s.contains(r, c)) continue;
              const double v =
                  updates[u].weights.tensors.tensor(pos[u][i])(r - s.row0, c - s.col0);
              lo = std::min(lo, v);
              hi = std::max(hi, v);
              covered = true;
            }
          }
          const double v = got.tensor(static_cast<Eigen::Index>(i))(r, c);
          if (covered)
            CHECK((v >= lo - 1e-12 && v <= hi + 1e-12));
          else
            CHECK(v == W_t.tensor(static_cast<Eigen::Index>(i))(r, c));
        }
      }
    }
  }
}

TEST_CASE("scaling all n_k leaves both aggregators unchanged") {
  Rng rng(41);
  const SpaceConfig space = test::random_space(rng);
  const ParamSet W_t = random_params(space, rng);
  auto updates = random_updates(space, 4, rng);
  const ParamSet base_overlap = aggregate_overlap(space, W_t, updates);
  const ParamSet base_maxnet = aggregate_maxnet(space, W_t, updates, 0, 0.7);
  for (auto& u : updates) u.n_k *= 13;
  CHECK(test::max_abs_diff(aggregate_overlap(space, W_t, updates), base_overlap) < 1e-12);
  CHECK(test::max_abs_diff(aggregate_maxnet(space, W_t, updates, 0, 0.7), base_maxnet) < 1e-12);
}

TEST_CASE("beta schedule endpoints and midpoint") {
  BetaSchedule cosine{0.9, 0.125, DecayKind::cosine, 801};
  CHECK(beta_at(cosine, 1) == 0.9);
  CHECK(beta_at(cosine, 801) == 0.125);
  CHECK(beta_at(cosine, 5000) == 0.125);

  BetaSchedule linear{0.9, 0.125, DecayKind::linear, 801};
  CHECK(beta_at(linear, 1) == 0.9);
  CHECK(beta_at(linear, 801) == 0.125);
  CHECK(std::abs(beta_at(linear, 401) - 0.5125) < 1e-15);

  BetaSchedule constant{0.9, 0.125, DecayKind::constant, 801};
  for (long t : {1L, 400L, 801L, 2000L}) CHECK(beta_at(constant, t) == 0.9);

  CHECK_THROWS_AS(beta_at(linear, 0), std::invalid_argument);
}

TEST_CASE("beta is nonincreasing and clamps at beta_end") {
  for (DecayKind kind : {DecayKind::linear, DecayKind::cosine}) {
    BetaSchedule sched{0.8, 0.2, kind, 57};
    double prev = beta_at(sched, 1);
    for (long t = 2; t <= 70; ++t) {
      const double b = beta_at(sched, t);
      CHECK(b <= prev + 1e-15);
      if (t >= sched.decay_rounds) CHECK(b == sched.beta_end);
      prev = b;
    }
  }
}

TEST_CASE("BetaSchedule validation") {
  BetaSchedule bad{0.5, 0.9, DecayKind::cosine, 10};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = BetaSchedule{0.9, 0.1, DecayKind::cosine, 0};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

}  // TEST_SUITE
