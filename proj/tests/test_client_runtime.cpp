#include <doctest.h>

#include "oracles.hpp"
#include "wsfl/client_runtime.hpp"

using namespace wsfl;

namespace {

ClientPartition whole_train(const Dataset& data) {
  ClientPartition part;
  part.client_id = 0;
  for (int i = 0; i < data.train_size(); ++i) part.indices.push_back(i);
  return part;
}

}  // namespace

TEST_SUITE("client_runtime") {

TEST_CASE("zero learning rate returns the input weights exactly") {
  SpaceConfig space;
  space.input_dim = 4;
  space.num_classes = 3;
  const Dataset data = synth_blobs(3, 4, 20, 1.0, 1);
  const ParamSet W = init_supernet(space, 2);
  const SubnetWeights w = extract(space, W, smallest(space));
  LocalTrainConfig cfg;
  cfg.learning_rate = 0.0;
  Rng rng(3);
  const SubnetWeights out = client_update(space, data, whole_train(data), w, cfg, rng);
  CHECK(test::bitwise_equal(out.tensors, w.tensors));
}

TEST_CASE("one epoch with batch >= n is exactly one full-batch step") {
  SpaceConfig space;
  space.stages = 1;
  space.base_depth = 1;
  space.max_extra_depth = 0;
  space.ratio_choices = {1.0};
  space.hidden_width = 4;
  space.max_mid_width = 4;
  space.input_dim = 2;
  space.num_classes = 2;
  const Dataset data = synth_blobs(2, 2, 10, 0.8, 5);
  const ParamSet W = init_supernet(space, 7);
  const ArchDescriptor arch = largest(space);
  const SubnetWeights w = extract(space, W, arch);

  LocalTrainConfig cfg;
  cfg.local_epochs = 1;
  cfg.batch_size = 1000;  // >= n_k: single step
  cfg.learning_rate = 0.05;
  Rng rng(11);
  const SubnetWeights got = client_update(space, data, whole_train(data), w, cfg, rng);

  // Oracle: one reference-net step on the same (shuffled) full batch.
  Rng rng2(11);
  std::vector<int> order = whole_train(data).indices;
  rng2.shuffle(order);
  Eigen::MatrixXd xb(static_cast<Eigen::Index>(order.size()), 2);
  std::vector<int> yb;
  for (std::size_t i = 0; i < order.size(); ++i) {
    xb.row(static_cast<Eigen::Index>(i)) = data.train_x.row(order[i]);
    yb.push_back(data.train_y[static_cast<std::size_t>(order[i])]);
  }
  test::ReferenceNet ref = test::ReferenceNet::from_subnet(w);
  test::ReferenceNet grad;
  ref.loss_and_grad(xb, yb, grad);
  ref.sgd_step(grad, cfg.learning_rate);

  const ParamSet full = superimpose(space, ParamSet::zeros(space), arch, got);
  CHECK(test::max_abs_diff_full(space, ref, full) < 1e-12);
}

TEST_CASE("a hand-computed SGD step on a tiny stem-head network") {
  // No blocks: logits = relu(x*ws + bs) * wh + bh. One sample x = [1],
  // label 0, ws = [1], bs = 0, wh = [[1, -1]], bh = [0, 0].
  // Forward: h = 1, logits = (1, -1), p = (e, e^-1)/Z.
  // d logits = p - (1, 0); dwh = h^T d; dh = d * wh^T; dws = x^T dh (relu on).
  SpaceConfig space;
  space.stages = 1;
  space.base_depth = 0;
  space.max_extra_depth = 0;
  space.ratio_choices = {1.0};
  space.hidden_width = 1;
  space.max_mid_width = 1;
  space.input_dim = 1;
  space.num_classes = 2;

  ParamSet W = ParamSet::zeros(space);
  W.tensor("stem.w")(0, 0) = 1.0;
  W.tensor("head.w")(0, 0) = 1.0;
  W.tensor("head.w")(0, 1) = -1.0;

  Eigen::MatrixXd x(1, 1);
  x(0, 0) = 1.0;
  const auto [loss, grad] = loss_and_grad(space, W, largest(space), x, {0});

  const double z = std::exp(1.0) + std::exp(-1.0);
  const double p0 = std::exp(1.0) / z;
  const double p1 = std::exp(-1.0) / z;
  CHECK(loss == doctest::Approx(-std::log(p0)).epsilon(1e-14));
  CHECK(grad.tensors.tensor("head.w")(0, 0) == doctest::Approx(p0 - 1.0).epsilon(1e-14));
  CHECK(grad.tensors.tensor("head.w")(0, 1) == doctest::Approx(p1).epsilon(1e-14));
  CHECK(grad.tensors.tensor("head.b")(0, 0) == doctest::Approx(p0 - 1.0).epsilon(1e-14));
  CHECK(grad.tensors.tensor("head.b")(1, 0) == doctest::Approx(p1).epsilon(1e-14));
  // dh = (p0-1)*1 + p1*(-1); stem gradient passes the active relu.
  const double dh = (p0 - 1.0) - p1;
  CHECK(grad.tensors.tensor("stem.w")(0, 0) == doctest::Approx(dh).epsilon(1e-14));
  CHECK(grad.tensors.tensor("stem.b")(0, 0) == doctest::Approx(dh).epsilon(1e-14));
}

TEST_CASE("step count is local_epochs * ceil(n_k / batch_size)") {
  SpaceConfig space;
  space.stages = 1;
  space.base_depth = 1;
  space.max_extra_depth = 0;
  space.ratio_choices = {1.0};
  space.hidden_width = 4;
  space.max_mid_width = 4;
  space.input_dim = 2;
  space.num_classes = 2;
  const Dataset data = synth_blobs(2, 2, 10, 0.8, 37);  // 16 train rows
  ClientPartition part = whole_train(data);
  REQUIRE(part.n_k() == 16);
  const SubnetWeights w = extract(space, init_supernet(space, 3), largest(space));

  LocalTrainConfig cfg;
  cfg.local_epochs = 3;
  cfg.batch_size = 5;  // ceil(16/5) = 4 steps per epoch
  cfg.learning_rate = 0.02;
  Rng rng(41);
  const SubnetWeights got = client_update(space, data, part, w, cfg, rng);

  // Reference loop with an explicit step counter and identical draws.
  Rng rng2(41);
  test::ReferenceNet ref = test::ReferenceNet::from_subnet(w);
  std::vector<int> order = part.indices;
  int steps = 0;
  for (int epoch = 0; epoch < cfg.local_epochs; ++epoch) {
    rng2.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(start + cfg.batch_size, order.size());
      Eigen::MatrixXd xb(static_cast<Eigen::Index>(stop - start), 2);
      std::vector<int> yb;
      for (std::size_t i = start; i < stop; ++i) {
        xb.row(static_cast<Eigen::Index>(i - start)) = data.train_x.row(order[i]);
        yb.push_back(data.train_y[static_cast<std::size_t>(order[i])]);
      }
      test::ReferenceNet grad;
      ref.loss_and_grad(xb, yb, grad);
      ref.sgd_step(grad, cfg.learning_rate);
      ++steps;
    }
  }
  CHECK(steps == 3 * 4);
  const ParamSet full = superimpose(space, ParamSet::zeros(space), largest(space), got);
  CHECK(test::max_abs_diff_full(space, ref, full) < 1e-12);
}

TEST_CASE("client updates are deterministic given equal seeds") {
  SpaceConfig space;
  space.stages = 1;
  space.base_depth = 1;
  space.max_extra_depth = 1;
  space.ratio_choices = {0.5, 1.0};
  space.hidden_width = 8;
  space.max_mid_width = 8;
  space.input_dim = 4;
  space.num_classes = 3;
  const Dataset data = synth_blobs(3, 4, 30, 1.0, 13);
  const SubnetWeights w = extract(space, init_supernet(space, 17), largest(space));
  LocalTrainConfig cfg;
  cfg.local_epochs = 2;
  cfg.batch_size = 8;
  cfg.learning_rate = 0.03;
  Rng a(19), b(19);
  const SubnetWeights out1 = client_update(space, data, whole_train(data), w, cfg, a);
  const SubnetWeights out2 = client_update(space, data, whole_train(data), w, cfg, b);
  CHECK(test::bitwise_equal(out1.tensors, out2.tensors));
}

TEST_CASE("client_update rejects empty partitions") {
  SpaceConfig space;
  space.input_dim = 4;
  space.num_classes = 3;
  const Dataset data = synth_blobs(3, 4, 10, 1.0, 23);
  const SubnetWeights w = extract(space, init_supernet(space, 1), smallest(space));
  ClientPartition empty;
  Rng rng(1);
  CHECK_THROWS_AS(client_update(space, data, empty, w, LocalTrainConfig{}, rng),
                  std::invalid_argument);
}

TEST_CASE("divergence reports the client") {
  SpaceConfig space;
  space.input_dim = 4;
  space.num_classes = 3;
  const Dataset data = synth_blobs(3, 4, 20, 1.0, 29);
  const SubnetWeights w = extract(space, init_supernet(space, 1), largest(space));
  LocalTrainConfig cfg;
  cfg.learning_rate = 1e154;  // overflow to inf within a few steps
  cfg.local_epochs = 5;
  Rng rng(1);
  CHECK_THROWS_WITH_AS(client_update(space, data, whole_train(data), w, cfg, rng),
                       doctest::Contains("client 0"), std::runtime_error);
}

TEST_CASE("evaluate: constructed labels give accuracy 1, and calls are pure") {
  SpaceConfig space;
  space.input_dim = 4;
  space.num_classes = 3;
  const Dataset data = synth_blobs(3, 4, 40, 1.0, 31);
  const ParamSet W = init_supernet(space, 37);
  const ArchDescriptor arch = largest(space);
  // Relabel by the net's own argmax: accuracy must be exactly 1.
  const Eigen::MatrixXd logits = forward(space, W, arch, data.test_x);
  std::vector<int> labels(static_cast<std::size_t>(logits.rows()));
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    int best = 0;
    for (Eigen::Index c = 1; c < logits.cols(); ++c)
      if (logits(i, c) > logits(i, best)) best = static_cast<int>(c);
    labels[static_cast<std::size_t>(i)] = best;
  }
  CHECK(evaluate(space, W, arch, data.test_x, labels) == 1.0);
  CHECK(evaluate(space, W, arch, data) == evaluate(space, W, arch, data));
}

TEST_CASE("untrained net on random labels stays near chance") {
  SpaceConfig space;  // 10 classes
  const Dataset data = synth_blobs(10, 32, 100, 1.0, 41);
  Rng rng(43);
  std::vector<int> labels(static_cast<std::size_t>(data.test_size()));
  for (auto& y : labels) y = static_cast<int>(rng.bounded(10));
  const double acc =
      evaluate(space, init_supernet(space, 47), largest(space), data.test_x, labels);
  CHECK(acc >= 0.0);
  CHECK(acc <= 0.35);
}

TEST_CASE("argmax ties resolve to the lowest class id") {
  SpaceConfig space;
  space.stages = 1;
  space.base_depth = 0;
  space.max_extra_depth = 0;
  space.ratio_choices = {1.0};
  space.hidden_width = 2;
  space.input_dim = 2;
  space.num_classes = 3;
  const ParamSet W = ParamSet::zeros(space);  // all logits equal -> argmax 0
  Eigen::MatrixXd x(2, 2);
  x << 1.0, 2.0, -1.0, 0.5;
  CHECK(evaluate(space, W, largest(space), x, std::vector<int>{0, 0}) == 1.0);
  CHECK(evaluate(space, W, largest(space), x, std::vector<int>{1, 2}) == 0.0);
}

}  // TEST_SUITE
