#include "wsfl/client_runtime.hpp"

#include <cmath>
#include <stdexcept>

namespace wsfl {

void LocalTrainConfig::validate() const {
  if (local_epochs < 1) throw std::invalid_argument("LocalTrainConfig: local_epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("LocalTrainConfig: batch_size must be >= 1");
  if (learning_rate < 0.0)
    throw std::invalid_argument("LocalTrainConfig: learning_rate must be >= 0");
}

SubnetWeights client_update(const SpaceConfig& space, const Dataset& data,
                            const ClientPartition& partition, const SubnetWeights& w,
                            const LocalTrainConfig& cfg, Rng& rng) {
  cfg.validate();
  if (partition.indices.empty())
    throw std::invalid_argument("client_update: empty partition for client " +
                                std::to_string(partition.client_id));

  // Work inside a supernet-shaped workspace; only mask(arch) slices are ever
  // read or written, so extract at the end returns exactly the trained w.
  ParamSet workspace = superimpose(space, ParamSet::zeros(space), w.arch, w);

  std::vector<int> order = partition.indices;
  const auto n = static_cast<long>(order.size());
  for (int epoch = 0; epoch < cfg.local_epochs; ++epoch) {
    rng.shuffle(order);
    for (long start = 0; start < n; start += cfg.batch_size) {
      const long stop = std::min<long>(start + cfg.batch_size, n);
      Eigen::MatrixXd xb(stop - start, data.input_dim());
      std::vector<int> yb(static_cast<std::size_t>(stop - start));
      for (long i = start; i < stop; ++i) {
        const int row = order[static_cast<std::size_t>(i)];
        xb.row(i - start) = data.train_x.row(row);
        yb[static_cast<std::size_t>(i - start)] = data.train_y[static_cast<std::size_t>(row)];
      }
      auto [loss, grad] = loss_and_grad(space, workspace, w.arch, xb, yb);
      if (!std::isfinite(loss))
        throw std::runtime_error("client_update: non-finite loss (diverged) for client " +
                                 std::to_string(partition.client_id));
      axpy_masked(space, workspace, w.arch, grad, -cfg.learning_rate);
    }
  }
  return extract(space, workspace, w.arch);
}

double evaluate(const SpaceConfig& space, const ParamSet& W, const ArchDescriptor& arch,
                const Eigen::MatrixXd& x, std::span<const int> y) {
  if (x.rows() == 0) throw std::invalid_argument("evaluate: empty evaluation set");
  const Eigen::MatrixXd logits = forward(space, W, arch, x);
  long correct = 0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    int best = 0;
    for (Eigen::Index c = 1; c < logits.cols(); ++c)
      if (logits(i, c) > logits(i, best)) best = static_cast<int>(c);
    if (best == y[static_cast<std::size_t>(i)]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(logits.rows());
}

double evaluate(const SpaceConfig& space, const ParamSet& W, const ArchDescriptor& arch,
                const Dataset& data) {
  return evaluate(space, W, arch, data.test_x, data.test_y);
}

}  // namespace wsfl
