#pragma once

#include <span>

#include "wsfl/fed_data.hpp"
#include "wsfl/supernet.hpp"

namespace wsfl {

/// Plain SGD: no momentum, no weight decay, constant learning rate.
struct LocalTrainConfig {
  int local_epochs = 5;
  int batch_size = 32;
  double learning_rate = 0.1;

  void validate() const;
};

/// Local training of an assigned subnetwork: local_epochs passes of
/// mini-batch SGD (w <- w - lr * grad, mean-reduced loss) over a per-epoch
/// seeded shuffle of the partition. The last partial batch is kept. The
/// input weights are left unmodified. Throws when the loss turns non-finite.
SubnetWeights client_update(const SpaceConfig& space, const Dataset& data,
                            const ClientPartition& partition, const SubnetWeights& w,
                            const LocalTrainConfig& cfg, Rng& rng);

/// Argmax-of-logits accuracy in [0, 1]; ties go to the lowest class id.
double evaluate(const SpaceConfig& space, const ParamSet& W, const ArchDescriptor& arch,
                const Eigen::MatrixXd& x, std::span<const int> y);

/// Accuracy on the dataset's test split.
double evaluate(const SpaceConfig& space, const ParamSet& W, const ArchDescriptor& arch,
                const Dataset& data);

}  // namespace wsfl
