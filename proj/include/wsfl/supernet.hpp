#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "wsfl/arch_space.hpp"

namespace wsfl {

/// Ordered map from tensor name to dense matrix, aligned with
/// tensor_layout(space). Vector-valued tensors are stored as n x 1.
class ParamSet {
 public:
  ParamSet() = default;

  static ParamSet zeros(const SpaceConfig& space);

  Eigen::Index size() const { return static_cast<Eigen::Index>(tensors_.size()); }
  const std::string& name(Eigen::Index i) const { return names_[static_cast<std::size_t>(i)]; }
  Eigen::MatrixXd& tensor(Eigen::Index i) { return tensors_[static_cast<std::size_t>(i)]; }
  const Eigen::MatrixXd& tensor(Eigen::Index i) const {
    return tensors_[static_cast<std::size_t>(i)];
  }

  /// -1 when absent.
  Eigen::Index find(std::string_view name) const;
  Eigen::MatrixXd& tensor(std::string_view name);
  const Eigen::MatrixXd& tensor(std::string_view name) const;

  void add(std::string name, Eigen::MatrixXd t);

  bool same_shape_as(const ParamSet& other) const;
  bool all_finite() const;

 private:
  std::vector<std::string> names_;
  std::vector<Eigen::MatrixXd> tensors_;
};

/// Weights of one subnetwork, shaped to its mask's slice extents: w = G(W, arch).
/// Only tensors the architecture touches are present, in layout order.
struct SubnetWeights {
  ArchDescriptor arch;
  ParamSet tensors;
};

/// He-normal matrices (stddev sqrt(2/fan_in), fan_in = rows), zero biases.
ParamSet init_supernet(const SpaceConfig& space, std::uint64_t seed);

/// G(W, arch): copies the masked slices out of W. No aliasing with W.
SubnetWeights extract(const SpaceConfig& space, const ParamSet& W, const ArchDescriptor& arch);

/// M(W0, arch, w): W0 with mask(arch) positions overwritten by w; everything
/// else untouched. Throws if w.arch differs from arch.
ParamSet superimpose(const SpaceConfig& space, const ParamSet& W0, const ArchDescriptor& arch,
                     const SubnetWeights& w);

/// In-place axpy over the masked slices: W += alpha * delta. Used for the
/// SGD update so weights never leave the supernet-shaped workspace.
void axpy_masked(const SpaceConfig& space, ParamSet& W, const ArchDescriptor& arch,
                 const SubnetWeights& delta, double alpha);

/// Runs the elastic residual network restricted to `arch`:
///   h = relu(x*stem.w + stem.b)
///   per active block with mid width m: h += relu(h*w1[:, :m] + b1[:m])*w2[:m, :] + b2
///   logits = h*head.w + head.b
/// Inactive blocks are skipped. Throws on non-finite input.
Eigen::MatrixXd forward(const SpaceConfig& space, const ParamSet& W, const ArchDescriptor& arch,
                        const Eigen::MatrixXd& batch);

/// Mean softmax cross-entropy over the batch plus its gradient, shaped like
/// extract(W, arch); parameters outside the mask receive no gradient.
/// Throws on labels outside [0, num_classes).
std::pair<double, SubnetWeights> loss_and_grad(const SpaceConfig& space, const ParamSet& W,
                                               const ArchDescriptor& arch,
                                               const Eigen::MatrixXd& batch,
                                               const std::vector<int>& labels);

}  // namespace wsfl
