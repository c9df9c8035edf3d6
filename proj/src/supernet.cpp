#include "wsfl/supernet.hpp"

#include <cmath>
#include <stdexcept>

namespace wsfl {

ParamSet ParamSet::zeros(const SpaceConfig& space) {
  ParamSet out;
  for (const auto& spec : tensor_layout(space))
    out.add(spec.name, Eigen::MatrixXd::Zero(spec.rows, spec.cols));
  return out;
}

Eigen::Index ParamSet::find(std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i)
    if (names_[i] == name) return static_cast<Eigen::Index>(i);
  return -1;
}

Eigen::MatrixXd& ParamSet::tensor(std::string_view name) {
  const Eigen::Index i = find(name);
  if (i < 0) throw std::out_of_range("ParamSet: no tensor named " + std::string(name));
  return tensors_[static_cast<std::size_t>(i)];
}

const Eigen::MatrixXd& ParamSet::tensor(std::string_view name) const {
  const Eigen::Index i = find(name);
  if (i < 0) throw std::out_of_range("ParamSet: no tensor named " + std::string(name));
  return tensors_[static_cast<std::size_t>(i)];
}

void ParamSet::add(std::string name, Eigen::MatrixXd t) {
  names_.push_back(std::move(name));
  tensors_.push_back(std::move(t));
}

bool ParamSet::same_shape_as(const ParamSet& other) const {
  if (names_ != other.names_) return false;
  for (std::size_t i = 0; i < tensors_.size(); ++i)
    if (tensors_[i].rows() != other.tensors_[i].rows() ||
        tensors_[i].cols() != other.tensors_[i].cols())
      return false;
  return true;
}

bool ParamSet::all_finite() const {
  for (const auto& t : tensors_)
    if (!t.allFinite()) return false;
  return true;
}

ParamSet init_supernet(const SpaceConfig& space, std::uint64_t seed) {
  space.validate();
  Rng rng(seed);
  ParamSet out;
  for (const auto& spec : tensor_layout(space)) {
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(spec.rows, spec.cols);
    if (!spec.is_bias) {
      const double stddev = std::sqrt(2.0 / static_cast<double>(spec.rows));
      double* data = t.data();
      for (Eigen::Index i = 0; i < t.size(); ++i) data[i] = rng.normal(0.0, stddev);
    }
    out.add(spec.name, std::move(t));
  }
  return out;
}

namespace {

const Slice& single_slice(const std::vector<Slice>& slices, const std::string& name) {
  if (slices.size() != 1)
    throw std::logic_error("expected exactly one slice for tensor " + name);
  return slices.front();
}

}  // namespace

SubnetWeights extract(const SpaceConfig& space, const ParamSet& W, const ArchDescriptor& arch) {
  const SliceMask sm = mask(space, arch);
  const auto layout = tensor_layout(space);
  SubnetWeights out;
  out.arch = canonicalize(space, arch);
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const auto& slices = sm.tensor_slices[i];
    if (slices.empty()) continue;
    const Slice& s = single_slice(slices, layout[i].name);
    out.tensors.add(layout[i].name,
                    W.tensor(static_cast<Eigen::Index>(i)).block(s.row0, s.col0, s.rows(), s.cols()));
  }
  return out;
}

ParamSet superimpose(const SpaceConfig& space, const ParamSet& W0, const ArchDescriptor& arch,
                     const SubnetWeights& w) {
  if (canonicalize(space, arch) != w.arch)
    throw std::invalid_argument("superimpose: descriptor does not match the weights' arch");
  const SliceMask sm = mask(space, arch);
  const auto layout = tensor_layout(space);
  ParamSet out = W0;
  Eigen::Index next = 0;
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const auto& slices = sm.tensor_slices[i];
    if (slices.empty()) continue;
    const Slice& s = single_slice(slices, layout[i].name);
    const Eigen::MatrixXd& src = w.tensors.tensor(next);
    if (w.tensors.name(next) != layout[i].name || src.rows() != s.rows() || src.cols() != s.cols())
      throw std::invalid_argument("superimpose: weights do not line up with mask for tensor " +
                                  layout[i].name);
    out.tensor(static_cast<Eigen::Index>(i)).block(s.row0, s.col0, s.rows(), s.cols()) = src;
    ++next;
  }
  return out;
}

void axpy_masked(const SpaceConfig& space, ParamSet& W, const ArchDescriptor& arch,
                 const SubnetWeights& delta, double alpha) {
  const SliceMask sm = mask(space, arch);
  const auto layout = tensor_layout(space);
  Eigen::Index next = 0;
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const auto& slices = sm.tensor_slices[i];
    if (slices.empty()) continue;
    const Slice& s = single_slice(slices, layout[i].name);
    W.tensor(static_cast<Eigen::Index>(i)).block(s.row0, s.col0, s.rows(), s.cols()) +=
        alpha * delta.tensors.tensor(next);
    ++next;
  }
}

namespace {

struct ForwardTrace {
  // h[0] is the stem output; h[k] the output after the k-th active block.
  std::vector<Eigen::MatrixXd> h;
  // Per active block: relu'd mid activation and the block's tensor indices.
  std::vector<Eigen::MatrixXd> mid;
  std::vector<int> block_index;  // flat stage*blocks_per_stage + block
  std::vector<int> mid_width;
};

ForwardTrace run_forward(const SpaceConfig& space, const ParamSet& W, const ArchDescriptor& arch,
                         const Eigen::MatrixXd& x) {
  if (x.cols() != space.input_dim)
    throw std::invalid_argument("forward: batch column count does not match input_dim");
  if (!x.allFinite()) throw std::invalid_argument("forward: non-finite input");
  ForwardTrace trace;
  trace.h.push_back(((x * W.tensor(stem_w_index())).rowwise() +
                     W.tensor(stem_b_index()).col(0).transpose())
                        .cwiseMax(0.0));
  for (int s = 0; s < space.stages; ++s) {
    for (int b = 0; b < space.blocks_per_stage(); ++b) {
      if (!block_active(space, arch, s, b)) continue;
      const int flat = s * space.blocks_per_stage() + b;
      const int m = space.mid_width(arch.ratios[static_cast<std::size_t>(flat)]);
      const auto& w1 = W.tensor(block_tensor_index(space, s, b, 0));
      const auto& b1 = W.tensor(block_tensor_index(space, s, b, 1));
      const auto& w2 = W.tensor(block_tensor_index(space, s, b, 2));
      const auto& b2 = W.tensor(block_tensor_index(space, s, b, 3));
      const Eigen::MatrixXd& hin = trace.h.back();
      Eigen::MatrixXd a =
          ((hin * w1.leftCols(m)).rowwise() + b1.col(0).head(m).transpose()).cwiseMax(0.0);
      Eigen::MatrixXd hout =
          (hin + a * w2.topRows(m)).rowwise() + b2.col(0).transpose();
      trace.mid.push_back(std::move(a));
      trace.block_index.push_back(flat);
      trace.mid_width.push_back(m);
      trace.h.push_back(std::move(hout));
    }
  }
  return trace;
}

}  // namespace

Eigen::MatrixXd forward(const SpaceConfig& space, const ParamSet& W, const ArchDescriptor& arch,
                        const Eigen::MatrixXd& batch) {
  const ArchDescriptor canon = canonicalize(space, arch);
  const ForwardTrace trace = run_forward(space, W, canon, batch);
  return (trace.h.back() * W.tensor(head_w_index(space))).rowwise() +
         W.tensor(head_b_index(space)).col(0).transpose();
}

std::pair<double, SubnetWeights> loss_and_grad(const SpaceConfig& space, const ParamSet& W,
                                               const ArchDescriptor& arch,
                                               const Eigen::MatrixXd& batch,
                                               const std::vector<int>& labels) {
  const ArchDescriptor canon = canonicalize(space, arch);
  const Eigen::Index n = batch.rows();
  if (n == 0) throw std::invalid_argument("loss_and_grad: empty batch");
  if (labels.size() != static_cast<std::size_t>(n))
    throw std::invalid_argument("loss_and_grad: labels/batch size mismatch");
  for (int y : labels)
    if (y < 0 || y >= space.num_classes)
      throw std::invalid_argument("loss_and_grad: label out of range");

  const ForwardTrace trace = run_forward(space, W, canon, batch);
  const Eigen::MatrixXd logits = (trace.h.back() * W.tensor(head_w_index(space))).rowwise() +
                                 W.tensor(head_b_index(space)).col(0).transpose();

  // Stable softmax cross-entropy, mean reduction.
  const Eigen::VectorXd row_max = logits.rowwise().maxCoeff();
  Eigen::MatrixXd shifted = logits.colwise() - row_max;
  Eigen::MatrixXd p = shifted.array().exp();
  const Eigen::VectorXd denom = p.rowwise().sum();
  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    loss += std::log(denom(i)) - shifted(i, labels[static_cast<std::size_t>(i)]);
  loss /= static_cast<double>(n);
  p.array().colwise() /= denom.array();
  Eigen::MatrixXd g = p;
  for (Eigen::Index i = 0; i < n; ++i) g(i, labels[static_cast<std::size_t>(i)]) -= 1.0;
  g /= static_cast<double>(n);

  ParamSet grads = ParamSet::zeros(space);
  grads.tensor(head_w_index(space)) = trace.h.back().transpose() * g;
  grads.tensor(head_b_index(space)).col(0) = g.colwise().sum();

  Eigen::MatrixXd d = g * W.tensor(head_w_index(space)).transpose();
  for (int k = static_cast<int>(trace.block_index.size()) - 1; k >= 0; --k) {
    const int flat = trace.block_index[static_cast<std::size_t>(k)];
    const int stage = flat / space.blocks_per_stage();
    const int block = flat % space.blocks_per_stage();
    const int m = trace.mid_width[static_cast<std::size_t>(k)];
    const auto& w1 = W.tensor(block_tensor_index(space, stage, block, 0));
    const auto& w2 = W.tensor(block_tensor_index(space, stage, block, 2));
    const Eigen::MatrixXd& a = trace.mid[static_cast<std::size_t>(k)];
    const Eigen::MatrixXd& hin = trace.h[static_cast<std::size_t>(k)];

    grads.tensor(block_tensor_index(space, stage, block, 3)).col(0) = d.colwise().sum();
    grads.tensor(block_tensor_index(space, stage, block, 2)).topRows(m) = a.transpose() * d;
    Eigen::MatrixXd dz = (d * w2.topRows(m).transpose()).cwiseProduct(
        (a.array() > 0.0).cast<double>().matrix());
    grads.tensor(block_tensor_index(space, stage, block, 1)).col(0).head(m) = dz.colwise().sum();
    grads.tensor(block_tensor_index(space, stage, block, 0)).leftCols(m) = hin.transpose() * dz;
    d += dz * w1.leftCols(m).transpose();
  }

  Eigen::MatrixXd dz0 =
      d.cwiseProduct((trace.h.front().array() > 0.0).cast<double>().matrix());
  grads.tensor(stem_w_index()) = batch.transpose() * dz0;
  grads.tensor(stem_b_index()).col(0) = dz0.colwise().sum();

  SubnetWeights out = extract(space, grads, canon);
  return {loss, std::move(out)};
}

}  // namespace wsfl
