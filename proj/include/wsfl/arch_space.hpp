#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "wsfl/rng.hpp"

namespace wsfl {

/// Shape of the elastic architecture family: a residual multilayer network
/// with `stages` stages of up to base_depth + max_extra_depth blocks each,
/// where every block's middle width can shrink to a fraction of
/// max_mid_width. Subnetworks are nested: a smaller descriptor's parameters
/// are a prefix slice of a larger one's.
struct SpaceConfig {
  int stages = 4;
  int base_depth = 2;       // blocks per stage that are always active
  int max_extra_depth = 2;  // additional blocks a descriptor may enable
  std::vector<double> ratio_choices{0.25, 0.5, 0.75, 1.0};
  int hidden_width = 64;
  int max_mid_width = 64;
  int input_dim = 32;
  int num_classes = 10;

  int blocks_per_stage() const { return base_depth + max_extra_depth; }
  int max_blocks() const { return stages * blocks_per_stage(); }

  /// Middle width for a ratio choice: round(ratio * max_mid_width).
  int mid_width(int ratio_index) const;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;

  bool operator==(const SpaceConfig&) const = default;
};

/// One subnetwork: extra depth per stage plus a ratio-choice index per block
/// slot. Entries for inactive block slots are kept but forced to 0 by
/// canonicalize() so that equality and hashing are well-defined.
struct ArchDescriptor {
  std::vector<int> depths;  // length stages, each in [0, max_extra_depth]
  std::vector<int> ratios;  // length max_blocks(), index into ratio_choices

  bool operator==(const ArchDescriptor&) const = default;
  auto operator<=>(const ArchDescriptor&) const = default;
};

/// Half-open index rectangle [row0,row1) x [col0,col1) inside one tensor.
/// Vector tensors are stored as n x 1, so their ranges use col0=0, col1=1.
struct Slice {
  Eigen::Index row0 = 0, row1 = 0, col0 = 0, col1 = 0;

  Eigen::Index rows() const { return row1 - row0; }
  Eigen::Index cols() const { return col1 - col0; }
  Eigen::Index count() const { return rows() * cols(); }
  bool contains(Eigen::Index r, Eigen::Index c) const {
    return r >= row0 && r < row1 && c >= col0 && c < col1;
  }
};

/// Shape and canonical position of one named supernet tensor.
struct TensorSpec {
  std::string name;
  Eigen::Index rows = 0, cols = 0;
  bool is_bias = false;
};

/// Canonical tensor order: stem.w, stem.b, s{σ}.b{i}.{w1,b1,w2,b2}, head.w,
/// head.b. Every ParamSet and SliceMask is aligned with this order.
std::vector<TensorSpec> tensor_layout(const SpaceConfig& space);

// Positions inside tensor_layout for direct indexing.
inline int stem_w_index() { return 0; }
inline int stem_b_index() { return 1; }
inline int block_tensor_index(const SpaceConfig& space, int stage, int block, int comp) {
  return 2 + (stage * space.blocks_per_stage() + block) * 4 + comp;
}
inline int head_w_index(const SpaceConfig& space) { return 2 + space.max_blocks() * 4; }
inline int head_b_index(const SpaceConfig& space) { return head_w_index(space) + 1; }

/// For every tensor in tensor_layout order, the index ranges a subnetwork
/// owns inside the supernet. Tensors the subnetwork does not touch carry an
/// empty slice list.
struct SliceMask {
  std::vector<std::vector<Slice>> tensor_slices;

  std::int64_t count() const;
};

bool block_active(const SpaceConfig& space, const ArchDescriptor& arch, int stage, int block);
int active_block_count(const SpaceConfig& space, const ArchDescriptor& arch);

/// Zeroes ratio entries of inactive block slots; throws on out-of-range
/// depths/ratios or length mismatch against the space.
ArchDescriptor canonicalize(const SpaceConfig& space, ArchDescriptor arch);

ArchDescriptor smallest(const SpaceConfig& space);
ArchDescriptor largest(const SpaceConfig& space);

/// a's parameters are contained in b's: depths dominated elementwise and
/// every block active in a keeps a ratio index <= b's.
bool is_subarch(const SpaceConfig& space, const ArchDescriptor& a, const ArchDescriptor& b);

/// Number of distinct canonical descriptors:
///   sum over depth tuples d of |ratio_choices|^(active blocks under d).
/// Counting over all max_blocks() slots instead would over-count descriptors
/// that differ only in inactive-slot ratios; canonical form removes those.
std::uint64_t family_size(const SpaceConfig& space);

SliceMask mask(const SpaceConfig& space, const ArchDescriptor& arch);

/// Number of supernet parameter indices the descriptor owns.
std::int64_t param_count(const SpaceConfig& space, const ArchDescriptor& arch);

/// Per-sample floating-point operations of the descriptor's forward pass,
/// counting each linear-layer multiply-accumulate as 2 ops (bias adds and
/// activations ignored). Stem, active blocks, and head contribute
///   2*(input_dim*H + sum_i (H*m_i + m_i*H) + H*num_classes).
std::int64_t flops(const SpaceConfig& space, const ArchDescriptor& arch);

/// Each depth and each ratio slot drawn independently and uniformly, then
/// canonicalized.
ArchDescriptor random_arch(const SpaceConfig& space, Rng& rng);

/// Text form `d:[2,2,2,2]-e:[0.25,0.5,...]`. Ratios are printed as the
/// fraction values from ratio_choices. parse_arch accepts the shorthand
/// `VALxN` / `VAL×N` repeating an entry N times, ',' as the list separator
/// between the d and e groups, and arbitrary interior whitespace; it throws
/// std::runtime_error with the byte position on malformed input.
ArchDescriptor parse_arch(const SpaceConfig& space, std::string_view text);
std::string format_arch(const SpaceConfig& space, const ArchDescriptor& arch);

}  // namespace wsfl
