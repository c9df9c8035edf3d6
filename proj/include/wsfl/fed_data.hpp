#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "wsfl/rng.hpp"

namespace wsfl {

/// Labeled features with a fixed train/test split. The split rule is
/// deterministic: within each class, in row order, the first
/// floor(4/5 * count) samples are train and the rest test.
struct Dataset {
  Eigen::MatrixXd train_x;  // n_train x input_dim
  std::vector<int> train_y;
  Eigen::MatrixXd test_x;
  std::vector<int> test_y;
  int num_classes = 0;

  Eigen::Index input_dim() const { return train_x.cols(); }
  Eigen::Index train_size() const { return train_x.rows(); }
  Eigen::Index test_size() const { return test_x.rows(); }
};

/// One client's share of the train split: row indices into train_x.
struct ClientPartition {
  int client_id = 0;
  std::vector<int> indices;

  long n_k() const { return static_cast<long>(indices.size()); }
};

/// Isotropic Gaussian blobs around seed-fixed unit-norm class centers,
/// stratified 80/20 into train/test.
Dataset synth_blobs(int classes, int input_dim, int per_class, double spread, std::uint64_t seed);

/// Reads `f0,...,f{d-1},label` rows. Throws with the line number on
/// malformed rows, non-finite features, or bad labels.
Dataset load_csv(const std::string& path);

/// Writes train rows then test rows with shortest round-trip float text, so
/// load_csv reproduces the dataset (same split, bit-identical values).
void save_csv(const Dataset& data, const std::string& path);

/// Per class: proportions over the K clients drawn from Dirichlet(alpha),
/// the class's (seed-shuffled) samples split contiguously by the cumulative
/// proportions. Empty clients are repaired by moving one sample from the
/// currently largest partition. Throws when the train split has fewer
/// samples than clients.
std::vector<ClientPartition> dirichlet_partition(std::span<const int> train_labels, int clients,
                                                 double alpha, Rng& rng);

/// client x class sample counts; includes zero cells.
struct ClassCountRow {
  int client_id = 0;
  int class_id = 0;
  long count = 0;
};
std::vector<ClassCountRow> class_distribution_report(std::span<const ClientPartition> partitions,
                                                     std::span<const int> train_labels,
                                                     int num_classes);

/// CSV with header `client_id,class_id,count`.
void write_class_report_csv(std::ostream& out, std::span<const ClassCountRow> rows);

}  // namespace wsfl
