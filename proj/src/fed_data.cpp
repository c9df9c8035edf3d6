#include "wsfl/fed_data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace wsfl {

namespace {

long train_count_for(long class_count) { return 4 * class_count / 5; }

/// Splits rows (grouped arbitrarily) into the deterministic per-class
/// 80/20 train/test sets, preserving row order within each side.
Dataset split_rows(const Eigen::MatrixXd& x, const std::vector<int>& y, int num_classes) {
  std::vector<long> seen(static_cast<std::size_t>(num_classes), 0);
  std::vector<long> total(static_cast<std::size_t>(num_classes), 0);
  for (int label : y) total[static_cast<std::size_t>(label)] += 1;
  std::vector<int> train_rows, test_rows;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const auto c = static_cast<std::size_t>(y[static_cast<std::size_t>(i)]);
    if (seen[c]++ < train_count_for(total[c]))
      train_rows.push_back(static_cast<int>(i));
    else
      test_rows.push_back(static_cast<int>(i));
  }
  Dataset out;
  out.num_classes = num_classes;
  out.train_x.resize(static_cast<Eigen::Index>(train_rows.size()), x.cols());
  out.test_x.resize(static_cast<Eigen::Index>(test_rows.size()), x.cols());
  for (std::size_t i = 0; i < train_rows.size(); ++i) {
    out.train_x.row(static_cast<Eigen::Index>(i)) = x.row(train_rows[i]);
    out.train_y.push_back(y[static_cast<std::size_t>(train_rows[i])]);
  }
  for (std::size_t i = 0; i < test_rows.size(); ++i) {
    out.test_x.row(static_cast<Eigen::Index>(i)) = x.row(test_rows[i]);
    out.test_y.push_back(y[static_cast<std::size_t>(test_rows[i])]);
  }
  return out;
}

std::string double_text(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

}  // namespace

Dataset synth_blobs(int classes, int input_dim, int per_class, double spread,
                    std::uint64_t seed) {
  if (classes < 2) throw std::invalid_argument("synth_blobs: need at least two classes");
  if (input_dim < 1 || per_class < 1)
    throw std::invalid_argument("synth_blobs: input_dim and per_class must be >= 1");
  Rng rng(seed);
  Eigen::MatrixXd centers(classes, input_dim);
  for (int c = 0; c < classes; ++c) {
    for (int d = 0; d < input_dim; ++d) centers(c, d) = rng.normal();
    const double norm = centers.row(c).norm();
    if (norm > 0.0) centers.row(c) /= norm;
  }
  const Eigen::Index n = static_cast<Eigen::Index>(classes) * per_class;
  Eigen::MatrixXd x(n, input_dim);
  std::vector<int> y(static_cast<std::size_t>(n));
  Eigen::Index row = 0;
  for (int c = 0; c < classes; ++c) {
    for (int k = 0; k < per_class; ++k, ++row) {
      for (int d = 0; d < input_dim; ++d) x(row, d) = centers(c, d) + spread * rng.normal();
      y[static_cast<std::size_t>(row)] = c;
    }
  }
  return split_rows(x, y, classes);
}

Dataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("load_csv: empty file " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();

  auto fail = [&](long line_no, const std::string& msg) {
    throw std::runtime_error("load_csv: " + path + ":" + std::to_string(line_no) + ": " + msg);
  };

  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) header.push_back(field);
  }
  if (header.size() < 2 || header.back() != "label")
    fail(1, "header must be f0,...,f{d-1},label");
  const int dim = static_cast<int>(header.size()) - 1;
  for (int d = 0; d < dim; ++d)
    if (header[static_cast<std::size_t>(d)] != "f" + std::to_string(d))
      fail(1, "feature column " + std::to_string(d) + " must be named f" + std::to_string(d));

  std::vector<double> values;
  std::vector<int> labels;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const char* ptr = line.data();
    const char* end = line.data() + line.size();
    for (int d = 0; d < dim; ++d) {
      double v = 0.0;
      auto [next, ec] = std::from_chars(ptr, end, v);
      if (ec != std::errc() || next == end || *next != ',')
        fail(line_no, "malformed feature in column " + std::to_string(d));
      if (!std::isfinite(v)) fail(line_no, "non-finite feature in column " + std::to_string(d));
      values.push_back(v);
      ptr = next + 1;
    }
    long label = -1;
    auto [next, ec] = std::from_chars(ptr, end, label);
    if (ec != std::errc() || next != end || label < 0) fail(line_no, "malformed label");
    labels.push_back(static_cast<int>(label));
  }
  if (labels.empty()) fail(line_no, "no data rows");

  const auto n = static_cast<Eigen::Index>(labels.size());
  Eigen::MatrixXd x(n, dim);
  for (Eigen::Index i = 0; i < n; ++i)
    for (int d = 0; d < dim; ++d)
      x(i, d) = values[static_cast<std::size_t>(i) * static_cast<std::size_t>(dim) +
                       static_cast<std::size_t>(d)];
  const int num_classes = *std::max_element(labels.begin(), labels.end()) + 1;
  if (num_classes < 2) throw std::runtime_error("load_csv: need at least two classes");
  return split_rows(x, labels, num_classes);
}

void save_csv(const Dataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_csv: cannot open " + path);
  const Eigen::Index dim = data.input_dim();
  for (Eigen::Index d = 0; d < dim; ++d) out << 'f' << d << ',';
  out << "label\n";
  auto emit = [&](const Eigen::MatrixXd& x, const std::vector<int>& y) {
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      for (Eigen::Index d = 0; d < dim; ++d) out << double_text(x(i, d)) << ',';
      out << y[static_cast<std::size_t>(i)] << '\n';
    }
  };
  // Train rows first: the loader's per-class prefix rule then reproduces the
  // exact same split.
  emit(data.train_x, data.train_y);
  emit(data.test_x, data.test_y);
  if (!out) throw std::runtime_error("save_csv: write failed for " + path);
}

std::vector<ClientPartition> dirichlet_partition(std::span<const int> train_labels, int clients,
                                                 double alpha, Rng& rng) {
  if (clients < 1) throw std::invalid_argument("dirichlet_partition: clients must be >= 1");
  if (!(alpha > 0.0)) throw std::invalid_argument("dirichlet_partition: alpha must be > 0");
  const long n = static_cast<long>(train_labels.size());
  if (n < clients)
    throw std::invalid_argument("dirichlet_partition: fewer train samples than clients");

  int num_classes = 0;
  for (int y : train_labels) num_classes = std::max(num_classes, y + 1);

  std::vector<ClientPartition> parts(static_cast<std::size_t>(clients));
  for (int k = 0; k < clients; ++k) parts[static_cast<std::size_t>(k)].client_id = k;

  for (int c = 0; c < num_classes; ++c) {
    std::vector<int> rows;
    for (std::size_t i = 0; i < train_labels.size(); ++i)
      if (train_labels[i] == c) rows.push_back(static_cast<int>(i));
    if (rows.empty()) continue;
    rng.shuffle(rows);
    const std::vector<double> p = rng.dirichlet(alpha, clients);
    double cum = 0.0;
    long start = 0;
    for (int k = 0; k < clients; ++k) {
      cum += p[static_cast<std::size_t>(k)];
      long stop = (k == clients - 1)
                      ? static_cast<long>(rows.size())
                      : std::llround(cum * static_cast<double>(rows.size()));
      stop = std::clamp(stop, start, static_cast<long>(rows.size()));
      for (long i = start; i < stop; ++i)
        parts[static_cast<std::size_t>(k)].indices.push_back(rows[static_cast<std::size_t>(i)]);
      start = stop;
    }
  }

  // Repair empty clients: take one sample from the currently largest
  // partition (its last index, for determinism).
  for (auto& part : parts) {
    while (part.indices.empty()) {
      auto donor = std::max_element(parts.begin(), parts.end(),
                                    [](const ClientPartition& a, const ClientPartition& b) {
                                      return a.indices.size() < b.indices.size();
                                    });
      if (donor->indices.size() <= 1)
        throw std::runtime_error("dirichlet_partition: cannot repair empty partition");
      part.indices.push_back(donor->indices.back());
      donor->indices.pop_back();
    }
  }
  for (auto& part : parts) std::sort(part.indices.begin(), part.indices.end());
  return parts;
}

std::vector<ClassCountRow> class_distribution_report(std::span<const ClientPartition> partitions,
                                                     std::span<const int> train_labels,
                                                     int num_classes) {
  std::vector<ClassCountRow> rows;
  rows.reserve(partitions.size() * static_cast<std::size_t>(num_classes));
  for (const auto& part : partitions) {
    std::vector<long> counts(static_cast<std::size_t>(num_classes), 0);
    for (int idx : part.indices) {
      const int y = train_labels[static_cast<std::size_t>(idx)];
      if (y < 0 || y >= num_classes)
        throw std::invalid_argument("class_distribution_report: label out of range");
      counts[static_cast<std::size_t>(y)] += 1;
    }
    for (int c = 0; c < num_classes; ++c)
      rows.push_back({part.client_id, c, counts[static_cast<std::size_t>(c)]});
  }
  return rows;
}

void write_class_report_csv(std::ostream& out, std::span<const ClassCountRow> rows) {
  out << "client_id,class_id,count\n";
  for (const auto& row : rows)
    out << row.client_id << ',' << row.class_id << ',' << row.count << '\n';
}

}  // namespace wsfl
