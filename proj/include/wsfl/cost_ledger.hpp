#pragma once

#include <span>
#include <vector>

#include "wsfl/client_runtime.hpp"
#include "wsfl/distribution.hpp"

namespace wsfl {

/// Forward+backward cost of one training sample relative to its forward
/// pass. One constant, used everywhere training FLOPs are estimated.
inline constexpr double kTrainFlopsFactor = 3.0;

inline double subnet_bytes(const SpaceConfig& space, const ArchDescriptor& arch) {
  return 8.0 * static_cast<double>(param_count(space, arch));  // 64-bit floats
}

struct CostEntry {
  long round = 0;
  int client_id = 0;
  ArchDescriptor arch;
  double flops = 0.0;       // training FLOPs for the round
  double bytes_down = 0.0;  // raw float64 payload, no header overhead
  double bytes_up = 0.0;
};

/// Per-round computational and communication accounting for the federated
/// run. Totals are maintained incrementally and always reproducible from the
/// raw entry list.
class CostLedger {
 public:
  CostLedger() = default;
  explicit CostLedger(int clients) : clients_(clients) {}

  /// Appends one entry per participant. Training FLOPs for a client are
  /// kTrainFlopsFactor * flops(arch) * local_epochs * n_k (every sample
  /// processed once per epoch); bytes are one subnet payload per direction.
  void record_round(const SpaceConfig& space, const RoundPlan& plan,
                    std::span<const long> samples_by_client, const LocalTrainConfig& cfg);

  const std::vector<CostEntry>& entries() const { return entries_; }
  int clients() const { return clients_; }
  long rounds() const { return rounds_; }
  double total_flops() const { return total_flops_; }
  double total_bytes() const { return total_bytes_; }

  void restore(std::vector<CostEntry> entries, int clients, long rounds);

 private:
  std::vector<CostEntry> entries_;
  int clients_ = 0;
  long rounds_ = 0;
  double total_flops_ = 0.0;
  double total_bytes_ = 0.0;
};

/// Average training FLOPs per client per round: sum of all entry FLOPs
/// divided by (clients * rounds).
double superfed_avg_comp(const CostLedger& ledger);

/// Average bytes moved per round: total bytes divided by rounds.
double superfed_avg_comm(const CostLedger& ledger);

/// Independent-FedAvg baseline, per round: every family member trained
/// separately, so costs add over the family.
double ifedavg_comm(std::span<const double> model_bytes, int round_clients);
double ifedavg_comm(const SpaceConfig& space, std::span<const ArchDescriptor> family,
                    int round_clients);
double ifedavg_comp(std::span<const double> model_flops);
double ifedavg_comp(const SpaceConfig& space, std::span<const ArchDescriptor> family);

/// Nine nested architectures spanning smallest to largest; the cost report
/// shows iFedAvg totals for family prefixes of size 1..9 against the
/// weight-shared run's flat cost.
std::vector<ArchDescriptor> default_report_family(const SpaceConfig& space);

}  // namespace wsfl
