#include "wsfl/cost_ledger.hpp"

#include <cmath>
#include <stdexcept>

namespace wsfl {

void CostLedger::record_round(const SpaceConfig& space, const RoundPlan& plan,
                              std::span<const long> samples_by_client,
                              const LocalTrainConfig& cfg) {
  rounds_ += 1;
  for (std::size_t i = 0; i < plan.participants.size(); ++i) {
    const int client = plan.participants[i];
    if (client < 0 || static_cast<std::size_t>(client) >= samples_by_client.size())
      throw std::invalid_argument("CostLedger: no sample count for client " +
                                  std::to_string(client));
    const ArchDescriptor& arch = plan.archs[i];
    CostEntry entry;
    entry.round = plan.round;
    entry.client_id = client;
    entry.arch = arch;
    entry.flops = kTrainFlopsFactor * static_cast<double>(flops(space, arch)) *
                  static_cast<double>(cfg.local_epochs) *
                  static_cast<double>(samples_by_client[static_cast<std::size_t>(client)]);
    entry.bytes_down = subnet_bytes(space, arch);
    entry.bytes_up = entry.bytes_down;
    total_flops_ += entry.flops;
    total_bytes_ += entry.bytes_down + entry.bytes_up;
    entries_.push_back(std::move(entry));
  }
}

void CostLedger::restore(std::vector<CostEntry> entries, int clients, long rounds) {
  entries_ = std::move(entries);
  clients_ = clients;
  rounds_ = rounds;
  total_flops_ = 0.0;
  total_bytes_ = 0.0;
  for (const auto& e : entries_) {
    total_flops_ += e.flops;
    total_bytes_ += e.bytes_down + e.bytes_up;
  }
}

double superfed_avg_comp(const CostLedger& ledger) {
  if (ledger.rounds() < 1) throw std::invalid_argument("superfed_avg_comp: no rounds recorded");
  if (ledger.clients() < 1) throw std::invalid_argument("superfed_avg_comp: no clients");
  return ledger.total_flops() /
         (static_cast<double>(ledger.clients()) * static_cast<double>(ledger.rounds()));
}

double superfed_avg_comm(const CostLedger& ledger) {
  if (ledger.rounds() < 1) throw std::invalid_argument("superfed_avg_comm: no rounds recorded");
  return ledger.total_bytes() / static_cast<double>(ledger.rounds());
}

double ifedavg_comm(std::span<const double> model_bytes, int round_clients) {
  if (model_bytes.empty()) throw std::invalid_argument("ifedavg_comm: empty family");
  double sum = 0.0;
  for (double b : model_bytes) sum += b;
  return 2.0 * static_cast<double>(round_clients) * sum;
}

double ifedavg_comm(const SpaceConfig& space, std::span<const ArchDescriptor> family,
                    int round_clients) {
  std::vector<double> sizes;
  sizes.reserve(family.size());
  for (const auto& arch : family) sizes.push_back(subnet_bytes(space, arch));
  return ifedavg_comm(sizes, round_clients);
}

double ifedavg_comp(std::span<const double> model_flops) {
  if (model_flops.empty()) throw std::invalid_argument("ifedavg_comp: empty family");
  double sum = 0.0;
  for (double f : model_flops) sum += f;
  return sum;
}

double ifedavg_comp(const SpaceConfig& space, std::span<const ArchDescriptor> family) {
  std::vector<double> fl;
  fl.reserve(family.size());
  for (const auto& arch : family) fl.push_back(static_cast<double>(flops(space, arch)));
  return ifedavg_comp(fl);
}

std::vector<ArchDescriptor> default_report_family(const SpaceConfig& space) {
  const int top_ratio = static_cast<int>(space.ratio_choices.size()) - 1;
  auto ratio_step = [&](int i) {
    return static_cast<int>(std::lround(static_cast<double>(i) * top_ratio / 8.0));
  };
  std::vector<ArchDescriptor> family;
  family.reserve(9);
  const bool classic = space.stages == 4 && space.max_extra_depth == 2;
  static constexpr int kDepthChain[9][4] = {{0, 0, 0, 0}, {0, 0, 0, 1}, {0, 1, 0, 1},
                                            {0, 1, 1, 1}, {1, 1, 1, 1}, {1, 1, 1, 2},
                                            {1, 2, 1, 2}, {1, 2, 2, 2}, {2, 2, 2, 2}};
  for (int i = 0; i < 9; ++i) {
    ArchDescriptor arch;
    arch.depths.resize(static_cast<std::size_t>(space.stages));
    for (int s = 0; s < space.stages; ++s) {
      if (classic)
        arch.depths[static_cast<std::size_t>(s)] = kDepthChain[i][s];
      else
        arch.depths[static_cast<std::size_t>(s)] = static_cast<int>(
            std::lround(static_cast<double>(i) * space.max_extra_depth / 8.0));
    }
    arch.ratios.assign(static_cast<std::size_t>(space.max_blocks()), ratio_step(i));
    family.push_back(canonicalize(space, arch));
  }
  return family;
}

}  // namespace wsfl
