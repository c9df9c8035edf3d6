#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "wsfl/aggregation.hpp"
#include "wsfl/cost_ledger.hpp"
#include "wsfl/distribution.hpp"
#include "wsfl/fed_data.hpp"

namespace wsfl {

enum class HeuristicKind { random, sandwich, tracking_sandwich, largest_only };
enum class AggregatorKind { overlap, maxnet };

/// Seed-derivation streams: every consumer of randomness draws from
/// derive_seed(master, {stream, ...}), so runs are reproducible and client
/// execution order is irrelevant.
namespace seeds {
inline constexpr std::uint64_t kData = 1;       // dataset synthesis
inline constexpr std::uint64_t kPartition = 2;  // Dirichlet partitioning
inline constexpr std::uint64_t kInit = 3;       // supernet initialization
inline constexpr std::uint64_t kRound = 4;      // {kRound, t}: sampling + planning
inline constexpr std::uint64_t kClient = 5;     // {kClient, t, client}: local SGD
}  // namespace seeds

struct DataSpec {
  std::string kind = "blobs";  // blobs | csv
  // blobs
  int classes = 10;
  int per_class = 100;
  double spread = 1.0;
  // csv
  std::string path;
};

struct ExperimentConfig {
  SpaceConfig space;
  DataSpec data;
  int clients = 20;
  double participation = 0.4;
  double alpha = 100.0;
  long rounds = 200;
  HeuristicKind distribution = HeuristicKind::tracking_sandwich;
  AggregatorKind aggregator = AggregatorKind::maxnet;
  // beta_end = 0 and decay_rounds = 0 are placeholders that finalize()
  // resolves to 1/|S_t| and 80% of rounds.
  BetaSchedule beta{0.9, 0.0, DecayKind::cosine, 0};
  LocalTrainConfig local;
  long eval_every = 10;
  std::vector<ArchDescriptor> eval_archs;  // defaults to {largest, smallest}
  std::uint64_t seed = 0;

  /// Fills derived defaults (eval_archs, beta_end, decay_rounds) and checks
  /// every invariant, throwing std::invalid_argument naming the field.
  void finalize();

  /// max(floor(C*K), 1)
  int round_client_count() const;
};

struct MetricsRow {
  long round = 0;
  std::string arch;
  double test_accuracy = 0.0;
  double beta_t = 0.0;  // 0 for rounds not aggregated with maxnet
  double comm_bytes_cum = 0.0;
  double comp_flops_cum = 0.0;
};

/// Everything the server carries across rounds.
struct ServerState {
  long round = 0;
  ParamSet weights;
  TrackingState tracking;
  CostLedger ledger;
  std::uint64_t seed = 0;  // derived per-round/per-client seeds flow from this
};

struct RunResult {
  ServerState state;
  std::vector<MetricsRow> metrics;
};

/// The full federated loop: init, then per round: sample clients, plan via
/// the configured heuristic, extract/dispatch, local training, aggregate,
/// account costs, and evaluate eval_archs every eval_every rounds (plus
/// round 0 and the final round). Deterministic given (config, seed); client
/// execution order cannot perturb results because every client draws from
/// its own derived seed.
RunResult run(const ExperimentConfig& cfg);

/// Continues a checkpointed run up to cfg.rounds; metrics cover only the
/// resumed rounds. The state must match cfg's space and client count.
RunResult run_from(const ExperimentConfig& cfg, ServerState state);

/// Binary checkpoint: a text manifest (space config, round, seed, tracking
/// counters, ledger entries, tensor tabs with byte offsets) followed by raw
/// little-endian float64 tensor buffers. Round-trips bit-exactly.
void save_checkpoint(const std::string& path, const SpaceConfig& space, const ServerState& state);
ServerState load_checkpoint(const std::string& path, const SpaceConfig& expected_space);

/// Learning-rate grid: one single-arch (largest) FedAvg run per value,
/// reporting the final largest-subnet test accuracy.
struct LrGridRow {
  double learning_rate = 0.0;
  double final_accuracy = 0.0;
};
std::vector<LrGridRow> lr_grid(const ExperimentConfig& cfg, std::span<const double> lr_values);

/// Header `round,arch,test_accuracy,beta_t,comm_bytes_cum,comp_flops_cum`;
/// floats printed as shortest round-trip text so equal runs give equal bytes.
void write_metrics_csv(std::ostream& out, std::span<const MetricsRow> rows);

/// The experiment dataset and client partitions, derived deterministically
/// from (config, seed). Exposed so eval/nas/report commands see exactly the
/// training-time data.
struct Federation {
  Dataset data;
  std::vector<ClientPartition> partitions;
  std::vector<long> samples_by_client;
};
Federation build_federation(const ExperimentConfig& cfg);

}  // namespace wsfl
