#pragma once

#include <span>
#include <vector>

#include "wsfl/supernet.hpp"

namespace wsfl {

/// One client's post-local-training contribution for the round.
struct ClientUpdate {
  int client_id = 0;
  ArchDescriptor arch;
  SubnetWeights weights;
  long n_k = 1;  // sample count of the client's partition
};

enum class DecayKind { constant, linear, cosine };

/// Weight given to the largest subnetwork's holder over rounds: starts at
/// beta0 and decays to beta_end across the first decay_rounds rounds, then
/// stays clamped at beta_end.
struct BetaSchedule {
  double beta0 = 0.9;
  double beta_end = 0.125;
  DecayKind kind = DecayKind::cosine;
  long decay_rounds = 1;

  void validate() const;
};

/// β at round t (t starts at 1). Endpoints are returned exactly: beta0 at
/// t == 1 and beta_end for every t >= decay_rounds.
double beta_at(const BetaSchedule& schedule, long t);

/// Per supernet index: sum of lambda_k * n_k over the clients covering it,
/// plus the integer hit count (stored as doubles). Empty `lambdas` means
/// lambda_k = 1 for all updates (overlap-cardinality counting).
struct Coverage {
  ParamSet weight;
  ParamSet hits;
};
Coverage coverage(const SpaceConfig& space, std::span<const ClientUpdate> updates,
                  std::span<const double> lambdas = {});

namespace detail {
/// Shared averaging kernel: out[i] = sum_k lambda_k n_k w_k[i] / sum_k
/// lambda_k n_k over covering clients, and out[i] = W_t[i] (bitwise) where
/// the hit count is zero. The zero-coverage rule keys on the hit-count
/// tensor, never on a value-zero test: a covered parameter that sums to 0.0
/// still averages.
ParamSet weighted_average(const SpaceConfig& space, const ParamSet& W_t,
                          std::span<const ClientUpdate> updates,
                          std::span<const double> lambdas);
}  // namespace detail

/// Averaging by overlap cardinality: every covering client contributes
/// n_k-weighted; uncovered indices keep W_t. Rejects update sets in which no
/// client holds the largest subnetwork, and non-finite updates.
ParamSet aggregate_overlap(const SpaceConfig& space, const ParamSet& W_t,
                           std::span<const ClientUpdate> updates);

/// Weighted shared-parameter averaging for one round: the designated
/// largest-subnetwork holder j gets weight beta_t, every other client
/// (1-beta_t)/(|S_t|-1). A lone largest holder is written through exactly.
ParamSet aggregate_maxnet(const SpaceConfig& space, const ParamSet& W_t,
                          std::span<const ClientUpdate> updates, int largest_holder,
                          double beta_t);

}  // namespace wsfl
