#pragma once

#include <span>
#include <vector>

#include "wsfl/arch_space.hpp"
#include "wsfl/rng.hpp"

namespace wsfl {

/// Per client: how often the smallest/largest subnetworks have been assigned.
struct TrackingState {
  std::vector<long> smallest_count;
  std::vector<long> largest_count;

  static TrackingState fresh(int clients) {
    return TrackingState{std::vector<long>(static_cast<std::size_t>(clients), 0),
                         std::vector<long>(static_cast<std::size_t>(clients), 0)};
  }
  int clients() const { return static_cast<int>(largest_count.size()); }
};

/// Round t's participant set, their architecture assignment H(t), and the
/// designated largest-subnetwork holder j. Every plan contains the largest
/// arch at least once.
struct RoundPlan {
  long round = 0;
  std::vector<int> participants;       // sorted ascending
  std::vector<ArchDescriptor> archs;   // aligned with participants
  int largest_holder = -1;

  const ArchDescriptor& arch_for(int client) const;
};

/// Uniform subset without replacement of size max(floor(C*K), 1), sorted
/// ascending.
std::vector<int> sample_clients(int clients, double participation, Rng& rng);

/// One uniformly chosen participant gets the largest arch (and is j); the
/// rest get independent random archs.
RoundPlan plan_random(const SpaceConfig& space, long round, std::vector<int> participants,
                      Rng& rng);

/// Sandwich rule: one largest (j), one smallest on a distinct participant,
/// the remaining |S_t|-2 random. A lone participant just gets the largest.
RoundPlan plan_sandwich(const SpaceConfig& space, long round, std::vector<int> participants,
                        Rng& rng);

/// Sandwich where largest/smallest go to the participants that have received
/// them the fewest times (ties broken by lowest client id); the chosen
/// counters are incremented in `state`.
RoundPlan plan_tracking_sandwich(const SpaceConfig& space, long round,
                                 std::vector<int> participants, TrackingState& state, Rng& rng);

/// Every participant gets the largest arch; j is the lowest id. This is the
/// single-model FedAvg baseline mode.
RoundPlan plan_largest_only(const SpaceConfig& space, long round, std::vector<int> participants);

}  // namespace wsfl
