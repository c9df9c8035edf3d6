#include "wsfl/distribution.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace wsfl {

const ArchDescriptor& RoundPlan::arch_for(int client) const {
  for (std::size_t i = 0; i < participants.size(); ++i)
    if (participants[i] == client) return archs[i];
  throw std::out_of_range("RoundPlan: client " + std::to_string(client) + " not in plan");
}

std::vector<int> sample_clients(int clients, double participation, Rng& rng) {
  if (clients < 1) throw std::invalid_argument("sample_clients: need at least one client");
  if (!(participation > 0.0 && participation <= 1.0))
    throw std::invalid_argument("sample_clients: participation must lie in (0, 1]");
  // Nudge before flooring so that mathematically integral products such as
  // 0.3 * 10 do not round down from FP representation error.
  const long want = std::max<long>(
      static_cast<long>(std::floor(participation * clients + 1e-9)), 1);
  std::vector<int> ids(static_cast<std::size_t>(clients));
  std::iota(ids.begin(), ids.end(), 0);
  for (long i = 0; i < want; ++i) {
    const auto j = i + static_cast<long>(rng.bounded(static_cast<std::uint64_t>(clients - i)));
    std::swap(ids[static_cast<std::size_t>(i)], ids[static_cast<std::size_t>(j)]);
  }
  ids.resize(static_cast<std::size_t>(want));
  std::sort(ids.begin(), ids.end());
  return ids;
}

namespace {

RoundPlan make_plan(const SpaceConfig& space, long round, std::vector<int> participants) {
  if (participants.empty()) throw std::invalid_argument("round plan: no participants");
  RoundPlan plan;
  plan.round = round;
  plan.participants = std::move(participants);
  plan.archs.assign(plan.participants.size(), smallest(space));
  return plan;
}

}  // namespace

RoundPlan plan_random(const SpaceConfig& space, long round, std::vector<int> participants,
                      Rng& rng) {
  RoundPlan plan = make_plan(space, round, std::move(participants));
  const std::size_t j = static_cast<std::size_t>(rng.bounded(plan.participants.size()));
  for (std::size_t i = 0; i < plan.archs.size(); ++i)
    plan.archs[i] = (i == j) ? largest(space) : random_arch(space, rng);
  plan.largest_holder = plan.participants[j];
  return plan;
}

RoundPlan plan_sandwich(const SpaceConfig& space, long round, std::vector<int> participants,
                        Rng& rng) {
  RoundPlan plan = make_plan(space, round, std::move(participants));
  const std::size_t n = plan.participants.size();
  const std::size_t j = static_cast<std::size_t>(rng.bounded(n));
  plan.largest_holder = plan.participants[j];
  std::size_t small = j;
  if (n >= 2) {
    small = static_cast<std::size_t>(rng.bounded(n - 1));
    if (small >= j) ++small;  // distinct from the largest holder
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (i == j)
      plan.archs[i] = largest(space);
    else if (i == small)
      plan.archs[i] = smallest(space);
    else
      plan.archs[i] = random_arch(space, rng);
  }
  return plan;
}

namespace {

std::size_t argmin_count(const std::vector<int>& participants, const std::vector<long>& counts,
                         std::size_t skip) {
  std::size_t best = participants.size();
  for (std::size_t i = 0; i < participants.size(); ++i) {
    if (i == skip) continue;
    if (best == participants.size() ||
        counts[static_cast<std::size_t>(participants[i])] <
            counts[static_cast<std::size_t>(participants[best])])
      best = i;  // ids are sorted ascending, so strict < breaks ties by lowest id
  }
  return best;
}

}  // namespace

RoundPlan plan_tracking_sandwich(const SpaceConfig& space, long round,
                                 std::vector<int> participants, TrackingState& state, Rng& rng) {
  RoundPlan plan = make_plan(space, round, std::move(participants));
  const std::size_t n = plan.participants.size();
  for (int id : plan.participants)
    if (id < 0 || id >= state.clients())
      throw std::invalid_argument("plan_tracking_sandwich: tracking state does not cover client " +
                                  std::to_string(id));
  const std::size_t j = argmin_count(plan.participants, state.largest_count, n);
  plan.largest_holder = plan.participants[j];
  state.largest_count[static_cast<std::size_t>(plan.largest_holder)] += 1;
  std::size_t small = n;
  if (n >= 2) {
    small = argmin_count(plan.participants, state.smallest_count, j);
    state.smallest_count[static_cast<std::size_t>(plan.participants[small])] += 1;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (i == j)
      plan.archs[i] = largest(space);
    else if (i == small)
      plan.archs[i] = smallest(space);
    else
      plan.archs[i] = random_arch(space, rng);
  }
  return plan;
}

RoundPlan plan_largest_only(const SpaceConfig& space, long round, std::vector<int> participants) {
  RoundPlan plan = make_plan(space, round, std::move(participants));
  for (auto& a : plan.archs) a = largest(space);
  plan.largest_holder = plan.participants.front();
  return plan;
}

}  // namespace wsfl
