#include "wsfl/aggregation.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace wsfl {

void BetaSchedule::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("BetaSchedule: " + msg); };
  if (!(beta0 > 0.0 && beta0 <= 1.0)) fail("beta0 must lie in (0, 1]");
  if (!(beta_end > 0.0 && beta_end <= 1.0)) fail("beta_end must lie in (0, 1]");
  if (beta_end > beta0) fail("beta_end must be <= beta0");
  if (decay_rounds < 1) fail("decay_rounds must be >= 1");
}

double beta_at(const BetaSchedule& schedule, long t) {
  if (t < 1) throw std::invalid_argument("beta_at: round index starts at 1");
  if (schedule.kind == DecayKind::constant) return schedule.beta0;
  if (t == 1) return schedule.beta0;
  if (t >= schedule.decay_rounds) return schedule.beta_end;
  const double frac =
      static_cast<double>(t - 1) / static_cast<double>(schedule.decay_rounds - 1);
  if (schedule.kind == DecayKind::linear)
    return schedule.beta0 - (schedule.beta0 - schedule.beta_end) * frac;
  return schedule.beta_end +
         (schedule.beta0 - schedule.beta_end) * 0.5 * (1.0 + std::cos(std::numbers::pi * frac));
}

namespace {

struct Accumulator {
  ParamSet sum;
  ParamSet cnt;
  ParamSet hits;
};

Accumulator accumulate(const SpaceConfig& space, std::span<const ClientUpdate> updates,
                       std::span<const double> lambdas) {
  if (!lambdas.empty() && lambdas.size() != updates.size())
    throw std::invalid_argument("aggregation: lambda count does not match update count");
  Accumulator acc{ParamSet::zeros(space), ParamSet::zeros(space), ParamSet::zeros(space)};
  const auto layout = tensor_layout(space);
  for (std::size_t u = 0; u < updates.size(); ++u) {
    const ClientUpdate& upd = updates[u];
    if (upd.n_k < 1) throw std::invalid_argument("aggregation: n_k must be >= 1");
    if (canonicalize(space, upd.arch) != upd.weights.arch)
      throw std::invalid_argument("aggregation: update arch does not match its weights");
    const double lam = lambdas.empty() ? 1.0 : lambdas[u];
    const double w = lam * static_cast<double>(upd.n_k);
    const SliceMask sm = mask(space, upd.arch);
    Eigen::Index next = 0;
    for (std::size_t i = 0; i < layout.size(); ++i) {
      for (const Slice& s : sm.tensor_slices[i]) {
        const Eigen::MatrixXd& src = upd.weights.tensors.tensor(next);
        if (!src.allFinite())
          throw std::invalid_argument("aggregation: non-finite update from client " +
                                      std::to_string(upd.client_id));
        auto idx = static_cast<Eigen::Index>(i);
        acc.sum.tensor(idx).block(s.row0, s.col0, s.rows(), s.cols()) += w * src;
        acc.cnt.tensor(idx).block(s.row0, s.col0, s.rows(), s.cols()).array() += w;
        acc.hits.tensor(idx).block(s.row0, s.col0, s.rows(), s.cols()).array() += 1.0;
        ++next;
      }
    }
  }
  return acc;
}

}  // namespace

Coverage coverage(const SpaceConfig& space, std::span<const ClientUpdate> updates,
                  std::span<const double> lambdas) {
  if (updates.empty()) throw std::invalid_argument("coverage: updates must be nonempty");
  Accumulator acc = accumulate(space, updates, lambdas);
  return Coverage{std::move(acc.cnt), std::move(acc.hits)};
}

namespace detail {

ParamSet weighted_average(const SpaceConfig& space, const ParamSet& W_t,
                          std::span<const ClientUpdate> updates,
                          std::span<const double> lambdas) {
  Accumulator acc = accumulate(space, updates, lambdas);
  ParamSet out = W_t;
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    const auto covered = acc.hits.tensor(i).array() > 0.0;
    const auto safe_cnt = covered.select(acc.cnt.tensor(i).array(), 1.0);
    out.tensor(i) =
        covered.select(acc.sum.tensor(i).array() / safe_cnt, W_t.tensor(i).array());
  }
  return out;
}

}  // namespace detail

ParamSet aggregate_overlap(const SpaceConfig& space, const ParamSet& W_t,
                           std::span<const ClientUpdate> updates) {
  if (updates.empty()) throw std::invalid_argument("aggregate_overlap: no updates");
  const ArchDescriptor arch_max = largest(space);
  bool has_largest = false;
  for (const auto& upd : updates)
    if (canonicalize(space, upd.arch) == arch_max) has_largest = true;
  if (!has_largest)
    throw std::invalid_argument(
        "aggregate_overlap: round plan lacks the largest subnetwork; every round must train it");
  return detail::weighted_average(space, W_t, updates, {});
}

ParamSet aggregate_maxnet(const SpaceConfig& space, const ParamSet& W_t,
                          std::span<const ClientUpdate> updates, int largest_holder,
                          double beta_t) {
  if (updates.empty()) throw std::invalid_argument("aggregate_maxnet: no updates");
  if (!(beta_t > 0.0 && beta_t <= 1.0))
    throw std::invalid_argument("aggregate_maxnet: beta_t must lie in (0, 1]");
  const ArchDescriptor arch_max = largest(space);
  const ClientUpdate* holder = nullptr;
  for (const auto& upd : updates)
    if (upd.client_id == largest_holder) holder = &upd;
  if (holder == nullptr)
    throw std::invalid_argument("aggregate_maxnet: designated largest holder is not in the updates");
  if (canonicalize(space, holder->arch) != arch_max)
    throw std::invalid_argument("aggregate_maxnet: designated holder does not carry the largest arch");

  if (updates.size() == 1) {
    // Degenerate round: the holder's weights pass through untouched so the
    // result is w_j exactly, independent of beta.
    return superimpose(space, W_t, holder->arch, holder->weights);
  }

  std::vector<double> lambdas(updates.size());
  const double rest = (1.0 - beta_t) / static_cast<double>(updates.size() - 1);
  for (std::size_t u = 0; u < updates.size(); ++u)
    lambdas[u] = updates[u].client_id == largest_holder ? beta_t : rest;
  return detail::weighted_average(space, W_t, updates, lambdas);
}

}  // namespace wsfl
