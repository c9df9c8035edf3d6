#pragma once

#include "wsfl/client_runtime.hpp"

namespace wsfl {

struct NasConfig {
  int population = 64;
  int generations = 20;
  double parent_fraction = 0.25;
  double mutation_prob = 0.1;    // per depth/ratio dimension
  std::int64_t flops_budget = 0;
  int eval_subset_size = 0;      // 0 = evaluate on the full validation set

  void validate() const;
};

/// Resamples each depth and each ratio entry independently with probability
/// p; the result is canonical.
ArchDescriptor mutate(const SpaceConfig& space, const ArchDescriptor& arch, double p, Rng& rng);

/// Each entry taken uniformly from one of the two parents; canonical output.
ArchDescriptor crossover(const SpaceConfig& space, const ArchDescriptor& a,
                         const ArchDescriptor& b, Rng& rng);

struct NasResult {
  ArchDescriptor best;
  double accuracy = 0.0;
  std::int64_t flops = 0;
  long evaluations = 0;
};

/// Evolutionary search over the family under a FLOPs budget, scoring
/// candidates on the validation set's test split without any retraining.
/// Elitist truncation selection: the top parent_fraction survive each
/// generation and children come from crossover+mutation, rejection-sampled
/// into the budget. Deterministic given the rng seed. Throws when even the
/// smallest arch exceeds the budget.
NasResult evolve(const SpaceConfig& space, const ParamSet& W, const Dataset& valset,
                 const NasConfig& cfg, Rng& rng);

}  // namespace wsfl
