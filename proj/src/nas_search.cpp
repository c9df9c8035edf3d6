#include "wsfl/nas_search.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>

namespace wsfl {

void NasConfig::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("NasConfig: " + msg); };
  if (population < 2) fail("population must be >= 2");
  if (generations < 1) fail("generations must be >= 1");
  if (!(parent_fraction > 0.0 && parent_fraction < 1.0))
    fail("parent_fraction must lie in (0, 1)");
  if (!(mutation_prob >= 0.0 && mutation_prob <= 1.0)) fail("mutation_prob must lie in [0, 1]");
  if (flops_budget < 1) fail("flops_budget must be >= 1");
  if (eval_subset_size < 0) fail("eval_subset_size must be >= 0");
}

ArchDescriptor mutate(const SpaceConfig& space, const ArchDescriptor& arch, double p, Rng& rng) {
  ArchDescriptor out = canonicalize(space, arch);
  for (auto& d : out.depths)
    if (rng.bernoulli(p))
      d = static_cast<int>(rng.bounded(static_cast<std::uint64_t>(space.max_extra_depth + 1)));
  for (auto& r : out.ratios)
    if (rng.bernoulli(p)) r = static_cast<int>(rng.bounded(space.ratio_choices.size()));
  return canonicalize(space, out);
}

ArchDescriptor crossover(const SpaceConfig& space, const ArchDescriptor& a,
                         const ArchDescriptor& b, Rng& rng) {
  const ArchDescriptor ca = canonicalize(space, a);
  const ArchDescriptor cb = canonicalize(space, b);
  ArchDescriptor out = ca;
  for (std::size_t i = 0; i < out.depths.size(); ++i)
    out.depths[i] = rng.bernoulli(0.5) ? ca.depths[i] : cb.depths[i];
  for (std::size_t i = 0; i < out.ratios.size(); ++i)
    out.ratios[i] = rng.bernoulli(0.5) ? ca.ratios[i] : cb.ratios[i];
  return canonicalize(space, out);
}

namespace {

struct Scored {
  ArchDescriptor arch;
  double accuracy = 0.0;
  std::int64_t flops = 0;
};

// Total order on fitness so that selection and the returned argmax are
// well-defined even under accuracy ties: higher accuracy, then fewer FLOPs,
// then lexicographically smaller descriptor.
bool fitter(const Scored& a, const Scored& b) {
  if (a.accuracy != b.accuracy) return a.accuracy > b.accuracy;
  if (a.flops != b.flops) return a.flops < b.flops;
  return a.arch < b.arch;
}

}  // namespace

NasResult evolve(const SpaceConfig& space, const ParamSet& W, const Dataset& valset,
                 const NasConfig& cfg, Rng& rng) {
  cfg.validate();
  if (valset.test_size() == 0) throw std::invalid_argument("evolve: empty validation set");
  if (flops(space, smallest(space)) > cfg.flops_budget)
    throw std::invalid_argument("evolve: budget is below the smallest architecture's FLOPs");

  // Fitness split, fixed up front: a seeded subset of the validation rows
  // (or all of them) shared by every candidate.
  Eigen::MatrixXd val_x;
  std::vector<int> val_y;
  if (cfg.eval_subset_size > 0 &&
      static_cast<Eigen::Index>(cfg.eval_subset_size) < valset.test_size()) {
    std::vector<int> rows(static_cast<std::size_t>(valset.test_size()));
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = static_cast<int>(i);
    rng.shuffle(rows);
    rows.resize(static_cast<std::size_t>(cfg.eval_subset_size));
    std::sort(rows.begin(), rows.end());
    val_x.resize(cfg.eval_subset_size, valset.test_x.cols());
    val_y.resize(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      val_x.row(static_cast<Eigen::Index>(i)) = valset.test_x.row(rows[i]);
      val_y[i] = valset.test_y[static_cast<std::size_t>(rows[i])];
    }
  } else {
    val_x = valset.test_x;
    val_y = valset.test_y;
  }

  auto feasible = [&](const ArchDescriptor& a) { return flops(space, a) <= cfg.flops_budget; };
  auto sample_feasible = [&]() {
    for (int tries = 0; tries < 1000; ++tries) {
      ArchDescriptor a = random_arch(space, rng);
      if (feasible(a)) return a;
    }
    return smallest(space);  // always feasible; reached only for tight budgets
  };

  std::vector<ArchDescriptor> population;
  population.reserve(static_cast<std::size_t>(cfg.population));
  for (int i = 0; i < cfg.population; ++i) population.push_back(sample_feasible());

  std::map<ArchDescriptor, double> cache;
  long evaluations = 0;
  auto score = [&](const ArchDescriptor& a) {
    auto it = cache.find(a);
    if (it == cache.end()) {
      ++evaluations;
      it = cache.emplace(a, evaluate(space, W, a, val_x, val_y)).first;
    }
    return Scored{a, it->second, flops(space, a)};
  };

  const int parent_count = std::max(
      1, static_cast<int>(cfg.parent_fraction * static_cast<double>(cfg.population)));
  Scored best;
  bool have_best = false;
  for (int gen = 0; gen < cfg.generations; ++gen) {
    std::vector<Scored> scored;
    scored.reserve(population.size());
    for (const auto& a : population) scored.push_back(score(a));
    std::sort(scored.begin(), scored.end(), fitter);
    if (!have_best || fitter(scored.front(), best)) {
      best = scored.front();
      have_best = true;
    }
    if (gen + 1 == cfg.generations) break;

    std::vector<ArchDescriptor> next;
    next.reserve(population.size());
    for (int i = 0; i < parent_count; ++i) next.push_back(scored[static_cast<std::size_t>(i)].arch);
    while (static_cast<int>(next.size()) < cfg.population) {
      const auto p1 = static_cast<std::size_t>(rng.bounded(static_cast<std::uint64_t>(parent_count)));
      const auto p2 = static_cast<std::size_t>(rng.bounded(static_cast<std::uint64_t>(parent_count)));
      ArchDescriptor child;
      bool ok = false;
      for (int tries = 0; tries < 100 && !ok; ++tries) {
        child = mutate(space, crossover(space, scored[p1].arch, scored[p2].arch, rng),
                       cfg.mutation_prob, rng);
        ok = feasible(child);
      }
      next.push_back(ok ? child : scored[p1].arch);
    }
    population = std::move(next);
  }
  return NasResult{best.arch, best.accuracy, best.flops, evaluations};
}

}  // namespace wsfl
