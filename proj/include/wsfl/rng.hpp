#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string>
#include <vector>

namespace wsfl {

/// Deterministic random source used everywhere in the simulator.
///
/// Wraps std::mt19937_64 but performs all distribution sampling itself:
/// the standard <random> distributions are implementation-defined and may
/// carry hidden state (e.g. the cached spare normal), which would break
/// the checkpoint/resume and cross-run byte-determinism contracts. Every
/// draw here is a pure function of the engine state.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform in [0, 1), 53-bit resolution.
  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Uniform in (0, 1]; never returns zero (safe under log()).
  double uniform01_open() {
    return static_cast<double>((next() >> 11) + 1) * 0x1.0p-53;
  }

  /// Unbiased uniform integer in [0, n). Requires n >= 1.
  std::uint64_t bounded(std::uint64_t n);

  /// Uniform integer in [lo, hi] inclusive.
  long uniform_int(long lo, long hi) {
    return lo + static_cast<long>(bounded(static_cast<std::uint64_t>(hi - lo + 1)));
  }

  bool bernoulli(double p) { return uniform01() < p; }

  /// Standard normal via Box-Muller. Uses two uniforms per draw and keeps
  /// no spare value, so the engine state fully determines the stream.
  double normal();

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  /// Gamma(shape, 1) via Marsaglia-Tsang squeeze.
  double gamma(double shape);

  /// Dirichlet(alpha * 1_k): k gammas, normalized.
  std::vector<double> dirichlet(double alpha, int k);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(bounded(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  /// Engine state as text; round-trips exactly through set_state().
  std::string state() const;
  void set_state(const std::string& text);

 private:
  std::mt19937_64 engine_;
};

/// Mixes a master seed with stream labels into an independent child seed.
/// Used to give every (round, client, purpose) its own generator so that
/// execution order and parallelism cannot perturb results.
std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> words);

}  // namespace wsfl
