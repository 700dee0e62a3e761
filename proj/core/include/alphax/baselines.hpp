#pragma once

// The four comparison algorithms: random search, regularized evolution,
// tabular Q-learning, hill climbing. All consume the same SpaceConfig /
// Evaluator interfaces as the tree-search engine and emit the same
// per-sample trace schema.

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "alphax/oracle.hpp"
#include "alphax/space.hpp"
#include "alphax/util.hpp"

namespace alphax {

struct TraceRow {
  EncodingVector encoding;
  double accuracy = 0.0;
  double best_so_far = 0.0;
  int epochs_charged = 0;
};

struct Trace {
  std::string algo;
  std::uint64_t seed = 0;
  std::vector<TraceRow> rows;
  double best_accuracy = -1.0;
  std::optional<EncodingVector> best_encoding;
};

// Uniform random action walk from the initial state to a terminal state.
ArchState random_terminal_walk(const SpaceConfig& cfg, Rng& rng);

// One uniformly chosen legal local edit of the encoding: a single digit
// is resampled and the result re-validated by decode, with bounded
// rejection retries. Falls back to a fresh random walk when no valid
// single-digit edit is found within the retry budget.
EncodingVector mutate(const SpaceConfig& cfg, const EncodingVector& parent,
                      Rng& rng, int max_retries = 200);

// Draws architectures uniformly without replacement from the enumerated
// space (a seeded permutation), so the expected samples-to-optimum on a
// space of n architectures with a unique optimum is (n+1)/2.
// Throws SpaceTooLarge when the space exceeds `state_cap`.
Trace random_search(const SpaceConfig& cfg, Evaluator& oracle, long budget,
                    std::uint64_t seed,
                    std::optional<double> stop_at_accuracy = std::nullopt,
                    std::size_t state_cap = 2'000'000);

struct EvolutionConfig {
  int population = 500;  // P
  int tournament = 50;   // T
  // Post-eviction probe for the population-discipline checks:
  // (population size after the eviction, birth index of the evicted
  // member, smallest birth index alive before the eviction).
  std::function<void(std::size_t, long, long)> on_evict;
};

// Aging evolution: warm up with P random architectures, then repeatedly
// mutate the best of a T-member tournament and evict the oldest.
Trace regularized_evolution(const SpaceConfig& cfg, Evaluator& oracle,
                            long budget, const EvolutionConfig& ecfg,
                            std::uint64_t seed,
                            std::optional<double> stop_at_accuracy = std::nullopt);

struct QLearningConfig {
  double alpha = 0.2;
  double gamma = 1.0;
  double epsilon = 0.2;
  double q_init = 0.5;
  std::size_t state_cap = 2'000'000;  // table-size guard
};

// One-step Bellman arithmetic, exposed for unit tests:
// Q' = Q + alpha * (r + gamma * max_next - Q).
double q_update(double q, double reward, double max_next, double alpha,
                double gamma);

// Tabular Q-learning with epsilon-greedy episodes; terminal reward is the
// oracle accuracy, intermediate rewards are zero, updates are applied in
// reverse episode order. Throws SpaceTooLarge when the space exceeds the
// table guard.
Trace q_learning(const SpaceConfig& cfg, Evaluator& oracle, long budget,
                 const QLearningConfig& qcfg, std::uint64_t seed,
                 std::optional<double> stop_at_accuracy = std::nullopt);

// Greedy search over action children: every child one action away is
// scored at its terminal form, the best improving child becomes the new
// state, and a local optimum triggers a restart from a random
// partially-built state.
Trace hill_climbing(const SpaceConfig& cfg, Evaluator& oracle, long budget,
                    std::uint64_t seed,
                    std::optional<double> stop_at_accuracy = std::nullopt);

}  // namespace alphax
