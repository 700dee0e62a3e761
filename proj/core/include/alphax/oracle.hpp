#pragma once

// Evaluation backends standing in for GPU training: a deterministic
// synthetic benchmark with a known structure signal, and a tabular
// benchmark loaded from a JSON Lines file. An Evaluator wraps a backend
// with the result cache and the 70/20-epoch transfer cost accounting.

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "alphax/space.hpp"

namespace alphax {

struct EvalRecord {
  EncodingVector encoding;
  double accuracy = 0.0;
  int epochs_charged = 0;  // 70 without a transfer parent, 20 with, 0 cached
  std::optional<EncodingVector> transfer_parent;
  bool cached = false;
};

// Pure function of (config, arch); safe to call concurrently.
class OracleBackend {
 public:
  virtual ~OracleBackend() = default;
  virtual double accuracy(const ArchState& arch) const = 0;
  virtual const SpaceConfig& space() const = 0;
};

struct SyntheticBenchConfig {
  std::uint64_t seed = 0;
  double base = 0.3;
  // Dominant term: a hidden "motif" architecture is drawn from the seed
  // and each encoding position matching it earns a weighted bonus. This
  // gives every landscape a unique global optimum with a per-digit margin
  // larger than all remaining terms combined, so the optimum is decided
  // by learnable structure rather than by the noise term.
  double match_scale = 0.4;
  // Deceptive operation section. The operation digits carry no
  // single-digit reward toward the motif; instead each one pays a small
  // bonus for matching a *decoy* value, while matching the motif on the
  // whole section at once pays a jackpot larger than everything the
  // decoys offer. Greedy single-edit searchers climb into the decoy
  // basin and must cross a fitness valley to reach the global optimum;
  // the jackpot keeps the motif the unique argmax.
  double decoy_scale = 0.12;
  double jackpot_scale = 0.25;
  // How many wiring (adjacency) digits join the deceptive section in
  // addition to the operation digits; makes the jackpot basin rarer.
  int jackpot_adjacency = 2;
  double op_weight_scale = 0.0015;  // per-op weights drawn from [0, scale]
  double edge_bonus = 0.0005;
  double depth_penalty = 0.001;
  double noise_scale = 0.0005;
};

class SyntheticBench final : public OracleBackend {
 public:
  SyntheticBench(SpaceConfig space, SyntheticBenchConfig cfg);

  double accuracy(const ArchState& arch) const override;
  const SpaceConfig& space() const override { return space_; }
  const SyntheticBenchConfig& config() const { return cfg_; }
  // The seed-derived motif encoding rewarded by match_scale.
  const EncodingVector& motif() const { return motif_; }

 private:
  SpaceConfig space_;
  SyntheticBenchConfig cfg_;
  EncodingVector motif_;
  std::vector<double> position_weight_;  // in [0.5, 1], one per digit
  double weight_sum_ = 1.0;
  std::vector<std::size_t> op_section_;   // deceptive positions
  std::vector<int> decoy_digit_;          // decoy value per op position
  std::vector<double> decoy_weight_;      // in [0.5, 1]
  double decoy_weight_sum_ = 1.0;
};

class TabularBench final : public OracleBackend {
 public:
  TabularBench(SpaceConfig space, std::map<std::string, double> table)
      : space_(space), table_(std::move(table)) {}

  // Throws MissingEntry when the architecture is not in the table.
  double accuracy(const ArchState& arch) const override;
  const SpaceConfig& space() const override { return space_; }
  std::size_t size() const { return table_.size(); }

 private:
  SpaceConfig space_;
  std::map<std::string, double> table_;  // EncodingVector::key -> accuracy
};

// JSON Lines, one object per architecture:
//   {"encoding": [..int], "accuracy": float}
// with an optional leading {"meta": {...}} line.
// Throws ParseError (with line number) or MalformedEncoding.
TabularBench load_tabular(const SpaceConfig& space, const std::string& path);

// Backend + cache + epoch accounting. The cache is the only mutable
// state; it behaves as a linearizable map.
class Evaluator {
 public:
  explicit Evaluator(std::shared_ptr<const OracleBackend> backend)
      : backend_(std::move(backend)) {}

  EvalRecord evaluate(const ArchState& arch,
                      const std::optional<EncodingVector>& transfer_parent);
  // Record an externally produced result (distributed mode) into the cache.
  EvalRecord record_external(const EncodingVector& enc, double accuracy,
                             const std::optional<EncodingVector>& parent);

  // Re-seed the cache and the accounting totals (snapshot restore); does
  // not charge epochs.
  void restore_state(const std::vector<std::pair<EncodingVector, double>>& entries,
                     long epochs_charged);

  bool is_cached(const EncodingVector& enc) const;
  std::optional<double> cached_accuracy(const EncodingVector& enc) const;
  long total_epochs_charged() const;
  long distinct_evaluations() const;
  const OracleBackend& backend() const { return *backend_; }

 private:
  EvalRecord charge(const EncodingVector& enc, double acc,
                    const std::optional<EncodingVector>& parent);

  std::shared_ptr<const OracleBackend> backend_;
  mutable std::mutex mu_;
  std::map<std::string, double> cache_;
  long epochs_charged_ = 0;
};

// Exhaustive scan over the enumerable space; ties broken by the
// lexicographically smallest encoding. Throws SpaceTooLarge.
std::pair<ArchState, double> global_optimum(const OracleBackend& backend,
                                            std::size_t state_cap = 2'000'000);

}  // namespace alphax
