#pragma once

// The MCTS engine: UCB1 selection, expansion, uniform-random simulation,
// surrogate-assisted Q estimation, sequential backpropagation and the
// two-phase (preemptive/final) backpropagation used in distributed mode,
// plus snapshot/restore.

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "alphax/oracle.hpp"
#include "alphax/space.hpp"
#include "alphax/surrogate.hpp"
#include "alphax/util.hpp"
#include "json.hpp"

namespace alphax {

struct SearchConfig {
  double c = 0.5;          // exploration constant (2.0 for NASBench runs)
  int k = 10;              // surrogate simulations per expansion
  int max_tree_depth = 40;
  long max_episodes = 1'000'000;
  std::uint64_t rng_seed = 0;
};

struct TreeNode {
  ArchState state;
  TreeNode* parent = nullptr;
  int incoming_action = -1;  // index into parent->actions

  std::vector<Action> actions;  // legal actions, canonical order
  std::vector<double> q_sum;    // Q(s,a) running sums
  std::vector<long> visits;     // N(s,a)
  std::vector<std::unique_ptr<TreeNode>> children;  // parallel to actions

  // (encoding, evaluation order) of architectures whose rollout started
  // here and whose evaluation completed; used for transfer-parent lookup.
  std::vector<std::pair<EncodingVector, long>> evaluated_here;

  long total_visits() const {  // N(s) is computed, never stored
    long n = 0;
    for (long v : visits) n += v;
    return n;
  }
};

// Eq-1 style score: q_sum/n_sa + 2c*sqrt(2 ln(n_s) / n_sa);
// +infinity for unvisited actions.
double ucb_score(double q_sum, long n_sa, long n_s, double c);

// (node, action-index) pairs from the root down to the stopping node.
using SelectionPath = std::vector<std::pair<TreeNode*, int>>;

SelectionPath select(const SpaceConfig& space, TreeNode* root,
                     const SearchConfig& cfg);

// Creates the child at the path's last (node, action); per-action stats
// start at zero. Throws IllegalAction if the child already exists.
TreeNode* expand(const SpaceConfig& space, const SelectionPath& path);

// Uniform-random legal actions until a terminal state.
ArchState simulate(const SpaceConfig& space, const ArchState& from, Rng& rng);

// Eq. 2: (actual + mean(preds)) / 2. Throws EmptyPredictions.
double estimate_q(double actual, const std::vector<double>& preds);

// q_sum += q, visits += n along every (s, a) pair of the path.
void backpropagate(const SelectionPath& path, double q, long n);

// The (parent, action) chain from `node` up to the root, in root-first
// order (equals the selection path that reached the node).
SelectionPath path_to_root(TreeNode* node);

enum class EngineMode { Sequential, Distributed };

struct RolloutResult {
  ArchState terminal_state;
  EncodingVector encoding;
  TreeNode* origin = nullptr;  // rollout_from
  double q_hat = 0.0;          // mean surrogate prediction over k rollouts
  std::optional<double> actual_accuracy;  // set in sequential mode
  std::optional<EncodingVector> transfer_parent;
  int epoch_budget = 70;
  bool cached = false;          // terminal arch was already evaluated
  bool needs_dispatch = false;  // distributed: enqueue a job for this
};

class Engine {
 public:
  Engine(SpaceConfig space, SearchConfig cfg,
         std::shared_ptr<Surrogate> surrogate,
         std::shared_ptr<Evaluator> evaluator, EngineMode mode);

  // One Selection -> Expansion -> Simulation cycle. Sequential mode also
  // evaluates sim_0, backpropagates q = (acc + q_hat)/2 with n = 1, and
  // retrains the surrogate on new data. Distributed mode performs the
  // preemptive backpropagation and returns a result to dispatch.
  RolloutResult search_step();

  // Eq. 4: backpropagate(path to origin, q_hat, 1) and record the
  // pending job for the later final backprop.
  void preemptive_backprop(const RolloutResult& rollout);

  // Eq. 5: propagate (acc - q_hat)/2 with visit increment 0 from
  // rollout_from(arch) to the root; clears the pending record. Throws
  // UnknownArch without a pending record.
  void final_backprop(const EncodingVector& arch, double accuracy);

  // Distributed-mode result application: final backprop + cache/cost
  // accounting + sample append + surrogate retrain.
  EvalRecord apply_result(const EncodingVector& arch, double accuracy);

  bool has_pending(const EncodingVector& arch) const;
  std::size_t pending_count() const { return pending_.size(); }

  // One entry per distinct pending architecture; used to re-enqueue jobs
  // after a snapshot restore in distributed mode.
  struct PendingJob {
    EncodingVector encoding;
    std::optional<EncodingVector> transfer_parent;
    int epoch_budget = 70;
  };
  std::vector<PendingJob> pending_jobs() const;

  nlohmann::json snapshot() const;
  static std::unique_ptr<Engine> restore(const nlohmann::json& blob,
                                         std::shared_ptr<Surrogate> surrogate,
                                         std::shared_ptr<Evaluator> evaluator);

  TreeNode* root() { return root_.get(); }
  const SpaceConfig& space() const { return space_; }
  const SearchConfig& config() const { return cfg_; }
  EngineMode mode() const { return mode_; }
  const SampleSet& samples() const { return samples_; }
  Evaluator& evaluator() { return *evaluator_; }
  long iteration() const { return iteration_; }
  long evaluations() const { return eval_counter_; }
  double best_accuracy() const { return best_accuracy_; }
  const std::optional<EncodingVector>& best_encoding() const {
    return best_encoding_;
  }

  // Minimal-edit-distance completed architecture among the ancestors of
  // `node` (ties: smaller distance, then most recent).
  std::optional<EncodingVector> find_transfer_parent(
      TreeNode* node, const EncodingVector& target) const;

 private:
  struct Pending {
    double q_hat;
    TreeNode* origin;
    std::optional<EncodingVector> transfer_parent;
  };

  TreeNode* rollout_origin();
  void note_evaluated(TreeNode* origin, const EncodingVector& enc,
                      double accuracy, bool new_arch);
  void retrain(bool new_data);

  SpaceConfig space_;
  SearchConfig cfg_;
  EngineMode mode_;
  std::shared_ptr<Surrogate> surrogate_;
  std::shared_ptr<Evaluator> evaluator_;
  std::unique_ptr<TreeNode> root_;
  SampleSet samples_;
  Rng rng_sim_;
  Rng rng_train_;
  std::map<std::string, std::vector<Pending>> pending_;
  long iteration_ = 0;
  long eval_counter_ = 0;
  double best_accuracy_ = -1.0;
  std::optional<EncodingVector> best_encoding_;
};

// Self-describing versioned snapshot container with an integrity
// checksum. Throws VersionMismatch / CorruptSnapshot.
std::string snapshot_serialize(const nlohmann::json& payload);
nlohmann::json snapshot_parse(const std::string& bytes);

}  // namespace alphax
