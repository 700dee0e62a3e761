#include "alphax/mcts.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace alphax {

double ucb_score(double q_sum, long n_sa, long n_s, double c) {
  if (n_sa == 0) return std::numeric_limits<double>::infinity();
  double mean = q_sum / static_cast<double>(n_sa);
  double bonus = 2.0 * c *
                 std::sqrt(2.0 * std::log(static_cast<double>(n_s)) /
                           static_cast<double>(n_sa));
  return mean + bonus;
}

namespace {

std::unique_ptr<TreeNode> make_node(const SpaceConfig& space, ArchState state,
                                    TreeNode* parent, int incoming) {
  auto node = std::make_unique<TreeNode>();
  node->state = std::move(state);
  node->parent = parent;
  node->incoming_action = incoming;
  node->actions = legal_actions(space, node->state);
  node->q_sum.assign(node->actions.size(), 0.0);
  node->visits.assign(node->actions.size(), 0);
  node->children.resize(node->actions.size());
  return node;
}

}  // namespace

SelectionPath select(const SpaceConfig& space, TreeNode* root,
                     const SearchConfig& cfg) {
  (void)space;
  SelectionPath path;
  TreeNode* node = root;
  int depth = 0;
  while (!node->state.is_terminal && !node->actions.empty() &&
         depth < cfg.max_tree_depth) {
    long n_s = node->total_visits();
    int best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < static_cast<int>(node->actions.size()); ++i) {
      double score = ucb_score(node->q_sum[static_cast<std::size_t>(i)],
                               node->visits[static_cast<std::size_t>(i)], n_s,
                               cfg.c);
      if (score > best_score) {  // ties broken by canonical action order
        best_score = score;
        best = i;
      }
    }
    path.emplace_back(node, best);
    TreeNode* child = node->children[static_cast<std::size_t>(best)].get();
    if (!child) break;
    node = child;
    ++depth;
  }
  return path;
}

TreeNode* expand(const SpaceConfig& space, const SelectionPath& path) {
  if (path.empty()) throw IllegalAction("expand with an empty path");
  auto [node, idx] = path.back();
  if (node->children[static_cast<std::size_t>(idx)])
    throw IllegalAction("child already expanded");
  ArchState next =
      apply(space, node->state, node->actions[static_cast<std::size_t>(idx)]);
  node->children[static_cast<std::size_t>(idx)] =
      make_node(space, std::move(next), node, idx);
  return node->children[static_cast<std::size_t>(idx)].get();
}

ArchState simulate(const SpaceConfig& space, const ArchState& from, Rng& rng) {
  ArchState s = from;
  while (!s.is_terminal) {
    auto actions = legal_actions(space, s);
    if (actions.empty()) break;  // only possible for the empty NasNet root
    s = apply(space, s, actions[uniform_index(rng, actions.size())]);
  }
  return s;
}

double estimate_q(double actual, const std::vector<double>& preds) {
  if (preds.empty()) throw EmptyPredictions("estimate_q with no predictions");
  double sum = 0.0;
  for (double p : preds) sum += p;
  return (actual + sum / static_cast<double>(preds.size())) / 2.0;
}

void backpropagate(const SelectionPath& path, double q, long n) {
  for (auto& [node, idx] : path) {
    node->q_sum[static_cast<std::size_t>(idx)] += q;
    node->visits[static_cast<std::size_t>(idx)] += n;
  }
}

SelectionPath path_to_root(TreeNode* node) {
  SelectionPath path;
  for (TreeNode* n = node; n->parent != nullptr; n = n->parent)
    path.emplace_back(n->parent, n->incoming_action);
  std::reverse(path.begin(), path.end());
  return path;
}

Engine::Engine(SpaceConfig space, SearchConfig cfg,
               std::shared_ptr<Surrogate> surrogate,
               std::shared_ptr<Evaluator> evaluator, EngineMode mode)
    : space_(space),
      cfg_(cfg),
      mode_(mode),
      surrogate_(std::move(surrogate)),
      evaluator_(std::move(evaluator)),
      rng_sim_(cfg.rng_seed),
      rng_train_(cfg.rng_seed ^ 0x9e3779b97f4a7c15ULL) {
  root_ = make_node(space_, initial_state(space_), nullptr, -1);
}

TreeNode* Engine::rollout_origin() {
  SelectionPath path = select(space_, root_.get(), cfg_);
  if (path.empty()) return root_.get();
  auto [node, idx] = path.back();
  TreeNode* child = node->children[static_cast<std::size_t>(idx)].get();
  if (child) return child;  // terminal child or depth cap
  return expand(space_, path);
}

std::optional<EncodingVector> Engine::find_transfer_parent(
    TreeNode* node, const EncodingVector& target) const {
  std::optional<EncodingVector> best;
  int best_dist = 0;
  long best_order = -1;
  for (TreeNode* n = node->parent; n != nullptr; n = n->parent) {
    for (const auto& [enc, order] : n->evaluated_here) {
      int d = edit_distance(enc, target);
      if (!best || d < best_dist || (d == best_dist && order > best_order)) {
        best = enc;
        best_dist = d;
        best_order = order;
      }
    }
  }
  return best;
}

void Engine::note_evaluated(TreeNode* origin, const EncodingVector& enc,
                            double accuracy, bool new_arch) {
  origin->evaluated_here.emplace_back(enc, ++eval_counter_);
  if (new_arch) {
    samples_.add(enc, accuracy);
    if (accuracy > best_accuracy_) {
      best_accuracy_ = accuracy;
      best_encoding_ = enc;
    }
  }
}

void Engine::retrain(bool new_data) {
  if (new_data && !samples_.empty()) surrogate_->fit(samples_, rng_train_);
}

RolloutResult Engine::search_step() {
  ++iteration_;
  TreeNode* origin = rollout_origin();

  RolloutResult r;
  r.origin = origin;
  r.terminal_state = simulate(space_, origin->state, rng_sim_);  // sim_0
  r.encoding = encode(r.terminal_state);

  std::vector<double> preds;
  preds.reserve(static_cast<std::size_t>(cfg_.k));
  for (int i = 0; i < cfg_.k; ++i) {
    ArchState sim = simulate(space_, origin->state, rng_sim_);
    preds.push_back(surrogate_->predict(encode(sim)));
  }
  double sum = 0.0;
  for (double p : preds) sum += p;
  r.q_hat = sum / static_cast<double>(preds.size());

  r.transfer_parent = find_transfer_parent(origin, r.encoding);
  r.epoch_budget = r.transfer_parent ? 20 : 70;

  if (mode_ == EngineMode::Sequential) {
    EvalRecord rec = evaluator_->evaluate(r.terminal_state, r.transfer_parent);
    r.actual_accuracy = rec.accuracy;
    r.cached = rec.cached;
    r.epoch_budget = rec.epochs_charged;
    double q = estimate_q(rec.accuracy, preds);
    backpropagate(path_to_root(origin), q, 1);
    note_evaluated(origin, r.encoding, rec.accuracy, !rec.cached);
    retrain(!rec.cached);
    return r;
  }

  // Distributed: preemptive backprop now, actual accuracy later.
  preemptive_backprop(r);
  auto cached = evaluator_->cached_accuracy(r.encoding);
  if (cached) {
    r.cached = true;
    r.actual_accuracy = *cached;
    apply_result(r.encoding, *cached);
    return r;
  }
  r.needs_dispatch = pending_.at(r.encoding.key()).size() == 1;
  return r;
}

void Engine::preemptive_backprop(const RolloutResult& rollout) {
  backpropagate(path_to_root(rollout.origin), rollout.q_hat, 1);
  pending_[rollout.encoding.key()].push_back(
      {rollout.q_hat, rollout.origin, rollout.transfer_parent});
}

void Engine::final_backprop(const EncodingVector& arch, double accuracy) {
  auto it = pending_.find(arch.key());
  if (it == pending_.end())
    throw UnknownArch("no pending preemptive record for architecture");
  for (const Pending& p : it->second) {
    backpropagate(path_to_root(p.origin), (accuracy - p.q_hat) / 2.0, 0);
    note_evaluated(p.origin, arch, accuracy, false);
  }
  pending_.erase(it);
}

EvalRecord Engine::apply_result(const EncodingVector& arch, double accuracy) {
  auto it = pending_.find(arch.key());
  if (it == pending_.end())
    throw UnknownArch("no pending preemptive record for architecture");
  std::optional<EncodingVector> parent = it->second.front().transfer_parent;
  final_backprop(arch, accuracy);
  EvalRecord rec = evaluator_->record_external(arch, accuracy, parent);
  if (!rec.cached) {
    samples_.add(arch, rec.accuracy);
    if (rec.accuracy > best_accuracy_) {
      best_accuracy_ = rec.accuracy;
      best_encoding_ = arch;
    }
  }
  retrain(!rec.cached);
  return rec;
}

bool Engine::has_pending(const EncodingVector& arch) const {
  return pending_.count(arch.key()) > 0;
}

std::vector<Engine::PendingJob> Engine::pending_jobs() const {
  std::vector<PendingJob> jobs;
  for (const auto& [key, list] : pending_) {
    PendingJob job;
    job.encoding.space = space_.kind;
    // inverse of EncodingVector::key(): 'a'+space, then ":<digit>"...
    std::size_t pos = 1;
    while (pos < key.size()) {
      std::size_t next = key.find(':', pos + 1);
      if (next == std::string::npos) next = key.size();
      job.encoding.digits.push_back(std::stoi(key.substr(pos + 1, next - pos - 1)));
      pos = next;
    }
    job.transfer_parent = list.front().transfer_parent;
    job.epoch_budget = job.transfer_parent ? 20 : 70;
    jobs.push_back(std::move(job));
  }
  return jobs;
}

namespace {

nlohmann::json space_to_json(const SpaceConfig& s) {
  return {{"kind", to_string(s.kind)},
          {"max_blocks", s.max_blocks},
          {"max_branch_layers", s.max_branch_layers},
          {"max_dag_nodes", s.max_dag_nodes},
          {"num_dag_ops", s.num_dag_ops},
          {"max_conv_depth", s.max_conv_depth},
          {"num_activations", s.num_activations}};
}

SpaceConfig space_from_json(const nlohmann::json& j) {
  SpaceConfig s;
  s.kind = space_kind_from_string(j["kind"].get<std::string>());
  s.max_blocks = j["max_blocks"].get<int>();
  s.max_branch_layers = j["max_branch_layers"].get<int>();
  s.max_dag_nodes = j["max_dag_nodes"].get<int>();
  s.num_dag_ops = j["num_dag_ops"].get<int>();
  s.max_conv_depth = j["max_conv_depth"].get<int>();
  s.num_activations = j["num_activations"].get<int>();
  return s;
}

void index_tree(TreeNode* node, std::vector<TreeNode*>& order) {
  order.push_back(node);
  for (auto& c : node->children)
    if (c) index_tree(c.get(), order);
}

}  // namespace

nlohmann::json Engine::snapshot() const {
  nlohmann::json j;
  j["space"] = space_to_json(space_);
  j["search"] = {{"c", cfg_.c},
                 {"k", cfg_.k},
                 {"max_tree_depth", cfg_.max_tree_depth},
                 {"max_episodes", cfg_.max_episodes},
                 {"rng_seed", cfg_.rng_seed}};
  j["mode"] = mode_ == EngineMode::Sequential ? "sequential" : "distributed";

  std::vector<TreeNode*> order;
  index_tree(root_.get(), order);
  std::map<const TreeNode*, int> index;
  for (int i = 0; i < static_cast<int>(order.size()); ++i)
    index[order[static_cast<std::size_t>(i)]] = i;

  nlohmann::json nodes = nlohmann::json::array();
  for (TreeNode* n : order) {
    nlohmann::json e;
    e["parent"] = n->parent ? index.at(n->parent) : -1;
    e["action"] = n->incoming_action;
    e["q_sum"] = n->q_sum;
    e["visits"] = n->visits;
    nlohmann::json ev = nlohmann::json::array();
    for (const auto& [enc, ord] : n->evaluated_here)
      ev.push_back({{"encoding", enc.digits}, {"order", ord}});
    e["evaluated"] = ev;
    nodes.push_back(std::move(e));
  }
  j["tree"] = std::move(nodes);

  nlohmann::json pend = nlohmann::json::array();
  for (const auto& [key, list] : pending_) {
    (void)key;
    for (const Pending& p : list) {
      nlohmann::json e;
      // All entries in one list share the same architecture encoding;
      // recover it from the origin: it is not stored on Pending, so keep
      // it explicitly per entry.
      e["q_hat"] = p.q_hat;
      e["origin"] = index.at(p.origin);
      if (p.transfer_parent) e["transfer_parent"] = p.transfer_parent->digits;
      pend.push_back(std::move(e));
    }
  }
  // Stored in parallel with the keys so restore can rebuild the map.
  nlohmann::json pend_keys = nlohmann::json::array();
  for (const auto& [key, list] : pending_) {
    for (std::size_t i = 0; i < list.size(); ++i) pend_keys.push_back(key);
  }
  j["pending"] = std::move(pend);
  j["pending_keys"] = std::move(pend_keys);

  j["samples"] = samples_.to_json();
  j["surrogate"] = surrogate_->to_json();
  j["rng_sim"] = rng_to_string(rng_sim_);
  j["rng_train"] = rng_to_string(rng_train_);
  j["iteration"] = iteration_;
  j["eval_counter"] = eval_counter_;
  j["epochs_charged"] = evaluator_->total_epochs_charged();
  j["best_accuracy"] = best_accuracy_;
  if (best_encoding_) j["best_encoding"] = best_encoding_->digits;
  return j;
}

std::unique_ptr<Engine> Engine::restore(const nlohmann::json& blob,
                                        std::shared_ptr<Surrogate> surrogate,
                                        std::shared_ptr<Evaluator> evaluator) {
  SpaceConfig space = space_from_json(blob["space"]);
  SearchConfig cfg;
  cfg.c = blob["search"]["c"].get<double>();
  cfg.k = blob["search"]["k"].get<int>();
  cfg.max_tree_depth = blob["search"]["max_tree_depth"].get<int>();
  cfg.max_episodes = blob["search"]["max_episodes"].get<long>();
  cfg.rng_seed = blob["search"]["rng_seed"].get<std::uint64_t>();
  EngineMode mode = blob["mode"].get<std::string>() == "sequential"
                        ? EngineMode::Sequential
                        : EngineMode::Distributed;

  surrogate->load_json(blob["surrogate"]);
  auto engine = std::make_unique<Engine>(space, cfg, std::move(surrogate),
                                         evaluator, mode);

  // Rebuild the tree by replaying incoming actions in preorder.
  std::vector<TreeNode*> order;
  for (const auto& e : blob["tree"]) {
    int parent = e["parent"].get<int>();
    TreeNode* node;
    if (parent < 0) {
      node = engine->root_.get();
    } else {
      TreeNode* p = order[static_cast<std::size_t>(parent)];
      int idx = e["action"].get<int>();
      ArchState next = apply(space, p->state,
                             p->actions[static_cast<std::size_t>(idx)]);
      p->children[static_cast<std::size_t>(idx)] =
          make_node(space, std::move(next), p, idx);
      node = p->children[static_cast<std::size_t>(idx)].get();
    }
    node->q_sum = e["q_sum"].get<std::vector<double>>();
    node->visits = e["visits"].get<std::vector<long>>();
    for (const auto& ev : e["evaluated"]) {
      EncodingVector enc;
      enc.space = space.kind;
      enc.digits = ev["encoding"].get<std::vector<int>>();
      node->evaluated_here.emplace_back(enc, ev["order"].get<long>());
    }
    order.push_back(node);
  }

  const auto& pend = blob["pending"];
  const auto& keys = blob["pending_keys"];
  for (std::size_t i = 0; i < pend.size(); ++i) {
    Pending p;
    p.q_hat = pend[i]["q_hat"].get<double>();
    p.origin = order[pend[i]["origin"].get<std::size_t>()];
    if (pend[i].contains("transfer_parent")) {
      EncodingVector tp;
      tp.space = space.kind;
      tp.digits = pend[i]["transfer_parent"].get<std::vector<int>>();
      p.transfer_parent = tp;
    }
    engine->pending_[keys[i].get<std::string>()].push_back(std::move(p));
  }

  engine->samples_ = SampleSet::from_json(blob["samples"], space.kind);
  std::vector<std::pair<EncodingVector, double>> cache;
  for (std::size_t i = 0; i < engine->samples_.size(); ++i)
    cache.emplace_back(engine->samples_.encodings()[i],
                       engine->samples_.accuracies()[i]);
  engine->evaluator_->restore_state(cache, blob["epochs_charged"].get<long>());

  engine->rng_sim_ = rng_from_string(blob["rng_sim"].get<std::string>());
  engine->rng_train_ = rng_from_string(blob["rng_train"].get<std::string>());
  engine->iteration_ = blob["iteration"].get<long>();
  engine->eval_counter_ = blob["eval_counter"].get<long>();
  engine->best_accuracy_ = blob["best_accuracy"].get<double>();
  if (blob.contains("best_encoding")) {
    EncodingVector b;
    b.space = space.kind;
    b.digits = blob["best_encoding"].get<std::vector<int>>();
    engine->best_encoding_ = b;
  }
  return engine;
}

std::string snapshot_serialize(const nlohmann::json& payload) {
  std::string body = payload.dump();
  nlohmann::json wrapper;
  wrapper["format_version"] = 1;
  wrapper["checksum"] = fnv1a(body);
  wrapper["payload"] = payload;
  return wrapper.dump();
}

nlohmann::json snapshot_parse(const std::string& bytes) {
  nlohmann::json wrapper;
  try {
    wrapper = nlohmann::json::parse(bytes);
  } catch (const nlohmann::json::exception&) {
    throw CorruptSnapshot("snapshot is not valid JSON");
  }
  if (!wrapper.contains("format_version") || !wrapper.contains("payload") ||
      !wrapper.contains("checksum"))
    throw CorruptSnapshot("snapshot missing required fields");
  if (wrapper["format_version"].get<int>() != 1)
    throw VersionMismatch("unsupported snapshot format version");
  nlohmann::json payload = wrapper["payload"];
  if (fnv1a(payload.dump()) != wrapper["checksum"].get<std::uint64_t>())
    throw CorruptSnapshot("snapshot checksum mismatch");
  return payload;
}

}  // namespace alphax
