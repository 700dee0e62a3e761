#include "alphax/oracle.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "alphax/util.hpp"
#include "json.hpp"

namespace alphax {

namespace {

// Structural features feeding the synthetic score. "ops" are the coded
// operations of the architecture, "edges" its connection count, "depth"
// the longest chain.
struct Features {
  std::vector<int> ops;
  int edges = 0;
  int depth = 0;
};

Features features_of(const ArchState& s) {
  Features f;
  switch (s.space) {
    case SpaceKind::NasBenchDag: {
      f.ops = s.dag_ops;
      f.edges = static_cast<int>(s.dag_edges.size());
      // Longest path over canonical positions (edges always go forward).
      int n = s.dag_node_count();
      std::vector<int> dist(static_cast<std::size_t>(n), 0);
      std::vector<std::pair<int, int>> edges;
      for (auto [u, v] : s.dag_edges)
        edges.emplace_back(s.dag_canonical_pos(u), s.dag_canonical_pos(v));
      std::sort(edges.begin(), edges.end());
      for (auto [pu, pv] : edges)
        dist[static_cast<std::size_t>(pv)] =
            std::max(dist[static_cast<std::size_t>(pv)],
                     dist[static_cast<std::size_t>(pu)] + 1);
      f.depth = *std::max_element(dist.begin(), dist.end());
      break;
    }
    case SpaceKind::NasNetCell: {
      for (const auto& cell : s.cells) {
        for (const auto& b : cell.blocks) {
          for (int c : b.left_layers) f.ops.push_back(c);
          for (int c : b.right_layers) f.ops.push_back(c);
          f.edges += 2;  // the two input connections
        }
      }
      f.depth = static_cast<int>(
          std::max(s.cells[0].blocks.size(), s.cells[1].blocks.size()));
      break;
    }
    case SpaceKind::LinearConvNet: {
      for (const auto& l : s.conv_layers) {
        int code = ((l.stride_idx - 1) * 2 + (l.filter_idx - 1)) * 2 +
                   (l.kernel_idx - 1) + 1;
        f.ops.push_back(code);
        if (l.activation > 0) f.ops.push_back(20 + l.activation);
      }
      f.edges = static_cast<int>(s.conv_layers.size());
      f.depth = static_cast<int>(s.conv_layers.size());
      break;
    }
  }
  return f;
}

}  // namespace

SyntheticBench::SyntheticBench(SpaceConfig space, SyntheticBenchConfig cfg)
    : space_(space), cfg_(cfg) {
  Rng rng(cfg_.seed ^ 0x5DEECE66DULL);
  auto random_walk = [&] {
    ArchState s = initial_state(space_);
    while (true) {
      auto acts = legal_actions(space_, s);
      const Action& a = acts[uniform_index(rng, acts.size())];
      if (a.kind == Action::Kind::Terminate) break;
      s = apply(space_, s, a);
    }
    return encode(s);
  };
  // Draw the motif architecture with a seeded uniform action walk.
  motif_ = random_walk();
  position_weight_.reserve(motif_.digits.size());
  for (std::size_t i = 0; i < motif_.digits.size(); ++i)
    position_weight_.push_back(0.5 +
                               0.5 * hash01(cfg_.seed, "pw:" + std::to_string(i)));

  // The deceptive section covers the operation-code digits of the DAG
  // space (canonical positions 50+). Observed per-position value sets
  // from a sample of walks identify which of them actually vary and what
  // a reachable decoy value looks like.
  if (space_.kind == SpaceKind::NasBenchDag &&
      (cfg_.decoy_scale > 0.0 || cfg_.jackpot_scale > 0.0)) {
    std::vector<std::set<int>> values(motif_.digits.size());
    for (int w = 0; w < 256; ++w) {
      EncodingVector e = random_walk();
      for (std::size_t i = 0; i < e.digits.size(); ++i)
        values[i].insert(e.digits[i]);
    }
    std::vector<std::size_t> section;
    std::vector<std::size_t> adjacency;
    for (std::size_t i = 0; i < motif_.digits.size(); ++i) {
      values[i].insert(motif_.digits[i]);
      if (values[i].size() < 2) continue;
      if (i >= 50)
        section.push_back(i);
      else
        adjacency.push_back(i);
    }
    deterministic_shuffle(adjacency, rng);
    for (int a = 0; a < cfg_.jackpot_adjacency &&
                    a < static_cast<int>(adjacency.size());
         ++a)
      section.push_back(adjacency[static_cast<std::size_t>(a)]);
    decoy_weight_sum_ = 0.0;
    for (std::size_t i : section) {
      int decoy = motif_.digits[i];
      for (int v : values[i])
        if (v != motif_.digits[i]) {
          decoy = v;
          break;
        }
      op_section_.push_back(i);
      decoy_digit_.push_back(decoy);
      double w = 0.5 + 0.5 * hash01(cfg_.seed, "dw:" + std::to_string(i));
      decoy_weight_.push_back(w);
      decoy_weight_sum_ += w;
      position_weight_[i] = 0.0;
    }
  }
  if (decoy_weight_sum_ <= 0.0) decoy_weight_sum_ = 1.0;

  weight_sum_ = 0.0;
  for (double w : position_weight_) weight_sum_ += w;
  if (weight_sum_ <= 0.0) weight_sum_ = 1.0;
}

double SyntheticBench::accuracy(const ArchState& arch) const {
  if (arch.space != space_.kind) throw InvalidArch("architecture space mismatch");
  Features f = features_of(arch);
  const EncodingVector enc = encode(arch);
  double score = cfg_.base;
  double match = 0.0;
  for (std::size_t i = 0; i < enc.digits.size(); ++i)
    if (enc.digits[i] == motif_.digits[i]) match += position_weight_[i];
  score += cfg_.match_scale * match / weight_sum_;
  if (!op_section_.empty()) {
    double decoy_match = 0.0;
    bool full_motif = true;
    for (std::size_t p = 0; p < op_section_.size(); ++p) {
      const std::size_t i = op_section_[p];
      if (enc.digits[i] == decoy_digit_[p]) decoy_match += decoy_weight_[p];
      if (enc.digits[i] != motif_.digits[i]) full_motif = false;
    }
    score += cfg_.decoy_scale * decoy_match / decoy_weight_sum_;
    if (full_motif) score += cfg_.jackpot_scale;
  }
  for (int op : f.ops)
    score += hash01(cfg_.seed, "op:" + std::to_string(op)) * cfg_.op_weight_scale;
  score += cfg_.edge_bonus * f.edges;
  score -= cfg_.depth_penalty * f.depth;
  if (cfg_.noise_scale > 0.0) {
    double u = hash01(cfg_.seed, "noise:" + enc.key());
    score += (2.0 * u - 1.0) * cfg_.noise_scale;
  }
  return std::clamp(score, 0.0, 1.0);
}

double TabularBench::accuracy(const ArchState& arch) const {
  if (arch.space != space_.kind) throw InvalidArch("architecture space mismatch");
  auto it = table_.find(encode(arch).key());
  if (it == table_.end())
    throw MissingEntry("architecture not in tabular benchmark");
  return it->second;
}

TabularBench load_tabular(const SpaceConfig& space, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open tabular benchmark: " + path);
  std::map<std::string, double> table;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("line " + std::to_string(lineno) + ": " + e.what());
    }
    if (j.contains("meta")) continue;
    if (!j.contains("encoding") || !j.contains("accuracy"))
      throw ParseError("line " + std::to_string(lineno) +
                       ": missing encoding/accuracy");
    EncodingVector v;
    v.space = space.kind;
    v.digits = j["encoding"].get<std::vector<int>>();
    double acc = j["accuracy"].get<double>();
    if (acc < 0.0 || acc > 1.0)
      throw ParseError("line " + std::to_string(lineno) +
                       ": accuracy out of [0,1]");
    try {
      (void)decode(space, v);  // validate the key
    } catch (const MalformedEncoding& e) {
      throw MalformedEncoding("line " + std::to_string(lineno) + ": " + e.what());
    }
    auto [it, inserted] = table.emplace(v.key(), acc);
    if (!inserted && it->second != acc)
      throw ParseError("line " + std::to_string(lineno) +
                       ": duplicate encoding with conflicting accuracy");
  }
  return TabularBench(space, std::move(table));
}

EvalRecord Evaluator::charge(const EncodingVector& enc, double acc,
                             const std::optional<EncodingVector>& parent) {
  EvalRecord rec;
  rec.encoding = enc;
  rec.accuracy = acc;
  rec.transfer_parent = parent;
  auto [it, inserted] = cache_.emplace(enc.key(), acc);
  if (!inserted) {
    rec.accuracy = it->second;
    rec.epochs_charged = 0;
    rec.cached = true;
  } else {
    rec.epochs_charged = parent ? 20 : 70;
    epochs_charged_ += rec.epochs_charged;
  }
  return rec;
}

EvalRecord Evaluator::evaluate(
    const ArchState& arch, const std::optional<EncodingVector>& transfer_parent) {
  EncodingVector enc = encode(arch);
  std::lock_guard lock(mu_);
  auto it = cache_.find(enc.key());
  if (it != cache_.end()) {
    EvalRecord rec;
    rec.encoding = enc;
    rec.accuracy = it->second;
    rec.cached = true;
    return rec;
  }
  return charge(enc, backend_->accuracy(arch), transfer_parent);
}

EvalRecord Evaluator::record_external(
    const EncodingVector& enc, double accuracy,
    const std::optional<EncodingVector>& parent) {
  std::lock_guard lock(mu_);
  return charge(enc, accuracy, parent);
}

void Evaluator::restore_state(
    const std::vector<std::pair<EncodingVector, double>>& entries,
    long epochs_charged) {
  std::lock_guard lock(mu_);
  cache_.clear();
  for (const auto& [enc, acc] : entries) cache_[enc.key()] = acc;
  epochs_charged_ = epochs_charged;
}

bool Evaluator::is_cached(const EncodingVector& enc) const {
  std::lock_guard lock(mu_);
  return cache_.count(enc.key()) > 0;
}

std::optional<double> Evaluator::cached_accuracy(const EncodingVector& enc) const {
  std::lock_guard lock(mu_);
  auto it = cache_.find(enc.key());
  if (it == cache_.end()) return std::nullopt;
  return it->second;
}

long Evaluator::total_epochs_charged() const {
  std::lock_guard lock(mu_);
  return epochs_charged_;
}

long Evaluator::distinct_evaluations() const {
  std::lock_guard lock(mu_);
  return static_cast<long>(cache_.size());
}

std::pair<ArchState, double> global_optimum(const OracleBackend& backend,
                                            std::size_t state_cap) {
  auto states = enumerate_space(backend.space(), state_cap);
  if (states.empty()) throw SpaceTooLarge("empty enumeration");
  const ArchState* best = nullptr;
  EncodingVector best_enc;
  double best_acc = -1.0;
  for (const auto& s : states) {
    double acc = backend.accuracy(s);
    EncodingVector enc = encode(s);
    if (acc > best_acc || (acc == best_acc && enc < best_enc)) {
      best = &s;
      best_acc = acc;
      best_enc = std::move(enc);
    }
  }
  return {*best, best_acc};
}

}  // namespace alphax
