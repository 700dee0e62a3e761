#pragma once

// Search-space definitions: states, actions, transitions, encodings.
//
// Three spaces are supported:
//   NasNetCell    -- normal + reduction cells built from two-branch blocks
//   NasBenchDag   -- small DAGs with per-node operations
//   LinearConvNet -- sequential ConvNets with per-layer hyperparameters
//
// All operations here are pure functions over immutable values.

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "alphax/errors.hpp"

namespace alphax {

enum class SpaceKind { NasNetCell, NasBenchDag, LinearConvNet };

std::string to_string(SpaceKind k);
SpaceKind space_kind_from_string(const std::string& s);

// Per-space structural limits. Immutable after construction.
struct SpaceConfig {
  SpaceKind kind = SpaceKind::NasBenchDag;

  // NasNetCell. The encoding always reserves 2 layer digits per branch;
  // the action space enforces max_branch_layers (default 1).
  int max_blocks = 5;
  int max_branch_layers = 1;

  // NasBenchDag. The encoding is always 7x7 adjacency + 7 nodelist.
  int max_dag_nodes = 6;
  int num_dag_ops = 3;  // op codes 1..num_dag_ops

  // LinearConvNet.
  int max_conv_depth = 3;
  int num_activations = 2;  // activation codes 1..num_activations; 0 = none

  static SpaceConfig make(SpaceKind kind);
};

// Layer-name <-> code bijection for the NasNetCell space. Code 0 is
// reserved for "absent".
namespace layer_code {
constexpr int kAvgPool3x3 = 1;
constexpr int kAvgPool5x5 = 2;
constexpr int kAvgPool7x7 = 3;
constexpr int kMaxPool3x3 = 4;
constexpr int kMaxPool5x5 = 5;
constexpr int kMaxPool7x7 = 6;
constexpr int kConv3x3 = 7;
constexpr int kConv5x5 = 8;
constexpr int kIdentity = 9;
constexpr int kSepConv3x3 = 10;
constexpr int kSepConv5x5 = 11;
constexpr int kSepConv7x7 = 12;
constexpr int kCount = 12;

const std::string& name(int code);          // throws MalformedEncoding
int code_of(const std::string& name);       // throws MalformedEncoding
}  // namespace layer_code

// NASBench op codes used in the nodelist.
namespace dag_op {
constexpr int kConv3x3 = 1;
constexpr int kConv1x1 = 2;
constexpr int kMaxPool3x3 = 3;
// Markers for the fixed input/output nodes in the nodelist encoding.
constexpr int kInputMarker = 4;
constexpr int kOutputMarker = 5;
}  // namespace dag_op

// One NASNet block: two branches plus the two input selectors.
// Input codes: 0 = previous cell, 1 = previous-previous cell,
// i+2 = output of block i.
struct Block {
  std::vector<int> left_layers;
  std::vector<int> right_layers;
  int left_input = 0;
  int right_input = 0;

  bool operator==(const Block&) const = default;
};

struct Cell {
  std::vector<Block> blocks;
  bool operator==(const Cell&) const = default;
};

struct ConvLayer {
  int stride_idx = 1;   // 1 -> stride 1, 2 -> stride 2
  int filter_idx = 1;   // 1 -> 32 filters, 2 -> 64 filters
  int kernel_idx = 1;   // 1 -> kernel 2, 2 -> kernel 4
  int activation = 0;   // 0 = none, 1..num_activations
  bool operator==(const ConvLayer&) const = default;
};

// An architecture under construction (or the terminal marker on top of
// one). Fields for the two inactive spaces stay empty.
//
// NasBenchDag representation: nodes carry stable ids in creation order,
// id 0 = input, id 1 = output, ids 2.. = interior ops. The canonical
// (encoding) position of a node is: input 0, interior id k at k-1,
// output last. Edges are stored as (from_id, to_id) and are only legal
// from a lower canonical position to a higher one, which keeps the
// graph acyclic by construction.
struct ArchState {
  SpaceKind space = SpaceKind::NasBenchDag;
  bool is_terminal = false;

  // NasNetCell: cells[0] = normal, cells[1] = reduction.
  std::array<Cell, 2> cells;

  // NasBenchDag.
  std::vector<int> dag_ops;                       // interior op codes, creation order
  std::vector<std::pair<int, int>> dag_edges;     // stable ids, kept sorted

  // LinearConvNet.
  std::vector<ConvLayer> conv_layers;

  bool operator==(const ArchState&) const = default;

  int dag_node_count() const { return 2 + static_cast<int>(dag_ops.size()); }
  // Canonical encoding position of a stable node id.
  int dag_canonical_pos(int id) const;
  // Stable node id at a canonical position.
  int dag_id_at_pos(int pos) const;
};

// A space-specific morphism with all parameters bound.
struct Action {
  enum class Kind {
    // NasNetCell
    AddLeftLayer,   // a=cell(0|1), b=block index, c=layer code
    AddRightLayer,  // a=cell, b=block, c=layer code
    NewBlock,       // a=cell, b=left_input, c=right_input
    // NasBenchDag
    AddNode,  // a=op code
    AddEdge,  // a=from id, b=to id
    // LinearConvNet
    AddConvLayer,   // a=stride_idx, b=filter_idx, c=kernel_idx
    SetActivation,  // a=layer index, b=activation
    ChangeHyper,    // a=layer index, b=field(0=stride,1=filter,2=kernel), c=value
    // All spaces
    Terminate,
  };

  Kind kind = Kind::Terminate;
  int a = 0;
  int b = 0;
  int c = 0;

  bool operator==(const Action&) const = default;
  std::string to_string() const;
};

// Fixed-length digit-vector representation of an ArchState.
// Length 60 (NasNetCell), 56 (NasBenchDag), 12 (LinearConvNet).
struct EncodingVector {
  SpaceKind space = SpaceKind::NasBenchDag;
  std::vector<int> digits;

  bool operator==(const EncodingVector&) const = default;
  bool operator<(const EncodingVector& o) const { return digits < o.digits; }
  std::string key() const;  // compact string key for maps
};

int encoding_length(SpaceKind k);
// Largest digit value the space can produce (input normalization bound).
int encoding_max_digit(SpaceKind k);

ArchState initial_state(const SpaceConfig& cfg);

// Canonical, deterministic order: variant declaration order, then
// lexicographic parameters. Empty iff state is terminal.
std::vector<Action> legal_actions(const SpaceConfig& cfg, const ArchState& s);

// Throws IllegalAction when `a` is not in legal_actions(cfg, s).
ArchState apply(const SpaceConfig& cfg, const ArchState& s, const Action& a);

EncodingVector encode(const ArchState& s);

// Inverse of encode. Throws MalformedEncoding on bad length, digit out of
// range, inconsistent padding, or a cyclic adjacency entry.
ArchState decode(const SpaceConfig& cfg, const EncodingVector& v);

// Hamming distance over aligned digit positions. Throws SpaceMismatch.
int edit_distance(const EncodingVector& a, const EncodingVector& b);

// Every distinct terminal-reachable architecture exactly once
// (distinctness by EncodingVector). Throws SpaceTooLarge past the cap.
std::vector<ArchState> enumerate_space(const SpaceConfig& cfg,
                                       std::size_t state_cap = 2'000'000);

}  // namespace alphax
