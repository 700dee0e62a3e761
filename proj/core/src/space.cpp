#include "alphax/space.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <set>
#include <sstream>

namespace alphax {

std::string to_string(SpaceKind k) {
  switch (k) {
    case SpaceKind::NasNetCell: return "nasnet";
    case SpaceKind::NasBenchDag: return "nasbench";
    case SpaceKind::LinearConvNet: return "convnet";
  }
  return "?";
}

SpaceKind space_kind_from_string(const std::string& s) {
  if (s == "nasnet") return SpaceKind::NasNetCell;
  if (s == "nasbench") return SpaceKind::NasBenchDag;
  if (s == "convnet") return SpaceKind::LinearConvNet;
  throw ParseError("unknown space kind: " + s);
}

SpaceConfig SpaceConfig::make(SpaceKind kind) {
  SpaceConfig cfg;
  cfg.kind = kind;
  return cfg;
}

namespace layer_code {

namespace {
const std::array<std::string, kCount + 1> kNames = {
    "absent",
    "3x3 avg pool", "5x5 avg pool", "7x7 avg pool",
    "3x3 max pool", "5x5 max pool", "7x7 max pool",
    "3x3 conv",     "5x5 conv",     "identity",
    "3x3 depth-separable conv", "5x5 depth-separable conv",
    "7x7 depth-separable conv"};
}  // namespace

const std::string& name(int code) {
  if (code < 1 || code > kCount)
    throw MalformedEncoding("layer code out of range: " + std::to_string(code));
  return kNames[static_cast<std::size_t>(code)];
}

int code_of(const std::string& n) {
  for (int c = 1; c <= kCount; ++c)
    if (kNames[static_cast<std::size_t>(c)] == n) return c;
  throw MalformedEncoding("unknown layer name: " + n);
}

}  // namespace layer_code

int ArchState::dag_canonical_pos(int id) const {
  if (id == 0) return 0;
  if (id == 1) return dag_node_count() - 1;
  return id - 1;
}

int ArchState::dag_id_at_pos(int pos) const {
  if (pos == 0) return 0;
  if (pos == dag_node_count() - 1) return 1;
  return pos + 1;
}

std::string Action::to_string() const {
  std::ostringstream os;
  switch (kind) {
    case Kind::AddLeftLayer: os << "AddLeftLayer(" << a << "," << b << "," << c << ")"; break;
    case Kind::AddRightLayer: os << "AddRightLayer(" << a << "," << b << "," << c << ")"; break;
    case Kind::NewBlock: os << "NewBlock(" << a << "," << b << "," << c << ")"; break;
    case Kind::AddNode: os << "AddNode(" << a << ")"; break;
    case Kind::AddEdge: os << "AddEdge(" << a << "," << b << ")"; break;
    case Kind::AddConvLayer: os << "AddConvLayer(" << a << "," << b << "," << c << ")"; break;
    case Kind::SetActivation: os << "SetActivation(" << a << "," << b << ")"; break;
    case Kind::ChangeHyper: os << "ChangeHyper(" << a << "," << b << "," << c << ")"; break;
    case Kind::Terminate: os << "Terminate"; break;
  }
  return os.str();
}

std::string EncodingVector::key() const {
  std::string k;
  k.reserve(digits.size() * 3 + 2);
  k.push_back(static_cast<char>('a' + static_cast<int>(space)));
  for (int d : digits) {
    k.push_back(':');
    k += std::to_string(d);
  }
  return k;
}

int encoding_length(SpaceKind k) {
  switch (k) {
    case SpaceKind::NasNetCell: return 60;   // 2 cells x 5 blocks x 6 digits
    case SpaceKind::NasBenchDag: return 56;  // 7x7 adjacency + 7 nodelist
    case SpaceKind::LinearConvNet: return 12;  // 3 layers x 4 digits
  }
  return 0;
}

int encoding_max_digit(SpaceKind k) {
  switch (k) {
    case SpaceKind::NasNetCell: return layer_code::kCount;
    case SpaceKind::NasBenchDag: return dag_op::kOutputMarker;
    case SpaceKind::LinearConvNet: return 2;
  }
  return 1;
}

ArchState initial_state(const SpaceConfig& cfg) {
  ArchState s;
  s.space = cfg.kind;
  return s;
}

namespace {

constexpr int kDagGridSize = 7;  // encoding always covers 7 nodes

void append_nasnet_actions(const SpaceConfig& cfg, const ArchState& s,
                           std::vector<Action>& out) {
  using K = Action::Kind;
  for (int cell = 0; cell < 2; ++cell) {
    const auto& blocks = s.cells[static_cast<std::size_t>(cell)].blocks;
    for (int b = 0; b < static_cast<int>(blocks.size()); ++b) {
      if (static_cast<int>(blocks[static_cast<std::size_t>(b)].left_layers.size()) <
          cfg.max_branch_layers)
        for (int code = 1; code <= layer_code::kCount; ++code)
          out.push_back({K::AddLeftLayer, cell, b, code});
    }
  }
  for (int cell = 0; cell < 2; ++cell) {
    const auto& blocks = s.cells[static_cast<std::size_t>(cell)].blocks;
    for (int b = 0; b < static_cast<int>(blocks.size()); ++b) {
      if (static_cast<int>(blocks[static_cast<std::size_t>(b)].right_layers.size()) <
          cfg.max_branch_layers)
        for (int code = 1; code <= layer_code::kCount; ++code)
          out.push_back({K::AddRightLayer, cell, b, code});
    }
  }
  // A block is complete once both branches have at least one layer; an
  // incomplete block would encode ambiguously (possibly as the all-zero
  // absent marker), so new blocks and termination wait for completeness.
  auto all_complete = [](const std::vector<Block>& blocks) {
    for (const Block& b : blocks)
      if (b.left_layers.empty() || b.right_layers.empty()) return false;
    return true;
  };
  for (int cell = 0; cell < 2; ++cell) {
    const auto& blocks = s.cells[static_cast<std::size_t>(cell)].blocks;
    int n = static_cast<int>(blocks.size());
    if (n < cfg.max_blocks && all_complete(blocks))
      for (int li = 0; li <= n + 1; ++li)
        for (int ri = 0; ri <= n + 1; ++ri)
          out.push_back({K::NewBlock, cell, li, ri});
  }
  if ((!s.cells[0].blocks.empty() || !s.cells[1].blocks.empty()) &&
      all_complete(s.cells[0].blocks) && all_complete(s.cells[1].blocks))
    out.push_back({K::Terminate, 0, 0, 0});
}

void append_nasbench_actions(const SpaceConfig& cfg, const ArchState& s,
                             std::vector<Action>& out) {
  using K = Action::Kind;
  if (s.dag_node_count() < cfg.max_dag_nodes)
    for (int op = 1; op <= cfg.num_dag_ops; ++op)
      out.push_back({K::AddNode, op, 0, 0});

  // Edges are legal only from a lower canonical position to a higher
  // one; that is exactly the acyclicity constraint for this space.
  int n = s.dag_node_count();
  std::set<std::pair<int, int>> existing(s.dag_edges.begin(), s.dag_edges.end());
  for (int u = 0; u < n; ++u) {
    for (int v = 0; v < n; ++v) {
      if (u == v || existing.count({u, v})) continue;
      if (s.dag_canonical_pos(u) < s.dag_canonical_pos(v))
        out.push_back({K::AddEdge, u, v, 0});
    }
  }
  out.push_back({K::Terminate, 0, 0, 0});
}

void append_convnet_actions(const SpaceConfig& cfg, const ArchState& s,
                            std::vector<Action>& out) {
  using K = Action::Kind;
  int depth = static_cast<int>(s.conv_layers.size());
  if (depth < cfg.max_conv_depth)
    for (int st = 1; st <= 2; ++st)
      for (int f = 1; f <= 2; ++f)
        for (int k = 1; k <= 2; ++k)
          out.push_back({K::AddConvLayer, st, f, k});
  for (int i = 0; i < depth; ++i)
    for (int act = 0; act <= cfg.num_activations; ++act)
      if (act != s.conv_layers[static_cast<std::size_t>(i)].activation)
        out.push_back({K::SetActivation, i, act, 0});
  for (int i = 0; i < depth; ++i) {
    const auto& l = s.conv_layers[static_cast<std::size_t>(i)];
    const int cur[3] = {l.stride_idx, l.filter_idx, l.kernel_idx};
    for (int field = 0; field < 3; ++field)
      for (int v = 1; v <= 2; ++v)
        if (v != cur[field]) out.push_back({K::ChangeHyper, i, field, v});
  }
  out.push_back({K::Terminate, 0, 0, 0});
}

}  // namespace

std::vector<Action> legal_actions(const SpaceConfig& cfg, const ArchState& s) {
  std::vector<Action> out;
  if (s.is_terminal) return out;
  switch (cfg.kind) {
    case SpaceKind::NasNetCell: append_nasnet_actions(cfg, s, out); break;
    case SpaceKind::NasBenchDag: append_nasbench_actions(cfg, s, out); break;
    case SpaceKind::LinearConvNet: append_convnet_actions(cfg, s, out); break;
  }
  return out;
}

ArchState apply(const SpaceConfig& cfg, const ArchState& s, const Action& act) {
  auto legal = legal_actions(cfg, s);
  if (std::find(legal.begin(), legal.end(), act) == legal.end())
    throw IllegalAction("action " + act.to_string() + " not legal for state");

  ArchState next = s;
  using K = Action::Kind;
  switch (act.kind) {
    case K::AddLeftLayer:
      next.cells[static_cast<std::size_t>(act.a)]
          .blocks[static_cast<std::size_t>(act.b)]
          .left_layers.push_back(act.c);
      break;
    case K::AddRightLayer:
      next.cells[static_cast<std::size_t>(act.a)]
          .blocks[static_cast<std::size_t>(act.b)]
          .right_layers.push_back(act.c);
      break;
    case K::NewBlock: {
      Block b;
      b.left_input = act.b;
      b.right_input = act.c;
      next.cells[static_cast<std::size_t>(act.a)].blocks.push_back(b);
      break;
    }
    case K::AddNode:
      next.dag_ops.push_back(act.a);
      break;
    case K::AddEdge:
      next.dag_edges.emplace_back(act.a, act.b);
      std::sort(next.dag_edges.begin(), next.dag_edges.end());
      break;
    case K::AddConvLayer: {
      ConvLayer l;
      l.stride_idx = act.a;
      l.filter_idx = act.b;
      l.kernel_idx = act.c;
      next.conv_layers.push_back(l);
      break;
    }
    case K::SetActivation:
      next.conv_layers[static_cast<std::size_t>(act.a)].activation = act.b;
      break;
    case K::ChangeHyper: {
      auto& l = next.conv_layers[static_cast<std::size_t>(act.a)];
      if (act.b == 0) l.stride_idx = act.c;
      else if (act.b == 1) l.filter_idx = act.c;
      else l.kernel_idx = act.c;
      break;
    }
    case K::Terminate:
      next.is_terminal = true;
      break;
  }
  return next;
}

namespace {

void encode_nasnet(const ArchState& s, std::vector<int>& d) {
  d.assign(60, 0);
  std::size_t pos = 0;
  for (const auto& cell : s.cells) {
    for (std::size_t b = 0; b < 5; ++b, pos += 6) {
      if (b >= cell.blocks.size()) continue;
      const Block& blk = cell.blocks[b];
      for (std::size_t i = 0; i < blk.left_layers.size() && i < 2; ++i)
        d[pos + i] = blk.left_layers[i];
      for (std::size_t i = 0; i < blk.right_layers.size() && i < 2; ++i)
        d[pos + 2 + i] = blk.right_layers[i];
      d[pos + 4] = blk.left_input;
      d[pos + 5] = blk.right_input;
    }
  }
}

void encode_nasbench(const ArchState& s, std::vector<int>& d) {
  d.assign(56, 0);
  for (const auto& [u, v] : s.dag_edges) {
    int pu = s.dag_canonical_pos(u);
    int pv = s.dag_canonical_pos(v);
    d[static_cast<std::size_t>(pu * kDagGridSize + pv)] = 1;
  }
  int n = s.dag_node_count();
  d[49] = dag_op::kInputMarker;
  for (int i = 0; i < static_cast<int>(s.dag_ops.size()); ++i)
    d[static_cast<std::size_t>(49 + 1 + i)] = s.dag_ops[static_cast<std::size_t>(i)];
  d[static_cast<std::size_t>(49 + n - 1)] = dag_op::kOutputMarker;
}

void encode_convnet(const ArchState& s, std::vector<int>& d) {
  d.assign(12, 0);
  for (std::size_t i = 0; i < s.conv_layers.size() && i < 3; ++i) {
    const auto& l = s.conv_layers[i];
    d[i * 4 + 0] = l.stride_idx;
    d[i * 4 + 1] = l.filter_idx;
    d[i * 4 + 2] = l.kernel_idx;
    d[i * 4 + 3] = l.activation;
  }
}

ArchState decode_nasnet(const SpaceConfig& cfg, const std::vector<int>& d) {
  ArchState s;
  s.space = SpaceKind::NasNetCell;
  std::size_t pos = 0;
  for (int cell = 0; cell < 2; ++cell) {
    bool absent_seen = false;
    for (int b = 0; b < 5; ++b, pos += 6) {
      bool all_zero = true;
      for (std::size_t i = 0; i < 6; ++i)
        if (d[pos + i] != 0) all_zero = false;
      if (all_zero) {
        absent_seen = true;
        continue;
      }
      if (absent_seen)
        throw MalformedEncoding("present block after an absent block");
      if (b >= cfg.max_blocks)
        throw MalformedEncoding("block count exceeds limit");
      Block blk;
      auto read_branch = [&](std::size_t off, std::vector<int>& layers) {
        for (std::size_t i = 0; i < 2; ++i) {
          int code = d[pos + off + i];
          if (code < 0 || code > layer_code::kCount)
            throw MalformedEncoding("layer code out of range");
          if (code == 0) {
            if (i + 1 < 2 && d[pos + off + i + 1] != 0)
              throw MalformedEncoding("layer after padding in a branch");
            break;
          }
          layers.push_back(code);
        }
      };
      read_branch(0, blk.left_layers);
      read_branch(2, blk.right_layers);
      blk.left_input = d[pos + 4];
      blk.right_input = d[pos + 5];
      for (int in : {blk.left_input, blk.right_input})
        if (in < 0 || in > b + 1)
          throw MalformedEncoding("input code references a later block");
      s.cells[static_cast<std::size_t>(cell)].blocks.push_back(blk);
    }
  }
  return s;
}

ArchState decode_nasbench(const SpaceConfig& cfg, const std::vector<int>& d) {
  ArchState s;
  s.space = SpaceKind::NasBenchDag;
  if (d[49] != dag_op::kInputMarker)
    throw MalformedEncoding("nodelist must start with the input marker");
  int n = -1;
  for (int p = 1; p < kDagGridSize; ++p) {
    int code = d[static_cast<std::size_t>(49 + p)];
    if (code == dag_op::kOutputMarker) {
      n = p + 1;
      break;
    }
    if (code < 1 || code > cfg.num_dag_ops)
      throw MalformedEncoding("bad op code in nodelist");
    s.dag_ops.push_back(code);
  }
  if (n < 0) throw MalformedEncoding("nodelist has no output marker");
  if (n > cfg.max_dag_nodes) throw MalformedEncoding("node count exceeds limit");
  for (int p = n; p < kDagGridSize; ++p)
    if (d[static_cast<std::size_t>(49 + p)] != 0)
      throw MalformedEncoding("nodelist entry after the output marker");

  for (int i = 0; i < kDagGridSize; ++i) {
    for (int j = 0; j < kDagGridSize; ++j) {
      int bit = d[static_cast<std::size_t>(i * kDagGridSize + j)];
      if (bit != 0 && bit != 1) throw MalformedEncoding("adjacency digit not 0/1");
      if (bit == 0) continue;
      if (i >= j) throw MalformedEncoding("cyclic adjacency entry");
      if (j >= n) throw MalformedEncoding("edge references an absent node");
      s.dag_edges.emplace_back(s.dag_id_at_pos(i), s.dag_id_at_pos(j));
    }
  }
  std::sort(s.dag_edges.begin(), s.dag_edges.end());
  return s;
}

ArchState decode_convnet(const SpaceConfig& cfg, const std::vector<int>& d) {
  ArchState s;
  s.space = SpaceKind::LinearConvNet;
  bool absent_seen = false;
  for (std::size_t i = 0; i < 3; ++i) {
    bool all_zero = d[i * 4] == 0 && d[i * 4 + 1] == 0 && d[i * 4 + 2] == 0 &&
                    d[i * 4 + 3] == 0;
    if (all_zero) {
      absent_seen = true;
      continue;
    }
    if (absent_seen) throw MalformedEncoding("layer after an absent layer");
    if (static_cast<int>(i) >= cfg.max_conv_depth)
      throw MalformedEncoding("conv depth exceeds limit");
    ConvLayer l;
    l.stride_idx = d[i * 4 + 0];
    l.filter_idx = d[i * 4 + 1];
    l.kernel_idx = d[i * 4 + 2];
    l.activation = d[i * 4 + 3];
    for (int idx : {l.stride_idx, l.filter_idx, l.kernel_idx})
      if (idx < 1 || idx > 2) throw MalformedEncoding("hyperparameter index out of range");
    if (l.activation < 0 || l.activation > cfg.num_activations)
      throw MalformedEncoding("activation code out of range");
    s.conv_layers.push_back(l);
  }
  return s;
}

}  // namespace

EncodingVector encode(const ArchState& s) {
  EncodingVector v;
  v.space = s.space;
  switch (s.space) {
    case SpaceKind::NasNetCell: encode_nasnet(s, v.digits); break;
    case SpaceKind::NasBenchDag: encode_nasbench(s, v.digits); break;
    case SpaceKind::LinearConvNet: encode_convnet(s, v.digits); break;
  }
  return v;
}

ArchState decode(const SpaceConfig& cfg, const EncodingVector& v) {
  if (v.space != cfg.kind) throw SpaceMismatch("encoding space != config space");
  if (static_cast<int>(v.digits.size()) != encoding_length(cfg.kind))
    throw MalformedEncoding("wrong encoding length: " +
                            std::to_string(v.digits.size()));
  for (int d : v.digits)
    if (d < 0) throw MalformedEncoding("negative digit");
  switch (cfg.kind) {
    case SpaceKind::NasNetCell: return decode_nasnet(cfg, v.digits);
    case SpaceKind::NasBenchDag: return decode_nasbench(cfg, v.digits);
    case SpaceKind::LinearConvNet: return decode_convnet(cfg, v.digits);
  }
  throw MalformedEncoding("unknown space");
}

int edit_distance(const EncodingVector& a, const EncodingVector& b) {
  if (a.space != b.space) throw SpaceMismatch("edit_distance across spaces");
  if (a.digits.size() != b.digits.size())
    throw SpaceMismatch("encoding lengths differ");
  int d = 0;
  for (std::size_t i = 0; i < a.digits.size(); ++i)
    if (a.digits[i] != b.digits[i]) ++d;
  return d;
}

std::vector<ArchState> enumerate_space(const SpaceConfig& cfg,
                                       std::size_t state_cap) {
  std::vector<ArchState> out;
  std::set<std::string> seen;
  std::deque<ArchState> frontier;
  ArchState init = initial_state(cfg);
  frontier.push_back(init);
  seen.insert(encode(init).key());

  while (!frontier.empty()) {
    ArchState s = std::move(frontier.front());
    frontier.pop_front();
    bool terminatable = false;
    for (const Action& a : legal_actions(cfg, s)) {
      if (a.kind == Action::Kind::Terminate) {
        terminatable = true;
        continue;
      }
      ArchState next = apply(cfg, s, a);
      auto key = encode(next).key();
      if (seen.insert(std::move(key)).second) {
        if (seen.size() > state_cap)
          throw SpaceTooLarge("enumeration exceeds the state-count cap");
        frontier.push_back(std::move(next));
      }
    }
    if (terminatable) out.push_back(std::move(s));
  }
  return out;
}

}  // namespace alphax
