#include "tnz/network.hpp"

#include <algorithm>
#include <bit>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <tuple>

namespace tnz {

namespace {

constexpr std::uint64_t flop_cap = std::numeric_limits<std::uint64_t>::max();

std::uint64_t sat_mul(std::uint64_t a, std::uint64_t b) {
  unsigned __int128 p = static_cast<unsigned __int128>(a) * b;
  return p > flop_cap ? flop_cap : static_cast<std::uint64_t>(p);
}

std::uint64_t sat_add(std::uint64_t a, std::uint64_t b) {
  return a > flop_cap - b ? flop_cap : a + b;
}

using Mask = std::uint64_t;

Mask bit(std::size_t k) { return Mask{1} << k; }

/// Leg-level view of the network used by every planner.
struct PlanGraph {
  struct Edge {
    std::size_t u, v;
    std::uint64_t dim;
  };
  std::size_t n = 0;
  std::vector<std::uint64_t> open_size;  // product of open leg dims per node
  std::vector<Edge> edges;

  explicit PlanGraph(const TensorNetwork& net) : n(net.node_count()) {
    require(n >= 1, ErrorCode::invalid_argument, "network has no nodes");
    require(n <= 64, ErrorCode::invalid_argument, "planner supports at most 64 nodes");
    open_size.assign(n, 1);
    for (std::size_t u = 0; u < n; ++u) {
      const auto& t = net.nodes()[u].tensor;
      for (std::size_t p = 0; p < t.rank(); ++p) {
        const Leg leg{u, p};
        const Leg other = net.partner(leg);
        if (other == leg) {
          open_size[u] = sat_mul(open_size[u], t.dim(p));
        } else if (leg < other) {
          edges.push_back({u, other.node, t.dim(p)});
        }
      }
    }
  }

  /// Product of leg dims crossing the boundary of `s` (including open legs).
  std::uint64_t size(Mask s) const {
    std::uint64_t out = 1;
    for (std::size_t u = 0; u < n; ++u)
      if (s & bit(u)) out = sat_mul(out, open_size[u]);
    for (const auto& e : edges) {
      const bool in_u = s & bit(e.u), in_v = s & bit(e.v);
      if (in_u != in_v) out = sat_mul(out, e.dim);
    }
    return out;
  }

  std::uint64_t shared(Mask a, Mask b) const {
    std::uint64_t out = 1;
    for (const auto& e : edges) {
      if (((a & bit(e.u)) && (b & bit(e.v))) || ((a & bit(e.v)) && (b & bit(e.u))))
        out = sat_mul(out, e.dim);
    }
    return out;
  }

  bool connected(Mask a, Mask b) const {
    for (const auto& e : edges) {
      if (((a & bit(e.u)) && (b & bit(e.v))) || ((a & bit(e.v)) && (b & bit(e.u))))
        return true;
    }
    return false;
  }

  /// a-only x shared x b-only == size(a) * size(b) / shared.
  std::uint64_t step_cost(Mask a, Mask b) const {
    const std::uint64_t sh = shared(a, b);
    const std::uint64_t sa = size(a), sb = size(b);
    if (sa == flop_cap || sb == flop_cap) return flop_cap;
    return sat_mul(sa / sh, sb);  // sh divides sa exactly
  }
};

struct Replay {
  std::vector<Mask> masks;  // indexed by node id
  std::uint64_t flops = 0;
};

Replay replay(const PlanGraph& g, const std::vector<PlanStep>& steps) {
  Replay r;
  std::vector<bool> alive;
  for (std::size_t u = 0; u < g.n; ++u) {
    r.masks.push_back(bit(u));
    alive.push_back(true);
  }
  for (std::size_t k = 0; k < steps.size(); ++k) {
    const auto& s = steps[k];
    const NodeId expected = g.n + k;
    require(s.result == expected, ErrorCode::invalid_argument,
            "plan step " + std::to_string(k) + " must create node " + std::to_string(expected));
    require(s.left < r.masks.size() && s.right < r.masks.size() && s.left != s.right,
            ErrorCode::invalid_argument, "plan step " + std::to_string(k) + " references an invalid node");
    require(alive[s.left] && alive[s.right], ErrorCode::invalid_argument,
            "plan step " + std::to_string(k) + " reuses a consumed node");
    r.flops = sat_add(r.flops, g.step_cost(r.masks[s.left], r.masks[s.right]));
    alive[s.left] = alive[s.right] = false;
    r.masks.push_back(r.masks[s.left] | r.masks[s.right]);
    alive.push_back(true);
  }
  require(static_cast<std::size_t>(std::count(alive.begin(), alive.end(), true)) == 1,
          ErrorCode::invalid_argument, "plan does not reduce the network to a single node");
  return r;
}

ContractionPlan plan_exhaustive(const PlanGraph& g) {
  require(g.n <= max_exhaustive_nodes, ErrorCode::invalid_argument,
          "exhaustive planning supports at most " + std::to_string(max_exhaustive_nodes) +
              " nodes");
  const Mask full = bit(g.n) - 1;
  const std::size_t count = static_cast<std::size_t>(full) + 1;
  std::vector<std::uint64_t> best(count, flop_cap);
  std::vector<Mask> split(count, 0);
  std::vector<std::uint64_t> sizes(count);
  for (Mask s = 1; s <= full; ++s) sizes[s] = g.size(s);
  for (std::size_t u = 0; u < g.n; ++u) best[bit(u)] = 0;

  for (Mask s = 1; s <= full; ++s) {
    if ((s & (s - 1)) == 0) continue;
    const Mask low = s & (~s + 1);
    bool found = false;
    // Enumerate splits (a, s \ a) with the lowest node on the a side.
    for (Mask a = (s - 1) & s; a; a = (a - 1) & s) {
      if (!(a & low)) continue;
      const Mask b = s ^ a;
      const std::uint64_t sh = g.shared(a, b);
      const std::uint64_t step = sat_mul(sizes[a] / sh, sizes[b]);
      const std::uint64_t total = sat_add(sat_add(best[a], best[b]), step);
      if (!found || total < best[s]) {
        best[s] = total;
        split[s] = a;
        found = true;
      }
    }
  }

  ContractionPlan plan;
  NodeId next = g.n;
  // Post-order emission: left subtree, right subtree, then the join.
  auto emit = [&](auto&& self, Mask s) -> NodeId {
    if ((s & (s - 1)) == 0) return static_cast<NodeId>(std::countr_zero(s));
    const NodeId l = self(self, split[s]);
    const NodeId r = self(self, s ^ split[s]);
    plan.steps.push_back({l, r, next});
    return next++;
  };
  emit(emit, full);
  plan.est_flops = best[full];
  return plan;
}

ContractionPlan plan_greedy(const PlanGraph& g) {
  std::vector<std::pair<NodeId, Mask>> live;
  for (std::size_t u = 0; u < g.n; ++u) live.emplace_back(u, bit(u));
  ContractionPlan plan;
  NodeId next = g.n;
  while (live.size() > 1) {
    bool any_connected = false;
    for (std::size_t x = 0; x < live.size() && !any_connected; ++x)
      for (std::size_t y = x + 1; y < live.size(); ++y)
        if (g.connected(live[x].second, live[y].second)) {
          any_connected = true;
          break;
        }

    std::optional<std::tuple<std::uint64_t, NodeId, NodeId, std::size_t, std::size_t>> pick;
    for (std::size_t x = 0; x < live.size(); ++x) {
      for (std::size_t y = x + 1; y < live.size(); ++y) {
        if (any_connected && !g.connected(live[x].second, live[y].second)) continue;
        const auto c = g.step_cost(live[x].second, live[y].second);
        NodeId lo = live[x].first, hi = live[y].first;
        std::size_t xl = x, yl = y;
        if (lo > hi) {
          std::swap(lo, hi);
          std::swap(xl, yl);
        }
        const auto cand = std::make_tuple(c, lo, hi, xl, yl);
        if (!pick || std::tie(c, lo, hi) < std::tie(std::get<0>(*pick), std::get<1>(*pick),
                                                      std::get<2>(*pick)))
          pick = cand;
      }
    }
    const auto [c, lo, hi, xl, yl] = *pick;
    plan.est_flops = sat_add(plan.est_flops, c);
    plan.steps.push_back({lo, hi, next});
    const Mask merged = live[xl].second | live[yl].second;
    live.erase(live.begin() + static_cast<std::ptrdiff_t>(std::max(xl, yl)));
    live.erase(live.begin() + static_cast<std::ptrdiff_t>(std::min(xl, yl)));
    live.emplace_back(next++, merged);
  }
  return plan;
}

}  // namespace

TensorNetwork::TensorNetwork(std::vector<NamedTensor> nodes, std::vector<Bond> bonds)
    : nodes_(std::move(nodes)), bonds_(std::move(bonds)) {
  std::set<std::string> names;
  for (const auto& n : nodes_)
    require(names.insert(n.name).second, ErrorCode::label_collision,
            "duplicate node name '" + n.name + "'");

  partner_.resize(nodes_.size());
  for (std::size_t u = 0; u < nodes_.size(); ++u)
    for (std::size_t p = 0; p < nodes_[u].tensor.rank(); ++p) partner_[u].push_back({u, p});

  for (const auto& b : bonds_) {
    const std::size_t u = node_index(b.node_a), v = node_index(b.node_b);
    require(u != v, ErrorCode::invalid_argument,
            "bond joins node '" + b.node_a + "' to itself");
    const std::size_t pu = nodes_[u].tensor.position_of(b.label_a);
    const std::size_t pv = nodes_[v].tensor.position_of(b.label_b);
    require(partner_[u][pu] == Leg{u, pu} && partner_[v][pv] == Leg{v, pv},
            ErrorCode::invalid_argument,
            "index takes part in more than one bond (" + b.node_a + "." + b.label_a + " / " +
                b.node_b + "." + b.label_b + ")");
    require(nodes_[u].tensor.dim(pu) == nodes_[v].tensor.dim(pv), ErrorCode::shape_mismatch,
            "bonded dims differ: " + b.node_a + "." + b.label_a + " vs " + b.node_b + "." +
                b.label_b);
    partner_[u][pu] = {v, pv};
    partner_[v][pv] = {u, pu};
  }

  std::set<std::string> open_labels;
  for (std::size_t u = 0; u < nodes_.size(); ++u) {
    for (std::size_t p = 0; p < nodes_[u].tensor.rank(); ++p) {
      if (partner_[u][p] != Leg{u, p}) continue;
      const auto& label = nodes_[u].tensor.index(p).label;
      require(open_labels.insert(label).second, ErrorCode::label_collision,
              "open label '" + label + "' appears on more than one node");
      open_.push_back({u, p});
    }
  }
}

std::size_t TensorNetwork::node_index(const std::string& name) const {
  for (std::size_t u = 0; u < nodes_.size(); ++u)
    if (nodes_[u].name == name) return u;
  fail(ErrorCode::invalid_argument, "no node named '" + name + "'");
}

Leg TensorNetwork::partner(Leg leg) const {
  require(leg.node < partner_.size() && leg.position < partner_[leg.node].size(),
          ErrorCode::invalid_argument, "leg out of range");
  return partner_[leg.node][leg.position];
}

std::vector<std::string> TensorNetwork::open_labels() const {
  std::vector<std::string> out;
  for (const auto& l : open_) out.push_back(nodes_[l.node].tensor.index(l.position).label);
  return out;
}

std::uint64_t pairwise_cost(std::span<const std::size_t> a_dims,
                            std::span<const std::size_t> b_dims,
                            std::span<const std::size_t> shared) {
  auto contains = [](std::span<const std::size_t> whole, std::span<const std::size_t> part) {
    std::vector<std::size_t> w(whole.begin(), whole.end()), p(part.begin(), part.end());
    std::sort(w.begin(), w.end());
    std::sort(p.begin(), p.end());
    return std::includes(w.begin(), w.end(), p.begin(), p.end());
  };
  require(contains(a_dims, shared) && contains(b_dims, shared), ErrorCode::invalid_argument,
          "pairwise_cost: shared dims must be contained in both operands");
  std::uint64_t a = 1, b = 1, s = 1;
  for (auto d : a_dims) a = sat_mul(a, d);
  for (auto d : b_dims) b = sat_mul(b, d);
  for (auto d : shared) s = sat_mul(s, d);
  if (a == flop_cap || b == flop_cap) return flop_cap;
  return sat_mul(a / s, b);
}

ContractionPlan plan_contraction(const TensorNetwork& net, PlanStrategy strategy) {
  const PlanGraph g(net);
  if (g.n == 1) return {};
  switch (strategy) {
    case PlanStrategy::exhaustive: return plan_exhaustive(g);
    case PlanStrategy::greedy: return plan_greedy(g);
  }
  fail(ErrorCode::invalid_argument, "unknown plan strategy");
}

ContractionPlan plan_fixed(const TensorNetwork& net,
                           std::span<const std::pair<NodeId, NodeId>> order) {
  const PlanGraph g(net);
  ContractionPlan plan;
  for (std::size_t k = 0; k < order.size(); ++k)
    plan.steps.push_back({order[k].first, order[k].second, g.n + k});
  plan.est_flops = replay(g, plan.steps).flops;
  return plan;
}

void validate_plan(const TensorNetwork& net, const ContractionPlan& plan) {
  const PlanGraph g(net);
  const auto r = replay(g, plan.steps);
  require(r.flops == plan.est_flops, ErrorCode::invalid_argument,
          "plan est_flops " + std::to_string(plan.est_flops) + " != recomputed " +
              std::to_string(r.flops));
}

DenseTensor execute_plan(const TensorNetwork& net, const ContractionPlan& plan) {
  validate_plan(net, plan);

  struct Live {
    DenseTensor tensor;
    std::vector<Leg> legs;
  };
  auto internal_label = [](Leg l) {
    return std::to_string(l.node) + ":" + std::to_string(l.position);
  };

  std::vector<std::optional<Live>> live;
  for (std::size_t u = 0; u < net.node_count(); ++u) {
    const auto& t = net.nodes()[u].tensor;
    std::vector<std::string> labels;
    std::vector<Leg> legs;
    for (std::size_t p = 0; p < t.rank(); ++p) {
      legs.push_back({u, p});
      labels.push_back(internal_label({u, p}));
    }
    live.push_back(Live{t.relabeled(labels), std::move(legs)});
  }

  for (const auto& step : plan.steps) {
    Live a = std::move(*live[step.left]);
    Live b = std::move(*live[step.right]);
    live[step.left].reset();
    live[step.right].reset();

    std::map<Leg, std::size_t> b_pos;
    for (std::size_t q = 0; q < b.legs.size(); ++q) b_pos[b.legs[q]] = q;
    std::vector<IndexPair> pairs;
    std::vector<bool> a_used(a.legs.size(), false), b_used(b.legs.size(), false);
    for (std::size_t p = 0; p < a.legs.size(); ++p) {
      const Leg other = net.partner(a.legs[p]);
      if (other == a.legs[p]) continue;
      auto it = b_pos.find(other);
      if (it == b_pos.end()) continue;
      pairs.emplace_back(p, it->second);
      a_used[p] = b_used[it->second] = true;
    }
    Live merged{contract_pair(a.tensor, b.tensor, pairs), {}};
    for (std::size_t p = 0; p < a.legs.size(); ++p)
      if (!a_used[p]) merged.legs.push_back(a.legs[p]);
    for (std::size_t q = 0; q < b.legs.size(); ++q)
      if (!b_used[q]) merged.legs.push_back(b.legs[q]);
    live.push_back(std::move(merged));
  }

  Live result = std::move(*live.back());
  const auto& open = net.open_legs();
  std::vector<std::size_t> order;
  for (const auto& leg : open)
    order.push_back(static_cast<std::size_t>(
        std::find(result.legs.begin(), result.legs.end(), leg) - result.legs.begin()));
  DenseTensor out = permute(result.tensor, order);
  std::vector<Index> idx;
  for (const auto& leg : open) idx.push_back(net.nodes()[leg.node].tensor.index(leg.position));
  return out.reshaped(std::move(idx));
}

}  // namespace tnz
