#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tnz/tensor.hpp"

namespace tnz {

struct Bond {
  std::string node_a;
  std::string label_a;
  std::string node_b;
  std::string label_b;

  friend bool operator==(const Bond&, const Bond&) = default;
};

struct NamedTensor {
  std::string name;
  DenseTensor tensor;
};

/// A leg is one index of one node, addressed by (node position, index position).
struct Leg {
  std::size_t node = 0;
  std::size_t position = 0;

  friend auto operator<=>(const Leg&, const Leg&) = default;
};

/// Tensors joined by simple bonds. Each index takes part in at most one bond;
/// the unbonded (open) labels must be unique across the network so the
/// contracted result is a well-formed tensor.
class TensorNetwork {
 public:
  TensorNetwork(std::vector<NamedTensor> nodes, std::vector<Bond> bonds);

  const std::vector<NamedTensor>& nodes() const noexcept { return nodes_; }
  const std::vector<Bond>& bonds() const noexcept { return bonds_; }
  std::size_t node_count() const noexcept { return nodes_.size(); }
  std::size_t node_index(const std::string& name) const;

  /// Partner of `leg`, or `leg` itself when it is open.
  Leg partner(Leg leg) const;
  bool is_open(Leg leg) const { return partner(leg) == leg; }

  /// Open legs in node order, then index order within a node.
  const std::vector<Leg>& open_legs() const noexcept { return open_; }
  std::vector<std::string> open_labels() const;

 private:
  std::vector<NamedTensor> nodes_;
  std::vector<Bond> bonds_;
  // partner_[node][position]
  std::vector<std::vector<Leg>> partner_;
  std::vector<Leg> open_;
};

using NodeId = std::size_t;

/// Nodes are numbered 0..n-1 in network order; step k creates node n+k.
struct PlanStep {
  NodeId left = 0;
  NodeId right = 0;
  NodeId result = 0;

  friend bool operator==(const PlanStep&, const PlanStep&) = default;
};

struct ContractionPlan {
  std::vector<PlanStep> steps;
  std::uint64_t est_flops = 0;

  friend bool operator==(const ContractionPlan&, const ContractionPlan&) = default;
};

enum class PlanStrategy { exhaustive, greedy };

inline constexpr std::size_t max_exhaustive_nodes = 10;

/// Product of every distinct index dimension touched by one pairwise step:
/// (a-only) x (shared) x (b-only). `a_dims` and `b_dims` are the full index
/// dimension multisets of each operand; `shared` must be contained in both.
/// Saturates at UINT64_MAX.
std::uint64_t pairwise_cost(std::span<const std::size_t> a_dims,
                            std::span<const std::size_t> b_dims,
                            std::span<const std::size_t> shared);

ContractionPlan plan_contraction(const TensorNetwork& net, PlanStrategy strategy);

/// Validates and costs a caller-supplied order of (left, right) pairs.
ContractionPlan plan_fixed(const TensorNetwork& net,
                           std::span<const std::pair<NodeId, NodeId>> order);

/// Throws unless `plan` is a full binary reduction of `net` whose est_flops
/// equals the recomputed step costs.
void validate_plan(const TensorNetwork& net, const ContractionPlan& plan);

/// Dense tensor over net.open_labels(), in that order.
DenseTensor execute_plan(const TensorNetwork& net, const ContractionPlan& plan);

}  // namespace tnz
