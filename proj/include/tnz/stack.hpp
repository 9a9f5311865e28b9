#pragma once

#include <optional>
#include <vector>

#include "tnz/decompose.hpp"

namespace tnz {

/// Which side of a stage a bond wire sits on.
enum class BondRoute { consumed, produced };

/// Stage placement of each site plus optional explicit routing of its left
/// and right bonds. A bond is produced by the earlier of its two sites and
/// consumed by the later one; explicit routing must agree with that.
struct StackSchedule {
  /// stage_of_site[n] = stage at which site n is applied.
  std::vector<std::size_t> stage_of_site;
  /// Per site: routing of (left bond, right bond). Boundary entries ignored.
  std::optional<std::vector<std::pair<BondRoute, BondRoute>>> routing;

  /// Sites applied left to right (stage n for site n).
  static StackSchedule sequential(std::size_t length);
};

/// One sparse fully-connected stage: I(left) kron site_matrix kron I(right),
/// acting on row vectors. Rows of site_matrix are the consumed bond wires and
/// the input wire; columns are the produced bond wires and the output wire.
struct StackLayer {
  std::size_t site = 0;
  DenseTensor site_matrix;
  Shape left_identity_dims;
  Shape right_identity_dims;
  BondRoute left_route = BondRoute::consumed;
  BondRoute right_route = BondRoute::consumed;

  std::size_t in_size() const;
  std::size_t out_size() const;
};

/// The stage space is the position-ordered wire list
/// (w_1, [b_1], w_2, [b_2], ..., w_N) where w_n is i_n before site n's stage
/// and j_n after it, and b_n is present only between its producer and
/// consumer stages.
struct Stack {
  std::vector<StackLayer> layers;
  /// stage_dims[0] is the input space, stage_dims[k+1] the space after layer k.
  std::vector<Shape> stage_dims;
};

Stack build_stack(const MPO& mpo, const StackSchedule& schedule);

/// Applies one stage to a row vector of the stage's input space.
std::vector<double> apply_stage(const StackLayer& layer, std::span<const double> x);

/// Activation after each stage; the last entry equals x * W.
std::vector<std::vector<double>> intermediate_features(const Stack& stack,
                                                       std::span<const double> x);

struct GaugeTransform {
  std::size_t cut = 0;
  DenseTensor x;
  DenseTensor x_inv;

  /// Inverts `x`; rejects singular or badly conditioned (cond > 1e6) input.
  static GaugeTransform from_matrix(std::size_t cut, const DenseTensor& x);
};

inline constexpr double max_gauge_condition = 1e6;

/// a -> a X^-1 on the left neighbour, b -> X b on the right neighbour.
MPO apply_gauge(const MPO& mpo, const GaugeTransform& g);

}  // namespace tnz
