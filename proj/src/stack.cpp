#include "tnz/stack.hpp"

#include <algorithm>
#include <array>

#include "eigen_bridge.hpp"

namespace tnz {

StackSchedule StackSchedule::sequential(std::size_t length) {
  StackSchedule s;
  for (std::size_t n = 0; n < length; ++n) s.stage_of_site.push_back(n);
  return s;
}

std::size_t StackLayer::in_size() const {
  return shape_product(left_identity_dims) * site_matrix.dim(0) *
         shape_product(right_identity_dims);
}

std::size_t StackLayer::out_size() const {
  return shape_product(left_identity_dims) * site_matrix.dim(1) *
         shape_product(right_identity_dims);
}

namespace {

const char* route_name(BondRoute r) { return r == BondRoute::produced ? "produced" : "consumed"; }

}  // namespace

Stack build_stack(const MPO& mpo, const StackSchedule& schedule) {
  mpo.validate();
  const std::size_t len = mpo.length();
  const auto& stage = schedule.stage_of_site;
  require(stage.size() == len, ErrorCode::invalid_argument,
          "build_stack: schedule must place every site");
  std::vector<std::size_t> site_at(len, len);
  for (std::size_t n = 0; n < len; ++n) {
    require(stage[n] < len, ErrorCode::invalid_argument,
            "build_stack: stage " + std::to_string(stage[n]) + " out of range");
    require(site_at[stage[n]] == len, ErrorCode::invalid_argument,
            "build_stack: sites " + std::to_string(site_at[stage[n]]) + " and " +
                std::to_string(n) + " collide at stage " + std::to_string(stage[n]));
    site_at[stage[n]] = n;
  }

  // Bond n joins sites n and n+1; the earlier stage produces it.
  std::vector<std::pair<BondRoute, BondRoute>> routes(len, {BondRoute::consumed, BondRoute::consumed});
  for (std::size_t n = 0; n + 1 < len; ++n) {
    const bool left_first = stage[n] < stage[n + 1];
    routes[n].second = left_first ? BondRoute::produced : BondRoute::consumed;
    routes[n + 1].first = left_first ? BondRoute::consumed : BondRoute::produced;
  }
  if (schedule.routing) {
    const auto& given = *schedule.routing;
    require(given.size() == len, ErrorCode::invalid_argument,
            "build_stack: routing must list every site");
    for (std::size_t n = 0; n + 1 < len; ++n) {
      const BondRoute a = given[n].second, b = given[n + 1].first;
      require(a != b, ErrorCode::invalid_argument,
              "build_stack: bond " + std::to_string(n) + " is routed " + route_name(a) +
                  " on both sides");
      require(a == routes[n].second, ErrorCode::invalid_argument,
              "build_stack: bond " + std::to_string(n) +
                  " must be produced by the site placed at the earlier stage");
    }
  }

  std::vector<bool> done(len, false);
  const Shape in_dims = mpo.in_dims(), out_dims = mpo.out_dims(), bonds = mpo.bond_dims();
  auto bond_live = [&](std::size_t b) { return done[b] != done[b + 1]; };
  auto wire_dim = [&](std::size_t n) { return done[n] ? out_dims[n] : in_dims[n]; };
  auto space = [&] {
    Shape s;
    for (std::size_t n = 0; n < len; ++n) {
      s.push_back(wire_dim(n));
      if (n + 1 < len && bond_live(n)) s.push_back(bonds[n]);
    }
    return s;
  };

  Stack out;
  out.stage_dims.push_back(space());
  for (std::size_t k = 0; k < len; ++k) {
    const std::size_t n = site_at[k];
    StackLayer layer;
    layer.site = n;
    layer.left_route = routes[n].first;
    layer.right_route = routes[n].second;
    for (std::size_t m = 0; m < n; ++m) {
      layer.left_identity_dims.push_back(wire_dim(m));
      if (m + 1 < n && bond_live(m)) layer.left_identity_dims.push_back(bonds[m]);
    }
    for (std::size_t m = n + 1; m < len; ++m) {
      layer.right_identity_dims.push_back(wire_dim(m));
      if (m + 1 < len && bond_live(m)) layer.right_identity_dims.push_back(bonds[m]);
    }

    // Padded site is (l, i, j, r); dimension-1 boundary bonds ride on the rows.
    const DenseTensor site = mpo.padded_site(n);
    std::vector<std::size_t> rows, cols;
    const bool left_in = n == 0 || routes[n].first == BondRoute::consumed;
    const bool right_in = n + 1 == len || routes[n].second == BondRoute::consumed;
    if (left_in) rows.push_back(0); else cols.push_back(0);
    rows.push_back(1);
    cols.push_back(2);
    if (right_in) rows.push_back(3); else cols.push_back(3);
    // Column order must follow wire order: produced left bond, j, produced right bond.
    std::sort(cols.begin(), cols.end());
    layer.site_matrix = matricize(site, rows, cols);

    done[n] = true;
    out.stage_dims.push_back(space());
    out.layers.push_back(std::move(layer));
  }
  return out;
}

std::vector<double> apply_stage(const StackLayer& layer, std::span<const double> x) {
  require(x.size() == layer.in_size(), ErrorCode::shape_mismatch,
          "apply_stage: input length " + std::to_string(x.size()) + " != stage input size " +
              std::to_string(layer.in_size()));
  const auto left = static_cast<Eigen::Index>(shape_product(layer.left_identity_dims));
  const auto right = static_cast<Eigen::Index>(shape_product(layer.right_identity_dims));
  const auto rows = static_cast<Eigen::Index>(layer.site_matrix.dim(0));
  const auto cols = static_cast<Eigen::Index>(layer.site_matrix.dim(1));
  const auto s = as_matrix(layer.site_matrix);
  std::vector<double> y(static_cast<std::size_t>(left * cols * right));
  for (Eigen::Index l = 0; l < left; ++l) {
    // Block (rows x right) of x times S^T gives (cols x right).
    ConstRowMatrixMap xb(x.data() + l * rows * right, rows, right);
    RowMatrixMap yb(y.data() + l * cols * right, cols, right);
    yb.noalias() = s.transpose() * xb;
  }
  return y;
}

std::vector<std::vector<double>> intermediate_features(const Stack& stack,
                                                       std::span<const double> x) {
  require(!stack.layers.empty(), ErrorCode::invalid_argument, "stack has no layers");
  require(x.size() == stack.layers.front().in_size(), ErrorCode::shape_mismatch,
          "intermediate_features: input length does not match the stack input size");
  std::vector<std::vector<double>> out;
  std::vector<double> cur(x.begin(), x.end());
  for (const auto& layer : stack.layers) {
    cur = apply_stage(layer, cur);
    out.push_back(cur);
  }
  return out;
}

GaugeTransform GaugeTransform::from_matrix(std::size_t cut, const DenseTensor& x) {
  require(x.rank() == 2 && x.dim(0) == x.dim(1), ErrorCode::invalid_argument,
          "gauge matrix must be square");
  const RowMatrix m = as_matrix(x);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  const auto& s = svd.singularValues();
  const double smax = s[0], smin = s[s.size() - 1];
  require(smin > 0.0, ErrorCode::singular, "gauge matrix is singular");
  require(smax / smin <= max_gauge_condition, ErrorCode::singular,
          "gauge matrix condition number " + std::to_string(smax / smin) + " exceeds 1e6");
  const RowMatrix inv = m.fullPivLu().inverse();
  const double residual =
      (m * inv - RowMatrix::Identity(m.rows(), m.cols())).norm();
  require(residual <= 1e-10, ErrorCode::singular,
          "gauge inverse check failed (residual " + std::to_string(residual) + ")");
  const Index a{"g0", x.dim(0), IndexRole::bond}, b{"g1", x.dim(1), IndexRole::bond};
  return {cut, tnz::from_matrix(m, a, b), tnz::from_matrix(inv, a, b)};
}

MPO apply_gauge(const MPO& mpo, const GaugeTransform& g) {
  mpo.validate();
  require(g.cut + 1 < mpo.length(), ErrorCode::invalid_argument,
          "apply_gauge: cut " + std::to_string(g.cut) + " out of range");
  const std::size_t chi = mpo.bond_dims()[g.cut];
  require(g.x.rank() == 2 && g.x.dim(0) == chi && g.x.dim(1) == chi && g.x_inv.shape() == g.x.shape(),
          ErrorCode::shape_mismatch, "apply_gauge: gauge dims do not match the bond");

  std::vector<DenseTensor> padded;
  for (std::size_t n = 0; n < mpo.length(); ++n) padded.push_back(mpo.padded_site(n));
  const std::array<IndexPair, 1> right_bond{IndexPair{3, 0}};
  const std::array<IndexPair, 1> left_bond{IndexPair{1, 0}};
  padded[g.cut] = contract_pair(padded[g.cut], g.x_inv, right_bond);
  padded[g.cut + 1] = contract_pair(g.x, padded[g.cut + 1], left_bond);
  MPO out = MPO::from_padded(padded);
  out.cut_spectra = mpo.cut_spectra;
  out.cut_discarded = mpo.cut_discarded;
  return out;
}

}  // namespace tnz
