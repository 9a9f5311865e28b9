#pragma once

// Independent oracles for the test suites: explicit loops, Kronecker
// products and exhaustive enumeration. Nothing here routes through the
// library's contraction or factorization code.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "tnz/decompose.hpp"
#include "tnz/network.hpp"
#include "tnz/tensor.hpp"

namespace oracle {

using Vec = std::vector<double>;
using Rng = std::mt19937_64;
using tnz::Shape;

inline Vec randn(Rng& rng, std::size_t n, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  Vec v(n);
  for (double& x : v) x = d(rng);
  return v;
}

inline std::size_t product(const Shape& s) {
  std::size_t p = 1;
  for (auto d : s) p *= d;
  return p;
}

inline std::vector<std::string> labels(const std::string& prefix, std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t k = 0; k < n; ++k) out.push_back(prefix + std::to_string(k));
  return out;
}

inline tnz::DenseTensor random_dense(Rng& rng, const Shape& dims, const std::string& prefix = "a",
                                     double scale = 1.0) {
  return tnz::DenseTensor::from_shape(dims, labels(prefix, dims.size()), randn(rng, product(dims), scale));
}

inline tnz::DenseTensor matrix(std::size_t rows, std::size_t cols, Vec data,
                               const std::string& r = "i", const std::string& c = "j") {
  return tnz::DenseTensor::from_shape({rows, cols}, {r, c}, std::move(data));
}

/// Multi-index of `flat` in a row-major layout of `dims`.
inline std::vector<std::size_t> unravel(std::size_t flat, const Shape& dims) {
  std::vector<std::size_t> idx(dims.size());
  for (std::size_t k = dims.size(); k-- > 0;) {
    idx[k] = flat % dims[k];
    flat /= dims[k];
  }
  return idx;
}

inline std::size_t ravel(const std::vector<std::size_t>& idx, const Shape& dims) {
  std::size_t flat = 0;
  for (std::size_t k = 0; k < dims.size(); ++k) flat = flat * dims[k] + idx[k];
  return flat;
}

inline double norm(const Vec& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

inline double diff_norm(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return std::sqrt(s);
}

inline double rel_diff(const Vec& actual, const Vec& expected) {
  const double n = norm(expected);
  return n == 0.0 ? diff_norm(actual, expected) : diff_norm(actual, expected) / n;
}

inline double max_abs(const Vec& a, const Vec& b) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a[k] - b[k]));
  return m;
}

// Row-major matrices ---------------------------------------------------------

struct Mat {
  std::size_t rows = 0, cols = 0;
  Vec v;

  Mat() = default;
  Mat(std::size_t r, std::size_t c) : rows(r), cols(c), v(r * c, 0.0) {}
  Mat(std::size_t r, std::size_t c, Vec data) : rows(r), cols(c), v(std::move(data)) {}
  double& operator()(std::size_t r, std::size_t c) { return v[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return v[r * cols + c]; }
};

inline Mat identity(std::size_t n) {
  Mat m(n, n);
  for (std::size_t k = 0; k < n; ++k) m(k, k) = 1.0;
  return m;
}

inline Mat matmul(const Mat& a, const Mat& b) {
  Mat c(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t k = 0; k < a.cols; ++k)
      for (std::size_t j = 0; j < b.cols; ++j) c(i, j) += a(i, k) * b(k, j);
  return c;
}

inline Mat transpose(const Mat& a) {
  Mat t(a.cols, a.rows);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.cols; ++j) t(j, i) = a(i, j);
  return t;
}

inline Mat kron(const Mat& a, const Mat& b) {
  Mat c(a.rows * b.rows, a.cols * b.cols);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.cols; ++j)
      for (std::size_t k = 0; k < b.rows; ++k)
        for (std::size_t l = 0; l < b.cols; ++l) c(i * b.rows + k, j * b.cols + l) = a(i, j) * b(k, l);
  return c;
}

inline Mat as_mat(const tnz::DenseTensor& t) { return Mat(t.dim(0), t.dim(1), t.data()); }

/// Gauss-Jordan inverse with partial pivoting.
inline Mat inverse(Mat a) {
  const std::size_t n = a.rows;
  Mat inv = identity(n);
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t p = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(a(r, c)) > std::abs(a(p, c))) p = r;
    for (std::size_t k = 0; k < n; ++k) {
      std::swap(a(c, k), a(p, k));
      std::swap(inv(c, k), inv(p, k));
    }
    const double d = a(c, c);
    for (std::size_t k = 0; k < n; ++k) {
      a(c, k) /= d;
      inv(c, k) /= d;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == c) continue;
      const double f = a(r, c);
      for (std::size_t k = 0; k < n; ++k) {
        a(r, k) -= f * a(c, k);
        inv(r, k) -= f * inv(c, k);
      }
    }
  }
  return inv;
}

// Chains ---------------------------------------------------------------------

/// Random MPO with the given per-cut bond dims (size N-1).
inline tnz::MPO random_mpo(Rng& rng, const Shape& in, const Shape& out, const Shape& bonds,
                           double scale = 1.0) {
  std::vector<tnz::DenseTensor> padded;
  for (std::size_t n = 0; n < in.size(); ++n) {
    const std::size_t l = n == 0 ? 1 : bonds[n - 1];
    const std::size_t r = n + 1 == in.size() ? 1 : bonds[n];
    padded.push_back(tnz::DenseTensor::from_shape({l, in[n], out[n], r}, {"l", "i", "j", "r"},
                                                  randn(rng, l * in[n] * out[n] * r, scale)));
  }
  return tnz::MPO::from_padded(padded);
}

inline tnz::MPS random_mps(Rng& rng, const Shape& dims, const Shape& bonds, double scale = 1.0) {
  std::vector<tnz::DenseTensor> padded;
  for (std::size_t n = 0; n < dims.size(); ++n) {
    const std::size_t l = n == 0 ? 1 : bonds[n - 1];
    const std::size_t r = n + 1 == dims.size() ? 1 : bonds[n];
    padded.push_back(tnz::DenseTensor::from_shape({l, dims[n], r}, {"l", "p", "r"},
                                                  randn(rng, l * dims[n] * r, scale)));
  }
  return tnz::MPS::from_padded(padded);
}

/// Reads site n as (l, i, j, r) directly from its stored data, inserting the
/// dimension-1 boundary bonds by position.
inline double site_entry(const tnz::MPO& m, std::size_t n, std::size_t l, std::size_t i,
                         std::size_t j, std::size_t r) {
  const auto& s = m.sites[n];
  const bool has_l = n > 0, has_r = n + 1 < m.length();
  std::vector<std::size_t> idx;
  if (has_l) idx.push_back(l);
  idx.push_back(i);
  idx.push_back(j);
  if (has_r) idx.push_back(r);
  return s.data()[ravel(idx, s.shape())];
}

/// Dense matrix of an MPO: for every (i..., j...) the product of per-site
/// bond matrices, evaluated with explicit loops.
inline Mat mpo_dense(const tnz::MPO& m) {
  const std::size_t len = m.length();
  const Shape in = m.in_dims(), out = m.out_dims();
  Shape bonds{1};
  for (auto b : m.bond_dims()) bonds.push_back(b);
  bonds.push_back(1);
  Mat w(product(in), product(out));
  for (std::size_t row = 0; row < w.rows; ++row) {
    const auto ii = unravel(row, in);
    for (std::size_t col = 0; col < w.cols; ++col) {
      const auto jj = unravel(col, out);
      Vec acc{1.0};
      for (std::size_t n = 0; n < len; ++n) {
        Vec next(bonds[n + 1], 0.0);
        for (std::size_t l = 0; l < bonds[n]; ++l)
          for (std::size_t r = 0; r < bonds[n + 1]; ++r)
            next[r] += acc[l] * site_entry(m, n, l, ii[n], jj[n], r);
        acc = std::move(next);
      }
      w(row, col) = acc[0];
    }
  }
  return w;
}

inline Vec mps_dense(const tnz::MPS& m) {
  const std::size_t len = m.length();
  const Shape dims = m.site_dims();
  Shape bonds{1};
  for (auto b : m.bond_dims()) bonds.push_back(b);
  bonds.push_back(1);
  Vec out(product(dims));
  for (std::size_t flat = 0; flat < out.size(); ++flat) {
    const auto ss = unravel(flat, dims);
    Vec acc{1.0};
    for (std::size_t n = 0; n < len; ++n) {
      const auto& s = m.sites[n];
      Vec next(bonds[n + 1], 0.0);
      for (std::size_t l = 0; l < bonds[n]; ++l)
        for (std::size_t r = 0; r < bonds[n + 1]; ++r) {
          std::vector<std::size_t> idx;
          if (n > 0) idx.push_back(l);
          idx.push_back(ss[n]);
          if (n + 1 < len) idx.push_back(r);
          next[r] += acc[l] * s.data()[ravel(idx, s.shape())];
        }
      acc = std::move(next);
    }
    out[flat] = acc[0];
  }
  return out;
}

/// Row vector times matrix.
inline Vec vecmat(const Vec& x, const Mat& w) {
  Vec y(w.cols, 0.0);
  for (std::size_t r = 0; r < w.rows; ++r)
    for (std::size_t c = 0; c < w.cols; ++c) y[c] += x[r] * w(r, c);
  return y;
}

/// Singular values by one-sided Jacobi on the columns (small matrices only).
inline Vec singular_values(const Mat& m) {
  Mat a = m.rows >= m.cols ? m : transpose(m);
  const std::size_t rows = a.rows, n = a.cols;
  for (int sweep = 0; sweep < 100; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        double alpha = 0.0, beta = 0.0, gamma = 0.0;
        for (std::size_t k = 0; k < rows; ++k) {
          alpha += a(k, p) * a(k, p);
          beta += a(k, q) * a(k, q);
          gamma += a(k, p) * a(k, q);
        }
        if (std::abs(gamma) <= 1e-15 * std::sqrt(alpha * beta) || gamma == 0.0) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = (zeta >= 0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(zeta * zeta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (std::size_t k = 0; k < rows; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
      }
    if (!rotated) break;
  }
  Vec s;
  for (std::size_t c = 0; c < n; ++c) {
    double sq = 0.0;
    for (std::size_t k = 0; k < rows; ++k) sq += a(k, c) * a(k, c);
    s.push_back(std::sqrt(sq));
  }
  std::sort(s.rbegin(), s.rend());
  return s;
}

// Kernels --------------------------------------------------------------------

/// sum over core multi-index of G * prod_m F_m[x_m, r_m].
inline Vec tucker_dense(const tnz::DenseTensor& core, const std::vector<tnz::DenseTensor>& factors) {
  Shape dims, ranks = core.shape();
  for (const auto& f : factors) dims.push_back(f.dim(0));
  Vec out(product(dims), 0.0);
  for (std::size_t flat = 0; flat < out.size(); ++flat) {
    const auto x = unravel(flat, dims);
    double s = 0.0;
    for (std::size_t c = 0; c < core.size(); ++c) {
      const auto r = unravel(c, ranks);
      double term = core.data()[c];
      for (std::size_t m = 0; m < dims.size(); ++m) term *= factors[m].data()[x[m] * ranks[m] + r[m]];
      s += term;
    }
    out[flat] = s;
  }
  return out;
}

inline Vec cp_dense(const Vec& weights, const std::vector<tnz::DenseTensor>& factors) {
  Shape dims;
  for (const auto& f : factors) dims.push_back(f.dim(0));
  const std::size_t R = weights.size();
  Vec out(product(dims), 0.0);
  for (std::size_t flat = 0; flat < out.size(); ++flat) {
    const auto x = unravel(flat, dims);
    for (std::size_t r = 0; r < R; ++r) {
      double term = weights[r];
      for (std::size_t m = 0; m < dims.size(); ++m) term *= factors[m].data()[x[m] * R + r];
      out[flat] += term;
    }
  }
  return out;
}

// Planning -------------------------------------------------------------------

/// Leg-id view of a network: each node is a set of leg ids; bonded legs share
/// an id. Costs are the product of every distinct leg dim touched by a step.
struct LegGraph {
  std::vector<std::set<int>> nodes;
  std::map<int, std::uint64_t> dim;

  explicit LegGraph(const tnz::TensorNetwork& net) {
    int next = 0;
    std::map<std::pair<std::size_t, std::size_t>, int> id;
    for (std::size_t u = 0; u < net.node_count(); ++u) {
      std::set<int> legs;
      const auto& t = net.nodes()[u].tensor;
      for (std::size_t p = 0; p < t.rank(); ++p) {
        const auto other = net.partner({u, p});
        int leg;
        if (auto it = id.find({other.node, other.position}); it != id.end() && !(other.node == u && other.position == p)) {
          leg = it->second;
        } else {
          leg = next++;
          id[{u, p}] = leg;
        }
        legs.insert(leg);
        dim[leg] = t.dim(p);
      }
      nodes.push_back(legs);
    }
  }

  std::uint64_t step_cost(const std::set<int>& a, const std::set<int>& b) const {
    std::set<int> all = a;
    all.insert(b.begin(), b.end());
    std::uint64_t c = 1;
    for (int leg : all) c *= dim.at(leg);
    return c;
  }

  static std::set<int> merge(const std::set<int>& a, const std::set<int>& b) {
    std::set<int> out;
    for (int l : a)
      if (!b.count(l)) out.insert(l);
    for (int l : b)
      if (!a.count(l)) out.insert(l);
    return out;
  }
};

struct Order {
  std::vector<std::pair<tnz::NodeId, tnz::NodeId>> steps;
  std::uint64_t cost = 0;
};

/// Every sequence of pairwise steps reducing the network to one node.
inline void enumerate_orders(const LegGraph& g, std::vector<Order>& out) {
  struct Live {
    tnz::NodeId id;
    std::set<int> legs;
  };
  std::vector<Live> live;
  for (std::size_t u = 0; u < g.nodes.size(); ++u) live.push_back({u, g.nodes[u]});
  Order cur;
  tnz::NodeId next = g.nodes.size();
  std::function<void()> rec = [&] {
    if (live.size() == 1) {
      out.push_back(cur);
      return;
    }
    for (std::size_t x = 0; x < live.size(); ++x)
      for (std::size_t y = x + 1; y < live.size(); ++y) {
        const auto saved = live;
        const auto c = g.step_cost(live[x].legs, live[y].legs);
        cur.steps.emplace_back(live[x].id, live[y].id);
        cur.cost += c;
        Live merged{next++, LegGraph::merge(live[x].legs, live[y].legs)};
        live.erase(live.begin() + static_cast<std::ptrdiff_t>(y));
        live.erase(live.begin() + static_cast<std::ptrdiff_t>(x));
        live.push_back(merged);
        rec();
        live = saved;
        --next;
        cur.cost -= c;
        cur.steps.pop_back();
      }
  };
  rec();
}

/// Random connected network on `n` nodes: a random spanning tree plus extra
/// edges, every leg dim in [1, max_dim], plus open legs.
inline tnz::TensorNetwork random_network(Rng& rng, std::size_t n, std::size_t max_dim,
                                         double extra_edge_p = 0.3) {
  std::uniform_int_distribution<std::size_t> dimd(1, max_dim);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::vector<std::vector<std::pair<std::string, std::size_t>>> legs(n);
  std::vector<tnz::Bond> bonds;
  int edge = 0;
  auto connect = [&](std::size_t a, std::size_t b) {
    const std::size_t d = dimd(rng);
    const std::string la = "e" + std::to_string(edge) + "a", lb = "e" + std::to_string(edge) + "b";
    ++edge;
    legs[a].push_back({la, d});
    legs[b].push_back({lb, d});
    bonds.push_back({"n" + std::to_string(a), la, "n" + std::to_string(b), lb});
  };
  for (std::size_t v = 1; v < n; ++v) connect(std::uniform_int_distribution<std::size_t>(0, v - 1)(rng), v);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b)
      if (u01(rng) < extra_edge_p) connect(a, b);
  for (std::size_t v = 0; v < n; ++v)
    if (u01(rng) < 0.6) legs[v].push_back({"o" + std::to_string(v), dimd(rng)});
  std::vector<tnz::NamedTensor> nodes;
  for (std::size_t v = 0; v < n; ++v) {
    Shape dims;
    std::vector<std::string> labs;
    for (const auto& [l, d] : legs[v]) {
      labs.push_back(l);
      dims.push_back(d);
    }
    nodes.push_back({"n" + std::to_string(v),
                     tnz::DenseTensor::from_shape(dims, labs, randn(rng, product(dims)))});
  }
  return tnz::TensorNetwork(std::move(nodes), std::move(bonds));
}

}  // namespace oracle
