#include "tnz/decompose.hpp"

#include <algorithm>
#include <cmath>

#include "tnz/network.hpp"

namespace tnz {

std::string bond_label(std::size_t cut) { return "b" + std::to_string(cut); }
std::string in_label(std::size_t site) { return "i" + std::to_string(site); }
std::string out_label(std::size_t site) { return "j" + std::to_string(site); }
std::string phys_label(std::size_t site) { return "s" + std::to_string(site); }

namespace {

/// Dimension-1 boundary bonds are added or removed without touching data.
DenseTensor pad_site(const DenseTensor& site, std::size_t n, std::size_t length,
                     std::size_t physical_count) {
  std::vector<Index> idx;
  std::size_t p = 0;
  if (n == 0) {
    idx.push_back({"l", 1, IndexRole::bond});
  } else {
    idx.push_back(site.index(p++));
  }
  for (std::size_t k = 0; k < physical_count; ++k) idx.push_back(site.index(p++));
  if (n + 1 == length) {
    idx.push_back({"r", 1, IndexRole::bond});
  } else {
    idx.push_back(site.index(p++));
  }
  return site.reshaped(std::move(idx));
}

/// Canonical indices for site n from a padded tensor (l, phys..., r).
std::vector<Index> canonical_indices(const DenseTensor& padded, std::size_t n,
                                     std::size_t length, const std::vector<Index>& physical) {
  std::vector<Index> idx;
  if (n > 0) idx.push_back({bond_label(n - 1), padded.dim(0), IndexRole::bond});
  for (std::size_t k = 0; k < physical.size(); ++k) {
    Index ph = physical[k];
    ph.dim = padded.dim(1 + k);
    idx.push_back(ph);
  }
  if (n + 1 < length) idx.push_back({bond_label(n), padded.dim(padded.rank() - 1), IndexRole::bond});
  return idx;
}

void check_boundaries(const std::vector<DenseTensor>& padded) {
  require(!padded.empty(), ErrorCode::invalid_argument, "chain must have at least one site");
  require(padded.front().dim(0) == 1 && padded.back().dim(padded.back().rank() - 1) == 1,
          ErrorCode::shape_mismatch, "boundary bonds of a chain must have dimension 1");
  for (std::size_t n = 0; n + 1 < padded.size(); ++n)
    require(padded[n].dim(padded[n].rank() - 1) == padded[n + 1].dim(0),
            ErrorCode::shape_mismatch,
            "bond dims do not chain at cut " + std::to_string(n));
}

struct SweepResult {
  std::vector<DenseTensor> padded;  // (l, p, r)
  std::vector<std::vector<double>> spectra;
  std::vector<double> discarded;
};

/// Left-to-right factorization of a row-major array over `phys` dims.
SweepResult chain_sweep(std::vector<double> data, const Shape& phys, std::size_t chi_max,
                        double tol) {
  SweepResult out;
  std::size_t chi = 1;
  std::size_t rest = shape_product(phys);
  for (std::size_t n = 0; n + 1 < phys.size(); ++n) {
    const std::size_t rows = chi * phys[n];
    rest /= phys[n];
    const auto m = DenseTensor::from_shape({rows, rest}, {"row", "col"}, std::move(data));
    const auto f = truncated_factorize(m, chi_max, tol);
    const std::size_t k = f.rank();
    out.padded.push_back(DenseTensor::from_shape({chi, phys[n], k}, {"l", "p", "r"},
                                                 f.left.data()));
    out.spectra.push_back(f.singular_values);
    out.discarded.push_back(f.discarded_weight);
    // Remainder = diag(s) * right.
    data = f.right.data();
    for (std::size_t q = 0; q < k; ++q)
      for (std::size_t c = 0; c < rest; ++c) data[q * rest + c] *= f.singular_values[q];
    chi = k;
  }
  out.padded.push_back(DenseTensor::from_shape({chi, phys.back(), 1}, {"l", "p", "r"},
                                               std::move(data)));
  return out;
}

/// Contracts a chain of padded (l, ..., r) tensors left to right through the
/// planner with a fixed order, returning the dense tensor over the open
/// physical labels in site order.
DenseTensor contract_chain(const std::vector<DenseTensor>& sites) {
  std::vector<NamedTensor> nodes;
  std::vector<Bond> bonds;
  for (std::size_t n = 0; n < sites.size(); ++n) {
    nodes.push_back({"site" + std::to_string(n), sites[n]});
    if (n + 1 < sites.size())
      bonds.push_back({"site" + std::to_string(n), bond_label(n),
                       "site" + std::to_string(n + 1), bond_label(n)});
  }
  const TensorNetwork net(std::move(nodes), std::move(bonds));
  std::vector<std::pair<NodeId, NodeId>> order;
  for (std::size_t n = 1; n < sites.size(); ++n)
    order.emplace_back(n == 1 ? 0 : sites.size() + n - 2, n);
  return execute_plan(net, plan_fixed(net, order));
}

}  // namespace

// MPO --------------------------------------------------------------------

Shape MPO::in_dims() const {
  Shape d;
  for (std::size_t n = 0; n < sites.size(); ++n) d.push_back(padded_site(n).dim(1));
  return d;
}

Shape MPO::out_dims() const {
  Shape d;
  for (std::size_t n = 0; n < sites.size(); ++n) d.push_back(padded_site(n).dim(2));
  return d;
}

Shape MPO::bond_dims() const {
  Shape d;
  for (std::size_t n = 0; n + 1 < sites.size(); ++n) d.push_back(padded_site(n).dim(3));
  return d;
}

std::size_t MPO::in_size() const { return shape_product(in_dims()); }
std::size_t MPO::out_size() const { return shape_product(out_dims()); }

DenseTensor MPO::padded_site(std::size_t n) const {
  require(n < sites.size(), ErrorCode::invalid_argument, "site index out of range");
  const std::size_t expected = 2 + (n > 0) + (n + 1 < sites.size());
  require(sites[n].rank() == expected, ErrorCode::shape_mismatch,
          "MPO site " + std::to_string(n) + " has rank " + std::to_string(sites[n].rank()) +
              ", expected " + std::to_string(expected));
  return pad_site(sites[n], n, sites.size(), 2);
}

MPO MPO::from_padded(const std::vector<DenseTensor>& padded) {
  for (const auto& s : padded)
    require(s.rank() == 4, ErrorCode::shape_mismatch, "padded MPO site must have 4 indices");
  check_boundaries(padded);
  MPO out;
  const std::size_t len = padded.size();
  for (std::size_t n = 0; n < len; ++n) {
    const std::vector<Index> phys = {{in_label(n), 0, IndexRole::input},
                                     {out_label(n), 0, IndexRole::output}};
    out.sites.push_back(padded[n].reshaped(canonical_indices(padded[n], n, len, phys)));
  }
  return out;
}

void MPO::validate() const {
  require(!sites.empty(), ErrorCode::invalid_argument, "MPO has no sites");
  std::vector<DenseTensor> padded;
  for (std::size_t n = 0; n < sites.size(); ++n) padded.push_back(padded_site(n));
  check_boundaries(padded);
  const MPO canon = from_padded(padded);
  for (std::size_t n = 0; n < sites.size(); ++n)
    require(canon.sites[n].indices() == sites[n].indices(), ErrorCode::invalid_argument,
            "MPO site " + std::to_string(n) + " does not carry canonical labels/roles");
  require(cut_spectra.empty() || cut_spectra.size() + 1 == sites.size(),
          ErrorCode::invalid_argument, "cut_spectra length must be N-1");
  require(cut_discarded.size() == cut_spectra.size(), ErrorCode::invalid_argument,
          "cut_discarded length must match cut_spectra");
}

MPO matrix_to_mpo(const DenseTensor& w, const Shape& in_dims, const Shape& out_dims,
                  std::size_t chi_max, double tol) {
  require(w.rank() == 2, ErrorCode::invalid_argument, "matrix_to_mpo: input must be 2-index");
  require(!in_dims.empty() && in_dims.size() == out_dims.size(), ErrorCode::invalid_argument,
          "matrix_to_mpo: in_dims and out_dims must be non-empty and of equal length");
  require(shape_product(in_dims) == w.dim(0) && shape_product(out_dims) == w.dim(1),
          ErrorCode::shape_mismatch,
          "matrix_to_mpo: dimension products do not match the matrix shape");
  const std::size_t len = in_dims.size();

  Shape dims = in_dims;
  dims.insert(dims.end(), out_dims.begin(), out_dims.end());
  std::vector<std::string> labels;
  for (std::size_t n = 0; n < len; ++n) labels.push_back(in_label(n));
  for (std::size_t n = 0; n < len; ++n) labels.push_back(out_label(n));
  const auto full = DenseTensor::from_shape(dims, labels, w.data());
  std::vector<std::size_t> interleave;
  Shape phys;
  for (std::size_t n = 0; n < len; ++n) {
    interleave.push_back(n);
    interleave.push_back(len + n);
    phys.push_back(in_dims[n] * out_dims[n]);
  }
  const DenseTensor paired = permute(full, interleave);

  auto sweep = chain_sweep(paired.data(), phys, chi_max, tol);
  std::vector<DenseTensor> padded;
  for (std::size_t n = 0; n < len; ++n) {
    const auto& s = sweep.padded[n];
    padded.push_back(DenseTensor::from_shape({s.dim(0), in_dims[n], out_dims[n], s.dim(2)},
                                             {"l", "i", "j", "r"}, s.data()));
  }
  MPO out = MPO::from_padded(padded);
  out.cut_spectra = std::move(sweep.spectra);
  out.cut_discarded = std::move(sweep.discarded);
  return out;
}

DenseTensor mpo_to_matrix(const MPO& mpo) {
  mpo.validate();
  const std::size_t len = mpo.length();
  const DenseTensor open = contract_chain(mpo.sites);  // (i0 j0 i1 j1 ...)
  std::vector<std::size_t> rows, cols;
  for (std::size_t n = 0; n < len; ++n) {
    rows.push_back(2 * n);
    cols.push_back(2 * n + 1);
  }
  const DenseTensor m = matricize(open, rows, cols);
  return m.reshaped({{"i", m.dim(0), IndexRole::input}, {"j", m.dim(1), IndexRole::output}});
}

// MPS --------------------------------------------------------------------

Shape MPS::site_dims() const {
  Shape d;
  for (std::size_t n = 0; n < sites.size(); ++n) d.push_back(padded_site(n).dim(1));
  return d;
}

Shape MPS::bond_dims() const {
  Shape d;
  for (std::size_t n = 0; n + 1 < sites.size(); ++n) d.push_back(padded_site(n).dim(2));
  return d;
}

std::size_t MPS::size() const { return shape_product(site_dims()); }

DenseTensor MPS::padded_site(std::size_t n) const {
  require(n < sites.size(), ErrorCode::invalid_argument, "site index out of range");
  const std::size_t expected = 1 + (n > 0) + (n + 1 < sites.size());
  require(sites[n].rank() == expected, ErrorCode::shape_mismatch,
          "MPS site " + std::to_string(n) + " has rank " + std::to_string(sites[n].rank()) +
              ", expected " + std::to_string(expected));
  return pad_site(sites[n], n, sites.size(), 1);
}

MPS MPS::from_padded(const std::vector<DenseTensor>& padded) {
  for (const auto& s : padded)
    require(s.rank() == 3, ErrorCode::shape_mismatch, "padded MPS site must have 3 indices");
  check_boundaries(padded);
  MPS out;
  const std::size_t len = padded.size();
  for (std::size_t n = 0; n < len; ++n) {
    const std::vector<Index> phys = {{phys_label(n), 0, IndexRole::input}};
    out.sites.push_back(padded[n].reshaped(canonical_indices(padded[n], n, len, phys)));
  }
  return out;
}

void MPS::validate() const {
  require(!sites.empty(), ErrorCode::invalid_argument, "MPS has no sites");
  std::vector<DenseTensor> padded;
  for (std::size_t n = 0; n < sites.size(); ++n) padded.push_back(padded_site(n));
  check_boundaries(padded);
  const MPS canon = from_padded(padded);
  for (std::size_t n = 0; n < sites.size(); ++n)
    require(canon.sites[n].indices() == sites[n].indices(), ErrorCode::invalid_argument,
            "MPS site " + std::to_string(n) + " does not carry canonical labels/roles");
  require(cut_spectra.empty() || cut_spectra.size() + 1 == sites.size(),
          ErrorCode::invalid_argument, "cut_spectra length must be N-1");
  require(cut_discarded.size() == cut_spectra.size(), ErrorCode::invalid_argument,
          "cut_discarded length must match cut_spectra");
}

MPS vector_to_mps(const DenseTensor& x, const Shape& dims, std::size_t chi_max, double tol) {
  require(x.rank() == 1, ErrorCode::invalid_argument, "vector_to_mps: input must be 1-index");
  require(!dims.empty() && shape_product(dims) == x.dim(0), ErrorCode::shape_mismatch,
          "vector_to_mps: product of dims does not match the vector length");
  auto sweep = chain_sweep(x.data(), dims, chi_max, tol);
  MPS out = MPS::from_padded(sweep.padded);
  out.cut_spectra = std::move(sweep.spectra);
  out.cut_discarded = std::move(sweep.discarded);
  return out;
}

DenseTensor mps_to_vector(const MPS& mps) {
  mps.validate();
  const DenseTensor open = contract_chain(mps.sites);
  return open.reshaped({{"s", open.size(), IndexRole::input}});
}

MPS mps_recompress(const MPS& m, std::size_t chi_max, double tol) {
  m.validate();
  const std::size_t len = m.length();
  std::vector<DenseTensor> s;
  for (std::size_t n = 0; n < len; ++n)
    s.push_back(m.padded_site(n).relabeled({"l", "p", "r"}));

  // Right-to-left: make sites 1..N-1 right-orthonormal.
  for (std::size_t n = len; n-- > 1;) {
    const auto mat = s[n].reshaped(
        {{"l", s[n].dim(0), IndexRole::bond}, {"pr", s[n].dim(1) * s[n].dim(2), IndexRole::bond}});
    const auto f = truncated_factorize(mat, unbounded, 0.0, "k");
    const std::size_t k = f.rank();
    s[n] = DenseTensor::from_shape({k, s[n].dim(1), s[n].dim(2)}, {"l", "p", "r"},
                                   f.right.data());
    auto us = f.left.data();  // (old l) x k, scaled by s
    for (std::size_t row = 0; row < f.left.dim(0); ++row)
      for (std::size_t q = 0; q < k; ++q) us[row * k + q] *= f.singular_values[q];
    const auto carry = DenseTensor::from_shape({f.left.dim(0), k}, {"r", "k"}, std::move(us));
    s[n - 1] = contract_pair(s[n - 1], carry, std::vector<IndexPair>{{2, 0}})
                   .relabeled({"l", "p", "r"});
  }

  // Left-to-right truncation.
  MPS out;
  std::vector<std::vector<double>> spectra;
  std::vector<double> discarded;
  for (std::size_t n = 0; n + 1 < len; ++n) {
    const auto mat = s[n].reshaped({{"lp", s[n].dim(0) * s[n].dim(1), IndexRole::bond},
                                    {"r", s[n].dim(2), IndexRole::bond}});
    const auto f = truncated_factorize(mat, chi_max, tol, "k");
    const std::size_t k = f.rank();
    s[n] = DenseTensor::from_shape({s[n].dim(0), s[n].dim(1), k}, {"l", "p", "r"},
                                   f.left.data());
    auto sv = f.right.data();  // k x (old r), scaled by s
    const std::size_t cols = f.right.dim(1);
    for (std::size_t q = 0; q < k; ++q)
      for (std::size_t c = 0; c < cols; ++c) sv[q * cols + c] *= f.singular_values[q];
    const auto carry = DenseTensor::from_shape({k, cols}, {"k", "l"}, std::move(sv));
    s[n + 1] = contract_pair(carry, s[n + 1], std::vector<IndexPair>{{1, 0}})
                   .relabeled({"l", "p", "r"});
    spectra.push_back(f.singular_values);
    discarded.push_back(f.discarded_weight);
  }
  out = MPS::from_padded(s);
  out.cut_spectra = std::move(spectra);
  out.cut_discarded = std::move(discarded);
  return out;
}

MPS mpo_as_mps(const MPO& mpo) {
  mpo.validate();
  std::vector<DenseTensor> padded;
  for (std::size_t n = 0; n < mpo.length(); ++n) {
    const auto p = mpo.padded_site(n);
    padded.push_back(DenseTensor::from_shape({p.dim(0), p.dim(1) * p.dim(2), p.dim(3)},
                                             {"l", "p", "r"}, p.data()));
  }
  MPS out = MPS::from_padded(padded);
  out.cut_spectra = mpo.cut_spectra;
  out.cut_discarded = mpo.cut_discarded;
  return out;
}

MPO mps_as_mpo(const MPS& mps, const Shape& in_dims, const Shape& out_dims) {
  mps.validate();
  require(in_dims.size() == mps.length() && out_dims.size() == mps.length(),
          ErrorCode::shape_mismatch, "mps_as_mpo: dims length must equal the site count");
  std::vector<DenseTensor> padded;
  for (std::size_t n = 0; n < mps.length(); ++n) {
    const auto p = mps.padded_site(n);
    require(in_dims[n] * out_dims[n] == p.dim(1), ErrorCode::shape_mismatch,
            "mps_as_mpo: site " + std::to_string(n) + " cannot be split into (in, out)");
    padded.push_back(DenseTensor::from_shape({p.dim(0), in_dims[n], out_dims[n], p.dim(2)},
                                             {"l", "i", "j", "r"}, p.data()));
  }
  MPO out = MPO::from_padded(padded);
  out.cut_spectra = mps.cut_spectra;
  out.cut_discarded = mps.cut_discarded;
  return out;
}

MPO mpo_recompress(const MPO& m, std::size_t chi_max, double tol) {
  return mps_as_mpo(mps_recompress(mpo_as_mps(m), chi_max, tol), m.in_dims(), m.out_dims());
}

double bond_entropy(const std::vector<double>& spectrum) {
  double total = 0.0;
  for (double s : spectrum) {
    require(std::isfinite(s) && s >= 0.0, ErrorCode::invalid_argument,
            "bond_entropy: spectrum must be finite and non-negative");
    total += s * s;
  }
  require(total > 0.0, ErrorCode::invalid_argument, "bond_entropy: all-zero spectrum");
  double h = 0.0;
  for (double s : spectrum) {
    const double p = s * s / total;
    if (p > 0.0) h -= p * std::log(p);
  }
  return std::max(h, 0.0);
}

Shape auto_factorize(std::size_t n, std::size_t parts) {
  require(parts >= 1 && n >= 1, ErrorCode::invalid_argument,
          "auto_factorize: n and parts must be >= 1");
  if (parts == 1) return {n};

  std::optional<Shape> best;
  Shape current;
  auto better = [](const Shape& a, const Shape& b) {
    const auto spread_a = a.back() - a.front(), spread_b = b.back() - b.front();
    if (spread_a != spread_b) return spread_a < spread_b;
    return a < b;
  };
  auto search = [&](auto&& self, std::size_t rem, std::size_t min_factor, std::size_t left) {
    if (left == 1) {
      if (rem >= min_factor) {
        current.push_back(rem);
        if (!best || better(current, *best)) best = current;
        current.pop_back();
      }
      return;
    }
    for (std::size_t f = min_factor; f * f <= rem; ++f) {
      if (rem % f) continue;
      current.push_back(f);
      self(self, rem / f, f, left - 1);
      current.pop_back();
    }
  };
  search(search, n, 2, parts);
  require(best.has_value(), ErrorCode::invalid_argument,
          "auto_factorize: " + std::to_string(n) + " has no factorization into " +
              std::to_string(parts) + " factors >= 2");
  return *best;
}

}  // namespace tnz
