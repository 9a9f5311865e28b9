#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tnz/tensor.hpp"

namespace tnz {

/// Site labels used throughout: bond between site n and n+1 is "b<n>",
/// input index "i<n>", output index "j<n>", MPS physical index "s<n>".
std::string bond_label(std::size_t cut);
std::string in_label(std::size_t site);
std::string out_label(std::size_t site);
std::string phys_label(std::size_t site);

/// Chain operator. Site n holds indices (b<n-1>, i<n>, j<n>, b<n>) with the
/// outer bond omitted on the two boundary sites.
///
/// The dense matrix has rows over (i_1..i_N) and columns over (j_1..j_N),
/// each fused row-major; applying the layer to a row vector x is x * W.
struct MPO {
  std::vector<DenseTensor> sites;
  /// Kept singular values per cut, when produced by a sweep.
  std::vector<std::vector<double>> cut_spectra;
  /// Discarded weight per cut, parallel to cut_spectra.
  std::vector<double> cut_discarded;

  std::size_t length() const noexcept { return sites.size(); }
  Shape in_dims() const;
  Shape out_dims() const;
  /// N-1 entries.
  Shape bond_dims() const;
  std::size_t in_size() const;
  std::size_t out_size() const;

  /// Site n as a 4-index tensor (l, i, j, r) with dimension-1 boundary bonds.
  DenseTensor padded_site(std::size_t n) const;

  /// Builds an MPO from 4-index (l, i, j, r) tensors, dropping the boundary
  /// bonds (which must have dim 1) and applying canonical labels.
  static MPO from_padded(const std::vector<DenseTensor>& padded);

  /// Throws unless bond dims chain and labels/roles are canonical.
  void validate() const;
};

/// Chain vector. Site n holds (b<n-1>, s<n>, b<n>), boundary bonds omitted.
struct MPS {
  std::vector<DenseTensor> sites;
  std::vector<std::vector<double>> cut_spectra;
  std::vector<double> cut_discarded;

  std::size_t length() const noexcept { return sites.size(); }
  Shape site_dims() const;
  Shape bond_dims() const;
  std::size_t size() const;
  DenseTensor padded_site(std::size_t n) const;
  static MPS from_padded(const std::vector<DenseTensor>& padded);
  void validate() const;
};

MPO matrix_to_mpo(const DenseTensor& w, const Shape& in_dims, const Shape& out_dims,
                  std::size_t chi_max = unbounded, double tol = 0.0);

/// Dense (in_size x out_size) matrix with indices "i" and "j".
DenseTensor mpo_to_matrix(const MPO& mpo);

MPS vector_to_mps(const DenseTensor& x, const Shape& dims, std::size_t chi_max = unbounded,
                  double tol = 0.0);

/// Dense 1-index vector labelled "s".
DenseTensor mps_to_vector(const MPS& mps);

/// Right-to-left orthogonalization followed by a left-to-right truncation
/// sweep. cut_discarded holds the exact per-cut discarded weights, so the
/// total Frobenius error is their root-sum-square.
MPS mps_recompress(const MPS& m, std::size_t chi_max = unbounded, double tol = 0.0);

/// Recompression of an MPO viewed as an MPS over fused (i, j) site indices.
MPO mpo_recompress(const MPO& m, std::size_t chi_max = unbounded, double tol = 0.0);

/// Pairs each MPO site's (i, j) into one physical index (pure relayout).
MPS mpo_as_mps(const MPO& mpo);
MPO mps_as_mpo(const MPS& mps, const Shape& in_dims, const Shape& out_dims);

/// von Neumann entropy (nats) of the normalized squared spectrum.
double bond_entropy(const std::vector<double>& spectrum);

/// Most balanced factorization of `n` into `parts` factors, each >= 2,
/// in ascending order. Throws when none exists (e.g. n prime, parts > 1).
Shape auto_factorize(std::size_t n, std::size_t parts);

// Kernel decompositions ---------------------------------------------------

/// Core G (r0..r3) and per-mode factors (mode label, r<m>) with orthonormal
/// columns. Reconstruction uses the factors' row labels.
struct TuckerKernel {
  DenseTensor core;
  std::vector<DenseTensor> factors;

  Shape ranks() const { return core.shape(); }
};

struct TuckerRequest {
  std::optional<Shape> ranks;  // fixed ranks, or
  double tol = 0.0;            // smallest per-mode rank within tol * ||k||_F
};

TuckerKernel tucker_decompose(const DenseTensor& k, const TuckerRequest& request);
DenseTensor tucker_reconstruct(const TuckerKernel& t);

/// Weighted sum of rank-1 terms with unit-norm factor columns. factors[m] is
/// (mode label, "r") of size dim_m x R.
struct CPKernel {
  std::vector<double> weights;
  std::vector<DenseTensor> factors;

  std::size_t rank() const noexcept { return weights.size(); }
};

struct CPOptions {
  std::size_t rank = 1;
  std::size_t max_iters = 500;
  double conv_tol = 1e-12;
  std::uint64_t seed = 0;
};

struct CPResult {
  CPKernel kernel;
  std::size_t iterations = 0;
  double relative_error = 0.0;
};

CPResult cp_decompose(const DenseTensor& k, const CPOptions& options);
DenseTensor cp_reconstruct(const CPKernel& c);

/// Tucker form of a CP kernel: lambda-scaled delta core, CP factors.
TuckerKernel cp_as_tucker(const CPKernel& c);

}  // namespace tnz
