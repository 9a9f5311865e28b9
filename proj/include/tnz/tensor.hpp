#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tnz/error.hpp"

namespace tnz {

enum class IndexRole { input, output, bond };

const char* to_string(IndexRole role) noexcept;
IndexRole role_from_string(const std::string& s);

struct Index {
  std::string label;
  std::size_t dim = 1;
  IndexRole role = IndexRole::bond;

  friend bool operator==(const Index&, const Index&) = default;
};

using Shape = std::vector<std::size_t>;

std::size_t shape_product(std::span<const std::size_t> dims);

/// Dense n-index array of doubles, row-major over the index order.
///
/// Construction validates that labels are unique, every dim is at least 1,
/// the data length matches, and every element is finite. All operations
/// below return new values; a DenseTensor is never mutated after it is built.
class DenseTensor {
 public:
  DenseTensor() = default;  // scalar 0
  DenseTensor(std::vector<Index> indices, std::vector<double> data);

  static DenseTensor zeros(std::vector<Index> indices);

  /// Builds indices labelled with `labels`, all with `role`.
  static DenseTensor from_shape(const Shape& dims,
                                const std::vector<std::string>& labels,
                                std::vector<double> data,
                                IndexRole role = IndexRole::bond);

  const std::vector<Index>& indices() const noexcept { return indices_; }
  const std::vector<double>& data() const noexcept { return data_; }
  std::size_t rank() const noexcept { return indices_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  Shape shape() const;
  std::size_t dim(std::size_t position) const { return indices_.at(position).dim; }
  const Index& index(std::size_t position) const { return indices_.at(position); }

  /// Position of `label`, or rank() when absent.
  std::size_t find(const std::string& label) const noexcept;
  std::size_t position_of(const std::string& label) const;

  double at(std::span<const std::size_t> multi) const;
  double frobenius_norm() const;

  /// Same data, different index metadata (dims must multiply to size()).
  DenseTensor reshaped(std::vector<Index> indices) const;
  DenseTensor relabeled(const std::vector<std::string>& labels) const;
  DenseTensor with_roles(const std::vector<IndexRole>& roles) const;
  DenseTensor scaled(double factor) const;

  friend bool operator==(const DenseTensor&, const DenseTensor&) = default;

 private:
  std::vector<Index> indices_;
  std::vector<double> data_ = {0.0};
};

/// Elementwise a - b for tensors of identical shape; labels taken from a.
DenseTensor subtract(const DenseTensor& a, const DenseTensor& b);
double relative_difference(const DenseTensor& actual, const DenseTensor& expected);
double max_abs_difference(const DenseTensor& a, const DenseTensor& b);

// Re-layout -------------------------------------------------------------

DenseTensor permute(const DenseTensor& t, std::span<const std::size_t> order);

/// Permutes to the concatenation of `groups`, then fuses each group into one
/// index. Fused labels join member labels with "·".
DenseTensor fuse_indices(const DenseTensor& t,
                         const std::vector<std::vector<std::size_t>>& groups);

DenseTensor split_index(const DenseTensor& t, std::size_t position,
                        const Shape& dims, const std::vector<std::string>& labels);

/// Two-index view with rows over `rows` and columns over `cols`. An empty
/// group becomes a dimension-1 index.
DenseTensor matricize(const DenseTensor& t, std::span<const std::size_t> rows,
                      std::span<const std::size_t> cols);

// Contraction -----------------------------------------------------------

using IndexPair = std::pair<std::size_t, std::size_t>;

/// Sums over each (position in a, position in b) pair. Survivors are ordered
/// a-survivors then b-survivors, each in original relative order.
DenseTensor contract_pair(const DenseTensor& a, const DenseTensor& b,
                          std::span<const IndexPair> pairs);

/// Convenience: contracts every index whose label appears in both tensors.
DenseTensor contract_shared(const DenseTensor& a, const DenseTensor& b);

DenseTensor delta_tensor(std::size_t n_indices, std::size_t dim);

// Factorization ---------------------------------------------------------

inline constexpr std::size_t unbounded = std::numeric_limits<std::size_t>::max();

struct FactorResult {
  DenseTensor left;                    // rows x k, orthonormal columns
  std::vector<double> singular_values; // descending, length k
  DenseTensor right;                   // k x cols, orthonormal rows
  double discarded_weight = 0.0;
  /// Full spectrum before truncation.
  std::vector<double> full_spectrum;

  std::size_t rank() const noexcept { return singular_values.size(); }
};

/// Truncated SVD. Keeps the smallest k <= chi_max with
/// sqrt(sum of discarded s^2) <= tol * ||m||_F, and at least one value.
/// Singular values at or below max(rows, cols) * eps * s_max are always
/// discarded, so tol = 0 keeps exactly the numerical rank.
/// The new index is labelled `bond_label` on both factors.
FactorResult truncated_factorize(const DenseTensor& m, std::size_t chi_max = unbounded,
                                 double tol = 0.0,
                                 const std::string& bond_label = "bond");

/// left * diag(s) * right as a matrix over (left row index, right col index).
DenseTensor recompose(const FactorResult& f);

}  // namespace tnz
