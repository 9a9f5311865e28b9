// Tucker (single-pass HOSVD) and CP (alternating least squares) for 4-index
// kernels.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <random>

#include "eigen_bridge.hpp"
#include "tnz/decompose.hpp"

namespace tnz {

namespace {

constexpr std::size_t kernel_modes = 4;

std::string rank_label(std::size_t mode) { return "r" + std::to_string(mode); }

void require_kernel(const DenseTensor& k, const char* what) {
  require(k.rank() == kernel_modes, ErrorCode::invalid_argument,
          std::string(what) + ": kernel must have exactly 4 indices");
}

RowMatrix mode_matrix(const DenseTensor& k, std::size_t mode) {
  std::vector<std::size_t> rest;
  for (std::size_t q = 0; q < k.rank(); ++q)
    if (q != mode) rest.push_back(q);
  const std::array<std::size_t, 1> rows{mode};
  return as_matrix(matricize(k, rows, rest));
}

/// Full left singular basis (dim x dim) and the spectrum padded with zeros to dim.
std::pair<RowMatrix, std::vector<double>> left_basis(const RowMatrix& m) {
  Eigen::BDCSVD<Eigen::MatrixXd> svd(Eigen::MatrixXd(m), Eigen::ComputeFullU);
  if (svd.info() != Eigen::Success)
    fail(ErrorCode::factorization_failed, "mode SVD did not converge");
  std::vector<double> s(static_cast<std::size_t>(m.rows()), 0.0);
  for (Eigen::Index q = 0; q < svd.singularValues().size(); ++q)
    s[static_cast<std::size_t>(q)] = svd.singularValues()[q];
  return {RowMatrix(svd.matrixU()), std::move(s)};
}

}  // namespace

TuckerKernel tucker_decompose(const DenseTensor& k, const TuckerRequest& request) {
  require_kernel(k, "tucker_decompose");
  if (request.ranks) {
    require(request.ranks->size() == kernel_modes, ErrorCode::invalid_argument,
            "tucker_decompose: expected 4 ranks");
  } else {
    require(request.tol >= 0.0 && std::isfinite(request.tol), ErrorCode::invalid_argument,
            "tucker_decompose: tol must be finite and >= 0");
  }
  const double threshold = request.tol * k.frobenius_norm();

  TuckerKernel out;
  DenseTensor core = k;
  for (std::size_t mode = 0; mode < kernel_modes; ++mode) {
    const std::size_t dim = k.dim(mode);
    auto [u, s] = left_basis(mode_matrix(k, mode));
    std::size_t rank = 0;
    if (request.ranks) {
      rank = (*request.ranks)[mode];
      require(rank >= 1 && rank <= dim, ErrorCode::invalid_argument,
              "tucker_decompose: rank " + std::to_string(rank) + " for mode " +
                  std::to_string(mode) + " exceeds dimension " + std::to_string(dim));
    } else {
      std::vector<double> tail(dim + 1, 0.0);
      for (std::size_t q = dim; q-- > 0;) tail[q] = tail[q + 1] + s[q] * s[q];
      rank = dim;
      for (std::size_t r = 1; r <= dim; ++r)
        if (std::sqrt(tail[r]) <= threshold) {
          rank = r;
          break;
        }
    }
    Index row = k.index(mode);
    const RowMatrix factor = u.leftCols(static_cast<Eigen::Index>(rank));
    out.factors.push_back(from_matrix(factor, row, {rank_label(mode), rank, IndexRole::bond}));
    // The consumed mode leaves its position; the new rank index is appended.
    const std::array<IndexPair, 1> pair{IndexPair{core.position_of(row.label), 0}};
    core = contract_pair(core, out.factors.back(), pair);
  }
  out.core = core;
  return out;
}

DenseTensor tucker_reconstruct(const TuckerKernel& t) {
  require(t.core.rank() == kernel_modes && t.factors.size() == kernel_modes,
          ErrorCode::invalid_argument, "tucker_reconstruct: expected a 4-index core and 4 factors");
  DenseTensor out = t.core;
  for (std::size_t mode = 0; mode < kernel_modes; ++mode) {
    const auto& f = t.factors[mode];
    require(f.rank() == 2 && f.dim(1) == t.core.dim(mode), ErrorCode::shape_mismatch,
            "tucker_reconstruct: factor " + std::to_string(mode) + " does not match the core");
    const std::array<IndexPair, 1> pair{IndexPair{0, 1}};
    out = contract_pair(out, f, pair);
  }
  return out;
}

// CP ---------------------------------------------------------------------

namespace {

struct KernelView {
  std::array<std::size_t, kernel_modes> dims{};
  const std::vector<double>* data = nullptr;
};

RowMatrix reconstruct_matrix(const KernelView& kv, const std::array<RowMatrix, kernel_modes>& a,
                             const Eigen::VectorXd& lambda) {
  const auto [d0, d1, d2, d3] = kv.dims;
  RowMatrix out = RowMatrix::Zero(static_cast<Eigen::Index>(d0 * d1),
                                  static_cast<Eigen::Index>(d2 * d3));
  const Eigen::Index rank = lambda.size();
  for (Eigen::Index r = 0; r < rank; ++r) {
    const Eigen::VectorXd left = [&] {
      Eigen::VectorXd v(static_cast<Eigen::Index>(d0 * d1));
      for (std::size_t x = 0; x < d0; ++x)
        for (std::size_t y = 0; y < d1; ++y)
          v[static_cast<Eigen::Index>(x * d1 + y)] =
              lambda[r] * a[0](static_cast<Eigen::Index>(x), r) *
              a[1](static_cast<Eigen::Index>(y), r);
      return v;
    }();
    Eigen::VectorXd right(static_cast<Eigen::Index>(d2 * d3));
    for (std::size_t w = 0; w < d2; ++w)
      for (std::size_t h = 0; h < d3; ++h)
        right[static_cast<Eigen::Index>(w * d3 + h)] =
            a[2](static_cast<Eigen::Index>(w), r) * a[3](static_cast<Eigen::Index>(h), r);
    out.noalias() += left * right.transpose();
  }
  return out;
}

/// Matricized-tensor times Khatri-Rao product for one mode.
RowMatrix mttkrp(const KernelView& kv, const std::array<RowMatrix, kernel_modes>& a,
                 std::size_t mode, Eigen::Index rank) {
  RowMatrix out = RowMatrix::Zero(static_cast<Eigen::Index>(kv.dims[mode]), rank);
  std::array<std::size_t, kernel_modes> idx{};
  const auto& data = *kv.data;
  Eigen::VectorXd prod(rank);
  for (std::size_t flat = 0; flat < data.size(); ++flat) {
    std::size_t rem = flat;
    for (std::size_t q = kernel_modes; q-- > 0;) {
      idx[q] = rem % kv.dims[q];
      rem /= kv.dims[q];
    }
    prod.setConstant(data[flat]);
    for (std::size_t q = 0; q < kernel_modes; ++q)
      if (q != mode) prod.array() *= a[q].row(static_cast<Eigen::Index>(idx[q])).transpose().array();
    out.row(static_cast<Eigen::Index>(idx[mode])) += prod.transpose();
  }
  return out;
}

}  // namespace

CPResult cp_decompose(const DenseTensor& k, const CPOptions& options) {
  require_kernel(k, "cp_decompose");
  require(options.rank >= 1, ErrorCode::invalid_argument, "cp_decompose: rank must be >= 1");
  const auto rank = static_cast<Eigen::Index>(options.rank);

  KernelView kv;
  for (std::size_t q = 0; q < kernel_modes; ++q) kv.dims[q] = k.dim(q);
  kv.data = &k.data();
  const double norm = k.frobenius_norm();
  const RowMatrix target = ConstRowMatrixMap(k.data().data(),
                                             static_cast<Eigen::Index>(kv.dims[0] * kv.dims[1]),
                                             static_cast<Eigen::Index>(kv.dims[2] * kv.dims[3]));

  // Leading singular vectors per mode, cycled when rank > dim, plus seeded noise.
  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> noise(-1e-3, 1e-3);
  std::array<RowMatrix, kernel_modes> a;
  for (std::size_t q = 0; q < kernel_modes; ++q) {
    const auto [u, s] = left_basis(mode_matrix(k, q));
    const Eigen::Index dim = u.rows();
    a[q].resize(dim, rank);
    for (Eigen::Index r = 0; r < rank; ++r)
      for (Eigen::Index row = 0; row < dim; ++row) a[q](row, r) = u(row, r % dim) + noise(rng);
  }
  Eigen::VectorXd lambda = Eigen::VectorXd::Ones(rank);

  CPResult result;
  double previous_error = std::numeric_limits<double>::infinity();
  for (std::size_t iter = 1; iter <= std::max<std::size_t>(options.max_iters, 1); ++iter) {
    for (std::size_t mode = 0; mode < kernel_modes; ++mode) {
      Eigen::MatrixXd gram = Eigen::MatrixXd::Ones(rank, rank);
      for (std::size_t q = 0; q < kernel_modes; ++q)
        if (q != mode) gram.array() *= (a[q].transpose() * a[q]).array();
      Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
      if (ldlt.info() != Eigen::Success || !(ldlt.rcond() > 1e-14))
        fail(ErrorCode::singular, "cp_decompose: singular normal equations at iteration " +
                                      std::to_string(iter) + ", mode " + std::to_string(mode));
      const RowMatrix rhs = mttkrp(kv, a, mode, rank);
      a[mode] = ldlt.solve(rhs.transpose()).transpose();
      for (Eigen::Index r = 0; r < rank; ++r) {
        const double n = a[mode].col(r).norm();
        if (!(n > 0.0) || !std::isfinite(n))
          fail(ErrorCode::singular, "cp_decompose: factor column collapsed to zero");
        a[mode].col(r) /= n;
        lambda[r] = n;
      }
    }
    const double err = (target - reconstruct_matrix(kv, a, lambda)).norm();
    const double rel = norm > 0.0 ? err / norm : err;
    result.iterations = iter;
    result.relative_error = rel;
    if (std::abs(previous_error - rel) < options.conv_tol) break;
    previous_error = rel;
  }

  for (std::size_t q = 0; q < kernel_modes; ++q)
    result.kernel.factors.push_back(from_matrix(a[q], k.index(q), {"r", 0, IndexRole::bond}));
  result.kernel.weights.assign(lambda.data(), lambda.data() + lambda.size());
  return result;
}

DenseTensor cp_reconstruct(const CPKernel& c) {
  require(c.rank() >= 1 && c.factors.size() == kernel_modes, ErrorCode::invalid_argument,
          "cp_reconstruct: expected rank >= 1 and 4 factors");
  KernelView kv;
  std::array<RowMatrix, kernel_modes> a;
  std::vector<Index> idx;
  for (std::size_t q = 0; q < kernel_modes; ++q) {
    require(c.factors[q].rank() == 2 && c.factors[q].dim(1) == c.rank(),
            ErrorCode::shape_mismatch, "cp_reconstruct: factor column count != rank");
    kv.dims[q] = c.factors[q].dim(0);
    a[q] = as_matrix(c.factors[q]);
    idx.push_back(c.factors[q].index(0));
  }
  const Eigen::VectorXd lambda =
      Eigen::Map<const Eigen::VectorXd>(c.weights.data(), static_cast<Eigen::Index>(c.rank()));
  const RowMatrix m = reconstruct_matrix(kv, a, lambda);
  return DenseTensor(std::move(idx), std::vector<double>(m.data(), m.data() + m.size()));
}

TuckerKernel cp_as_tucker(const CPKernel& c) {
  require(c.rank() >= 1 && c.factors.size() == kernel_modes, ErrorCode::invalid_argument,
          "cp_as_tucker: expected rank >= 1 and 4 factors");
  const std::size_t rank = c.rank();
  DenseTensor delta = delta_tensor(kernel_modes, rank);
  auto data = delta.data();
  const std::size_t step = 1 + rank + rank * rank + rank * rank * rank;
  for (std::size_t r = 0; r < rank; ++r) data[r * step] *= c.weights[r];
  TuckerKernel out;
  out.core = DenseTensor::from_shape(delta.shape(), {rank_label(0), rank_label(1), rank_label(2),
                                                     rank_label(3)},
                                     std::move(data));
  // Factors keep the CP columns, which are unit-norm but not orthogonal.
  for (std::size_t q = 0; q < kernel_modes; ++q)
    out.factors.push_back(c.factors[q].relabeled({c.factors[q].index(0).label, rank_label(q)}));
  return out;
}

}  // namespace tnz
