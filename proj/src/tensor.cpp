#include "tnz/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "eigen_bridge.hpp"

namespace tnz {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid argument";
    case ErrorCode::shape_mismatch: return "shape mismatch";
    case ErrorCode::label_collision: return "label collision";
    case ErrorCode::non_finite: return "non-finite value";
    case ErrorCode::factorization_failed: return "factorization failed";
    case ErrorCode::singular: return "singular system";
    case ErrorCode::bad_magic: return "bad magic";
    case ErrorCode::unsupported_version: return "unsupported version";
    case ErrorCode::truncated: return "truncated data";
    case ErrorCode::manifest_mismatch: return "manifest mismatch";
    case ErrorCode::io: return "i/o error";
  }
  return "unknown";
}

const char* to_string(IndexRole role) noexcept {
  switch (role) {
    case IndexRole::input: return "input";
    case IndexRole::output: return "output";
    case IndexRole::bond: return "bond";
  }
  return "bond";
}

IndexRole role_from_string(const std::string& s) {
  if (s == "input") return IndexRole::input;
  if (s == "output") return IndexRole::output;
  if (s == "bond") return IndexRole::bond;
  fail(ErrorCode::invalid_argument, "unknown index role '" + s + "'");
}

std::size_t shape_product(std::span<const std::size_t> dims) {
  std::size_t p = 1;
  for (auto d : dims) p *= d;
  return p;
}

namespace {

void validate_indices(const std::vector<Index>& indices) {
  std::set<std::string> seen;
  for (const auto& idx : indices) {
    require(idx.dim >= 1, ErrorCode::shape_mismatch,
            "index '" + idx.label + "' has dimension 0");
    require(seen.insert(idx.label).second, ErrorCode::label_collision,
            "duplicate index label '" + idx.label + "'");
  }
}

std::vector<std::size_t> row_major_strides(const Shape& dims) {
  std::vector<std::size_t> strides(dims.size(), 1);
  for (std::size_t k = dims.size(); k-- > 1;) strides[k - 1] = strides[k] * dims[k];
  return strides;
}

std::string join_labels(const std::vector<Index>& indices,
                        std::span<const std::size_t> positions) {
  std::string out;
  for (std::size_t k = 0; k < positions.size(); ++k) {
    if (k) out += "\xC2\xB7";  // U+00B7
    out += indices[positions[k]].label;
  }
  return out;
}

void check_permutation(std::span<const std::size_t> order, std::size_t n) {
  require(order.size() == n, ErrorCode::invalid_argument,
          "permutation length " + std::to_string(order.size()) + " != rank " +
              std::to_string(n));
  std::vector<bool> hit(n, false);
  for (auto p : order) {
    require(p < n, ErrorCode::invalid_argument, "permutation entry out of range");
    require(!hit[p], ErrorCode::invalid_argument, "permutation repeats an entry");
    hit[p] = true;
  }
}

}  // namespace

DenseTensor::DenseTensor(std::vector<Index> indices, std::vector<double> data)
    : indices_(std::move(indices)), data_(std::move(data)) {
  validate_indices(indices_);
  std::size_t expected = 1;
  for (const auto& idx : indices_) expected *= idx.dim;
  require(data_.size() == expected, ErrorCode::shape_mismatch,
          "data length " + std::to_string(data_.size()) + " != shape product " +
              std::to_string(expected));
  for (double v : data_)
    require(std::isfinite(v), ErrorCode::non_finite, "tensor contains NaN or Inf");
}

DenseTensor DenseTensor::zeros(std::vector<Index> indices) {
  std::size_t n = 1;
  for (const auto& idx : indices) n *= idx.dim;
  return DenseTensor(std::move(indices), std::vector<double>(n, 0.0));
}

DenseTensor DenseTensor::from_shape(const Shape& dims,
                                    const std::vector<std::string>& labels,
                                    std::vector<double> data, IndexRole role) {
  require(dims.size() == labels.size(), ErrorCode::invalid_argument,
          "label count does not match rank");
  std::vector<Index> idx;
  idx.reserve(dims.size());
  for (std::size_t k = 0; k < dims.size(); ++k) idx.push_back({labels[k], dims[k], role});
  return DenseTensor(std::move(idx), std::move(data));
}

Shape DenseTensor::shape() const {
  Shape s;
  s.reserve(indices_.size());
  for (const auto& idx : indices_) s.push_back(idx.dim);
  return s;
}

std::size_t DenseTensor::find(const std::string& label) const noexcept {
  for (std::size_t k = 0; k < indices_.size(); ++k)
    if (indices_[k].label == label) return k;
  return indices_.size();
}

std::size_t DenseTensor::position_of(const std::string& label) const {
  auto p = find(label);
  require(p < rank(), ErrorCode::invalid_argument, "no index labelled '" + label + "'");
  return p;
}

double DenseTensor::at(std::span<const std::size_t> multi) const {
  require(multi.size() == rank(), ErrorCode::invalid_argument, "multi-index rank mismatch");
  std::size_t flat = 0;
  for (std::size_t k = 0; k < multi.size(); ++k) {
    require(multi[k] < indices_[k].dim, ErrorCode::invalid_argument,
            "multi-index out of range");
    flat = flat * indices_[k].dim + multi[k];
  }
  return data_[flat];
}

double DenseTensor::frobenius_norm() const {
  double s = 0.0;
  for (double v : data_) s += v * v;
  return std::sqrt(s);
}

DenseTensor DenseTensor::reshaped(std::vector<Index> indices) const {
  return DenseTensor(std::move(indices), data_);
}

DenseTensor DenseTensor::relabeled(const std::vector<std::string>& labels) const {
  require(labels.size() == rank(), ErrorCode::invalid_argument,
          "relabel count does not match rank");
  auto idx = indices_;
  for (std::size_t k = 0; k < idx.size(); ++k) idx[k].label = labels[k];
  return DenseTensor(std::move(idx), data_);
}

DenseTensor DenseTensor::with_roles(const std::vector<IndexRole>& roles) const {
  require(roles.size() == rank(), ErrorCode::invalid_argument,
          "role count does not match rank");
  auto idx = indices_;
  for (std::size_t k = 0; k < idx.size(); ++k) idx[k].role = roles[k];
  return DenseTensor(std::move(idx), data_);
}

DenseTensor DenseTensor::scaled(double factor) const {
  auto d = data_;
  for (double& v : d) v *= factor;
  return DenseTensor(indices_, std::move(d));
}

DenseTensor subtract(const DenseTensor& a, const DenseTensor& b) {
  require(a.shape() == b.shape(), ErrorCode::shape_mismatch, "subtract: shapes differ");
  auto d = a.data();
  for (std::size_t k = 0; k < d.size(); ++k) d[k] -= b.data()[k];
  return DenseTensor(a.indices(), std::move(d));
}

double relative_difference(const DenseTensor& actual, const DenseTensor& expected) {
  const double num = subtract(actual, expected).frobenius_norm();
  const double den = expected.frobenius_norm();
  return den > 0.0 ? num / den : num;
}

double max_abs_difference(const DenseTensor& a, const DenseTensor& b) {
  require(a.size() == b.size(), ErrorCode::shape_mismatch, "max_abs_difference: sizes differ");
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k)
    m = std::max(m, std::abs(a.data()[k] - b.data()[k]));
  return m;
}

DenseTensor permute(const DenseTensor& t, std::span<const std::size_t> order) {
  const std::size_t n = t.rank();
  check_permutation(order, n);
  if (std::is_sorted(order.begin(), order.end())) return t;

  const Shape in_shape = t.shape();
  const auto in_strides = row_major_strides(in_shape);
  std::vector<Index> out_idx(n);
  Shape out_shape(n);
  std::vector<std::size_t> src_stride(n);
  for (std::size_t k = 0; k < n; ++k) {
    out_idx[k] = t.index(order[k]);
    out_shape[k] = in_shape[order[k]];
    src_stride[k] = in_strides[order[k]];
  }

  const auto& src = t.data();
  std::vector<double> dst(src.size());
  std::vector<std::size_t> counter(n, 0);
  std::size_t offset = 0;
  for (std::size_t flat = 0; flat < dst.size(); ++flat) {
    dst[flat] = src[offset];
    for (std::size_t k = n; k-- > 0;) {
      if (++counter[k] < out_shape[k]) {
        offset += src_stride[k];
        break;
      }
      offset -= src_stride[k] * (out_shape[k] - 1);
      counter[k] = 0;
    }
  }
  return DenseTensor(std::move(out_idx), std::move(dst));
}

DenseTensor fuse_indices(const DenseTensor& t,
                         const std::vector<std::vector<std::size_t>>& groups) {
  std::vector<std::size_t> order;
  for (const auto& g : groups) {
    require(!g.empty(), ErrorCode::invalid_argument, "fuse_indices: empty group");
    for (auto p : g) {
      require(p < t.rank(), ErrorCode::invalid_argument, "fuse_indices: position out of range");
      order.push_back(p);
    }
  }
  {
    auto sorted = order;
    std::sort(sorted.begin(), sorted.end());
    require(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end(),
            ErrorCode::invalid_argument, "fuse_indices: duplicated position");
  }
  require(order.size() == t.rank(), ErrorCode::invalid_argument,
          "fuse_indices: groups do not cover every position");

  const DenseTensor p = permute(t, order);
  std::vector<Index> fused;
  fused.reserve(groups.size());
  for (const auto& g : groups) {
    Index idx;
    idx.label = join_labels(t.indices(), g);
    idx.role = t.index(g.front()).role;
    idx.dim = 1;
    for (auto q : g) idx.dim *= t.dim(q);
    fused.push_back(std::move(idx));
  }
  return p.reshaped(std::move(fused));
}

DenseTensor split_index(const DenseTensor& t, std::size_t position, const Shape& dims,
                        const std::vector<std::string>& labels) {
  require(position < t.rank(), ErrorCode::invalid_argument, "split_index: position out of range");
  require(dims.size() == labels.size() && !dims.empty(), ErrorCode::invalid_argument,
          "split_index: dims and labels must be non-empty and equal length");
  require(shape_product(dims) == t.dim(position), ErrorCode::shape_mismatch,
          "split_index: product of dims " + std::to_string(shape_product(dims)) +
              " != " + std::to_string(t.dim(position)));
  std::vector<Index> idx;
  for (std::size_t k = 0; k < t.rank(); ++k) {
    if (k != position) {
      idx.push_back(t.index(k));
      continue;
    }
    for (std::size_t s = 0; s < dims.size(); ++s)
      idx.push_back({labels[s], dims[s], t.index(k).role});
  }
  return t.reshaped(std::move(idx));
}

DenseTensor matricize(const DenseTensor& t, std::span<const std::size_t> rows,
                      std::span<const std::size_t> cols) {
  std::vector<std::size_t> order(rows.begin(), rows.end());
  order.insert(order.end(), cols.begin(), cols.end());
  check_permutation(order, t.rank());
  const DenseTensor p = permute(t, order);

  auto group_index = [&](std::span<const std::size_t> g, const char* empty_label) {
    Index idx;
    idx.dim = 1;
    for (auto q : g) idx.dim *= t.dim(q);
    idx.label = g.empty() ? std::string(empty_label) : join_labels(t.indices(), g);
    idx.role = g.empty() ? IndexRole::bond : t.index(g.front()).role;
    return idx;
  };
  return p.reshaped({group_index(rows, "()row"), group_index(cols, "()col")});
}

DenseTensor contract_pair(const DenseTensor& a, const DenseTensor& b,
                          std::span<const IndexPair> pairs) {
  std::vector<bool> a_used(a.rank(), false), b_used(b.rank(), false);
  std::vector<std::size_t> a_shared, b_shared;
  for (const auto& [pa, pb] : pairs) {
    require(pa < a.rank() && pb < b.rank(), ErrorCode::invalid_argument,
            "contract_pair: position out of range");
    require(!a_used[pa] && !b_used[pb], ErrorCode::invalid_argument,
            "contract_pair: repeated position");
    require(a.dim(pa) == b.dim(pb), ErrorCode::shape_mismatch,
            "contract_pair: dim mismatch on '" + a.index(pa).label + "' (" +
                std::to_string(a.dim(pa)) + " vs " + std::to_string(b.dim(pb)) + ")");
    a_used[pa] = b_used[pb] = true;
    a_shared.push_back(pa);
    b_shared.push_back(pb);
  }
  std::vector<std::size_t> a_free, b_free;
  for (std::size_t k = 0; k < a.rank(); ++k)
    if (!a_used[k]) a_free.push_back(k);
  for (std::size_t k = 0; k < b.rank(); ++k)
    if (!b_used[k]) b_free.push_back(k);

  std::vector<Index> out_idx;
  for (auto k : a_free) out_idx.push_back(a.index(k));
  for (auto k : b_free) out_idx.push_back(b.index(k));

  const DenseTensor am = matricize(a, a_free, a_shared);
  const DenseTensor bm = matricize(b, b_shared, b_free);
  const auto rows = static_cast<Eigen::Index>(am.dim(0));
  const auto inner = static_cast<Eigen::Index>(am.dim(1));
  const auto cols = static_cast<Eigen::Index>(bm.dim(1));

  std::vector<double> out(static_cast<std::size_t>(rows * cols));
  RowMatrixMap result(out.data(), rows, cols);
  result.noalias() = ConstRowMatrixMap(am.data().data(), rows, inner) *
                     ConstRowMatrixMap(bm.data().data(), inner, cols);
  return DenseTensor(std::move(out_idx), std::move(out));
}

DenseTensor contract_shared(const DenseTensor& a, const DenseTensor& b) {
  std::vector<IndexPair> pairs;
  for (std::size_t k = 0; k < a.rank(); ++k) {
    auto q = b.find(a.index(k).label);
    if (q < b.rank()) pairs.emplace_back(k, q);
  }
  return contract_pair(a, b, pairs);
}

DenseTensor delta_tensor(std::size_t n_indices, std::size_t dim) {
  require(n_indices >= 1 && dim >= 1, ErrorCode::invalid_argument,
          "delta_tensor: n_indices and dim must be >= 1");
  std::vector<Index> idx;
  for (std::size_t k = 0; k < n_indices; ++k)
    idx.push_back({"d" + std::to_string(k), dim, IndexRole::bond});
  auto t = DenseTensor::zeros(idx);
  std::vector<double> data = t.data();
  // Stride of the diagonal is 1 + dim + dim^2 + ...
  std::size_t step = 0, p = 1;
  for (std::size_t k = 0; k < n_indices; ++k, p *= dim) step += p;
  for (std::size_t d = 0; d < dim; ++d) data[d * step] = 1.0;
  return DenseTensor(std::move(idx), std::move(data));
}

FactorResult truncated_factorize(const DenseTensor& m, std::size_t chi_max, double tol,
                                 const std::string& bond_label) {
  require(m.rank() == 2, ErrorCode::invalid_argument, "truncated_factorize: input must be 2-index");
  require(chi_max >= 1, ErrorCode::invalid_argument, "truncated_factorize: chi_max must be >= 1");
  require(tol >= 0.0 && std::isfinite(tol), ErrorCode::invalid_argument,
          "truncated_factorize: tol must be finite and >= 0");

  const auto rows = static_cast<Eigen::Index>(m.dim(0));
  const auto cols = static_cast<Eigen::Index>(m.dim(1));
  const Eigen::MatrixXd mat = ConstRowMatrixMap(m.data().data(), rows, cols);
  Eigen::BDCSVD<Eigen::MatrixXd> svd(mat, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success)
    fail(ErrorCode::factorization_failed, "truncated_factorize: SVD did not converge");

  const Eigen::VectorXd& s = svd.singularValues();
  const auto full = static_cast<std::size_t>(s.size());

  // tail[k] = sum_{q >= k} s_q^2, accumulated from the smallest values.
  std::vector<double> tail(full + 1, 0.0);
  for (std::size_t k = full; k-- > 0;) tail[k] = tail[k + 1] + s[k] * s[k];
  const double threshold = tol * std::sqrt(tail[0]);

  // Values at or below the numerical-rank floor are treated as zero.
  const double floor = static_cast<double>(std::max(rows, cols)) *
                       std::numeric_limits<double>::epsilon() * (full ? s[0] : 0.0);
  std::size_t numerical_rank = 0;
  while (numerical_rank < full && s[static_cast<Eigen::Index>(numerical_rank)] > floor) ++numerical_rank;
  const std::size_t cap = std::max<std::size_t>(1, std::min({chi_max, full, numerical_rank}));
  std::size_t keep = cap;
  for (std::size_t k = 1; k <= cap; ++k) {
    if (std::sqrt(tail[k]) <= threshold) {
      keep = k;
      break;
    }
  }

  FactorResult out;
  out.full_spectrum.assign(s.data(), s.data() + full);
  out.singular_values.assign(s.data(), s.data() + keep);
  out.discarded_weight = std::sqrt(tail[keep]);

  const auto k = static_cast<Eigen::Index>(keep);
  std::vector<double> left(static_cast<std::size_t>(rows * k));
  std::vector<double> right(static_cast<std::size_t>(k * cols));
  RowMatrixMap(left.data(), rows, k) = svd.matrixU().leftCols(k);
  RowMatrixMap(right.data(), k, cols) = svd.matrixV().leftCols(k).transpose();

  const Index bond{bond_label, keep, IndexRole::bond};
  out.left = DenseTensor({m.index(0), bond}, std::move(left));
  out.right = DenseTensor({bond, m.index(1)}, std::move(right));
  return out;
}

DenseTensor recompose(const FactorResult& f) {
  const auto rows = static_cast<Eigen::Index>(f.left.dim(0));
  const auto k = static_cast<Eigen::Index>(f.rank());
  const auto cols = static_cast<Eigen::Index>(f.right.dim(1));
  Eigen::VectorXd s(k);
  for (Eigen::Index q = 0; q < k; ++q) s[q] = f.singular_values[static_cast<std::size_t>(q)];
  std::vector<double> out(static_cast<std::size_t>(rows * cols));
  RowMatrixMap(out.data(), rows, cols) =
      ConstRowMatrixMap(f.left.data().data(), rows, k) * s.asDiagonal() *
      ConstRowMatrixMap(f.right.data().data(), k, cols);
  return DenseTensor({f.left.index(0), f.right.index(1)}, std::move(out));
}

}  // namespace tnz
