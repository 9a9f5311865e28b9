#pragma once

#include <Eigen/Dense>

#include "tnz/tensor.hpp"

namespace tnz {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMatrixMap = Eigen::Map<RowMatrix>;
using ConstRowMatrixMap = Eigen::Map<const RowMatrix>;

inline ConstRowMatrixMap as_matrix(const DenseTensor& t) {
  require(t.rank() == 2, ErrorCode::invalid_argument, "expected a 2-index tensor");
  return {t.data().data(), static_cast<Eigen::Index>(t.dim(0)),
          static_cast<Eigen::Index>(t.dim(1))};
}

inline DenseTensor from_matrix(const RowMatrix& m, Index row, Index col) {
  row.dim = static_cast<std::size_t>(m.rows());
  col.dim = static_cast<std::size_t>(m.cols());
  return DenseTensor({std::move(row), std::move(col)},
                     std::vector<double>(m.data(), m.data() + m.size()));
}

}  // namespace tnz
