#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

namespace dtm {

using Spin = std::int8_t;

/// One spin configuration (entries in {-1, +1}).
using SpinVector = Eigen::Matrix<Spin, Eigen::Dynamic, 1>;

/// Rows are samples/chains, columns are nodes or visible bits.
using SpinMatrix = Eigen::Matrix<Spin, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Per-node clamp flags; nonzero means frozen.
using MaskVector = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, 1>;
using MaskMatrix = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Derived>
bool all_spins(const Eigen::DenseBase<Derived>& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      const auto v = m(i, j);
      if (v != 1 && v != -1) return false;
    }
  return true;
}

/// Packs a spin row-major matrix to bits (+1 -> 1), each row padded to a whole byte.
std::vector<std::uint8_t> pack_spins(const SpinMatrix& m);
SpinMatrix unpack_spins(const std::vector<std::uint8_t>& bytes, Eigen::Index rows, Eigen::Index cols);
inline std::size_t packed_row_bytes(Eigen::Index cols) { return static_cast<std::size_t>((cols + 7) / 8); }

}  // namespace dtm
