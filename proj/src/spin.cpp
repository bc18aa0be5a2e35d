#include "dtm/spin.hpp"

#include <stdexcept>

namespace dtm {

std::vector<std::uint8_t> pack_spins(const SpinMatrix& m) {
  const std::size_t row_bytes = packed_row_bytes(m.cols());
  std::vector<std::uint8_t> out(row_bytes * static_cast<std::size_t>(m.rows()), 0);
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      if (m(i, j) > 0) out[i * row_bytes + j / 8] |= static_cast<std::uint8_t>(1u << (j % 8));
  return out;
}

SpinMatrix unpack_spins(const std::vector<std::uint8_t>& bytes, Eigen::Index rows, Eigen::Index cols) {
  const std::size_t row_bytes = packed_row_bytes(cols);
  if (bytes.size() != row_bytes * static_cast<std::size_t>(rows))
    throw std::invalid_argument("packed spin buffer has the wrong size");
  SpinMatrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j)
      m(i, j) = (bytes[i * row_bytes + j / 8] >> (j % 8)) & 1 ? Spin{1} : Spin{-1};
  return m;
}

}  // namespace dtm
