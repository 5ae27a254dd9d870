#include "damrom/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "damrom/error.hpp"

namespace damrom {

int find_slot(const SpMat& m, Eigen::Index row, Eigen::Index col) {
  const int* outer = m.outerIndexPtr();
  const int* inner = m.innerIndexPtr();
  const int* begin = inner + outer[col];
  const int* end = inner + outer[col + 1];
  const int* it = std::lower_bound(begin, end, static_cast<int>(row));
  if (it == end || *it != row)
    throw std::out_of_range("entry (" + std::to_string(row) + ", " + std::to_string(col) + ") not in pattern");
  return static_cast<int>(it - inner);
}

ElementPattern::ElementPattern(Eigen::Index rows, Eigen::Index cols, int n_rows, int n_cols,
                               std::span<const Eigen::Index> row_dofs, std::span<const Eigen::Index> col_dofs)
    : n_rows_(n_rows), n_cols_(n_cols), pattern_(rows, cols) {
  if (n_rows <= 0 || n_cols <= 0 || row_dofs.size() % static_cast<std::size_t>(n_rows) != 0 ||
      col_dofs.size() / static_cast<std::size_t>(n_cols) != row_dofs.size() / static_cast<std::size_t>(n_rows))
    throw NumericalError("element pattern: inconsistent local dof lists");
  const std::size_t n_elem = row_dofs.size() / static_cast<std::size_t>(n_rows);

  std::vector<Eigen::Triplet<double, int>> trips;
  trips.reserve(n_elem * static_cast<std::size_t>(n_rows * n_cols));
  for (std::size_t e = 0; e < n_elem; ++e) {
    for (int a = 0; a < n_rows; ++a) {
      for (int b = 0; b < n_cols; ++b) {
        trips.emplace_back(static_cast<int>(row_dofs[e * n_rows + a]), static_cast<int>(col_dofs[e * n_cols + b]), 0.0);
      }
    }
  }
  pattern_.setFromTriplets(trips.begin(), trips.end());
  pattern_.makeCompressed();

  slots_.resize(trips.size());
  for (std::size_t k = 0; k < trips.size(); ++k) slots_[k] = find_slot(pattern_, trips[k].row(), trips[k].col());
}

BlockEmbedding::BlockEmbedding(const SpMat& block, const SpMat& target, Eigen::Index row0, Eigen::Index col0) {
  map_.resize(static_cast<std::size_t>(block.nonZeros()));
  for (Eigen::Index c = 0; c < block.outerSize(); ++c) {
    for (SpMat::InnerIterator it(block, c); it; ++it) {
      const auto k = static_cast<std::size_t>(&it.value() - block.valuePtr());
      map_[k] = find_slot(target, row0 + it.row(), col0 + it.col());
    }
  }
}

void BlockEmbedding::add(double scale, const SpMat& block, SpMat& target) const {
  if (static_cast<std::size_t>(block.nonZeros()) != map_.size())
    throw NumericalError("block embedding: pattern changed since construction");
  if (scale == 0.0) return;
  const double* src = block.valuePtr();
  double* dst = target.valuePtr();
  for (std::size_t k = 0; k < map_.size(); ++k) dst[map_[k]] += scale * src[k];
}

double frobenius_norm(const SpMat& m) {
  double s = 0.0;
  for (Eigen::Index k = 0; k < m.nonZeros(); ++k) s += m.valuePtr()[k] * m.valuePtr()[k];
  return std::sqrt(s);
}

double max_abs(const SpMat& m) {
  double s = 0.0;
  for (Eigen::Index k = 0; k < m.nonZeros(); ++k) s = std::max(s, std::abs(m.valuePtr()[k]));
  return s;
}

}  // namespace damrom
