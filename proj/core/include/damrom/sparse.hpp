#pragma once

#include <Eigen/SparseCore>
#include <span>
#include <vector>

namespace damrom {

using SpMat = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;

/// Position of entry (row, col) in the value array of a compressed matrix.
/// Throws std::out_of_range if the entry is not in the pattern.
int find_slot(const SpMat& m, Eigen::Index row, Eigen::Index col);

/// Fixed sparsity pattern built from element connectivity, plus the value
/// slot of every local entry so assembly can scatter without searching.
class ElementPattern {
 public:
  /// row_dofs holds n_rows local dofs per element back to back, col_dofs
  /// n_cols per element.
  ElementPattern(Eigen::Index rows, Eigen::Index cols, int n_rows, int n_cols,
                 std::span<const Eigen::Index> row_dofs, std::span<const Eigen::Index> col_dofs);

  /// Zero-valued matrix with the full pattern.
  const SpMat& zero_matrix() const { return pattern_; }
  int local_rows() const { return n_rows_; }
  int local_cols() const { return n_cols_; }
  std::size_t num_elements() const { return slots_.size() / static_cast<std::size_t>(n_rows_ * n_cols_); }

  /// Slots of element e, row-major over (local row, local col).
  std::span<const int> slots(std::size_t e) const {
    const std::size_t n = static_cast<std::size_t>(n_rows_ * n_cols_);
    return {slots_.data() + e * n, n};
  }

 private:
  int n_rows_;
  int n_cols_;
  SpMat pattern_;
  std::vector<int> slots_;
};

/// Copies the values of a block into a larger matrix at a fixed offset.
/// Both patterns are frozen; the map is computed once.
class BlockEmbedding {
 public:
  BlockEmbedding() = default;
  BlockEmbedding(const SpMat& block, const SpMat& target, Eigen::Index row0, Eigen::Index col0);

  /// target.values[map[k]] += scale * block.values[k].
  void add(double scale, const SpMat& block, SpMat& target) const;

 private:
  std::vector<int> map_;
};

/// Frobenius norm of a sparse matrix.
double frobenius_norm(const SpMat& m);

/// Largest absolute entry.
double max_abs(const SpMat& m);

}  // namespace damrom
