#pragma once

#include <algorithm>
#include <cstddef>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sheaflab/dense.hpp"
#include "sheaflab/errors.hpp"

namespace sheaflab {

/// Sizes of consecutive row or column blocks, with prefix offsets.
class BlockPartition {
 public:
  BlockPartition() : offsets_{0} {}

  explicit BlockPartition(std::span<const std::size_t> sizes) : sizes_(sizes.begin(), sizes.end()) {
    offsets_.resize(sizes_.size() + 1, 0);
    std::partial_sum(sizes_.begin(), sizes_.end(), offsets_.begin() + 1);
  }

  /// `count` blocks of equal size.
  static BlockPartition uniform(std::size_t count, std::size_t size) {
    const std::vector<std::size_t> sizes(count, size);
    return BlockPartition(sizes);
  }

  std::size_t num_blocks() const noexcept { return sizes_.size(); }
  std::size_t size(std::size_t block) const { return sizes_[block]; }
  std::size_t offset(std::size_t block) const { return offsets_[block]; }
  std::size_t total() const noexcept { return offsets_.back(); }
  const std::vector<std::size_t>& sizes() const noexcept { return sizes_; }

  bool operator==(const BlockPartition& other) const { return sizes_ == other.sizes_; }

 private:
  std::vector<std::size_t> sizes_;
  std::vector<std::size_t> offsets_;
};

/// Immutable block-sparse operator.
///
/// Blocks are dense row-major arrays stored contiguously and indexed in
/// block-row compressed form with sorted block-column indices. Absent blocks
/// are zero. Instances are assembled once through Builder and never mutated,
/// so they may be shared between threads freely.
class BlockSparseMatrix {
 public:
  using ConstBlock = Eigen::Map<const Matrix>;

  /// Coordinate-style assembler. Blocks added at the same position are summed.
  class Builder {
   public:
    Builder(BlockPartition rows, BlockPartition cols)
        : rows_(std::move(rows)), cols_(std::move(cols)) {}

    template <class Derived>
    Builder& add(std::size_t block_row, std::size_t block_col,
                 const Eigen::MatrixBase<Derived>& block) {
      if (block_row >= rows_.num_blocks() || block_col >= cols_.num_blocks()) {
        throw ShapeMismatch("block (" + std::to_string(block_row) + ", " +
                            std::to_string(block_col) + ") outside partition");
      }
      if (static_cast<std::size_t>(block.rows()) != rows_.size(block_row) ||
          static_cast<std::size_t>(block.cols()) != cols_.size(block_col)) {
        throw ShapeMismatch("block (" + std::to_string(block_row) + ", " +
                            std::to_string(block_col) + ") has shape " +
                            std::to_string(block.rows()) + "x" + std::to_string(block.cols()) +
                            ", partition expects " + std::to_string(rows_.size(block_row)) + "x" +
                            std::to_string(cols_.size(block_col)));
      }
      entries_.push_back({block_row, block_col, values_.size()});
      for (Eigen::Index r = 0; r < block.rows(); ++r)
        for (Eigen::Index c = 0; c < block.cols(); ++c) values_.push_back(block(r, c));
      return *this;
    }

    Builder& add_scalar(std::size_t block_row, std::size_t block_col, double value) {
      return add(block_row, block_col, Eigen::Matrix<double, 1, 1>::Constant(value));
    }

    Builder& add_identity(double scale = 1.0) {
      if (!(rows_ == cols_)) throw ShapeMismatch("identity requires a square partition");
      for (std::size_t b = 0; b < rows_.num_blocks(); ++b) {
        const auto n = static_cast<Eigen::Index>(rows_.size(b));
        add(b, b, Matrix::Identity(n, n) * scale);
      }
      return *this;
    }

    BlockSparseMatrix build() && {
      std::stable_sort(entries_.begin(), entries_.end(), [](const Entry& a, const Entry& b) {
        return a.row != b.row ? a.row < b.row : a.col < b.col;
      });
      BlockSparseMatrix out;
      out.rows_ = std::move(rows_);
      out.cols_ = std::move(cols_);
      out.row_ptr_.assign(out.rows_.num_blocks() + 1, 0);
      for (std::size_t i = 0; i < entries_.size();) {
        const Entry& head = entries_[i];
        const std::size_t len = out.rows_.size(head.row) * out.cols_.size(head.col);
        const std::size_t dst = out.values_.size();
        out.values_.insert(out.values_.end(), values_.begin() + head.offset,
                           values_.begin() + head.offset + len);
        std::size_t j = i + 1;
        for (; j < entries_.size() && entries_[j].row == head.row && entries_[j].col == head.col;
             ++j) {
          for (std::size_t t = 0; t < len; ++t) out.values_[dst + t] += values_[entries_[j].offset + t];
        }
        out.col_idx_.push_back(head.col);
        out.val_ptr_.push_back(dst);
        ++out.row_ptr_[head.row + 1];
        i = j;
      }
      std::partial_sum(out.row_ptr_.begin(), out.row_ptr_.end(), out.row_ptr_.begin());
      entries_.clear();
      values_.clear();
      out.attach_dense_mirror();
      return out;
    }

   private:
    struct Entry {
      std::size_t row;
      std::size_t col;
      std::size_t offset;
    };
    BlockPartition rows_;
    BlockPartition cols_;
    std::vector<Entry> entries_;
    std::vector<double> values_;
  };

  BlockSparseMatrix() : row_ptr_{0} {}

  static BlockSparseMatrix identity(const BlockPartition& partition) {
    return std::move(Builder(partition, partition).add_identity()).build();
  }

  static BlockSparseMatrix zero(const BlockPartition& rows, const BlockPartition& cols) {
    return Builder(rows, cols).build();
  }

  /// Splits a dense matrix along the given partitions. Blocks that are
  /// exactly zero are not stored.
  static BlockSparseMatrix from_dense(const BlockPartition& rows, const BlockPartition& cols,
                                      const Matrix& dense) {
    if (static_cast<std::size_t>(dense.rows()) != rows.total() ||
        static_cast<std::size_t>(dense.cols()) != cols.total()) {
      throw ShapeMismatch("dense matrix does not match partition");
    }
    Builder builder(rows, cols);
    for (std::size_t i = 0; i < rows.num_blocks(); ++i) {
      for (std::size_t j = 0; j < cols.num_blocks(); ++j) {
        const auto block = dense.block(static_cast<Eigen::Index>(rows.offset(i)),
                                       static_cast<Eigen::Index>(cols.offset(j)),
                                       static_cast<Eigen::Index>(rows.size(i)),
                                       static_cast<Eigen::Index>(cols.size(j)));
        if (!block.isZero(0.0)) builder.add(i, j, block);
      }
    }
    return std::move(builder).build();
  }

  const BlockPartition& row_partition() const noexcept { return rows_; }
  const BlockPartition& col_partition() const noexcept { return cols_; }
  std::size_t rows() const noexcept { return rows_.total(); }
  std::size_t cols() const noexcept { return cols_.total(); }
  std::size_t num_stored_blocks() const noexcept { return col_idx_.size(); }
  bool is_square() const noexcept { return rows_ == cols_; }

  /// Stored block at (block_row, block_col), or nullopt when absent.
  std::optional<Matrix> block(std::size_t block_row, std::size_t block_col) const {
    const auto first = col_idx_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[block_row]);
    const auto last = col_idx_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[block_row + 1]);
    const auto it = std::lower_bound(first, last, block_col);
    if (it == last || *it != block_col) return std::nullopt;
    return Matrix(stored(block_row, static_cast<std::size_t>(it - col_idx_.begin())));
  }

  /// Calls fn(block_row, block_col, block) for every stored block in
  /// row-major block order.
  template <class Fn>
  void for_each_block(Fn&& fn) const {
    for (std::size_t i = 0; i < rows_.num_blocks(); ++i)
      for (std::size_t p = row_ptr_[i]; p < row_ptr_[i + 1]; ++p) fn(i, col_idx_[p], stored(i, p));
  }

  /// Stored scalar entries over rows * cols.
  double fill() const noexcept {
    const double total = static_cast<double>(rows()) * static_cast<double>(cols());
    return total == 0.0 ? 0.0 : static_cast<double>(values_.size()) / total;
  }

  /// True when products go through a dense copy of the operator.
  bool has_dense_mirror() const noexcept { return dense_ != nullptr; }

  /// Sparse product op * X.
  Matrix apply(const Matrix& x) const {
    if (static_cast<std::size_t>(x.rows()) != cols()) {
      throw ShapeMismatch("apply: operator has " + std::to_string(cols()) + " columns, input has " +
                          std::to_string(x.rows()) + " rows");
    }
    if (dense_) return *dense_ * x;
    Matrix out = Matrix::Zero(static_cast<Eigen::Index>(rows()), x.cols());
    for (std::size_t i = 0; i < rows_.num_blocks(); ++i) {
      const auto ro = static_cast<Eigen::Index>(rows_.offset(i));
      const auto rn = static_cast<Eigen::Index>(rows_.size(i));
      for (std::size_t p = row_ptr_[i]; p < row_ptr_[i + 1]; ++p) {
        const std::size_t j = col_idx_[p];
        const auto co = static_cast<Eigen::Index>(cols_.offset(j));
        const auto cn = static_cast<Eigen::Index>(cols_.size(j));
        if (rn == 1 && cn == 1) {
          out.row(ro).noalias() += values_[val_ptr_[p]] * x.row(co);
        } else {
          out.middleRows(ro, rn).noalias() += stored(i, p) * x.middleRows(co, cn);
        }
      }
    }
    return out;
  }

  /// Sparse product op^T * X.
  Matrix apply_transposed(const Matrix& x) const {
    if (static_cast<std::size_t>(x.rows()) != rows()) {
      throw ShapeMismatch("apply_transposed: operator has " + std::to_string(rows()) +
                          " rows, input has " + std::to_string(x.rows()) + " rows");
    }
    if (dense_) return dense_->transpose() * x;
    Matrix out = Matrix::Zero(static_cast<Eigen::Index>(cols()), x.cols());
    for (std::size_t i = 0; i < rows_.num_blocks(); ++i) {
      const auto ro = static_cast<Eigen::Index>(rows_.offset(i));
      const auto rn = static_cast<Eigen::Index>(rows_.size(i));
      for (std::size_t p = row_ptr_[i]; p < row_ptr_[i + 1]; ++p) {
        const std::size_t j = col_idx_[p];
        const auto co = static_cast<Eigen::Index>(cols_.offset(j));
        const auto cn = static_cast<Eigen::Index>(cols_.size(j));
        if (rn == 1 && cn == 1) {
          out.row(co).noalias() += values_[val_ptr_[p]] * x.row(ro);
        } else {
          out.middleRows(co, cn).noalias() += stored(i, p).transpose() * x.middleRows(ro, rn);
        }
      }
    }
    return out;
  }

  /// Applies the operator r times; r = 0 returns X.
  Matrix apply_power(const Matrix& x, std::size_t r) const {
    if (!is_square()) throw ShapeMismatch("apply_power requires a square block operator");
    if (static_cast<std::size_t>(x.rows()) != cols()) {
      throw ShapeMismatch("apply_power: operator has " + std::to_string(cols()) +
                          " columns, input has " + std::to_string(x.rows()) + " rows");
    }
    Matrix out = x;
    for (std::size_t step = 0; step < r; ++step) out = apply(out);
    return out;
  }

  /// Returns op^T op, assembled blockwise.
  BlockSparseMatrix gram() const {
    Builder builder(cols_, cols_);
    for (std::size_t i = 0; i < rows_.num_blocks(); ++i) {
      for (std::size_t p = row_ptr_[i]; p < row_ptr_[i + 1]; ++p) {
        for (std::size_t q = row_ptr_[i]; q < row_ptr_[i + 1]; ++q) {
          builder.add(col_idx_[p], col_idx_[q], stored(i, p).transpose() * stored(i, q));
        }
      }
    }
    return std::move(builder).build();
  }

  /// Returns a * this + b * I. Requires a square partition.
  BlockSparseMatrix scaled_plus_identity(double a, double b) const {
    if (!is_square()) throw ShapeMismatch("scaled_plus_identity requires a square block operator");
    Builder builder(rows_, cols_);
    for_each_block([&](std::size_t i, std::size_t j, const ConstBlock& blk) {
      builder.add(i, j, a * blk);
    });
    builder.add_identity(b);
    return std::move(builder).build();
  }

  Matrix to_dense() const {
    Matrix out = Matrix::Zero(static_cast<Eigen::Index>(rows()), static_cast<Eigen::Index>(cols()));
    for_each_block([&](std::size_t i, std::size_t j, const ConstBlock& blk) {
      out.block(static_cast<Eigen::Index>(rows_.offset(i)), static_cast<Eigen::Index>(cols_.offset(j)),
                blk.rows(), blk.cols()) = blk;
    });
    return out;
  }

  /// Operators at least this full are multiplied as dense matrices.
  static constexpr double kDenseFill = 0.25;
  static constexpr std::size_t kDenseMaxEntries = std::size_t{1} << 26;

 private:
  void attach_dense_mirror() {
    const std::size_t total = rows() * cols();
    if (total == 0 || total > kDenseMaxEntries || fill() < kDenseFill) return;
    dense_ = std::make_shared<const Matrix>(to_dense());
  }

  ConstBlock stored(std::size_t block_row, std::size_t p) const {
    return ConstBlock(values_.data() + val_ptr_[p], static_cast<Eigen::Index>(rows_.size(block_row)),
                      static_cast<Eigen::Index>(cols_.size(col_idx_[p])));
  }

  BlockPartition rows_;
  BlockPartition cols_;
  std::vector<std::size_t> row_ptr_;
  std::vector<std::size_t> col_idx_;
  std::vector<std::size_t> val_ptr_;
  std::vector<double> values_;
  std::shared_ptr<const Matrix> dense_;
};

}  // namespace sheaflab
