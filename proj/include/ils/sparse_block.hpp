#pragma once

// Symmetric block-sparse matrices, fill-reducing block ordering, and a
// right-looking block Cholesky factorization.
//
// Only the lower triangle (row >= col) is stored. Blocks are dense and
// row-major; their shapes are fixed by a BlockLayout.

#include <Eigen/Core>

#include <cstddef>
#include <iosfwd>
#include <map>
#include <vector>

#include "ils/errors.hpp"

namespace ils {

using DenseBlock = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class BlockLayout {
 public:
  BlockLayout() = default;
  explicit BlockLayout(std::vector<int> block_dims);

  int num_blocks() const { return static_cast<int>(dims_.size()); }
  int dim(int block) const { return dims_[block]; }
  int offset(int block) const { return offsets_[block]; }
  int total_dim() const { return offsets_.back(); }
  const std::vector<int>& dims() const { return dims_; }

  bool operator==(const BlockLayout& other) const { return dims_ == other.dims_; }

 private:
  std::vector<int> dims_;
  std::vector<int> offsets_{0};
};

/// Elimination order over block indices: `old_index(k)` is the block eliminated k-th.
class Permutation {
 public:
  Permutation() = default;
  explicit Permutation(std::vector<int> order);

  static Permutation identity(int n);

  int size() const { return static_cast<int>(order_.size()); }
  int old_index(int new_index) const { return order_[new_index]; }
  int new_index(int old_index) const { return position_[old_index]; }
  const std::vector<int>& order() const { return order_; }
  Permutation inverse() const;

  bool operator==(const Permutation& other) const { return order_ == other.order_; }

 private:
  std::vector<int> order_;
  std::vector<int> position_;
};

/// Off-diagonal block adjacency lists (symmetric, sorted, no self loops).
using BlockAdjacency = std::vector<std::vector<int>>;

class BlockSparseMatrix {
 public:
  BlockSparseMatrix() = default;
  explicit BlockSparseMatrix(BlockLayout layout);

  const BlockLayout& layout() const { return layout_; }
  int num_blocks() const { return layout_.num_blocks(); }

  /// Adds m into block (i, j). Upper-triangle requests are stored transposed.
  void accumulate_block(int i, int j, const Eigen::Ref<const Eigen::MatrixXd>& m);

  /// Lower block (i >= j), created zero-initialized if absent.
  DenseBlock& block(int i, int j);
  /// Lower block (i >= j) or nullptr.
  const DenseBlock* find_block(int i, int j) const;

  /// Stored blocks of column j keyed by row (row >= j).
  const std::map<int, DenseBlock>& column(int j) const { return columns_[j]; }
  std::map<int, DenseBlock>& column(int j) { return columns_[j]; }

  std::size_t num_stored_blocks() const;

  /// Zeroes every stored block, keeping the structure.
  void set_zero();

  /// Adds `d` to the scalar diagonal; diagonal blocks are created as needed.
  void add_to_diagonal(const Eigen::Ref<const Eigen::VectorXd>& d);
  Eigen::VectorXd diagonal() const;

  /// Full symmetric expansion.
  Eigen::MatrixXd to_dense() const;
  /// Symmetric product H * x.
  Eigen::VectorXd multiply(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  /// Infinity norm of the full symmetric matrix.
  double norm_inf() const;

  BlockAdjacency adjacency() const;

 private:
  void check_block(int i, int j, Eigen::Index rows, Eigen::Index cols) const;

  BlockLayout layout_;
  std::vector<std::map<int, DenseBlock>> columns_;
};

enum class OrderingMethod { MinimumDegree, Natural };

/// Approximate-minimum-degree ordering on the block graph (quotient-graph
/// elimination with the external-degree upper bound). Ties go to the lower
/// original degree, then the lower block index.
Permutation fill_reducing_ordering(const BlockAdjacency& adjacency,
                                   OrderingMethod method = OrderingMethod::MinimumDegree);
Permutation fill_reducing_ordering(const BlockSparseMatrix& h,
                                   OrderingMethod method = OrderingMethod::MinimumDegree);

/// Number of lower off-diagonal blocks created by eliminating in `order`.
std::size_t symbolic_fill_in(const BlockAdjacency& adjacency, const Permutation& order);

/// Cholesky factor L of P H P^T, held in permuted block indexing.
class BlockCholesky {
 public:
  /// Relative pivot threshold: a pivot below this fraction of the original
  /// diagonal entry is reported as NotPositiveDefinite.
  static constexpr double kPivotTolerance = 1e-10;

  BlockCholesky(const BlockSparseMatrix& h, Permutation order);

  const BlockSparseMatrix& factor() const { return l_; }
  const Permutation& permutation() const { return order_; }

  /// Solves H x = b with b, x in the original block order.
  Eigen::VectorXd solve(const Eigen::Ref<const Eigen::VectorXd>& b) const;

  /// Diagonal blocks of H^-1 for the requested original block indices.
  std::vector<Eigen::MatrixXd> marginal_covariance(const std::vector<int>& targets) const;

 private:
  Eigen::VectorXd permute(const Eigen::Ref<const Eigen::VectorXd>& b) const;
  Eigen::VectorXd unpermute(const Eigen::Ref<const Eigen::VectorXd>& y) const;
  void forward_substitute(Eigen::VectorXd& y) const;
  void backward_substitute(Eigen::VectorXd& y) const;

  BlockLayout original_layout_;
  Permutation order_;
  BlockSparseMatrix l_;
};

BlockSparseMatrix block_cholesky(const BlockSparseMatrix& h, const Permutation& order);
Eigen::VectorXd solve(const BlockSparseMatrix& h, const Eigen::Ref<const Eigen::VectorXd>& b,
                      const Permutation& order);
std::vector<Eigen::MatrixXd> marginal_covariance(const BlockSparseMatrix& h, const Permutation& order,
                                                 const std::vector<int>& targets);

/// Matrix Market coordinate dump (real symmetric, lower triangle, 1-based).
void write_matrix_market(std::ostream& out, const BlockSparseMatrix& h);

}  // namespace ils
