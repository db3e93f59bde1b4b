#include "ils/sparse_block.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <set>
#include <string>
#include <tuple>
#include <unordered_map>

namespace ils {

// ---------------------------------------------------------------------------
// BlockLayout / Permutation
// ---------------------------------------------------------------------------

BlockLayout::BlockLayout(std::vector<int> block_dims) : dims_(std::move(block_dims)) {
  offsets_.assign(1, 0);
  offsets_.reserve(dims_.size() + 1);
  for (int d : dims_) {
    if (d <= 0) throw Error(ErrorCode::DimensionMismatch, "block dimensions must be positive");
    offsets_.push_back(offsets_.back() + d);
  }
}

Permutation::Permutation(std::vector<int> order) : order_(std::move(order)) {
  position_.assign(order_.size(), -1);
  for (std::size_t k = 0; k < order_.size(); ++k) {
    const int old = order_[k];
    if (old < 0 || old >= static_cast<int>(order_.size()) || position_[old] != -1) {
      throw Error(ErrorCode::InvalidArgument, "permutation is not a bijection");
    }
    position_[old] = static_cast<int>(k);
  }
}

Permutation Permutation::identity(int n) {
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  return Permutation(std::move(order));
}

Permutation Permutation::inverse() const { return Permutation(position_); }

// ---------------------------------------------------------------------------
// BlockSparseMatrix
// ---------------------------------------------------------------------------

BlockSparseMatrix::BlockSparseMatrix(BlockLayout layout)
    : layout_(std::move(layout)), columns_(layout_.num_blocks()) {}

void BlockSparseMatrix::check_block(int i, int j, Eigen::Index rows, Eigen::Index cols) const {
  if (i < 0 || j < 0 || i >= num_blocks() || j >= num_blocks()) {
    throw Error(ErrorCode::IndexOutOfRange,
                "block (" + std::to_string(i) + ", " + std::to_string(j) + ") outside layout");
  }
  if (rows != layout_.dim(i) || cols != layout_.dim(j)) {
    throw Error(ErrorCode::DimensionMismatch,
                "block (" + std::to_string(i) + ", " + std::to_string(j) + ") expects " +
                    std::to_string(layout_.dim(i)) + "x" + std::to_string(layout_.dim(j)) + ", got " +
                    std::to_string(rows) + "x" + std::to_string(cols));
  }
}

void BlockSparseMatrix::accumulate_block(int i, int j, const Eigen::Ref<const Eigen::MatrixXd>& m) {
  check_block(i, j, m.rows(), m.cols());
  if (i >= j) {
    block(i, j) += m;
  } else {
    block(j, i) += m.transpose();
  }
}

DenseBlock& BlockSparseMatrix::block(int i, int j) {
  check_block(i, j, layout_.dim(i), layout_.dim(j));
  if (i < j) throw Error(ErrorCode::IndexOutOfRange, "only lower blocks (i >= j) are stored");
  auto& col = columns_[j];
  auto it = col.find(i);
  if (it == col.end()) {
    it = col.emplace(i, DenseBlock::Zero(layout_.dim(i), layout_.dim(j))).first;
  }
  return it->second;
}

const DenseBlock* BlockSparseMatrix::find_block(int i, int j) const {
  if (i < j || j < 0 || i >= num_blocks()) return nullptr;
  const auto& col = columns_[j];
  auto it = col.find(i);
  return it == col.end() ? nullptr : &it->second;
}

std::size_t BlockSparseMatrix::num_stored_blocks() const {
  std::size_t n = 0;
  for (const auto& col : columns_) n += col.size();
  return n;
}

void BlockSparseMatrix::set_zero() {
  for (auto& col : columns_) {
    for (auto& [row, blk] : col) blk.setZero();
  }
}

void BlockSparseMatrix::add_to_diagonal(const Eigen::Ref<const Eigen::VectorXd>& d) {
  if (d.size() != layout_.total_dim()) {
    throw Error(ErrorCode::DimensionMismatch, "diagonal length does not match layout");
  }
  for (int k = 0; k < num_blocks(); ++k) {
    block(k, k).diagonal() += d.segment(layout_.offset(k), layout_.dim(k));
  }
}

Eigen::VectorXd BlockSparseMatrix::diagonal() const {
  Eigen::VectorXd d = Eigen::VectorXd::Zero(layout_.total_dim());
  for (int k = 0; k < num_blocks(); ++k) {
    if (const DenseBlock* blk = find_block(k, k)) {
      d.segment(layout_.offset(k), layout_.dim(k)) = blk->diagonal();
    }
  }
  return d;
}

Eigen::MatrixXd BlockSparseMatrix::to_dense() const {
  const int n = layout_.total_dim();
  Eigen::MatrixXd dense = Eigen::MatrixXd::Zero(n, n);
  for (int j = 0; j < num_blocks(); ++j) {
    for (const auto& [i, blk] : columns_[j]) {
      dense.block(layout_.offset(i), layout_.offset(j), blk.rows(), blk.cols()) = blk;
      if (i != j) dense.block(layout_.offset(j), layout_.offset(i), blk.cols(), blk.rows()) = blk.transpose();
    }
  }
  return dense;
}

Eigen::VectorXd BlockSparseMatrix::multiply(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (x.size() != layout_.total_dim()) throw Error(ErrorCode::DimensionMismatch, "vector length");
  Eigen::VectorXd y = Eigen::VectorXd::Zero(x.size());
  for (int j = 0; j < num_blocks(); ++j) {
    const auto xj = x.segment(layout_.offset(j), layout_.dim(j));
    for (const auto& [i, blk] : columns_[j]) {
      y.segment(layout_.offset(i), layout_.dim(i)).noalias() += blk * xj;
      if (i != j) {
        y.segment(layout_.offset(j), layout_.dim(j)).noalias() +=
            blk.transpose() * x.segment(layout_.offset(i), layout_.dim(i));
      }
    }
  }
  return y;
}

double BlockSparseMatrix::norm_inf() const {
  Eigen::VectorXd row_sums = Eigen::VectorXd::Zero(layout_.total_dim());
  for (int j = 0; j < num_blocks(); ++j) {
    for (const auto& [i, blk] : columns_[j]) {
      row_sums.segment(layout_.offset(i), layout_.dim(i)) += blk.cwiseAbs().rowwise().sum();
      if (i != j) {
        row_sums.segment(layout_.offset(j), layout_.dim(j)) += blk.cwiseAbs().colwise().sum().transpose();
      }
    }
  }
  return row_sums.size() == 0 ? 0.0 : row_sums.maxCoeff();
}

BlockAdjacency BlockSparseMatrix::adjacency() const {
  BlockAdjacency adj(num_blocks());
  for (int j = 0; j < num_blocks(); ++j) {
    for (const auto& [i, blk] : columns_[j]) {
      if (i == j) continue;
      adj[i].push_back(j);
      adj[j].push_back(i);
    }
  }
  for (auto& list : adj) std::sort(list.begin(), list.end());
  return adj;
}

// ---------------------------------------------------------------------------
// Ordering
// ---------------------------------------------------------------------------

namespace {

bool contains_sorted(const std::vector<int>& v, int x) { return std::binary_search(v.begin(), v.end(), x); }

}  // namespace

Permutation fill_reducing_ordering(const BlockAdjacency& adjacency, OrderingMethod method) {
  const int n = static_cast<int>(adjacency.size());
  if (method == OrderingMethod::Natural) return Permutation::identity(n);

  // Quotient graph: variables keep their remaining variable neighbours (A) and
  // adjacent elements (E); an element is an eliminated node together with the
  // clique (L) its elimination produced.
  std::vector<std::vector<int>> var_adj(n);
  std::vector<std::vector<int>> var_elems(n);
  std::vector<std::vector<int>> elem_vars(n);
  std::vector<char> eliminated(n, 0);
  std::vector<char> absorbed(n, 0);
  std::vector<int> degree(n);
  std::vector<int> original_degree(n);

  for (int i = 0; i < n; ++i) {
    std::vector<int> nbrs;
    for (int j : adjacency[i]) {
      if (j != i) nbrs.push_back(j);
    }
    std::sort(nbrs.begin(), nbrs.end());
    nbrs.erase(std::unique(nbrs.begin(), nbrs.end()), nbrs.end());
    var_adj[i] = std::move(nbrs);
    degree[i] = static_cast<int>(var_adj[i].size());
    original_degree[i] = degree[i];
  }

  using Entry = std::tuple<int, int, int>;  // degree, original degree, index
  std::set<Entry> queue;
  for (int i = 0; i < n; ++i) queue.emplace(degree[i], original_degree[i], i);

  std::vector<int> order;
  order.reserve(n);
  std::unordered_map<int, int> external;  // element -> |L_e \ L_p|

  for (int k = 0; k < n; ++k) {
    const int p = std::get<2>(*queue.begin());
    queue.erase(queue.begin());
    order.push_back(p);
    eliminated[p] = 1;

    // L_p = A_p u (union of L_e over e in E_p), minus p.
    std::vector<int> lp = var_adj[p];
    for (int e : var_elems[p]) {
      lp.insert(lp.end(), elem_vars[e].begin(), elem_vars[e].end());
      absorbed[e] = 1;
      elem_vars[e].clear();
    }
    std::sort(lp.begin(), lp.end());
    lp.erase(std::unique(lp.begin(), lp.end()), lp.end());
    lp.erase(std::remove_if(lp.begin(), lp.end(), [&](int v) { return eliminated[v] != 0; }), lp.end());
    elem_vars[p] = lp;
    var_adj[p].clear();
    var_elems[p].clear();

    for (int i : lp) {
      auto& elems = var_elems[i];
      elems.erase(std::remove_if(elems.begin(), elems.end(), [&](int e) { return absorbed[e] != 0; }),
                  elems.end());
      elems.push_back(p);
      auto& nbrs = var_adj[i];
      nbrs.erase(std::remove_if(nbrs.begin(), nbrs.end(),
                                [&](int v) { return v == p || eliminated[v] || contains_sorted(lp, v); }),
                 nbrs.end());
    }

    external.clear();
    for (int i : lp) {
      for (int e : var_elems[i]) {
        if (e == p) continue;
        auto [it, inserted] = external.try_emplace(e, static_cast<int>(elem_vars[e].size()));
        --it->second;
      }
    }

    const int remaining = n - k - 1;
    const int lp_size = static_cast<int>(lp.size());
    for (int i : lp) {
      long approx = static_cast<long>(var_adj[i].size()) + (lp_size - 1);
      for (int e : var_elems[i]) {
        if (e != p) approx += external[e];
      }
      approx = std::min<long>(approx, remaining - 1);
      approx = std::min<long>(approx, static_cast<long>(degree[i]) + lp_size - 1);
      approx = std::max<long>(approx, 0);
      queue.erase(Entry(degree[i], original_degree[i], i));
      degree[i] = static_cast<int>(approx);
      queue.emplace(degree[i], original_degree[i], i);
    }
  }
  return Permutation(std::move(order));
}

Permutation fill_reducing_ordering(const BlockSparseMatrix& h, OrderingMethod method) {
  return fill_reducing_ordering(h.adjacency(), method);
}

std::size_t symbolic_fill_in(const BlockAdjacency& adjacency, const Permutation& order) {
  const int n = static_cast<int>(adjacency.size());
  if (order.size() != n) throw Error(ErrorCode::DimensionMismatch, "ordering size");
  std::vector<std::set<int>> graph(n);
  for (int i = 0; i < n; ++i) {
    for (int j : adjacency[i]) {
      if (j != i) {
        graph[i].insert(j);
        graph[j].insert(i);
      }
    }
  }
  std::vector<char> eliminated(n, 0);
  std::size_t fill = 0;
  for (int k = 0; k < n; ++k) {
    const int v = order.old_index(k);
    std::vector<int> nbrs;
    for (int u : graph[v]) {
      if (!eliminated[u]) nbrs.push_back(u);
    }
    for (std::size_t a = 0; a < nbrs.size(); ++a) {
      for (std::size_t b = a + 1; b < nbrs.size(); ++b) {
        if (graph[nbrs[a]].insert(nbrs[b]).second) {
          graph[nbrs[b]].insert(nbrs[a]);
          ++fill;
        }
      }
    }
    eliminated[v] = 1;
  }
  return fill;
}

// ---------------------------------------------------------------------------
// Cholesky
// ---------------------------------------------------------------------------

namespace {

/// In-place dense lower Cholesky with a relative pivot test against `reference`.
/// Returns the failing local index or -1.
int dense_cholesky(DenseBlock& a, const Eigen::Ref<const Eigen::VectorXd>& reference) {
  const Eigen::Index n = a.rows();
  for (Eigen::Index j = 0; j < n; ++j) {
    double pivot = a(j, j);
    for (Eigen::Index k = 0; k < j; ++k) pivot -= a(j, k) * a(j, k);
    const double scale = std::max(std::abs(reference(j)), std::numeric_limits<double>::min());
    if (!(pivot > BlockCholesky::kPivotTolerance * scale) || !std::isfinite(pivot)) {
      return static_cast<int>(j);
    }
    const double ljj = std::sqrt(pivot);
    a(j, j) = ljj;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (Eigen::Index k = 0; k < j; ++k) s -= a(i, k) * a(j, k);
      a(i, j) = s / ljj;
    }
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) a(i, j) = 0.0;
  }
  return -1;
}

}  // namespace

BlockCholesky::BlockCholesky(const BlockSparseMatrix& h, Permutation order)
    : original_layout_(h.layout()), order_(std::move(order)) {
  const int n = h.num_blocks();
  if (order_.size() != n) throw Error(ErrorCode::DimensionMismatch, "ordering does not match matrix");

  std::vector<int> permuted_dims(n);
  for (int k = 0; k < n; ++k) permuted_dims[k] = original_layout_.dim(order_.old_index(k));
  l_ = BlockSparseMatrix(BlockLayout(std::move(permuted_dims)));

  for (int j = 0; j < n; ++j) {
    for (const auto& [i, blk] : h.column(j)) {
      const int pi = order_.new_index(i);
      const int pj = order_.new_index(j);
      if (pi >= pj) {
        l_.block(pi, pj) += blk;
      } else {
        l_.block(pj, pi) += blk.transpose();
      }
    }
  }
  const Eigen::VectorXd reference = l_.diagonal();
  const BlockLayout& layout = l_.layout();

  // Right-looking: factor column k, then update the trailing submatrix.
  for (int k = 0; k < n; ++k) {
    auto& col = l_.column(k);
    auto diag_it = col.find(k);
    if (diag_it == col.end()) {
      throw Error(ErrorCode::NotPositiveDefinite,
                  "block " + std::to_string(order_.old_index(k)) + " has no diagonal contribution",
                  order_.old_index(k));
    }
    DenseBlock& lkk = diag_it->second;
    const int bad = dense_cholesky(lkk, reference.segment(layout.offset(k), layout.dim(k)));
    if (bad >= 0) {
      throw Error(ErrorCode::NotPositiveDefinite,
                  "pivot " + std::to_string(bad) + " of block " + std::to_string(order_.old_index(k)) +
                      " is not positive",
                  order_.old_index(k));
    }
    const auto lkk_view = lkk.triangularView<Eigen::Lower>();
    for (auto it = std::next(diag_it); it != col.end(); ++it) {
      // L_ik = A_ik L_kk^-T  <=>  L_kk L_ik^T = A_ik^T
      DenseBlock rhs = it->second.transpose();
      lkk_view.solveInPlace(rhs);
      it->second = rhs.transpose();
    }
    for (auto jt = std::next(diag_it); jt != col.end(); ++jt) {
      const int j = jt->first;
      for (auto it = jt; it != col.end(); ++it) {
        const int i = it->first;
        l_.block(i, j).noalias() -= it->second * jt->second.transpose();
      }
    }
  }
}

Eigen::VectorXd BlockCholesky::permute(const Eigen::Ref<const Eigen::VectorXd>& b) const {
  const BlockLayout& pl = l_.layout();
  Eigen::VectorXd y(b.size());
  for (int k = 0; k < pl.num_blocks(); ++k) {
    const int old = order_.old_index(k);
    y.segment(pl.offset(k), pl.dim(k)) = b.segment(original_layout_.offset(old), original_layout_.dim(old));
  }
  return y;
}

Eigen::VectorXd BlockCholesky::unpermute(const Eigen::Ref<const Eigen::VectorXd>& y) const {
  const BlockLayout& pl = l_.layout();
  Eigen::VectorXd x(y.size());
  for (int k = 0; k < pl.num_blocks(); ++k) {
    const int old = order_.old_index(k);
    x.segment(original_layout_.offset(old), original_layout_.dim(old)) = y.segment(pl.offset(k), pl.dim(k));
  }
  return x;
}

void BlockCholesky::forward_substitute(Eigen::VectorXd& y) const {
  const BlockLayout& pl = l_.layout();
  for (int k = 0; k < pl.num_blocks(); ++k) {
    const auto& col = l_.column(k);
    auto yk = y.segment(pl.offset(k), pl.dim(k));
    col.at(k).triangularView<Eigen::Lower>().solveInPlace(yk);
    for (auto it = std::next(col.begin()); it != col.end(); ++it) {
      y.segment(pl.offset(it->first), pl.dim(it->first)).noalias() -= it->second * yk;
    }
  }
}

void BlockCholesky::backward_substitute(Eigen::VectorXd& y) const {
  const BlockLayout& pl = l_.layout();
  for (int k = pl.num_blocks() - 1; k >= 0; --k) {
    const auto& col = l_.column(k);
    auto yk = y.segment(pl.offset(k), pl.dim(k));
    for (auto it = std::next(col.begin()); it != col.end(); ++it) {
      yk.noalias() -= it->second.transpose() * y.segment(pl.offset(it->first), pl.dim(it->first));
    }
    col.at(k).transpose().triangularView<Eigen::Upper>().solveInPlace(yk);
  }
}

Eigen::VectorXd BlockCholesky::solve(const Eigen::Ref<const Eigen::VectorXd>& b) const {
  if (b.size() != original_layout_.total_dim()) {
    throw Error(ErrorCode::DimensionMismatch, "right-hand side length does not match layout");
  }
  Eigen::VectorXd y = permute(b);
  forward_substitute(y);
  backward_substitute(y);
  return unpermute(y);
}

std::vector<Eigen::MatrixXd> BlockCholesky::marginal_covariance(const std::vector<int>& targets) const {
  std::vector<Eigen::MatrixXd> out;
  out.reserve(targets.size());
  const int n = original_layout_.total_dim();
  for (int t : targets) {
    if (t < 0 || t >= original_layout_.num_blocks()) {
      throw Error(ErrorCode::IndexOutOfRange, "covariance target " + std::to_string(t));
    }
    const int off = original_layout_.offset(t);
    const int dim = original_layout_.dim(t);
    Eigen::MatrixXd cov(dim, dim);
    for (int c = 0; c < dim; ++c) {
      Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
      e(off + c) = 1.0;
      cov.col(c) = solve(e).segment(off, dim);
    }
    out.push_back(0.5 * (cov + cov.transpose()));
  }
  return out;
}

BlockSparseMatrix block_cholesky(const BlockSparseMatrix& h, const Permutation& order) {
  return BlockCholesky(h, order).factor();
}

Eigen::VectorXd solve(const BlockSparseMatrix& h, const Eigen::Ref<const Eigen::VectorXd>& b,
                      const Permutation& order) {
  return BlockCholesky(h, order).solve(b);
}

std::vector<Eigen::MatrixXd> marginal_covariance(const BlockSparseMatrix& h, const Permutation& order,
                                                 const std::vector<int>& targets) {
  return BlockCholesky(h, order).marginal_covariance(targets);
}

void write_matrix_market(std::ostream& out, const BlockSparseMatrix& h) {
  const BlockLayout& layout = h.layout();
  std::vector<std::tuple<int, int, double>> entries;
  for (int j = 0; j < h.num_blocks(); ++j) {
    for (const auto& [i, blk] : h.column(j)) {
      for (Eigen::Index r = 0; r < blk.rows(); ++r) {
        for (Eigen::Index c = 0; c < blk.cols(); ++c) {
          const int row = layout.offset(i) + static_cast<int>(r);
          const int col = layout.offset(j) + static_cast<int>(c);
          if (row >= col && blk(r, c) != 0.0) entries.emplace_back(row + 1, col + 1, blk(r, c));
        }
      }
    }
  }
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    return std::tie(std::get<1>(a), std::get<0>(a)) < std::tie(std::get<1>(b), std::get<0>(b));
  });
  out << "%%MatrixMarket matrix coordinate real symmetric\n";
  out << layout.total_dim() << ' ' << layout.total_dim() << ' ' << entries.size() << '\n';
  const auto old_precision = out.precision(17);
  for (const auto& [r, c, v] : entries) out << r << ' ' << c << ' ' << v << '\n';
  out.precision(old_precision);
}

}  // namespace ils
