#include <gtest/gtest.h>

#include <sstream>

#include "ils/sparse_block.hpp"
#include "oracles.hpp"

using namespace ils;

namespace {

BlockSparseMatrix scalar_matrix(const Eigen::MatrixXd& dense) {
  BlockSparseMatrix h(BlockLayout(std::vector<int>(dense.rows(), 1)));
  for (Eigen::Index i = 0; i < dense.rows(); ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      if (dense(i, j) != 0.0 || i == j) h.accumulate_block(i, j, dense.block(i, j, 1, 1));
    }
  }
  return h;
}

BlockAdjacency star(int leaves) {
  BlockAdjacency adj(leaves + 1);
  for (int k = 1; k <= leaves; ++k) {
    adj[0].push_back(k);
    adj[k].push_back(0);
  }
  return adj;
}

BlockAdjacency chain(int n) {
  BlockAdjacency adj(n);
  for (int k = 0; k + 1 < n; ++k) {
    adj[k].push_back(k + 1);
    adj[k + 1].push_back(k);
  }
  return adj;
}

}  // namespace

TEST(Accumulate, SumsIntoBlock) {
  BlockSparseMatrix h(BlockLayout({2, 3}));
  h.accumulate_block(0, 0, Eigen::Matrix2d::Identity());
  h.accumulate_block(0, 0, Eigen::Matrix2d::Identity());
  EXPECT_EQ(Eigen::MatrixXd(*h.find_block(0, 0)), (2.0 * Eigen::Matrix2d::Identity()).eval());
}

TEST(Accumulate, UpperRequestStoredTransposed) {
  BlockSparseMatrix h(BlockLayout({2, 3}));
  Eigen::MatrixXd m(2, 3);
  m << 1, 2, 3, 4, 5, 6;
  h.accumulate_block(0, 1, m);
  ASSERT_NE(h.find_block(1, 0), nullptr);
  EXPECT_EQ(h.find_block(0, 1), nullptr);
  EXPECT_EQ(Eigen::MatrixXd(*h.find_block(1, 0)), m.transpose());
  EXPECT_EQ(h.to_dense().block(0, 2, 2, 3), m);
}

TEST(Accumulate, ShapeMismatchThrows) {
  BlockSparseMatrix h(BlockLayout({2, 3}));
  EXPECT_THROW(h.accumulate_block(1, 0, Eigen::Matrix2d::Identity()), Error);
  EXPECT_THROW(h.accumulate_block(2, 0, Eigen::Matrix2d::Identity()), Error);
}

TEST(Accumulate, RandomSequenceMatchesDense) {
  Rng rng(31);
  const BlockLayout layout({3, 1, 2, 6, 3});
  BlockSparseMatrix h(layout);
  Eigen::MatrixXd dense = Eigen::MatrixXd::Zero(layout.total_dim(), layout.total_dim());
  for (int k = 0; k < 200; ++k) {
    const int i = static_cast<int>(rng.uniform() * 5), j = static_cast<int>(rng.uniform() * 5);
    Eigen::MatrixXd m(layout.dim(i), layout.dim(j));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = rng.uniform(-1, 1);
    if (i == j) m = (m + m.transpose()).eval();
    h.accumulate_block(i, j, m);
    dense.block(layout.offset(i), layout.offset(j), m.rows(), m.cols()) += m;
    if (i != j) dense.block(layout.offset(j), layout.offset(i), m.cols(), m.rows()) += m.transpose();
  }
  EXPECT_LT((h.to_dense() - dense).cwiseAbs().maxCoeff(), 1e-12);
  for (int j = 0; j < h.num_blocks(); ++j) {
    for (const auto& [i, blk] : h.column(j)) {
      EXPECT_GE(i, j);
      EXPECT_EQ(blk.rows(), layout.dim(i));
      EXPECT_EQ(blk.cols(), layout.dim(j));
    }
  }
  Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(layout.total_dim(), -1, 1);
  EXPECT_LT((h.multiply(x) - dense * x).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Ordering, ChainHasNoFill) {
  const BlockAdjacency adj = chain(20);
  EXPECT_EQ(symbolic_fill_in(adj, Permutation::identity(20)), 0u);
  EXPECT_EQ(symbolic_fill_in(adj, fill_reducing_ordering(adj)), 0u);
}

TEST(Ordering, StarHubGoesLast) {
  const BlockAdjacency adj = star(8);
  const Permutation p = fill_reducing_ordering(adj);
  EXPECT_EQ(p.old_index(p.size() - 1), 0);
  EXPECT_EQ(symbolic_fill_in(adj, p), 0u);
  EXPECT_EQ(oracle::dense_fill(adj, p.order()), 0u);
  EXPECT_EQ(oracle::dense_fill(adj, Permutation::identity(9).order()), 28u);
}

TEST(Ordering, GridBelowDenseWorstCase) {
  const BlockAdjacency adj = oracle::grid_adjacency(10, 10);
  const Permutation amd = fill_reducing_ordering(adj);
  const std::size_t fill = oracle::dense_fill(adj, amd.order());
  const std::size_t natural = oracle::dense_fill(adj, Permutation::identity(100).order());
  std::size_t edges = 0;
  for (const auto& row : adj) edges += row.size();
  edges /= 2;
  EXPECT_LT(fill, 100u * 99u / 2u - edges);
  EXPECT_LE(fill, natural);
  EXPECT_EQ(symbolic_fill_in(adj, amd), fill);
}

TEST(Ordering, SymbolicFillMatchesOracleOnRandomGraphs) {
  Rng rng(32);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 5 + static_cast<int>(rng.uniform() * 20);
    BlockAdjacency adj(n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < i; ++j)
        if (rng.uniform() < 0.2) {
          adj[i].push_back(j);
          adj[j].push_back(i);
        }
    for (auto& row : adj) std::sort(row.begin(), row.end());
    for (const Permutation& p : {Permutation::identity(n), fill_reducing_ordering(adj)}) {
      EXPECT_EQ(symbolic_fill_in(adj, p), oracle::dense_fill(adj, p.order()));
    }
  }
}

TEST(Permutation, RejectsNonBijection) {
  EXPECT_THROW(Permutation({0, 0, 1}), Error);
  const Permutation p({2, 0, 1});
  EXPECT_EQ(p.new_index(2), 0);
  EXPECT_EQ(p.inverse().order(), (std::vector<int>{1, 2, 0}));
}

TEST(Cholesky, TwoByTwoClosedForm) {
  Eigen::Matrix2d dense;
  dense << 4, 2, 2, 3;
  const BlockSparseMatrix l = block_cholesky(scalar_matrix(dense), Permutation::identity(2));
  Eigen::Matrix2d expected;
  expected << 2, 0, 1, std::sqrt(2.0);
  Eigen::MatrixXd lower = l.to_dense().triangularView<Eigen::Lower>();
  EXPECT_LT((lower - expected).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Cholesky, IdentityFactorIsIdentity) {
  BlockSparseMatrix h(BlockLayout({3, 3}));
  h.add_to_diagonal(Eigen::VectorXd::Ones(6));
  const BlockSparseMatrix l = block_cholesky(h, Permutation::identity(2));
  EXPECT_TRUE(l.to_dense().isIdentity(0.0));
}

TEST(Cholesky, RandomReconstruction) {
  Rng rng(33);
  for (int trial = 0; trial < 20; ++trial) {
    const auto sys = oracle::random_spd(rng, {3, 3, 3, 3}, 0.6);
    const Permutation p = fill_reducing_ordering(sys.sparse);
    const BlockSparseMatrix l = block_cholesky(sys.sparse, p);
    const Eigen::MatrixXd ld = Eigen::MatrixXd(l.to_dense().triangularView<Eigen::Lower>());
    Eigen::MatrixXd permuted(12, 12);
    const BlockLayout& layout = sys.sparse.layout();
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j)
        permuted.block(3 * i, 3 * j, 3, 3) =
            sys.dense.block(layout.offset(p.old_index(i)), layout.offset(p.old_index(j)), 3, 3);
    EXPECT_LT((ld * ld.transpose() - permuted).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Cholesky, IndefiniteThrowsWithBlock) {
  Eigen::Matrix2d dense;
  dense << 1, 2, 2, 1;
  try {
    block_cholesky(scalar_matrix(dense), Permutation::identity(2));
    FAIL() << "expected NotPositiveDefinite";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotPositiveDefinite);
    EXPECT_EQ(e.location(), 1);
  }
}

TEST(Solve, TrivialCases) {
  BlockSparseMatrix eye(BlockLayout({2, 1}));
  eye.add_to_diagonal(Eigen::VectorXd::Ones(3));
  const Eigen::Vector3d b(1.5, -2.0, 7.0);
  EXPECT_EQ(solve(eye, b, Permutation::identity(2)), Eigen::VectorXd(b));

  BlockSparseMatrix two(BlockLayout({1}));
  two.add_to_diagonal(Eigen::VectorXd::Constant(1, 2.0));
  EXPECT_DOUBLE_EQ(solve(two, Eigen::VectorXd::Constant(1, 4.0), Permutation::identity(1))(0), 2.0);
}

TEST(Solve, RandomMatchesDenseLu) {
  Rng rng(34);
  for (int trial = 0; trial < 30; ++trial) {
    const auto sys = oracle::random_spd(rng, {6, 3, 6, 2, 6, 3}, 0.4);
    Eigen::VectorXd b(sys.dense.rows());
    for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = rng.uniform(-1, 1);
    const Eigen::VectorXd expected = sys.dense.partialPivLu().solve(b);
    const Eigen::VectorXd x = solve(sys.sparse, b, fill_reducing_ordering(sys.sparse));
    EXPECT_LT((x - expected).cwiseAbs().maxCoeff() / expected.cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Covariance, TrivialCases) {
  BlockSparseMatrix four(BlockLayout({1}));
  four.add_to_diagonal(Eigen::VectorXd::Constant(1, 4.0));
  EXPECT_DOUBLE_EQ(marginal_covariance(four, Permutation::identity(1), {0})[0](0, 0), 0.25);

  BlockSparseMatrix eye(BlockLayout({3, 2}));
  eye.add_to_diagonal(Eigen::VectorXd::Ones(5));
  for (const auto& s : marginal_covariance(eye, Permutation::identity(2), {0, 1})) EXPECT_TRUE(s.isIdentity(1e-15));
}

TEST(Covariance, RandomMatchesDenseInverse) {
  Rng rng(35);
  for (int trial = 0; trial < 30; ++trial) {
    const auto sys = oracle::random_spd(rng, {3, 6, 2, 3, 6}, 0.4);
    const Eigen::MatrixXd inv = sys.dense.inverse();
    const BlockLayout& layout = sys.sparse.layout();
    const std::vector<int> targets{4, 0, 2};
    const auto blocks = marginal_covariance(sys.sparse, fill_reducing_ordering(sys.sparse), targets);
    for (std::size_t k = 0; k < targets.size(); ++k) {
      const int t = targets[k];
      const Eigen::MatrixXd expected = inv.block(layout.offset(t), layout.offset(t), layout.dim(t), layout.dim(t));
      EXPECT_LT((blocks[k] - expected).cwiseAbs().maxCoeff(), 1e-8);
    }
  }
}

TEST(MatrixMarket, WritesLowerTriangle) {
  Eigen::Matrix2d dense;
  dense << 4, 2, 2, 3;
  std::ostringstream out;
  write_matrix_market(out, scalar_matrix(dense));
  EXPECT_EQ(out.str(),
            "%%MatrixMarket matrix coordinate real symmetric\n2 2 3\n1 1 4\n2 1 2\n2 2 3\n");
}
