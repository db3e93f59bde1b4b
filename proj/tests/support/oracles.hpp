#pragma once

// Independent reference computations used by the unit and acceptance tests.
// None of these reuse library code paths beyond the value types.

#include <Eigen/Core>
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "ils/manifold.hpp"
#include "ils/rng.hpp"
#include "ils/sparse_block.hpp"

namespace oracle {

/// Central differences of a vector function of a vector argument.
template <typename F>
Eigen::MatrixXd numeric_jacobian(F&& f, const Eigen::VectorXd& x0, double h = 1e-6) {
  const Eigen::VectorXd y0 = f(x0);
  Eigen::MatrixXd j(y0.size(), x0.size());
  for (Eigen::Index i = 0; i < x0.size(); ++i) {
    Eigen::VectorXd xp = x0, xm = x0;
    xp(i) += h;
    xm(i) -= h;
    j.col(i) = (f(xp) - f(xm)) / (2.0 * h);
  }
  return j;
}

/// Largest entry difference relative to max(1, largest entry of the reference).
inline double relative_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& reference) {
  const double scale = std::max(1.0, reference.cwiseAbs().maxCoeff());
  return (a - reference).cwiseAbs().maxCoeff() / scale;
}

/// Rotation from a rotation vector via Rodrigues' formula.
inline Eigen::Matrix3d rodrigues(const Eigen::Vector3d& w) {
  const double theta = w.norm();
  if (theta < 1e-15) return Eigen::Matrix3d::Identity();
  const Eigen::Vector3d k = w / theta;
  Eigen::Matrix3d kx;
  kx << 0, -k.z(), k.y(), k.z(), 0, -k.x(), -k.y(), k.x(), 0;
  return Eigen::Matrix3d::Identity() + std::sin(theta) * kx + (1.0 - std::cos(theta)) * kx * kx;
}

inline Eigen::Vector3d random_vector(ils::Rng& rng, double scale) {
  return Eigen::Vector3d(rng.uniform(-scale, scale), rng.uniform(-scale, scale), rng.uniform(-scale, scale));
}

/// Random isometry with |t| components <= t_scale and rotation angle <= angle.
inline ils::Isometry3d random_pose(ils::Rng& rng, double t_scale = 2.0, double angle = 1.0) {
  Eigen::Vector3d axis = random_vector(rng, 1.0);
  if (axis.norm() < 1e-3) axis = Eigen::Vector3d::UnitX();
  axis.normalize();
  return ils::Isometry3d(rodrigues(axis * rng.uniform(0.0, angle)), random_vector(rng, t_scale));
}

/// Count of lower off-diagonal nonzeros created by dense boolean elimination.
inline std::size_t dense_fill(const ils::BlockAdjacency& adjacency, const std::vector<int>& order) {
  const int n = static_cast<int>(adjacency.size());
  std::vector<int> pos(n);
  for (int k = 0; k < n; ++k) pos[order[k]] = k;
  std::vector<std::vector<char>> m(n, std::vector<char>(n, 0));
  for (int i = 0; i < n; ++i) {
    for (int j : adjacency[i]) m[pos[i]][pos[j]] = 1;
  }
  std::size_t fill = 0;
  for (int k = 0; k < n; ++k) {
    for (int i = k + 1; i < n; ++i) {
      if (!m[i][k]) continue;
      for (int j = k + 1; j < i; ++j) {
        if (m[j][k] && !m[i][j]) {
          m[i][j] = m[j][i] = 1;
          ++fill;
        }
      }
    }
  }
  return fill;
}

/// Adjacency of a rows x cols grid with 4-neighbour edges.
inline ils::BlockAdjacency grid_adjacency(int rows, int cols) {
  ils::BlockAdjacency adj(rows * cols);
  auto id = [cols](int r, int c) { return r * cols + c; };
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      if (c + 1 < cols) {
        adj[id(r, c)].push_back(id(r, c + 1));
        adj[id(r, c + 1)].push_back(id(r, c));
      }
      if (r + 1 < rows) {
        adj[id(r, c)].push_back(id(r + 1, c));
        adj[id(r + 1, c)].push_back(id(r, c));
      }
    }
  }
  for (auto& row : adj) std::sort(row.begin(), row.end());
  return adj;
}

struct SpdSystem {
  ils::BlockSparseMatrix sparse;
  Eigen::MatrixXd dense;
};

/// Random SPD matrix with the given block sizes: a random sparse block
/// pattern of J^T J plus a diagonal shift.
inline SpdSystem random_spd(ils::Rng& rng, const std::vector<int>& dims, double density = 0.3) {
  const ils::BlockLayout layout(dims);
  const int n = layout.total_dim();
  const int nb = layout.num_blocks();
  Eigen::MatrixXd dense = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < nb; ++i) {
    for (int j = 0; j <= i; ++j) {
      if (i != j && rng.uniform() > density) continue;
      Eigen::MatrixXd a(layout.dim(i) + layout.dim(j), layout.dim(i) + layout.dim(j));
      for (Eigen::Index r = 0; r < a.rows(); ++r) {
        for (Eigen::Index c = 0; c < a.cols(); ++c) a(r, c) = rng.uniform(-1.0, 1.0);
      }
      const Eigen::MatrixXd g = a.transpose() * a;
      const int di = layout.dim(i), dj = layout.dim(j);
      if (i == j) {
        dense.block(layout.offset(i), layout.offset(i), di, di) += g.topLeftCorner(di, di);
      } else {
        dense.block(layout.offset(i), layout.offset(i), di, di) += g.topLeftCorner(di, di);
        dense.block(layout.offset(j), layout.offset(j), dj, dj) += g.bottomRightCorner(dj, dj);
        dense.block(layout.offset(i), layout.offset(j), di, dj) += g.topRightCorner(di, dj);
        dense.block(layout.offset(j), layout.offset(i), dj, di) += g.bottomLeftCorner(dj, di);
      }
    }
  }
  dense.diagonal().array() += 0.1;
  ils::BlockSparseMatrix sparse(layout);
  for (int i = 0; i < nb; ++i) {
    for (int j = 0; j <= i; ++j) {
      const Eigen::MatrixXd blk = dense.block(layout.offset(i), layout.offset(j), layout.dim(i), layout.dim(j));
      if (i == j || !blk.isZero(0.0)) sparse.accumulate_block(i, j, blk);
    }
  }
  return {sparse, dense};
}

/// Generalized least squares min sum_k (A_k x - y_k)^T W_k (A_k x - y_k)
/// through whitening and a column-pivoted Householder QR of the stacked system.
inline Eigen::VectorXd dense_gls(const std::vector<Eigen::MatrixXd>& a, const std::vector<Eigen::VectorXd>& y,
                                 const std::vector<Eigen::MatrixXd>& w) {
  Eigen::Index rows = 0;
  for (const auto& ak : a) rows += ak.rows();
  const Eigen::Index cols = a.front().cols();
  Eigen::MatrixXd stacked(rows, cols);
  Eigen::VectorXd rhs(rows);
  Eigen::Index r = 0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const Eigen::MatrixXd u = Eigen::LLT<Eigen::MatrixXd>(w[k]).matrixU();
    stacked.middleRows(r, a[k].rows()) = u * a[k];
    rhs.segment(r, a[k].rows()) = u * y[k];
    r += a[k].rows();
  }
  return stacked.colPivHouseholderQr().solve(rhs);
}

}  // namespace oracle
