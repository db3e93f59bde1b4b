#include <Eigen/Geometry>

#include <cmath>
#include <numbers>

#include "ils/dataio.hpp"
#include "ils/rng.hpp"

namespace ils {

namespace {

constexpr double kPi = std::numbers::pi;

struct Layout {
  std::vector<Isometry3d> poses;
  std::vector<std::pair<int, int>> closures;
};

/// Rotation whose x axis follows `tangent` and whose z axis is `normal`.
Eigen::Matrix3d frame(const Eigen::Vector3d& tangent, const Eigen::Vector3d& normal) {
  Eigen::Matrix3d r;
  r.col(0) = tangent.normalized();
  r.col(2) = normal.normalized();
  r.col(1) = r.col(2).cross(r.col(0));
  return closest_rotation(r);
}

Eigen::Matrix3d yaw(double angle) {
  return Eigen::Matrix3d(v2t<double>((Vector6d() << 0, 0, 0, 0, 0, angle).finished()).rotation());
}

Layout ring(int n, bool closures) {
  Layout out;
  const double radius = std::max(1.0, n / (2.0 * kPi));
  for (int k = 0; k < n; ++k) {
    const double a = 2.0 * kPi * k / n;
    out.poses.emplace_back(yaw(a + 0.5 * kPi), Eigen::Vector3d(radius * std::cos(a), radius * std::sin(a), 0.0));
  }
  if (closures) out.closures.emplace_back(n - 1, 0);
  return out;
}

Layout grid(int n, bool closures) {
  Layout out;
  const int width = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n))));
  std::vector<Eigen::Vector2i> cells;
  for (int k = 0; k < n; ++k) {
    const int row = k / width;
    const int col = row % 2 == 0 ? k % width : width - 1 - k % width;
    cells.emplace_back(col, row);
  }
  for (int k = 0; k < n; ++k) {
    const Eigen::Vector2i step = k + 1 < n ? Eigen::Vector2i(cells[k + 1] - cells[k]) : Eigen::Vector2i(cells[k] - cells[k - 1]);
    const double heading = std::atan2(step.y(), step.x());
    out.poses.emplace_back(yaw(heading), Eigen::Vector3d(cells[k].x(), cells[k].y(), 0.0));
  }
  if (closures) {
    for (int k = width; k < n; ++k) {
      for (int m = 0; m < k - 1; ++m) {
        if (cells[m] == cells[k] - Eigen::Vector2i(0, 1)) out.closures.emplace_back(k, m);
      }
    }
  }
  return out;
}

void sweep_closures(Layout& out, int n, int per_ring, bool wrap) {
  for (int k = per_ring; k < n; ++k) out.closures.emplace_back(k, k - per_ring);
  const int rings = (n + per_ring - 1) / per_ring;
  if (wrap && rings >= 3) {
    const int last = (rings - 1) * per_ring;
    for (int j = 0; last + j < n; ++j) out.closures.emplace_back(last + j, j);
  }
}

Layout sphere(int n, bool closures) {
  Layout out;
  const int per_ring = std::max(3, static_cast<int>(std::lround(std::sqrt(static_cast<double>(n)))));
  const int rings = (n + per_ring - 1) / per_ring;
  const double radius = 5.0;
  for (int k = 0; k < n; ++k) {
    const double lat = -0.5 * kPi + kPi * (k / per_ring + 1) / (rings + 1);
    const double lon = 2.0 * kPi * (k % per_ring) / per_ring;
    const Eigen::Vector3d normal(std::cos(lat) * std::cos(lon), std::cos(lat) * std::sin(lon), std::sin(lat));
    const Eigen::Vector3d tangent(-std::sin(lon), std::cos(lon), 0.0);
    out.poses.emplace_back(frame(tangent, normal), radius * normal);
  }
  if (closures) sweep_closures(out, n, per_ring, false);
  return out;
}

Layout torus(int n, bool closures) {
  Layout out;
  const int per_ring = std::max(3, static_cast<int>(std::lround(std::sqrt(static_cast<double>(n)))));
  const int rings = (n + per_ring - 1) / per_ring;
  const double major = 5.0;
  const double minor = 2.0;
  for (int k = 0; k < n; ++k) {
    const double u = 2.0 * kPi * (k / per_ring) / rings;
    const double v = 2.0 * kPi * (k % per_ring) / per_ring;
    const Eigen::Vector3d normal(std::cos(v) * std::cos(u), std::cos(v) * std::sin(u), std::sin(v));
    const Eigen::Vector3d tangent(-std::sin(v) * std::cos(u), -std::sin(v) * std::sin(u), std::cos(v));
    const Eigen::Vector3d centre(major * std::cos(u), major * std::sin(u), 0.0);
    out.poses.emplace_back(frame(tangent, normal), centre + minor * normal);
  }
  if (closures) sweep_closures(out, n, per_ring, true);
  return out;
}

Isometry2d planar(const Isometry3d& x) {
  const auto& r = x.rotation();
  return Isometry2d(std::atan2(r(1, 0), r(0, 0)), x.translation().head<2>());
}

}  // namespace

std::string_view shape_name(ShapeKind kind) {
  switch (kind) {
    case ShapeKind::Ring: return "ring";
    case ShapeKind::Grid: return "grid";
    case ShapeKind::Sphere: return "sphere";
    case ShapeKind::Torus: return "torus";
  }
  return "ring";
}

ShapeKind parse_shape(std::string_view name) {
  if (name == "ring") return ShapeKind::Ring;
  if (name == "grid") return ShapeKind::Grid;
  if (name == "sphere") return ShapeKind::Sphere;
  if (name == "torus") return ShapeKind::Torus;
  throw Error(ErrorCode::InvalidArgument, "unknown shape '" + std::string(name) + "'");
}

SyntheticProblem generate_synthetic(const SyntheticSpec& spec) {
  if (spec.n_poses < 3) throw Error(ErrorCode::InvalidArgument, "a synthetic problem needs at least 3 poses");
  if (spec.planar && (spec.kind == ShapeKind::Sphere || spec.kind == ShapeKind::Torus)) {
    throw Error(ErrorCode::InvalidArgument, "planar generation supports ring and grid only");
  }
  Layout layout;
  switch (spec.kind) {
    case ShapeKind::Ring: layout = ring(spec.n_poses, spec.loop_closures); break;
    case ShapeKind::Grid: layout = grid(spec.n_poses, spec.loop_closures); break;
    case ShapeKind::Sphere: layout = sphere(spec.n_poses, spec.loop_closures); break;
    case ShapeKind::Torus: layout = torus(spec.n_poses, spec.loop_closures); break;
  }

  Rng rng(spec.seed);
  Vector6d g;
  g << rng.uniform(-10.0, 10.0), rng.uniform(-10.0, 10.0), rng.uniform(-10.0, 10.0), rng.uniform(-kPi, kPi),
      rng.uniform(-0.45 * kPi, 0.45 * kPi), rng.uniform(-kPi, kPi);
  if (spec.planar) g(2) = g(3) = g(4) = 0.0;
  const Isometry3d global = v2t<double>(g);

  std::vector<std::pair<int, int>> edges;
  for (int k = 0; k + 1 < spec.n_poses; ++k) edges.emplace_back(k, k + 1);
  edges.insert(edges.end(), layout.closures.begin(), layout.closures.end());

  FactorGraph gt;
  for (int k = 0; k < spec.n_poses; ++k) {
    const Isometry3d x = global * layout.poses[k];
    const VariableStatus status = k == 0 ? VariableStatus::Fixed : VariableStatus::Active;
    if (spec.planar) {
      gt.add_variable(k, planar(x), status);
    } else {
      gt.add_variable(k, x, status);
    }
  }
  for (const auto& [from, to] : edges) {
    const auto& a = gt.variable(from).value;
    const auto& b = gt.variable(to).value;
    if (spec.planar) {
      const Isometry2d z = std::get<Isometry2d>(a).inverse() * std::get<Isometry2d>(b);
      gt.add_factor(std::make_unique<Se2PgoFactor>(from, to, z));
    } else {
      const Isometry3d z = std::get<Isometry3d>(a).inverse() * std::get<Isometry3d>(b);
      gt.add_factor(std::make_unique<Se3PgoFactor>(from, to, z));
    }
  }
  SyntheticProblem problem{gt, gt};
  return problem;
}

}  // namespace ils
