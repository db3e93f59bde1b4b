#pragma once

// Problem I/O, synthetic benchmarks, noise injection, initialization and
// trajectory metrics.

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "ils/factors.hpp"
#include "ils/graph.hpp"

namespace ils {

// ---------------------------------------------------------------------------
// Pose-graph text format
// ---------------------------------------------------------------------------

/// Reads VERTEX_SE2, EDGE_SE2, VERTEX_XY, EDGE_SE2_XY, VERTEX_SE3:QUAT,
/// EDGE_SE3:QUAT and FIX records. Errors carry the 1-based line number.
FactorGraph load_pose_graph(std::istream& in);
FactorGraph load_pose_graph(const std::filesystem::path& path);

/// Writes vertices by key, FIX records, then edges by factor key.
void save_pose_graph(const FactorGraph& graph, std::ostream& out);
void save_pose_graph(const FactorGraph& graph, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Bundle-adjustment text format
// ---------------------------------------------------------------------------

/// Cameras are keyed 0..nc-1 and points nc..nc+np-1; one BaFactor per
/// observation with unit information. Radial distortion is ignored.
FactorGraph load_bal(std::istream& in);
FactorGraph load_bal(const std::filesystem::path& path);

void save_bal(const FactorGraph& graph, std::ostream& out);
void save_bal(const FactorGraph& graph, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Point clouds and correspondences
// ---------------------------------------------------------------------------

std::vector<Eigen::Vector3d> load_point_cloud(std::istream& in);
std::vector<Eigen::Vector3d> load_point_cloud(const std::filesystem::path& path);
void save_point_cloud(const std::vector<Eigen::Vector3d>& points, std::ostream& out);
void save_point_cloud(const std::vector<Eigen::Vector3d>& points, const std::filesystem::path& path);

std::vector<Correspondence> load_correspondences(std::istream& in);
std::vector<Correspondence> load_correspondences(const std::filesystem::path& path);
void save_correspondences(const std::vector<Correspondence>& correspondences, std::ostream& out);
void save_correspondences(const std::vector<Correspondence>& correspondences,
                          const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Synthetic problems
// ---------------------------------------------------------------------------

enum class ShapeKind { Ring, Grid, Sphere, Torus };

std::string_view shape_name(ShapeKind kind);
ShapeKind parse_shape(std::string_view name);

struct SyntheticSpec {
  ShapeKind kind = ShapeKind::Sphere;
  int n_poses = 100;
  bool loop_closures = true;
  bool planar = false;  ///< SE(2) poses; ring and grid only
  std::uint64_t seed = 0;
};

struct SyntheticProblem {
  FactorGraph ground_truth;
  FactorGraph measured;  ///< same structure; measurements exact, values at ground truth
};

/// Odometry edges between consecutive poses plus loop closures; every
/// measurement is X_n^-1 X_m. The seed draws a global rigid transform.
SyntheticProblem generate_synthetic(const SyntheticSpec& spec);

// ---------------------------------------------------------------------------
// Noise, initialization, metrics
// ---------------------------------------------------------------------------

struct NoiseSpec {
  Eigen::Vector3d sigma_t = Eigen::Vector3d::Zero();     ///< translation variances (m^2)
  Eigen::Vector3d sigma_r = Eigen::Vector3d::Zero();     ///< rotation variances (rad^2)
  Eigen::Vector3d sigma_land = Eigen::Vector3d::Zero();  ///< landmark variances (m^2)
  std::uint64_t seed = 0;

  void validate() const;
};

/// Copy of `graph` with every pose-pose measurement replaced by Z v2t(eps)
/// and every landmark measurement by z + eps, eps ~ N(0, diag(spec)). The
/// information becomes the inverse noise covariance when all variances of the
/// edge are positive.
FactorGraph perturb_awgn(const FactorGraph& graph, const NoiseSpec& spec);

/// Composes measurements along a breadth-first spanning tree from `root`
/// (made Fixed). Fixed poses keep their values. Planar landmarks are placed
/// from their first observation. Throws Disconnected listing unreached poses.
void breadth_first_init(FactorGraph& graph, VariableKey root);

struct TrajectoryMetrics {
  double ate_pos = 0.0;
  double ate_rot = 0.0;
};

/// RMSE over pose variables present in both graphs; optional rigid
/// (rotation + translation) alignment of the estimate onto the ground truth.
TrajectoryMetrics ate_rmse(const FactorGraph& estimate, const FactorGraph& ground_truth, bool align = true);

struct RegistrationError {
  double e_pos = 0.0;
  double e_rot = 0.0;
};

RegistrationError registration_error(const Isometry3d& estimate, const Isometry3d& ground_truth);

/// Rotation angle of R in [0, pi].
double rotation_angle(const Eigen::Matrix3d& r);

}  // namespace ils
