#pragma once

// Factor library: point-to-point ICP, projective registration, bundle
// adjustment, SE(3)/SE(2) pose-graph edges, SE(2) landmark observations and
// a generic affine factor over Euclidean variables.
//
// Poses are sensor-to-world. Error functions are templated on the scalar so
// the analytic Jacobians can be checked against (or replaced by) Dual<N>.

#include <Eigen/Core>

#include <array>
#include <optional>

#include "ils/autodiff.hpp"
#include "ils/graph.hpp"
#include "ils/manifold.hpp"

namespace ils {

struct CameraIntrinsics {
  Eigen::Matrix3d K = Eigen::Matrix3d::Identity();
  int width = 0;   ///< pixels; 0 disables the image-bounds test
  int height = 0;  ///< pixels; 0 disables the image-bounds test
  double min_depth = 1e-3;

  static CameraIntrinsics pinhole(double fx, double fy, double cx, double cy, int width = 0, int height = 0,
                                  double min_depth = 1e-3);
  void validate() const;
  bool in_image(const Eigen::Vector2d& uv) const;
};

struct PointPair {
  Eigen::Vector3d moving;
  Eigen::Vector3d fixed;
};

// ---------------------------------------------------------------------------
// Error functions
// ---------------------------------------------------------------------------

/// R^T (p_moving - t) - p_fixed
template <typename Scalar>
Vector3<Scalar> icp_error(const Isometry3<Scalar>& x, const Vector3<Scalar>& moving,
                          const Vector3<Scalar>& fixed) {
  return x.rotation().transpose() * (moving - x.translation()) - fixed;
}

/// -R^T [ I | -[p_moving]x ]
Eigen::Matrix<double, 3, 6> icp_jacobian(const Isometry3d& x, const Eigen::Vector3d& moving);

/// (x/z, y/z). Throws DepthTooSmall unless |z| > min_depth.
template <typename Scalar>
Vector2<Scalar> hom(const Vector3<Scalar>& p, double min_depth = 0.0) {
  if (!(std::abs(scalar_value(p.z())) > min_depth)) {
    throw Error(ErrorCode::DepthTooSmall, "homogeneous division by a depth at or below the minimum");
  }
  return Vector2<Scalar>(p.x() / p.z(), p.y() / p.z());
}

Eigen::Matrix<double, 2, 3> hom_jacobian(const Eigen::Vector3d& p);

/// hom(K X^-1 p) - z, or nullopt when the point is not in front of the camera
/// or projects outside the image.
template <typename Scalar>
std::optional<Vector2<Scalar>> proj_error(const Isometry3<Scalar>& x, const CameraIntrinsics& cam,
                                          const Vector3<Scalar>& point, const Eigen::Vector2d& z) {
  const Vector3<Scalar> p_sensor = x.rotation().transpose() * (point - x.translation());
  const Vector3<Scalar> p_cam = cam.K.template cast<Scalar>() * p_sensor;
  if (!(scalar_value(p_cam.z()) > cam.min_depth)) return std::nullopt;
  const Vector2<Scalar> uv = hom(p_cam);
  if (!cam.in_image(Eigen::Vector2d(scalar_value(uv.x()), scalar_value(uv.y())))) return std::nullopt;
  return Vector2<Scalar>(uv - z.template cast<Scalar>());
}

/// J_hom(p_cam) K J_icp; nullopt where proj_error is invalid.
std::optional<Eigen::Matrix<double, 2, 6>> proj_jacobian(const Isometry3d& x, const CameraIntrinsics& cam,
                                                         const Eigen::Vector3d& point);

template <typename Scalar>
std::optional<Vector2<Scalar>> ba_error(const Isometry3<Scalar>& camera, const Vector3<Scalar>& landmark,
                                        const CameraIntrinsics& cam, const Eigen::Vector2d& z) {
  return proj_error(camera, cam, landmark, z);
}

struct BaJacobians {
  Eigen::Matrix<double, 2, 6> pose;
  Eigen::Matrix<double, 2, 3> landmark;  ///< J_hom(p_cam) K R^T
};

std::optional<BaJacobians> ba_jacobians(const Isometry3d& camera, const Eigen::Vector3d& landmark,
                                        const CameraIntrinsics& cam);

/// t2v(Z^-1 X_from^-1 X_to)
template <typename Scalar>
Vector6<Scalar> pgo_error(const Isometry3<Scalar>& from, const Isometry3<Scalar>& to,
                          const Isometry3<Scalar>& measurement) {
  return t2v(measurement.inverse() * (from.inverse() * to));
}

struct PgoJacobians {
  Matrix6d from;
  Matrix6d to;
};

/// Jacobians of pgo_error w.r.t. left perturbations of both poses (via AD).
PgoJacobians pgo_jacobians(const Isometry3d& from, const Isometry3d& to, const Isometry3d& measurement);

template <typename Scalar>
Vector3<Scalar> se2_pgo_error(const Isometry2<Scalar>& from, const Isometry2<Scalar>& to,
                              const Isometry2<Scalar>& measurement) {
  return t2v(measurement.inverse() * (from.inverse() * to));
}

struct Se2PgoJacobians {
  Eigen::Matrix3d from;
  Eigen::Matrix3d to;
};

Se2PgoJacobians se2_pgo_jacobians(const Isometry2d& from, const Isometry2d& to, const Isometry2d& measurement);

/// R^T (l - t) - z
template <typename Scalar>
Vector2<Scalar> se2_landmark_error(const Isometry2<Scalar>& pose, const Vector2<Scalar>& landmark,
                                   const Eigen::Vector2d& z) {
  return pose.rotation().transpose() * (landmark - pose.translation()) - z.template cast<Scalar>();
}

struct Se2LandmarkJacobians {
  Eigen::Matrix<double, 2, 3> pose;
  Eigen::Matrix2d landmark;
};

Se2LandmarkJacobians se2_landmark_jacobians(const Isometry2d& pose, const Eigen::Vector2d& landmark,
                                            const Eigen::Vector2d& z);

// ---------------------------------------------------------------------------
// Factors
// ---------------------------------------------------------------------------

class IcpFactor final : public PairFactor {
 public:
  IcpFactor(VariableKey pose, const Eigen::Vector3d& moving, const Eigen::Vector3d& fixed,
            const Eigen::Matrix3d& information = Eigen::Matrix3d::Identity());

  std::string_view type_tag() const override { return "icp"; }
  std::span<const VariableKind> variable_kinds() const override { return kKinds; }
  int error_dim() const override { return 3; }
  std::optional<Eigen::VectorXd> error(ValueRefs values) const override;
  std::optional<Linearization> linearize(ValueRefs values) const override;
  std::unique_ptr<Factor> clone() const override { return std::make_unique<IcpFactor>(*this); }
  void bind(const Eigen::Vector3d& moving, const Eigen::VectorXd& fixed) override;

  const Eigen::Vector3d& moving() const { return moving_; }
  const Eigen::Vector3d& fixed() const { return fixed_; }

 private:
  static constexpr std::array<VariableKind, 1> kKinds{VariableKind::Pose3};
  Eigen::Vector3d moving_;
  Eigen::Vector3d fixed_;
};

class ProjectiveFactor final : public PairFactor {
 public:
  ProjectiveFactor(VariableKey pose, const CameraIntrinsics& cam, const Eigen::Vector3d& moving,
                   const Eigen::Vector2d& measurement,
                   const Eigen::Matrix2d& information = Eigen::Matrix2d::Identity());

  std::string_view type_tag() const override { return "projective"; }
  std::span<const VariableKind> variable_kinds() const override { return kKinds; }
  int error_dim() const override { return 2; }
  std::optional<Eigen::VectorXd> error(ValueRefs values) const override;
  std::optional<Linearization> linearize(ValueRefs values) const override;
  std::unique_ptr<Factor> clone() const override { return std::make_unique<ProjectiveFactor>(*this); }
  /// `fixed` holds the 2D image measurement.
  void bind(const Eigen::Vector3d& moving, const Eigen::VectorXd& fixed) override;

  const CameraIntrinsics& camera() const { return cam_; }

 private:
  static constexpr std::array<VariableKind, 1> kKinds{VariableKind::Pose3};
  CameraIntrinsics cam_;
  Eigen::Vector3d moving_;
  Eigen::Vector2d z_;
};

class BaFactor final : public Factor {
 public:
  BaFactor(VariableKey camera, VariableKey landmark, const CameraIntrinsics& cam, const Eigen::Vector2d& measurement,
           const Eigen::Matrix2d& information = Eigen::Matrix2d::Identity());

  std::string_view type_tag() const override { return "ba"; }
  std::span<const VariableKind> variable_kinds() const override { return kKinds; }
  int error_dim() const override { return 2; }
  std::optional<Eigen::VectorXd> error(ValueRefs values) const override;
  std::optional<Linearization> linearize(ValueRefs values) const override;
  std::unique_ptr<Factor> clone() const override { return std::make_unique<BaFactor>(*this); }

  const CameraIntrinsics& camera() const { return cam_; }
  const Eigen::Vector2d& measurement() const { return z_; }

 private:
  static constexpr std::array<VariableKind, 2> kKinds{VariableKind::Pose3, VariableKind::Point3};
  CameraIntrinsics cam_;
  Eigen::Vector2d z_;
};

class Se3PgoFactor final : public Factor {
 public:
  Se3PgoFactor(VariableKey from, VariableKey to, const Isometry3d& measurement,
               const Matrix6d& information = Matrix6d::Identity());

  std::string_view type_tag() const override { return "pgo3"; }
  std::span<const VariableKind> variable_kinds() const override { return kKinds; }
  int error_dim() const override { return 6; }
  std::optional<Eigen::VectorXd> error(ValueRefs values) const override;
  std::optional<Linearization> linearize(ValueRefs values) const override;
  std::unique_ptr<Factor> clone() const override { return std::make_unique<Se3PgoFactor>(*this); }

  const Isometry3d& measurement() const { return z_; }
  void set_measurement(const Isometry3d& z) { z_ = z; }

 private:
  static constexpr std::array<VariableKind, 2> kKinds{VariableKind::Pose3, VariableKind::Pose3};
  Isometry3d z_;
};

class Se2PgoFactor final : public Factor {
 public:
  Se2PgoFactor(VariableKey from, VariableKey to, const Isometry2d& measurement,
               const Eigen::Matrix3d& information = Eigen::Matrix3d::Identity());

  std::string_view type_tag() const override { return "pgo2"; }
  std::span<const VariableKind> variable_kinds() const override { return kKinds; }
  int error_dim() const override { return 3; }
  std::optional<Eigen::VectorXd> error(ValueRefs values) const override;
  std::optional<Linearization> linearize(ValueRefs values) const override;
  std::unique_ptr<Factor> clone() const override { return std::make_unique<Se2PgoFactor>(*this); }

  const Isometry2d& measurement() const { return z_; }
  void set_measurement(const Isometry2d& z) { z_ = z; }

 private:
  static constexpr std::array<VariableKind, 2> kKinds{VariableKind::Pose2, VariableKind::Pose2};
  Isometry2d z_;
};

class Se2LandmarkFactor final : public Factor {
 public:
  Se2LandmarkFactor(VariableKey pose, VariableKey landmark, const Eigen::Vector2d& measurement,
                    const Eigen::Matrix2d& information = Eigen::Matrix2d::Identity());

  std::string_view type_tag() const override { return "landmark2"; }
  std::span<const VariableKind> variable_kinds() const override { return kKinds; }
  int error_dim() const override { return 2; }
  std::optional<Eigen::VectorXd> error(ValueRefs values) const override;
  std::optional<Linearization> linearize(ValueRefs values) const override;
  std::unique_ptr<Factor> clone() const override { return std::make_unique<Se2LandmarkFactor>(*this); }

  const Eigen::Vector2d& measurement() const { return z_; }
  void set_measurement(const Eigen::Vector2d& z) { z_ = z; }

 private:
  static constexpr std::array<VariableKind, 2> kKinds{VariableKind::Pose2, VariableKind::Point2};
  Eigen::Vector2d z_;
};

/// e = sum_i A_i x_i + offset - measurement over Euclidean variables
/// (scalar, 2D or 3D points; the kind follows the column count of A_i).
class LinearFactor final : public Factor {
 public:
  LinearFactor(std::vector<VariableKey> variables, std::vector<Eigen::MatrixXd> coefficients,
               const Eigen::VectorXd& offset, const Eigen::VectorXd& measurement,
               const Eigen::MatrixXd& information);

  std::string_view type_tag() const override { return "linear"; }
  std::span<const VariableKind> variable_kinds() const override { return kinds_; }
  int error_dim() const override { return static_cast<int>(measurement_.size()); }
  std::optional<Eigen::VectorXd> error(ValueRefs values) const override;
  std::optional<Linearization> linearize(ValueRefs values) const override;
  std::unique_ptr<Factor> clone() const override { return std::make_unique<LinearFactor>(*this); }

  const std::vector<Eigen::MatrixXd>& coefficients() const { return coefficients_; }
  const Eigen::VectorXd& offset() const { return offset_; }
  const Eigen::VectorXd& measurement() const { return measurement_; }

 private:
  std::vector<Eigen::MatrixXd> coefficients_;
  Eigen::VectorXd offset_;
  Eigen::VectorXd measurement_;
  std::vector<VariableKind> kinds_;
};

/// Euclidean variable value as a vector (scalar, 2D or 3D point).
Eigen::VectorXd euclidean_value(const VariableValue& value);

}  // namespace ils
