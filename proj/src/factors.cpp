#include "ils/factors.hpp"

#include <Eigen/Eigenvalues>

namespace ils {

CameraIntrinsics CameraIntrinsics::pinhole(double fx, double fy, double cx, double cy, int width, int height,
                                           double min_depth) {
  CameraIntrinsics cam;
  cam.K << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
  cam.width = width;
  cam.height = height;
  cam.min_depth = min_depth;
  cam.validate();
  return cam;
}

void CameraIntrinsics::validate() const {
  if (!K.allFinite() || K(2, 0) != 0.0 || K(2, 1) != 0.0 || K(2, 2) != 1.0) {
    throw Error(ErrorCode::InvalidArgument, "camera matrix must have last row (0, 0, 1)");
  }
  if (width < 0 || height < 0) throw Error(ErrorCode::InvalidArgument, "negative image size");
  if (!(min_depth >= 0.0)) throw Error(ErrorCode::InvalidArgument, "negative minimum depth");
}

bool CameraIntrinsics::in_image(const Eigen::Vector2d& uv) const {
  if (width <= 0 || height <= 0) return uv.allFinite();
  return uv.x() >= 0.0 && uv.x() < width && uv.y() >= 0.0 && uv.y() < height;
}

// ---------------------------------------------------------------------------
// Jacobians
// ---------------------------------------------------------------------------

Eigen::Matrix<double, 3, 6> icp_jacobian(const Isometry3d& x, const Eigen::Vector3d& moving) {
  Eigen::Matrix<double, 3, 6> j;
  j.block<3, 3>(0, 0).setIdentity();
  j.block<3, 3>(0, 3) = -skew<double>(moving);
  return -x.rotation().transpose() * j;
}

Eigen::Matrix<double, 2, 3> hom_jacobian(const Eigen::Vector3d& p) {
  const double iz = 1.0 / p.z();
  Eigen::Matrix<double, 2, 3> j;
  j << iz, 0.0, -p.x() * iz * iz, 0.0, iz, -p.y() * iz * iz;
  return j;
}

std::optional<Eigen::Matrix<double, 2, 6>> proj_jacobian(const Isometry3d& x, const CameraIntrinsics& cam,
                                                         const Eigen::Vector3d& point) {
  const Eigen::Vector3d p_cam = cam.K * (x.rotation().transpose() * (point - x.translation()));
  if (!(p_cam.z() > cam.min_depth)) return std::nullopt;
  const Eigen::Vector2d uv = p_cam.head<2>() / p_cam.z();
  if (!cam.in_image(uv)) return std::nullopt;
  return Eigen::Matrix<double, 2, 6>(hom_jacobian(p_cam) * cam.K * icp_jacobian(x, point));
}

std::optional<BaJacobians> ba_jacobians(const Isometry3d& camera, const Eigen::Vector3d& landmark,
                                        const CameraIntrinsics& cam) {
  const auto pose = proj_jacobian(camera, cam, landmark);
  if (!pose) return std::nullopt;
  const Eigen::Vector3d p_cam = cam.K * (camera.rotation().transpose() * (landmark - camera.translation()));
  BaJacobians j;
  j.pose = *pose;
  j.landmark = hom_jacobian(p_cam) * cam.K * camera.rotation().transpose();
  return j;
}

PgoJacobians pgo_jacobians(const Isometry3d& from, const Isometry3d& to, const Isometry3d& measurement) {
  using D = Dual<12>;
  const Isometry3<D> xn = from.cast<D>();
  const Isometry3<D> xm = to.cast<D>();
  const Isometry3<D> z = measurement.cast<D>();
  const auto jac = jacobian_of<12>([&](const Eigen::Matrix<D, 12, 1>& d) {
    const Vector6<D> dn = d.head<6>();
    const Vector6<D> dm = d.tail<6>();
    return pgo_error<D>(boxplus(xn, dn), boxplus(xm, dm), z);
  });
  return {jac.leftCols<6>(), jac.rightCols<6>()};
}

Se2PgoJacobians se2_pgo_jacobians(const Isometry2d& from, const Isometry2d& to, const Isometry2d& measurement) {
  using D = Dual<6>;
  const Isometry2<D> xn = from.cast<D>();
  const Isometry2<D> xm = to.cast<D>();
  const Isometry2<D> z = measurement.cast<D>();
  const auto jac = jacobian_of<6>([&](const Eigen::Matrix<D, 6, 1>& d) {
    const Vector3<D> dn = d.head<3>();
    const Vector3<D> dm = d.tail<3>();
    return se2_pgo_error<D>(boxplus(xn, dn), boxplus(xm, dm), z);
  });
  return {jac.leftCols<3>(), jac.rightCols<3>()};
}

Se2LandmarkJacobians se2_landmark_jacobians(const Isometry2d& pose, const Eigen::Vector2d& landmark,
                                            const Eigen::Vector2d& z) {
  using D = Dual<5>;
  const Isometry2<D> x = pose.cast<D>();
  const Vector2<D> l = landmark.cast<D>();
  const auto jac = jacobian_of<5>([&](const Eigen::Matrix<D, 5, 1>& d) {
    const Vector3<D> dx = d.head<3>();
    const Vector2<D> dl = d.tail<2>();
    return se2_landmark_error<D>(boxplus(x, dx), Vector2<D>(l + dl), z);
  });
  return {jac.leftCols<3>(), jac.rightCols<2>()};
}

// ---------------------------------------------------------------------------
// Factors
// ---------------------------------------------------------------------------

namespace {

template <typename T>
const T& value_as(ValueRefs values, std::size_t slot) {
  return std::get<T>(*values[slot]);
}

}  // namespace

Eigen::VectorXd euclidean_value(const VariableValue& value) {
  if (const auto* s = std::get_if<double>(&value)) return Eigen::VectorXd::Constant(1, *s);
  if (const auto* p = std::get_if<Eigen::Vector2d>(&value)) return *p;
  if (const auto* p = std::get_if<Eigen::Vector3d>(&value)) return *p;
  throw Error(ErrorCode::InvalidArgument, "variable is not Euclidean");
}

IcpFactor::IcpFactor(VariableKey pose, const Eigen::Vector3d& moving, const Eigen::Vector3d& fixed,
                     const Eigen::Matrix3d& information)
    : PairFactor({pose}, information), moving_(moving), fixed_(fixed) {}

void IcpFactor::bind(const Eigen::Vector3d& moving, const Eigen::VectorXd& fixed) {
  if (fixed.size() != 3) throw Error(ErrorCode::DimensionMismatch, "icp needs a 3D fixed point");
  moving_ = moving;
  fixed_ = fixed;
}

std::optional<Eigen::VectorXd> IcpFactor::error(ValueRefs values) const {
  return Eigen::VectorXd(icp_error<double>(value_as<Isometry3d>(values, 0), moving_, fixed_));
}

std::optional<Linearization> IcpFactor::linearize(ValueRefs values) const {
  const auto& x = value_as<Isometry3d>(values, 0);
  Linearization lin;
  lin.error = icp_error<double>(x, moving_, fixed_);
  lin.jacobians.emplace_back(icp_jacobian(x, moving_));
  return lin;
}

ProjectiveFactor::ProjectiveFactor(VariableKey pose, const CameraIntrinsics& cam, const Eigen::Vector3d& moving,
                                   const Eigen::Vector2d& measurement, const Eigen::Matrix2d& information)
    : PairFactor({pose}, information), cam_(cam), moving_(moving), z_(measurement) {
  cam_.validate();
}

void ProjectiveFactor::bind(const Eigen::Vector3d& moving, const Eigen::VectorXd& fixed) {
  if (fixed.size() != 2) throw Error(ErrorCode::DimensionMismatch, "projective needs a 2D measurement");
  moving_ = moving;
  z_ = fixed;
}

std::optional<Eigen::VectorXd> ProjectiveFactor::error(ValueRefs values) const {
  const auto e = proj_error<double>(value_as<Isometry3d>(values, 0), cam_, moving_, z_);
  if (!e) return std::nullopt;
  return Eigen::VectorXd(*e);
}

std::optional<Linearization> ProjectiveFactor::linearize(ValueRefs values) const {
  const auto& x = value_as<Isometry3d>(values, 0);
  const auto e = proj_error<double>(x, cam_, moving_, z_);
  const auto j = proj_jacobian(x, cam_, moving_);
  if (!e || !j) return std::nullopt;
  Linearization lin;
  lin.error = *e;
  lin.jacobians.emplace_back(*j);
  return lin;
}

BaFactor::BaFactor(VariableKey camera, VariableKey landmark, const CameraIntrinsics& cam,
                   const Eigen::Vector2d& measurement, const Eigen::Matrix2d& information)
    : Factor({camera, landmark}, information), cam_(cam), z_(measurement) {
  cam_.validate();
}

std::optional<Eigen::VectorXd> BaFactor::error(ValueRefs values) const {
  const auto e =
      ba_error<double>(value_as<Isometry3d>(values, 0), value_as<Eigen::Vector3d>(values, 1), cam_, z_);
  if (!e) return std::nullopt;
  return Eigen::VectorXd(*e);
}

std::optional<Linearization> BaFactor::linearize(ValueRefs values) const {
  const auto& x = value_as<Isometry3d>(values, 0);
  const auto& l = value_as<Eigen::Vector3d>(values, 1);
  const auto e = ba_error<double>(x, l, cam_, z_);
  const auto j = ba_jacobians(x, l, cam_);
  if (!e || !j) return std::nullopt;
  Linearization lin;
  lin.error = *e;
  lin.jacobians.emplace_back(j->pose);
  lin.jacobians.emplace_back(j->landmark);
  return lin;
}

Se3PgoFactor::Se3PgoFactor(VariableKey from, VariableKey to, const Isometry3d& measurement,
                           const Matrix6d& information)
    : Factor({from, to}, information), z_(measurement) {}

std::optional<Eigen::VectorXd> Se3PgoFactor::error(ValueRefs values) const {
  try {
    return Eigen::VectorXd(
        pgo_error<double>(value_as<Isometry3d>(values, 0), value_as<Isometry3d>(values, 1), z_));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::GimbalLock) return std::nullopt;
    throw;
  }
}

std::optional<Linearization> Se3PgoFactor::linearize(ValueRefs values) const {
  const auto& xn = value_as<Isometry3d>(values, 0);
  const auto& xm = value_as<Isometry3d>(values, 1);
  try {
    Linearization lin;
    lin.error = pgo_error<double>(xn, xm, z_);
    const auto j = pgo_jacobians(xn, xm, z_);
    lin.jacobians.emplace_back(j.from);
    lin.jacobians.emplace_back(j.to);
    return lin;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::GimbalLock) return std::nullopt;
    throw;
  }
}

Se2PgoFactor::Se2PgoFactor(VariableKey from, VariableKey to, const Isometry2d& measurement,
                           const Eigen::Matrix3d& information)
    : Factor({from, to}, information), z_(measurement) {}

std::optional<Eigen::VectorXd> Se2PgoFactor::error(ValueRefs values) const {
  return Eigen::VectorXd(
      se2_pgo_error<double>(value_as<Isometry2d>(values, 0), value_as<Isometry2d>(values, 1), z_));
}

std::optional<Linearization> Se2PgoFactor::linearize(ValueRefs values) const {
  const auto& xn = value_as<Isometry2d>(values, 0);
  const auto& xm = value_as<Isometry2d>(values, 1);
  Linearization lin;
  lin.error = se2_pgo_error<double>(xn, xm, z_);
  const auto j = se2_pgo_jacobians(xn, xm, z_);
  lin.jacobians.emplace_back(j.from);
  lin.jacobians.emplace_back(j.to);
  return lin;
}

Se2LandmarkFactor::Se2LandmarkFactor(VariableKey pose, VariableKey landmark, const Eigen::Vector2d& measurement,
                                     const Eigen::Matrix2d& information)
    : Factor({pose, landmark}, information), z_(measurement) {}

std::optional<Eigen::VectorXd> Se2LandmarkFactor::error(ValueRefs values) const {
  return Eigen::VectorXd(
      se2_landmark_error<double>(value_as<Isometry2d>(values, 0), value_as<Eigen::Vector2d>(values, 1), z_));
}

std::optional<Linearization> Se2LandmarkFactor::linearize(ValueRefs values) const {
  const auto& x = value_as<Isometry2d>(values, 0);
  const auto& l = value_as<Eigen::Vector2d>(values, 1);
  Linearization lin;
  lin.error = se2_landmark_error<double>(x, l, z_);
  const auto j = se2_landmark_jacobians(x, l, z_);
  lin.jacobians.emplace_back(j.pose);
  lin.jacobians.emplace_back(j.landmark);
  return lin;
}

namespace {

VariableKind euclidean_kind(Eigen::Index cols) {
  switch (cols) {
    case 1: return VariableKind::Scalar;
    case 2: return VariableKind::Point2;
    case 3: return VariableKind::Point3;
    default: throw Error(ErrorCode::DimensionMismatch, "linear factor blocks need 1, 2 or 3 columns");
  }
}

}  // namespace

LinearFactor::LinearFactor(std::vector<VariableKey> variables, std::vector<Eigen::MatrixXd> coefficients,
                           const Eigen::VectorXd& offset, const Eigen::VectorXd& measurement,
                           const Eigen::MatrixXd& information)
    : Factor(std::move(variables), information),
      coefficients_(std::move(coefficients)),
      offset_(offset),
      measurement_(measurement) {
  if (coefficients_.size() != this->variables().size()) {
    throw Error(ErrorCode::DimensionMismatch, "one coefficient block per variable expected");
  }
  for (const auto& a : coefficients_) {
    if (a.rows() != measurement_.size()) throw Error(ErrorCode::DimensionMismatch, "coefficient row count");
    kinds_.push_back(euclidean_kind(a.cols()));
  }
  if (offset_.size() != measurement_.size()) throw Error(ErrorCode::DimensionMismatch, "offset size");
}

std::optional<Eigen::VectorXd> LinearFactor::error(ValueRefs values) const {
  Eigen::VectorXd e = offset_ - measurement_;
  for (std::size_t i = 0; i < coefficients_.size(); ++i) e += coefficients_[i] * euclidean_value(*values[i]);
  return e;
}

std::optional<Linearization> LinearFactor::linearize(ValueRefs values) const {
  Linearization lin;
  lin.error = *error(values);
  lin.jacobians = coefficients_;
  return lin;
}

}  // namespace ils
