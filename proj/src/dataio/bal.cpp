#include <Eigen/Geometry>

#include <algorithm>
#include <fstream>
#include <map>
#include <ostream>

#include "ils/dataio.hpp"
#include "ils/format.hpp"
#include "text.hpp"

namespace ils {

using detail::parse_double;
using detail::parse_error;
using detail::parse_integer;

namespace {

// The file's cameras look down -z with y up; ours look down +z with y down.
const Eigen::Matrix3d kFlip = Eigen::Vector3d(1.0, -1.0, -1.0).asDiagonal();

Eigen::Matrix3d rodrigues(const Eigen::Vector3d& w) {
  const double angle = w.norm();
  if (angle == 0.0) return Eigen::Matrix3d::Identity();
  return Eigen::AngleAxisd(angle, w / angle).toRotationMatrix();
}

Eigen::Vector3d rotation_vector(const Eigen::Matrix3d& r) {
  const Eigen::AngleAxisd aa(r);
  return aa.angle() * aa.axis();
}

/// (rotation vector, translation) of the world-to-camera map -> camera pose.
Isometry3d pose_of_params(const std::vector<double>& p) {
  const Eigen::Matrix3d r = kFlip * rodrigues(Eigen::Vector3d(p[0], p[1], p[2]));
  const Eigen::Vector3d t = kFlip * Eigen::Vector3d(p[3], p[4], p[5]);
  return Isometry3d(r, t).inverse();
}

std::vector<double> params_of_pose(const Isometry3d& pose) {
  const Isometry3d world_to_camera = pose.inverse();
  const Eigen::Vector3d w = rotation_vector(kFlip * world_to_camera.rotation());
  const Eigen::Vector3d t = kFlip * world_to_camera.translation();
  return {w.x(), w.y(), w.z(), t.x(), t.y(), t.z()};
}

std::vector<double> stable_params(const Isometry3d& pose) {
  const std::vector<double> p = params_of_pose(pose);
  const double rotation_step = detail::quantum_for(4.0);
  const double translation_step = detail::quantum_for(std::max({std::abs(p[3]), std::abs(p[4]), std::abs(p[5])}));
  return detail::snap_fixed_point(
      p, [](const std::vector<double>& q) { return params_of_pose(pose_of_params(q)); },
      {rotation_step, rotation_step, rotation_step, translation_step, translation_step, translation_step});
}

/// Reads whitespace-separated numbers regardless of line layout, tracking lines.
class TokenStream {
 public:
  explicit TokenStream(std::istream& in) : reader_(in) {}

  std::string_view next(const char* what) {
    while (pos_ >= tokens_.size()) {
      // A record cut short by the end of the file is reported at its last line.
      if (!reader_.next(tokens_)) {
        parse_error(std::max(1L, last_line_), std::string("unexpected end of file, expected ") + what);
      }
      if (!tokens_.empty()) last_line_ = reader_.line();
      pos_ = 0;
    }
    return tokens_[pos_++];
  }
  double number(const char* what) { return parse_double(next(what), reader_.line()); }
  long long integer(const char* what) { return parse_integer(next(what), reader_.line()); }
  long line() const { return reader_.line(); }
  bool exhausted() {
    if (pos_ < tokens_.size()) return false;
    if (!reader_.next(tokens_)) return true;
    pos_ = 0;
    return false;
  }

 private:
  detail::LineReader reader_;
  std::vector<std::string_view> tokens_;
  std::size_t pos_ = 0;
  long last_line_ = 0;
};

struct Observation {
  long long camera;
  long long point;
  Eigen::Vector2d uv;
  long line;
};

}  // namespace

FactorGraph load_bal(std::istream& in) {
  TokenStream tokens(in);
  const long long num_cameras = tokens.integer("camera count");
  const long long num_points = tokens.integer("point count");
  const long long num_observations = tokens.integer("observation count");
  if (num_cameras < 0 || num_points < 0 || num_observations < 0) parse_error(tokens.line(), "negative count");

  std::vector<Observation> observations;
  observations.reserve(static_cast<std::size_t>(num_observations));
  for (long long k = 0; k < num_observations; ++k) {
    Observation obs;
    obs.camera = tokens.integer("camera index");
    obs.line = tokens.line();
    obs.point = tokens.integer("point index");
    obs.uv.x() = tokens.number("u");
    obs.uv.y() = -tokens.number("v");
    if (obs.camera < 0 || obs.camera >= num_cameras || obs.point < 0 || obs.point >= num_points) {
      parse_error(obs.line, "observation index out of range");
    }
    observations.push_back(obs);
  }

  FactorGraph graph;
  std::vector<CameraIntrinsics> intrinsics;
  for (long long c = 0; c < num_cameras; ++c) {
    std::vector<double> p(9);
    for (double& v : p) v = tokens.number("camera parameter");
    if (!(p[6] > 0.0)) parse_error(tokens.line(), "focal length must be positive");
    graph.add_variable(c, pose_of_params(p));
    CameraIntrinsics cam;
    cam.K(0, 0) = p[6];
    cam.K(1, 1) = p[6];
    intrinsics.push_back(cam);
  }
  for (long long k = 0; k < num_points; ++k) {
    Eigen::Vector3d x;
    for (int i = 0; i < 3; ++i) x(i) = tokens.number("point coordinate");
    graph.add_variable(num_cameras + k, x);
  }
  if (!tokens.exhausted()) parse_error(tokens.line(), "trailing data after the declared counts");

  for (const auto& obs : observations) {
    graph.add_factor(std::make_unique<BaFactor>(obs.camera, num_cameras + obs.point,
                                                intrinsics[static_cast<std::size_t>(obs.camera)], obs.uv));
  }
  return graph;
}

FactorGraph load_bal(const std::filesystem::path& path) {
  std::ifstream in;
  detail::open_for_reading(in, path.string());
  return load_bal(in);
}

void save_bal(const FactorGraph& graph, std::ostream& out) {
  std::vector<VariableKey> cameras;
  std::vector<VariableKey> points;
  for (const auto& [key, v] : graph.variables()) {
    if (v.kind() == VariableKind::Pose3) {
      cameras.push_back(key);
    } else if (v.kind() == VariableKind::Point3) {
      points.push_back(key);
    } else {
      throw Error(ErrorCode::InvalidArgument, "variable " + std::to_string(key) + " is not a camera or a point");
    }
  }
  std::map<VariableKey, std::size_t> camera_index;
  std::map<VariableKey, std::size_t> point_index;
  for (std::size_t i = 0; i < cameras.size(); ++i) camera_index[cameras[i]] = i;
  for (std::size_t i = 0; i < points.size(); ++i) point_index[points[i]] = i;

  std::vector<const BaFactor*> factors;
  std::map<VariableKey, double> focal;
  for (const auto& [key, factor] : graph.factors()) {
    const auto* ba = dynamic_cast<const BaFactor*>(factor.get());
    if (!ba) throw Error(ErrorCode::InvalidArgument, "factor " + std::to_string(key) + " is not a BA factor");
    factors.push_back(ba);
    focal.emplace(ba->variables()[0], ba->camera().K(0, 0));
  }

  out << cameras.size() << ' ' << points.size() << ' ' << factors.size() << '\n';
  for (const BaFactor* f : factors) {
    out << camera_index.at(f->variables()[0]) << ' ' << point_index.at(f->variables()[1]) << ' '
        << format_double(f->measurement().x()) << ' ' << format_double(-f->measurement().y()) << '\n';
  }
  for (VariableKey key : cameras) {
    const auto p = stable_params(std::get<Isometry3d>(graph.variable(key).value));
    const auto it = focal.find(key);
    const double f = it == focal.end() ? 1.0 : it->second;
    for (double v : p) out << format_double(v) << '\n';
    out << format_double(f) << "\n0\n0\n";
  }
  for (VariableKey key : points) {
    const auto& x = std::get<Eigen::Vector3d>(graph.variable(key).value);
    for (int i = 0; i < 3; ++i) out << format_double(x(i)) << '\n';
  }
}

void save_bal(const FactorGraph& graph, const std::filesystem::path& path) {
  std::ofstream out;
  detail::open_for_writing(out, path.string());
  save_bal(graph, out);
  if (!out) throw Error(ErrorCode::IoError, "failed writing '" + path.string() + "'");
}

}  // namespace ils
