#include <Eigen/Geometry>

#include <cmath>
#include <deque>
#include <map>
#include <set>

#include "ils/dataio.hpp"
#include "ils/rng.hpp"

namespace ils {

void NoiseSpec::validate() const {
  if ((sigma_t.array() < 0.0).any() || (sigma_r.array() < 0.0).any() || (sigma_land.array() < 0.0).any() ||
      !sigma_t.allFinite() || !sigma_r.allFinite() || !sigma_land.allFinite()) {
    throw Error(ErrorCode::InvalidArgument, "noise variances must be finite and non-negative");
  }
}

namespace {

Eigen::VectorXd draw(Rng& rng, const Eigen::VectorXd& variances) {
  Eigen::VectorXd eps(variances.size());
  for (Eigen::Index i = 0; i < variances.size(); ++i) eps(i) = rng.normal() * std::sqrt(variances(i));
  return eps;
}

std::optional<Eigen::MatrixXd> inverse_covariance(const Eigen::VectorXd& variances) {
  if ((variances.array() > 0.0).all()) return Eigen::MatrixXd(variances.cwiseInverse().asDiagonal());
  return std::nullopt;
}

}  // namespace

FactorGraph perturb_awgn(const FactorGraph& graph, const NoiseSpec& spec) {
  spec.validate();
  FactorGraph out = graph;
  Rng rng(spec.seed);
  for (const auto& entry : graph.factors()) {
    Factor& factor = out.factor(entry.first);
    if (auto* f = dynamic_cast<Se3PgoFactor*>(&factor)) {
      Eigen::VectorXd var(6);
      var << spec.sigma_t, spec.sigma_r;
      const Eigen::VectorXd eps = draw(rng, var);
      if (!eps.isZero(0.0)) f->set_measurement(f->measurement() * v2t<double>(Vector6d(eps)));
      if (auto omega = inverse_covariance(var)) f->set_information(*omega);
    } else if (auto* f2 = dynamic_cast<Se2PgoFactor*>(&factor)) {
      const Eigen::Vector3d var(spec.sigma_t(0), spec.sigma_t(1), spec.sigma_r(2));
      const Eigen::VectorXd eps = draw(rng, var);
      if (!eps.isZero(0.0)) f2->set_measurement(f2->measurement() * v2t<double>(Eigen::Vector3d(eps)));
      if (auto omega = inverse_covariance(var)) f2->set_information(*omega);
    } else if (auto* l = dynamic_cast<Se2LandmarkFactor*>(&factor)) {
      const Eigen::VectorXd var = spec.sigma_land.head<2>();
      const Eigen::VectorXd eps = draw(rng, var);
      if (!eps.isZero(0.0)) l->set_measurement(l->measurement() + eps);
      if (auto omega = inverse_covariance(var)) l->set_information(*omega);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Breadth-first initialization
// ---------------------------------------------------------------------------

namespace {

bool is_pose(const Variable& v) {
  return v.kind() == VariableKind::Pose3 || v.kind() == VariableKind::Pose2;
}

struct Edge {
  VariableKey other;
  const Factor* factor;
  bool forward;  ///< the current pose is the factor's first variable
};

VariableValue propagate(const VariableValue& from, const Factor& factor, bool forward) {
  if (const auto* f = dynamic_cast<const Se3PgoFactor*>(&factor)) {
    const auto& x = std::get<Isometry3d>(from);
    return forward ? x * f->measurement() : x * f->measurement().inverse();
  }
  const auto* f2 = dynamic_cast<const Se2PgoFactor*>(&factor);
  const auto& x = std::get<Isometry2d>(from);
  return forward ? x * f2->measurement() : x * f2->measurement().inverse();
}

bool usable(const FactorGraph& graph, const Factor& factor) {
  if (!factor.enabled()) return false;
  for (VariableKey key : factor.variables()) {
    if (graph.variable(key).status == VariableStatus::Disabled) return false;
  }
  return true;
}

std::string describe_components(const FactorGraph& graph, const std::map<VariableKey, std::vector<Edge>>& adjacency,
                                const std::set<VariableKey>& unreached) {
  std::string text;
  std::set<VariableKey> done;
  for (VariableKey start : unreached) {
    if (done.count(start)) continue;
    std::vector<VariableKey> component;
    std::deque<VariableKey> queue{start};
    done.insert(start);
    while (!queue.empty()) {
      const VariableKey key = queue.front();
      queue.pop_front();
      component.push_back(key);
      auto it = adjacency.find(key);
      if (it == adjacency.end()) continue;
      for (const Edge& e : it->second) {
        if (!done.count(e.other) && is_pose(graph.variable(e.other))) {
          done.insert(e.other);
          queue.push_back(e.other);
        }
      }
    }
    std::sort(component.begin(), component.end());
    text += " {";
    for (std::size_t i = 0; i < component.size(); ++i) text += (i ? "," : "") + std::to_string(component[i]);
    text += "}";
  }
  return text;
}

}  // namespace

void breadth_first_init(FactorGraph& graph, VariableKey root) {
  if (!graph.has_variable(root) || !is_pose(graph.variable(root))) {
    throw Error(ErrorCode::InvalidArgument, "root " + std::to_string(root) + " is not a pose variable");
  }
  std::map<VariableKey, std::vector<Edge>> adjacency;
  for (const auto& [key, factor] : graph.factors()) {
    const bool pose_edge = dynamic_cast<const Se3PgoFactor*>(factor.get()) != nullptr ||
                           dynamic_cast<const Se2PgoFactor*>(factor.get()) != nullptr;
    if (!pose_edge || !usable(graph, *factor)) continue;
    const auto& vars = factor->variables();
    adjacency[vars[0]].push_back({vars[1], factor.get(), true});
    adjacency[vars[1]].push_back({vars[0], factor.get(), false});
  }

  graph.set_status(root, VariableStatus::Fixed);
  std::set<VariableKey> visited{root};
  std::deque<VariableKey> queue{root};
  while (!queue.empty()) {
    const VariableKey key = queue.front();
    queue.pop_front();
    auto it = adjacency.find(key);
    if (it == adjacency.end()) continue;
    for (const Edge& e : it->second) {
      if (visited.count(e.other)) continue;
      visited.insert(e.other);
      Variable& next = graph.variable(e.other);
      if (next.status != VariableStatus::Fixed) next.value = propagate(graph.variable(key).value, *e.factor, e.forward);
      queue.push_back(e.other);
    }
  }

  std::set<VariableKey> unreached;
  for (const auto& [key, v] : graph.variables()) {
    if (is_pose(v) && v.status != VariableStatus::Disabled && !visited.count(key)) unreached.insert(key);
  }
  if (!unreached.empty()) {
    throw Error(ErrorCode::Disconnected, "poses unreachable from root " + std::to_string(root) + ":" +
                                             describe_components(graph, adjacency, unreached));
  }

  std::set<VariableKey> placed;
  for (const auto& [key, factor] : graph.factors()) {
    const auto* obs = dynamic_cast<const Se2LandmarkFactor*>(factor.get());
    if (!obs || !usable(graph, *factor)) continue;
    const VariableKey landmark = obs->variables()[1];
    Variable& l = graph.variable(landmark);
    if (placed.count(landmark) || l.status == VariableStatus::Fixed) continue;
    const auto& x = std::get<Isometry2d>(graph.variable(obs->variables()[0]).value);
    l.value = Eigen::Vector2d(x * obs->measurement());
    placed.insert(landmark);
  }
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

double rotation_angle(const Eigen::Matrix3d& r) {
  return Eigen::AngleAxisd(Eigen::Quaterniond(r).normalized()).angle();
}

namespace {

struct PoseSample {
  Eigen::Matrix3d rotation;
  Eigen::Vector3d position;
};

std::optional<PoseSample> pose_sample(const Variable& v) {
  if (const auto* x = std::get_if<Isometry3d>(&v.value)) return PoseSample{x->rotation(), x->translation()};
  if (const auto* x2 = std::get_if<Isometry2d>(&v.value)) {
    Eigen::Matrix3d r = Eigen::Matrix3d::Identity();
    r.topLeftCorner<2, 2>() = x2->rotation();
    return PoseSample{r, Eigen::Vector3d(x2->translation().x(), x2->translation().y(), 0.0)};
  }
  return std::nullopt;
}

std::map<VariableKey, PoseSample> pose_samples(const FactorGraph& graph) {
  std::map<VariableKey, PoseSample> samples;
  for (const auto& [key, v] : graph.variables()) {
    if (auto s = pose_sample(v)) samples.emplace(key, *s);
  }
  return samples;
}

}  // namespace

TrajectoryMetrics ate_rmse(const FactorGraph& estimate, const FactorGraph& ground_truth, bool align) {
  const auto est = pose_samples(estimate);
  const auto gt = pose_samples(ground_truth);
  if (est.size() != gt.size() || !std::equal(est.begin(), est.end(), gt.begin(),
                                              [](const auto& a, const auto& b) { return a.first == b.first; })) {
    throw Error(ErrorCode::KeyMismatch, "estimate and ground truth hold different pose keys");
  }
  TrajectoryMetrics metrics;
  if (est.empty()) return metrics;

  Eigen::Matrix3Xd src(3, static_cast<Eigen::Index>(est.size()));
  Eigen::Matrix3Xd dst(3, static_cast<Eigen::Index>(gt.size()));
  Eigen::Index col = 0;
  for (auto a = est.begin(), b = gt.begin(); a != est.end(); ++a, ++b, ++col) {
    src.col(col) = a->second.position;
    dst.col(col) = b->second.position;
  }
  Eigen::Matrix3d r_align = Eigen::Matrix3d::Identity();
  Eigen::Vector3d t_align = Eigen::Vector3d::Zero();
  if (align) {
    const Eigen::Matrix4d t = Eigen::umeyama(src, dst, false);
    r_align = t.topLeftCorner<3, 3>();
    t_align = t.topRightCorner<3, 1>();
  }

  double pos = 0.0;
  double rot = 0.0;
  col = 0;
  for (auto a = est.begin(), b = gt.begin(); a != est.end(); ++a, ++b, ++col) {
    pos += (r_align * src.col(col) + t_align - dst.col(col)).squaredNorm();
    const double angle = rotation_angle(b->second.rotation.transpose() * r_align * a->second.rotation);
    rot += angle * angle;
  }
  const double n = static_cast<double>(est.size());
  metrics.ate_pos = std::sqrt(pos / n);
  metrics.ate_rot = std::sqrt(rot / n);
  return metrics;
}

RegistrationError registration_error(const Isometry3d& estimate, const Isometry3d& ground_truth) {
  RegistrationError e;
  e.e_pos = (estimate.translation() - ground_truth.translation()).norm();
  e.e_rot = rotation_angle(ground_truth.rotation().transpose() * estimate.rotation());
  return e;
}

}  // namespace ils
