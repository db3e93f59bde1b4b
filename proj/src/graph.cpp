#include "ils/graph.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <string>

namespace ils {

VariableKind kind_of(const VariableValue& value) {
  return std::visit(
      [](const auto& v) -> VariableKind {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Isometry3d>) return VariableKind::Pose3;
        if constexpr (std::is_same_v<T, Isometry2d>) return VariableKind::Pose2;
        if constexpr (std::is_same_v<T, Eigen::Vector3d>) return VariableKind::Point3;
        if constexpr (std::is_same_v<T, Eigen::Vector2d>) return VariableKind::Point2;
        if constexpr (std::is_same_v<T, double>) return VariableKind::Scalar;
      },
      value);
}

int perturbation_dim(VariableKind kind) {
  switch (kind) {
    case VariableKind::Pose3: return 6;
    case VariableKind::Pose2: return 3;
    case VariableKind::Point3: return 3;
    case VariableKind::Point2: return 2;
    case VariableKind::Scalar: return 1;
  }
  return 0;
}

std::string_view kind_name(VariableKind kind) {
  switch (kind) {
    case VariableKind::Pose3: return "pose3";
    case VariableKind::Pose2: return "pose2";
    case VariableKind::Point3: return "point3";
    case VariableKind::Point2: return "point2";
    case VariableKind::Scalar: return "scalar";
  }
  return "unknown";
}

VariableValue apply_perturbation(const VariableValue& value, const Eigen::Ref<const Eigen::VectorXd>& delta) {
  if (delta.size() != perturbation_dim(kind_of(value))) {
    throw Error(ErrorCode::DimensionMismatch, "perturbation length does not match variable type");
  }
  return std::visit(
      [&](const auto& v) -> VariableValue {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Isometry3d>) {
          return boxplus(v, Vector6d(delta));
        } else if constexpr (std::is_same_v<T, Isometry2d>) {
          return boxplus(v, Eigen::Vector3d(delta));
        } else if constexpr (std::is_same_v<T, double>) {
          return v + delta(0);
        } else {
          return T(v + delta);
        }
      },
      value);
}

// ---------------------------------------------------------------------------
// Factor
// ---------------------------------------------------------------------------

void validate_information(const Eigen::MatrixXd& information, long location) {
  if (information.rows() != information.cols()) {
    throw Error(ErrorCode::NonPSDInformation, "information matrix is not square", location);
  }
  if (information.size() == 0) return;
  if (!information.allFinite()) {
    throw Error(ErrorCode::NonPSDInformation, "information matrix has non-finite entries", location);
  }
  const double scale = std::max(1.0, information.cwiseAbs().maxCoeff());
  if ((information - information.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw Error(ErrorCode::NonPSDInformation, "information matrix is not symmetric", location);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(information, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < -1e-12 * scale) {
    throw Error(ErrorCode::NonPSDInformation, "information matrix has a negative eigenvalue", location);
  }
}

Factor::Factor(std::vector<VariableKey> variables, Eigen::MatrixXd information)
    : variables_(std::move(variables)), information_(std::move(information)) {
  if (variables_.empty()) throw Error(ErrorCode::InvalidArgument, "a factor needs at least one variable");
  validate_information(information_);
}

void Factor::set_information(const Eigen::MatrixXd& information) {
  if (information.rows() != information_.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "information matrix size changed");
  }
  validate_information(information);
  information_ = information;
}

// ---------------------------------------------------------------------------
// CorrespondencePool
// ---------------------------------------------------------------------------

void CorrespondencePool::validate() const {
  if (!prototype) throw Error(ErrorCode::InvalidArgument, "correspondence pool without a template factor");
  for (std::size_t k = 0; k < correspondences.size(); ++k) {
    const auto& c = correspondences[k];
    if (c.moving >= moving.size() || c.fixed >= fixed.size()) {
      throw Error(ErrorCode::IndexOutOfRange,
                  "correspondence " + std::to_string(k) + " (" + std::to_string(c.moving) + ", " +
                      std::to_string(c.fixed) + ") outside point data",
                  static_cast<long>(k));
    }
  }
}

void CorrespondencePool::for_each(const std::function<void(const Factor&)>& visit) const {
  validate();
  for (const auto& c : correspondences) {
    prototype->bind(moving[c.moving], fixed[c.fixed]);
    visit(*prototype);
  }
}

// ---------------------------------------------------------------------------
// FactorGraph
// ---------------------------------------------------------------------------

FactorGraph::FactorGraph(const FactorGraph& other) : variables_(other.variables_) {
  for (const auto& [key, factor] : other.factors_) factors_.emplace(key, factor->clone());
  for (const auto& [key, pool] : other.pools_) {
    CorrespondencePool copy = pool;
    if (pool.prototype) {
      std::unique_ptr<Factor> cloned = pool.prototype->clone();
      copy.prototype.reset(static_cast<PairFactor*>(cloned.release()));
    }
    pools_.emplace(key, std::move(copy));
  }
}

FactorGraph& FactorGraph::operator=(const FactorGraph& other) {
  if (this != &other) {
    FactorGraph copy(other);
    *this = std::move(copy);
  }
  return *this;
}

VariableKey FactorGraph::add_variable(VariableKey key, VariableValue value, VariableStatus status) {
  if (key < 0) throw Error(ErrorCode::InvalidArgument, "variable keys are non-negative");
  if (variables_.count(key)) {
    throw Error(ErrorCode::DuplicateKey, "variable " + std::to_string(key) + " already exists", key);
  }
  Variable v;
  v.key = key;
  v.value = std::move(value);
  v.status = status;
  variables_.emplace(key, std::move(v));
  return key;
}

VariableKey FactorGraph::add_variable(VariableValue value, VariableStatus status) {
  return add_variable(next_variable_key(), std::move(value), status);
}

VariableKey FactorGraph::next_variable_key() const {
  return variables_.empty() ? 0 : variables_.rbegin()->first + 1;
}

FactorKey FactorGraph::next_factor_key() const {
  FactorKey next = 0;
  if (!factors_.empty()) next = std::max(next, factors_.rbegin()->first + 1);
  if (!pools_.empty()) next = std::max(next, pools_.rbegin()->first + 1);
  return next;
}

void FactorGraph::check_unused(FactorKey key) const {
  if (key < 0) throw Error(ErrorCode::InvalidArgument, "factor keys are non-negative");
  if (factors_.count(key) || pools_.count(key)) {
    throw Error(ErrorCode::DuplicateKey, "factor " + std::to_string(key) + " already exists", key);
  }
}

void FactorGraph::check_factor_variables(const Factor& factor) const {
  const auto kinds = factor.variable_kinds();
  const auto& keys = factor.variables();
  if (kinds.size() != keys.size()) {
    throw Error(ErrorCode::DimensionMismatch, std::string(factor.type_tag()) + " factor has wrong arity");
  }
  if (factor.information().rows() != factor.error_dim()) {
    throw Error(ErrorCode::DimensionMismatch,
                std::string(factor.type_tag()) + " information does not match the error dimension");
  }
  for (std::size_t s = 0; s < keys.size(); ++s) {
    auto it = variables_.find(keys[s]);
    if (it == variables_.end()) {
      throw Error(ErrorCode::DanglingVariable,
                  std::string(factor.type_tag()) + " factor references missing variable " +
                      std::to_string(keys[s]),
                  keys[s]);
    }
    if (it->second.kind() != kinds[s]) {
      throw Error(ErrorCode::DimensionMismatch,
                  "variable " + std::to_string(keys[s]) + " is " + std::string(kind_name(it->second.kind())) +
                      ", factor expects " + std::string(kind_name(kinds[s])),
                  keys[s]);
    }
  }
}

FactorKey FactorGraph::add_factor(std::unique_ptr<Factor> factor, std::optional<FactorKey> key) {
  if (!factor) throw Error(ErrorCode::InvalidArgument, "null factor");
  const FactorKey k = key.value_or(next_factor_key());
  check_unused(k);
  check_factor_variables(*factor);
  factor->key_ = k;
  factors_.emplace(k, std::move(factor));
  return k;
}

FactorKey FactorGraph::add_pool(CorrespondencePool pool, std::optional<FactorKey> key) {
  pool.validate();
  const FactorKey k = key.value_or(next_factor_key());
  check_unused(k);
  check_factor_variables(*pool.prototype);
  pool.prototype->key_ = k;
  pools_.emplace(k, std::move(pool));
  return k;
}

Variable& FactorGraph::variable(VariableKey key) {
  auto it = variables_.find(key);
  if (it == variables_.end()) {
    throw Error(ErrorCode::DanglingVariable, "no variable " + std::to_string(key), key);
  }
  return it->second;
}

const Variable& FactorGraph::variable(VariableKey key) const {
  return const_cast<FactorGraph*>(this)->variable(key);
}

Factor& FactorGraph::factor(FactorKey key) {
  auto it = factors_.find(key);
  if (it == factors_.end()) throw Error(ErrorCode::IndexOutOfRange, "no factor " + std::to_string(key), key);
  return *it->second;
}

const Factor& FactorGraph::factor(FactorKey key) const { return const_cast<FactorGraph*>(this)->factor(key); }

CorrespondencePool& FactorGraph::pool(FactorKey key) {
  auto it = pools_.find(key);
  if (it == pools_.end()) throw Error(ErrorCode::IndexOutOfRange, "no pool " + std::to_string(key), key);
  return it->second;
}

const CorrespondencePool& FactorGraph::pool(FactorKey key) const {
  return const_cast<FactorGraph*>(this)->pool(key);
}

const std::vector<VariableKey>& FactorGraph::factor_variables(FactorKey key) const {
  if (auto it = factors_.find(key); it != factors_.end()) return it->second->variables();
  return pool(key).prototype->variables();
}

std::size_t FactorGraph::num_logical_factors() const {
  std::size_t n = factors_.size();
  for (const auto& [key, pool] : pools_) n += pool.correspondences.size();
  return n;
}

void FactorGraph::push_values() {
  for (auto& [key, v] : variables_) v.backup_stack.push_back(v.value);
}

void FactorGraph::pop_values() {
  for (const auto& [key, v] : variables_) {
    if (v.backup_stack.empty()) throw Error(ErrorCode::EmptyStack, "pop on an empty value stack", key);
  }
  for (auto& [key, v] : variables_) {
    if (v.status != VariableStatus::Fixed) v.value = v.backup_stack.back();
    v.backup_stack.pop_back();
  }
}

void FactorGraph::discard_top() {
  for (const auto& [key, v] : variables_) {
    if (v.backup_stack.empty()) throw Error(ErrorCode::EmptyStack, "discard on an empty value stack", key);
  }
  for (auto& [key, v] : variables_) v.backup_stack.pop_back();
}

std::vector<const VariableValue*> gather_values(const FactorGraph& graph, const Factor& factor) {
  std::vector<const VariableValue*> values;
  values.reserve(factor.variables().size());
  for (VariableKey k : factor.variables()) values.push_back(&graph.variable(k).value);
  return values;
}

// ---------------------------------------------------------------------------
// GraphView
// ---------------------------------------------------------------------------

GraphView make_view(FactorGraph& graph, std::set<VariableKey> variable_keys, std::set<FactorKey> factor_keys) {
  for (VariableKey k : variable_keys) {
    if (!graph.has_variable(k)) {
      throw Error(ErrorCode::InvalidSelection, "view selects missing variable " + std::to_string(k), k);
    }
  }
  for (FactorKey k : factor_keys) {
    if (!graph.has_factor(k) && !graph.has_pool(k)) {
      throw Error(ErrorCode::InvalidSelection, "view selects missing factor " + std::to_string(k), k);
    }
    for (VariableKey v : graph.factor_variables(k)) {
      if (variable_keys.count(v)) continue;
      if (graph.variable(v).status == VariableStatus::Active) {
        throw Error(ErrorCode::InvalidSelection,
                    "factor " + std::to_string(k) + " straddles the view boundary at active variable " +
                        std::to_string(v),
                    k);
      }
    }
  }
  return GraphView(graph, std::move(variable_keys), std::move(factor_keys));
}

GraphView full_view(FactorGraph& graph) {
  std::set<VariableKey> vars;
  for (const auto& [k, v] : graph.variables()) vars.insert(k);
  std::set<FactorKey> facs;
  for (const auto& [k, f] : graph.factors()) facs.insert(k);
  for (const auto& [k, p] : graph.pools()) facs.insert(k);
  return make_view(graph, std::move(vars), std::move(facs));
}

bool GraphView::is_optimizable(VariableKey key) const {
  return variable_keys_.count(key) && graph_->variable(key).status == VariableStatus::Active;
}

bool GraphView::factor_active(const std::vector<VariableKey>& keys, bool enabled) const {
  if (!enabled) return false;
  for (VariableKey k : keys) {
    if (graph_->variable(k).status == VariableStatus::Disabled) return false;
  }
  return true;
}

void GraphView::for_each_factor(const std::function<void(FactorKey, const Factor&)>& visit) const {
  for (FactorKey key : factor_keys_) {
    if (graph_->has_factor(key)) {
      const Factor& f = graph_->factor(key);
      if (factor_active(f.variables(), f.enabled())) visit(key, f);
    } else {
      const CorrespondencePool& pool = graph_->pool(key);
      if (!factor_active(pool.prototype->variables(), pool.prototype->enabled())) continue;
      pool.for_each([&](const Factor& f) { visit(key, f); });
    }
  }
}

std::size_t GraphView::num_active_factors() const {
  std::size_t n = 0;
  for (FactorKey key : factor_keys_) {
    if (graph_->has_factor(key)) {
      const Factor& f = graph_->factor(key);
      if (factor_active(f.variables(), f.enabled())) ++n;
    } else {
      const CorrespondencePool& pool = graph_->pool(key);
      if (factor_active(pool.prototype->variables(), pool.prototype->enabled())) {
        n += pool.correspondences.size();
      }
    }
  }
  return n;
}

void GraphView::push_values() {
  for (VariableKey k : variable_keys_) {
    Variable& v = graph_->variable(k);
    v.backup_stack.push_back(v.value);
  }
}

void GraphView::pop_values() {
  for (VariableKey k : variable_keys_) {
    if (graph_->variable(k).backup_stack.empty()) {
      throw Error(ErrorCode::EmptyStack, "pop on an empty value stack", k);
    }
  }
  for (VariableKey k : variable_keys_) {
    Variable& v = graph_->variable(k);
    if (v.status != VariableStatus::Fixed) v.value = v.backup_stack.back();
    v.backup_stack.pop_back();
  }
}

void GraphView::discard_top() {
  for (VariableKey k : variable_keys_) {
    if (graph_->variable(k).backup_stack.empty()) {
      throw Error(ErrorCode::EmptyStack, "discard on an empty value stack", k);
    }
  }
  for (VariableKey k : variable_keys_) graph_->variable(k).backup_stack.pop_back();
}

}  // namespace ils
