#pragma once

// Factor-graph data model: variables with status and value stacks, factors
// with enable/invalid semantics, correspondence-driven factor pools, and
// views over a subset of a graph.

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include "ils/manifold.hpp"
#include "ils/robust.hpp"

namespace ils {

using VariableKey = std::int64_t;
using FactorKey = std::int64_t;

enum class VariableStatus { Active, Fixed, Disabled };

enum class VariableKind { Pose3, Pose2, Point3, Point2, Scalar };

/// Closed set of supported variable values. Adding a type means extending
/// this variant together with `perturbation_dim` and `apply_perturbation`.
using VariableValue = std::variant<Isometry3d, Isometry2d, Eigen::Vector3d, Eigen::Vector2d, double>;

VariableKind kind_of(const VariableValue& value);
int perturbation_dim(VariableKind kind);
std::string_view kind_name(VariableKind kind);

/// value [+] delta, dispatched on the variable type.
VariableValue apply_perturbation(const VariableValue& value, const Eigen::Ref<const Eigen::VectorXd>& delta);

struct Variable {
  VariableKey key = 0;
  VariableValue value;
  VariableStatus status = VariableStatus::Active;
  std::vector<VariableValue> backup_stack;

  VariableKind kind() const { return kind_of(value); }
  int dim() const { return perturbation_dim(kind()); }
};

/// Error and per-variable Jacobian blocks, in the factor's variable order.
struct Linearization {
  Eigen::VectorXd error;
  std::vector<Eigen::MatrixXd> jacobians;
};

/// Direct contribution to the normal equations, bypassing Jacobians.
/// `hessian[i][j]` (j <= i) and `gradient[i]` are indexed by factor variable slot.
struct DirectContribution {
  double chi2 = 0.0;
  std::vector<std::vector<Eigen::MatrixXd>> hessian;
  std::vector<Eigen::VectorXd> gradient;
};

using ValueRefs = std::span<const VariableValue* const>;

class Factor {
 public:
  Factor(std::vector<VariableKey> variables, Eigen::MatrixXd information);
  virtual ~Factor() = default;

  Factor(const Factor&) = default;
  Factor& operator=(const Factor&) = default;

  virtual std::string_view type_tag() const = 0;
  virtual std::span<const VariableKind> variable_kinds() const = 0;
  virtual int error_dim() const = 0;

  /// Error at the given values, or nullopt when the factor is invalid there.
  virtual std::optional<Eigen::VectorXd> error(ValueRefs values) const = 0;
  /// Error and Jacobians w.r.t. left perturbations of each variable at zero.
  virtual std::optional<Linearization> linearize(ValueRefs values) const = 0;

  virtual std::unique_ptr<Factor> clone() const = 0;

  /// Lowest API layer: factors may hand over their H/b contribution directly.
  virtual bool has_direct_contribution() const { return false; }
  virtual std::optional<DirectContribution> direct_contribution(ValueRefs /*values*/) const {
    return std::nullopt;
  }

  FactorKey key() const { return key_; }
  const std::vector<VariableKey>& variables() const { return variables_; }
  const Eigen::MatrixXd& information() const { return information_; }
  void set_information(const Eigen::MatrixXd& information);

  const std::optional<Kernel>& kernel() const { return kernel_; }
  void set_kernel(std::optional<Kernel> kernel) { kernel_ = kernel; }

  bool enabled() const { return enabled_; }
  void set_enabled(bool enabled) { enabled_ = enabled; }

  /// Reserved for hierarchical schemes; always 0 here.
  int level() const { return level_; }

 protected:
  std::vector<VariableKey>& mutable_variables() { return variables_; }

 private:
  friend class FactorGraph;

  FactorKey key_ = -1;
  std::vector<VariableKey> variables_;
  Eigen::MatrixXd information_;
  std::optional<Kernel> kernel_;
  bool enabled_ = true;
  int level_ = 0;
};

/// Throws NonPSDInformation unless `information` is square, symmetric to 1e-12
/// and has no eigenvalue below -1e-12 (relative).
void validate_information(const Eigen::MatrixXd& information, long location = -1);

/// A factor template that is re-bound to one point pair at a time.
class PairFactor : public Factor {
 public:
  using Factor::Factor;
  virtual void bind(const Eigen::Vector3d& moving, const Eigen::VectorXd& fixed) = 0;
};

struct Correspondence {
  std::size_t moving = 0;
  std::size_t fixed = 0;
};

/// Point data plus a correspondence list; each pass re-binds one stored
/// template factor instead of materializing a factor per pair.
struct CorrespondencePool {
  std::vector<Eigen::Vector3d> moving;
  std::vector<Eigen::VectorXd> fixed;
  std::vector<Correspondence> correspondences;
  std::shared_ptr<PairFactor> prototype;

  /// Binds the prototype to every correspondence in turn and hands it to `visit`.
  /// Throws IndexOutOfRange for a correspondence outside the point data.
  void for_each(const std::function<void(const Factor&)>& visit) const;
  void validate() const;
};

class FactorGraph {
 public:
  FactorGraph() = default;
  FactorGraph(const FactorGraph& other);
  FactorGraph& operator=(const FactorGraph& other);
  FactorGraph(FactorGraph&&) noexcept = default;
  FactorGraph& operator=(FactorGraph&&) noexcept = default;

  VariableKey add_variable(VariableKey key, VariableValue value,
                           VariableStatus status = VariableStatus::Active);
  /// Auto-assigned key (one past the largest key in use).
  VariableKey add_variable(VariableValue value, VariableStatus status = VariableStatus::Active);
  VariableKey next_variable_key() const;

  FactorKey add_factor(std::unique_ptr<Factor> factor, std::optional<FactorKey> key = std::nullopt);
  FactorKey add_pool(CorrespondencePool pool, std::optional<FactorKey> key = std::nullopt);
  FactorKey next_factor_key() const;

  bool has_variable(VariableKey key) const { return variables_.count(key) != 0; }
  bool has_factor(FactorKey key) const { return factors_.count(key) != 0; }
  bool has_pool(FactorKey key) const { return pools_.count(key) != 0; }

  Variable& variable(VariableKey key);
  const Variable& variable(VariableKey key) const;
  Factor& factor(FactorKey key);
  const Factor& factor(FactorKey key) const;
  CorrespondencePool& pool(FactorKey key);
  const CorrespondencePool& pool(FactorKey key) const;

  void set_status(VariableKey key, VariableStatus status) { variable(key).status = status; }

  const std::map<VariableKey, Variable>& variables() const { return variables_; }
  const std::map<FactorKey, std::unique_ptr<Factor>>& factors() const { return factors_; }
  const std::map<FactorKey, CorrespondencePool>& pools() const { return pools_; }

  /// Variable keys touched by a factor or by a pool's template.
  const std::vector<VariableKey>& factor_variables(FactorKey key) const;

  /// Number of logical factors (plain factors plus one per pool correspondence).
  std::size_t num_logical_factors() const;

  void push_values();
  void pop_values();
  void discard_top();

 private:
  void check_factor_variables(const Factor& factor) const;
  void check_unused(FactorKey key) const;

  std::map<VariableKey, Variable> variables_;
  std::map<FactorKey, std::unique_ptr<Factor>> factors_;
  std::map<FactorKey, CorrespondencePool> pools_;
};

/// A selection of variables and factors of a parent graph. Solvers operate on
/// views; variables outside the selection are never modified.
class GraphView {
 public:
  FactorGraph& graph() { return *graph_; }
  const FactorGraph& graph() const { return *graph_; }

  const std::set<VariableKey>& variable_keys() const { return variable_keys_; }
  const std::set<FactorKey>& factor_keys() const { return factor_keys_; }

  /// True for selected variables whose status is Active.
  bool is_optimizable(VariableKey key) const;

  /// Visits every enabled logical factor whose variables are all non-Disabled,
  /// in key order. Pool correspondences are visited through the bound template.
  void for_each_factor(const std::function<void(FactorKey, const Factor&)>& visit) const;

  /// Number of logical factors `for_each_factor` would visit.
  std::size_t num_active_factors() const;

  void push_values();
  void pop_values();
  void discard_top();

 private:
  friend GraphView make_view(FactorGraph&, std::set<VariableKey>, std::set<FactorKey>);
  GraphView(FactorGraph& graph, std::set<VariableKey> variables, std::set<FactorKey> factors)
      : graph_(&graph), variable_keys_(std::move(variables)), factor_keys_(std::move(factors)) {}

  bool factor_active(const std::vector<VariableKey>& keys, bool enabled) const;

  FactorGraph* graph_;
  std::set<VariableKey> variable_keys_;
  std::set<FactorKey> factor_keys_;
};

/// Throws InvalidSelection when a key is missing, or when a selected factor
/// touches a non-selected variable that is not Fixed (or Disabled) in the parent.
GraphView make_view(FactorGraph& graph, std::set<VariableKey> variable_keys, std::set<FactorKey> factor_keys);
GraphView full_view(FactorGraph& graph);

/// Gathers pointers to a factor's variable values in slot order.
std::vector<const VariableValue*> gather_values(const FactorGraph& graph, const Factor& factor);

}  // namespace ils
