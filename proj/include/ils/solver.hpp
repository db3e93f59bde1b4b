#pragma once

// Optimization engine: linearization, normal-equation assembly with IRLS
// weights, Gauss-Newton / Levenberg-Marquardt loops, covariance recovery.

#include <Eigen/Core>

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ils/graph.hpp"
#include "ils/robust.hpp"
#include "ils/sparse_block.hpp"

namespace ils {

enum class Algorithm { GaussNewton, LevenbergMarquardt, DampedGaussNewton };
enum class Damping { DiagScaled, Identity };

std::string_view algorithm_name(Algorithm algorithm);
Algorithm parse_algorithm(std::string_view name);  ///< "gn", "lm", "dgn"
std::string_view damping_name(Damping damping);
Damping parse_damping(std::string_view name);      ///< "diag", "identity"

struct LmConfig {
  double lambda_init_tau = 1e-5;
  double lambda_up = 2.0;
  double lambda_down = 0.5;
  int max_inner = 10;
  Damping damping = Damping::DiagScaled;

  bool operator==(const LmConfig&) const = default;
};

struct SolverConfig {
  Algorithm algorithm = Algorithm::GaussNewton;
  int max_iterations = 100;
  double epsilon = 1e-6;
  LmConfig lm;
  double damped_gn_lambda = 1e-4;  ///< fixed lambda for DampedGaussNewton
  bool auto_fix_first = false;
  bool recompute_H_inliers = false;
  OrderingMethod ordering = OrderingMethod::MinimumDegree;

  /// Throws InvalidArgument for out-of-range settings.
  void validate() const;
  bool operator==(const SolverConfig&) const = default;
};

struct IterationStats {
  int iteration = 0;
  double chi2 = 0.0;    ///< objective sum_k 2 rho(u_k); plain chi2 for quadratic kernels
  double lambda = 0.0;  ///< 0 for Gauss-Newton
  int num_inliers = 0;
  int num_outliers = 0;
  int num_invalid = 0;
  double t_linearize = 0.0;
  double t_solve = 0.0;
  double t_update = 0.0;
};

/// One JSON object per line; fields in a fixed order. Times are included
/// only when `with_timings` is set so logs of identical runs compare equal.
std::string format_stats_line(const IterationStats& stats, bool with_timings = false);

enum class Termination { Converged, MaxIterations, MaxInnerRejections };
std::string_view termination_name(Termination termination);

struct SolverReport {
  std::vector<IterationStats> iterations;
  Termination termination = Termination::MaxIterations;
  double final_chi2 = 0.0;

  bool converged() const { return termination == Termination::Converged; }
};

/// Outcome of adding one factor to the normal equations.
struct FactorEvaluation {
  bool valid = false;
  double chi2 = 0.0;  ///< e^T Omega e
  double cost = 0.0;  ///< 2 rho(sqrt(chi2))
  bool inlier = true;
};

/// Error and Jacobians of a factor; nullopt when invalid (including chart
/// failures such as gimbal lock).
std::optional<Linearization> linearize(const Factor& factor, ValueRefs values);

/// Kernel for a factor: its own override, else the policy rule for its type.
const Kernel& resolve_kernel(const Factor& factor, const RobustifierPolicy& policy);

/// Adds one linearized factor to H and b. `blocks[s]` is the block index of
/// slot s, or -1 for a slot that is not optimized.
FactorEvaluation update_hb(BlockSparseMatrix& h, Eigen::VectorXd& b, const std::vector<int>& blocks,
                           const Linearization& lin, const Eigen::MatrixXd& information, const Kernel& kernel);

/// Normal equations over the optimizable variables of a view. The block
/// layout follows ascending variable key; the sparsity structure and the
/// fill-reducing ordering are fixed at construction.
class NormalEquations {
 public:
  struct Summary {
    double cost = 0.0;
    int num_inliers = 0;
    int num_outliers = 0;
    int num_invalid = 0;
    int num_active = 0;
  };

  NormalEquations(GraphView& view, const RobustifierPolicy& policy,
                  OrderingMethod ordering = OrderingMethod::MinimumDegree);

  const BlockLayout& layout() const { return layout_; }
  const std::vector<VariableKey>& keys() const { return keys_; }
  /// Block index of a key, or -1 when the variable is not optimized.
  int block_of(VariableKey key) const;

  /// Rebuilds H and b at the current values.
  Summary build();
  /// Rebuilds H and b with a quadratic kernel over inlier factors only.
  Summary build_inliers();
  /// Objective and counts only.
  Summary evaluate() const;

  const BlockSparseMatrix& hessian() const { return h_; }
  const Eigen::VectorXd& gradient() const { return b_; }

  /// Solves (H + lambda D) dx = -b. Throws NotPositiveDefinite with a gauge hint.
  Eigen::VectorXd solve(double lambda = 0.0, Damping damping = Damping::Identity) const;

  /// Applies X <- X [+] dx to every optimized variable.
  void update_solution(const Eigen::Ref<const Eigen::VectorXd>& dx);

  std::vector<Eigen::MatrixXd> covariance(const std::vector<VariableKey>& targets) const;

 private:
  Summary assemble(bool with_system, bool inliers_only);
  std::vector<int> slots_of(const Factor& factor) const;
  [[noreturn]] void rethrow_not_pd(const Error& error) const;

  GraphView* view_;
  const RobustifierPolicy* policy_;
  std::vector<VariableKey> keys_;
  std::map<VariableKey, int> index_;
  BlockLayout layout_;
  BlockSparseMatrix h_;
  Eigen::VectorXd b_;
  Permutation order_;
};

/// Fixes the lowest-key pose variable of the view when nothing touched by its
/// factors is Fixed. Returns the key it fixed, if any.
std::optional<VariableKey> fix_gauge(GraphView& view);

/// Applies dx to the optimized variables of a view (layout by ascending key).
void update_solution(GraphView& view, const Eigen::Ref<const Eigen::VectorXd>& dx);

SolverReport gauss_newton(GraphView& view, const SolverConfig& config, const RobustifierPolicy& policy = {});
SolverReport levenberg_marquardt(GraphView& view, const SolverConfig& config,
                                 const RobustifierPolicy& policy = {});
/// Dispatches on `config.algorithm`.
SolverReport optimize(GraphView& view, const SolverConfig& config, const RobustifierPolicy& policy = {});

/// Marginal covariance blocks of H^-1 at the current values.
std::vector<Eigen::MatrixXd> compute_covariance(GraphView& view, const std::vector<VariableKey>& targets,
                                                const SolverConfig& config = {},
                                                const RobustifierPolicy& policy = {});

}  // namespace ils
