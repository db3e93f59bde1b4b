#include "ils/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include "ils/errors.hpp"
#include "ils/format.hpp"

namespace ils {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

bool invalidating(ErrorCode code) {
  return code == ErrorCode::GimbalLock || code == ErrorCode::DepthTooSmall || code == ErrorCode::DivByZero ||
         code == ErrorCode::DomainError;
}

std::optional<Eigen::VectorXd> evaluate_error(const Factor& factor, ValueRefs values) {
  try {
    return factor.error(values);
  } catch (const Error& e) {
    if (invalidating(e.code())) return std::nullopt;
    throw;
  }
}

bool is_inlier(const Kernel& kernel, double chi2) {
  return kernel.kind == KernelKind::Quadratic || std::sqrt(std::max(chi2, 0.0)) <= kernel.threshold;
}

bool relative_change_small(double f_old, double f_new, double epsilon) {
  return std::abs(f_old - f_new) <= epsilon * std::max(1.0, f_old);
}

bool has_anchor(const GraphView& view) {
  const FactorGraph& graph = view.graph();
  for (VariableKey key : view.variable_keys()) {
    if (graph.variable(key).status == VariableStatus::Fixed) return true;
  }
  for (FactorKey key : view.factor_keys()) {
    for (VariableKey v : graph.factor_variables(key)) {
      if (graph.variable(v).status == VariableStatus::Fixed) return true;
    }
  }
  return false;
}

}  // namespace

std::string_view algorithm_name(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::GaussNewton: return "gn";
    case Algorithm::LevenbergMarquardt: return "lm";
    case Algorithm::DampedGaussNewton: return "dgn";
  }
  return "gn";
}

Algorithm parse_algorithm(std::string_view name) {
  if (name == "gn" || name == "gauss_newton") return Algorithm::GaussNewton;
  if (name == "lm" || name == "levenberg_marquardt") return Algorithm::LevenbergMarquardt;
  if (name == "dgn" || name == "damped_gauss_newton") return Algorithm::DampedGaussNewton;
  throw Error(ErrorCode::InvalidArgument, "unknown algorithm '" + std::string(name) + "'");
}

std::string_view damping_name(Damping damping) {
  return damping == Damping::DiagScaled ? "diag" : "identity";
}

Damping parse_damping(std::string_view name) {
  if (name == "diag") return Damping::DiagScaled;
  if (name == "identity") return Damping::Identity;
  throw Error(ErrorCode::InvalidArgument, "unknown damping '" + std::string(name) + "'");
}

std::string_view termination_name(Termination termination) {
  switch (termination) {
    case Termination::Converged: return "converged";
    case Termination::MaxIterations: return "max_iterations";
    case Termination::MaxInnerRejections: return "max_inner_rejections";
  }
  return "max_iterations";
}

void SolverConfig::validate() const {
  if (max_iterations < 1) throw Error(ErrorCode::InvalidArgument, "max_iterations must be at least 1");
  if (!(epsilon > 0.0)) throw Error(ErrorCode::InvalidArgument, "epsilon must be positive");
  if (!(lm.lambda_init_tau > 0.0)) throw Error(ErrorCode::InvalidArgument, "lambda_init_tau must be positive");
  if (!(lm.lambda_up > 1.0)) throw Error(ErrorCode::InvalidArgument, "lambda_up must exceed 1");
  if (!(lm.lambda_down > 0.0 && lm.lambda_down < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "lambda_down must lie in (0, 1)");
  }
  if (lm.max_inner < 1) throw Error(ErrorCode::InvalidArgument, "max_inner must be at least 1");
  if (!(damped_gn_lambda >= 0.0)) throw Error(ErrorCode::InvalidArgument, "damped_gn_lambda must be >= 0");
}

std::string format_stats_line(const IterationStats& stats, bool with_timings) {
  std::ostringstream out;
  out << "{\"iteration\":" << stats.iteration << ",\"chi2\":" << format_double(stats.chi2)
      << ",\"lambda\":" << format_double(stats.lambda) << ",\"inliers\":" << stats.num_inliers
      << ",\"outliers\":" << stats.num_outliers << ",\"invalid\":" << stats.num_invalid;
  if (with_timings) {
    out << ",\"t_linearize\":" << format_double(stats.t_linearize) << ",\"t_solve\":"
        << format_double(stats.t_solve) << ",\"t_update\":" << format_double(stats.t_update);
  }
  out << "}";
  return out.str();
}

std::optional<Linearization> linearize(const Factor& factor, ValueRefs values) {
  std::optional<Linearization> lin;
  try {
    lin = factor.linearize(values);
  } catch (const Error& e) {
    if (invalidating(e.code())) return std::nullopt;
    throw;
  }
  if (!lin) return std::nullopt;
  if (lin->error.size() != factor.error_dim() || lin->jacobians.size() != factor.variables().size()) {
    throw Error(ErrorCode::DimensionMismatch, "linearization does not match the factor shape");
  }
  return lin;
}

const Kernel& resolve_kernel(const Factor& factor, const RobustifierPolicy& policy) {
  if (factor.kernel()) return *factor.kernel();
  return policy.kernel_for(factor.type_tag());
}

FactorEvaluation update_hb(BlockSparseMatrix& h, Eigen::VectorXd& b, const std::vector<int>& blocks,
                           const Linearization& lin, const Eigen::MatrixXd& information, const Kernel& kernel) {
  const BlockLayout& layout = h.layout();
  if (lin.error.size() != information.rows() || blocks.size() != lin.jacobians.size() ||
      b.size() != layout.total_dim()) {
    throw Error(ErrorCode::DimensionMismatch, "factor does not match the linear system");
  }
  for (std::size_t s = 0; s < blocks.size(); ++s) {
    const auto& j = lin.jacobians[s];
    if (j.rows() != lin.error.size()) throw Error(ErrorCode::DimensionMismatch, "Jacobian row count");
    if (blocks[s] >= 0 && j.cols() != layout.dim(blocks[s])) {
      throw Error(ErrorCode::DimensionMismatch, "Jacobian column count does not match the variable");
    }
  }

  FactorEvaluation ev;
  ev.valid = true;
  ev.chi2 = lin.error.dot(information * lin.error);
  const Robustified r = robustify(kernel, ev.chi2);
  ev.cost = 2.0 * r.rho;
  ev.inlier = is_inlier(kernel, ev.chi2);

  const Eigen::MatrixXd weighted = r.gamma * information;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    if (blocks[i] < 0) continue;
    const Eigen::MatrixXd jt_omega = lin.jacobians[i].transpose() * weighted;
    b.segment(layout.offset(blocks[i]), layout.dim(blocks[i])) += jt_omega * lin.error;
    for (std::size_t j = 0; j <= i; ++j) {
      if (blocks[j] < 0) continue;
      h.accumulate_block(blocks[i], blocks[j], jt_omega * lin.jacobians[j]);
    }
  }
  return ev;
}

// ---------------------------------------------------------------------------
// NormalEquations
// ---------------------------------------------------------------------------

NormalEquations::NormalEquations(GraphView& view, const RobustifierPolicy& policy, OrderingMethod ordering)
    : view_(&view), policy_(&policy) {
  std::vector<int> dims;
  for (VariableKey key : view.variable_keys()) {
    if (!view.is_optimizable(key)) continue;
    index_[key] = static_cast<int>(keys_.size());
    keys_.push_back(key);
    dims.push_back(view.graph().variable(key).dim());
  }
  layout_ = BlockLayout(dims);
  h_ = BlockSparseMatrix(layout_);
  b_ = Eigen::VectorXd::Zero(layout_.total_dim());

  for (int k = 0; k < layout_.num_blocks(); ++k) {
    h_.accumulate_block(k, k, Eigen::MatrixXd::Zero(layout_.dim(k), layout_.dim(k)));
  }
  FactorKey last = -1;
  view.for_each_factor([&](FactorKey key, const Factor& factor) {
    if (key == last) return;  // pool correspondences share one variable set
    last = key;
    const auto blocks = slots_of(factor);
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      for (std::size_t j = 0; j < i; ++j) {
        if (blocks[i] < 0 || blocks[j] < 0 || blocks[i] == blocks[j]) continue;
        h_.accumulate_block(blocks[i], blocks[j],
                            Eigen::MatrixXd::Zero(layout_.dim(blocks[i]), layout_.dim(blocks[j])));
      }
    }
  });
  order_ = fill_reducing_ordering(h_, ordering);
}

int NormalEquations::block_of(VariableKey key) const {
  auto it = index_.find(key);
  return it == index_.end() ? -1 : it->second;
}

std::vector<int> NormalEquations::slots_of(const Factor& factor) const {
  std::vector<int> blocks;
  blocks.reserve(factor.variables().size());
  for (VariableKey key : factor.variables()) blocks.push_back(block_of(key));
  return blocks;
}

NormalEquations::Summary NormalEquations::build() { return assemble(true, false); }

NormalEquations::Summary NormalEquations::build_inliers() { return assemble(true, true); }

NormalEquations::Summary NormalEquations::evaluate() const {
  Summary s;
  const FactorGraph& graph = view_->graph();
  view_->for_each_factor([&](FactorKey, const Factor& factor) {
    ++s.num_active;
    const auto values = gather_values(graph, factor);
    const auto e = evaluate_error(factor, values);
    if (!e) {
      ++s.num_invalid;
      return;
    }
    const double chi2 = e->dot(factor.information() * *e);
    const Kernel& kernel = resolve_kernel(factor, *policy_);
    s.cost += 2.0 * robustify(kernel, chi2).rho;
    if (is_inlier(kernel, chi2)) {
      ++s.num_inliers;
    } else {
      ++s.num_outliers;
    }
  });
  return s;
}

NormalEquations::Summary NormalEquations::assemble(bool with_system, bool inliers_only) {
  if (with_system) {
    h_.set_zero();
    b_.setZero();
  }
  Summary s;
  const FactorGraph& graph = view_->graph();
  const Kernel quadratic = Kernel::quadratic();
  view_->for_each_factor([&](FactorKey, const Factor& factor) {
    ++s.num_active;
    const auto values = gather_values(graph, factor);
    const Kernel& kernel = resolve_kernel(factor, *policy_);
    const auto blocks = slots_of(factor);

    if (factor.has_direct_contribution()) {
      const auto dc = factor.direct_contribution(values);
      if (!dc) {
        ++s.num_invalid;
        return;
      }
      const bool inlier = is_inlier(kernel, dc->chi2);
      inlier ? ++s.num_inliers : ++s.num_outliers;
      if (inliers_only && !inlier) return;
      const Robustified r = robustify(inliers_only ? quadratic : kernel, dc->chi2);
      s.cost += 2.0 * r.rho;
      for (std::size_t i = 0; i < blocks.size(); ++i) {
        if (blocks[i] < 0) continue;
        b_.segment(layout_.offset(blocks[i]), layout_.dim(blocks[i])) += r.gamma * dc->gradient[i];
        for (std::size_t j = 0; j <= i; ++j) {
          if (blocks[j] >= 0) h_.accumulate_block(blocks[i], blocks[j], r.gamma * dc->hessian[i][j]);
        }
      }
      return;
    }

    const auto lin = linearize(factor, values);
    if (!lin) {
      ++s.num_invalid;
      return;
    }
    if (inliers_only) {
      const double chi2 = lin->error.dot(factor.information() * lin->error);
      if (!is_inlier(kernel, chi2)) {
        ++s.num_outliers;
        return;
      }
    }
    const FactorEvaluation ev =
        update_hb(h_, b_, blocks, *lin, factor.information(), inliers_only ? quadratic : kernel);
    s.cost += ev.cost;
    ev.inlier ? ++s.num_inliers : ++s.num_outliers;
  });
  return s;
}

void NormalEquations::rethrow_not_pd(const Error& error) const {
  std::string message = error.what();
  long location = error.location();
  if (location >= 0 && location < static_cast<long>(keys_.size())) {
    location = static_cast<long>(keys_[location]);
    message += " (variable " + std::to_string(location) + ")";
  }
  if (!has_anchor(*view_)) {
    message += "; no variable is Fixed, so the problem may have gauge freedom: fix a pose or enable auto_fix_first";
  }
  throw Error(ErrorCode::NotPositiveDefinite, message, location);
}

Eigen::VectorXd NormalEquations::solve(double lambda, Damping damping) const {
  try {
    if (lambda == 0.0) return -BlockCholesky(h_, order_).solve(b_);
    BlockSparseMatrix damped = h_;
    if (damping == Damping::DiagScaled) {
      damped.add_to_diagonal(lambda * h_.diagonal());
    } else {
      damped.add_to_diagonal(Eigen::VectorXd::Constant(layout_.total_dim(), lambda));
    }
    return -BlockCholesky(damped, order_).solve(b_);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::NotPositiveDefinite) rethrow_not_pd(e);
    throw;
  }
}

void NormalEquations::update_solution(const Eigen::Ref<const Eigen::VectorXd>& dx) {
  if (dx.size() != layout_.total_dim()) {
    throw Error(ErrorCode::DimensionMismatch, "increment length does not match the layout");
  }
  FactorGraph& graph = view_->graph();
  for (int k = 0; k < layout_.num_blocks(); ++k) {
    Variable& v = graph.variable(keys_[k]);
    v.value = apply_perturbation(v.value, dx.segment(layout_.offset(k), layout_.dim(k)));
  }
}

std::vector<Eigen::MatrixXd> NormalEquations::covariance(const std::vector<VariableKey>& targets) const {
  std::vector<int> blocks;
  for (VariableKey key : targets) {
    const int block = block_of(key);
    if (block < 0) {
      throw Error(ErrorCode::InvalidArgument, "variable " + std::to_string(key) + " is not optimized");
    }
    blocks.push_back(block);
  }
  try {
    return BlockCholesky(h_, order_).marginal_covariance(blocks);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::NotPositiveDefinite) rethrow_not_pd(e);
    throw;
  }
}

// ---------------------------------------------------------------------------
// Algorithms
// ---------------------------------------------------------------------------

std::optional<VariableKey> fix_gauge(GraphView& view) {
  if (has_anchor(view)) return std::nullopt;
  for (VariableKey key : view.variable_keys()) {
    Variable& v = view.graph().variable(key);
    const VariableKind kind = v.kind();
    if (v.status == VariableStatus::Active && (kind == VariableKind::Pose3 || kind == VariableKind::Pose2)) {
      v.status = VariableStatus::Fixed;
      return key;
    }
  }
  return std::nullopt;
}

void update_solution(GraphView& view, const Eigen::Ref<const Eigen::VectorXd>& dx) {
  std::vector<VariableKey> keys;
  std::vector<int> dims;
  for (VariableKey key : view.variable_keys()) {
    if (!view.is_optimizable(key)) continue;
    keys.push_back(key);
    dims.push_back(view.graph().variable(key).dim());
  }
  const BlockLayout layout(dims);
  if (dx.size() != layout.total_dim()) {
    throw Error(ErrorCode::DimensionMismatch, "increment length does not match the layout");
  }
  for (std::size_t k = 0; k < keys.size(); ++k) {
    Variable& v = view.graph().variable(keys[k]);
    const int block = static_cast<int>(k);
    v.value = apply_perturbation(v.value, dx.segment(layout.offset(block), layout.dim(block)));
  }
}

namespace {

IterationStats make_stats(int iteration, const NormalEquations::Summary& s, double lambda) {
  IterationStats stats;
  stats.iteration = iteration;
  stats.chi2 = s.cost;
  stats.lambda = lambda;
  stats.num_inliers = s.num_inliers;
  stats.num_outliers = s.num_outliers;
  stats.num_invalid = s.num_invalid;
  return stats;
}

void check_valid(const NormalEquations::Summary& s) {
  if (s.num_invalid == s.num_active) {
    throw Error(ErrorCode::AllFactorsInvalid, "no valid factor at the current estimate");
  }
}

void prepare(GraphView& view, const SolverConfig& config) {
  config.validate();
  if (config.auto_fix_first) fix_gauge(view);
}

}  // namespace

SolverReport gauss_newton(GraphView& view, const SolverConfig& config, const RobustifierPolicy& policy) {
  prepare(view, config);
  NormalEquations ne(view, policy, config.ordering);
  if (ne.keys().empty()) throw Error(ErrorCode::InvalidArgument, "no optimizable variable in the view");
  const double lambda = config.algorithm == Algorithm::DampedGaussNewton ? config.damped_gn_lambda : 0.0;

  SolverReport report;
  double f_old = 0.0;
  for (int it = 1; it <= config.max_iterations; ++it) {
    auto start = Clock::now();
    const auto s = ne.build();
    IterationStats stats = make_stats(it, s, lambda);
    stats.t_linearize = seconds_since(start);
    check_valid(s);
    if (it > 1 && relative_change_small(f_old, s.cost, config.epsilon)) {
      report.iterations.push_back(stats);
      report.termination = Termination::Converged;
      report.final_chi2 = s.cost;
      return report;
    }
    start = Clock::now();
    const Eigen::VectorXd dx = ne.solve(lambda, Damping::Identity);
    stats.t_solve = seconds_since(start);
    start = Clock::now();
    ne.update_solution(dx);
    stats.t_update = seconds_since(start);
    report.iterations.push_back(stats);
    f_old = s.cost;
  }
  report.termination = Termination::MaxIterations;
  report.final_chi2 = ne.evaluate().cost;
  return report;
}

SolverReport levenberg_marquardt(GraphView& view, const SolverConfig& config, const RobustifierPolicy& policy) {
  prepare(view, config);
  NormalEquations ne(view, policy, config.ordering);
  if (ne.keys().empty()) throw Error(ErrorCode::InvalidArgument, "no optimizable variable in the view");
  const LmConfig& lm = config.lm;

  SolverReport report;
  auto start = Clock::now();
  auto s = ne.build();
  check_valid(s);
  const double max_diag = ne.hessian().diagonal().maxCoeff();
  double lambda = lm.lambda_init_tau * (max_diag > 0.0 ? max_diag : 1.0);
  IterationStats stats = make_stats(1, s, lambda);
  stats.t_linearize = seconds_since(start);

  for (int it = 1;; ++it) {
    bool accepted = false;
    for (int inner = 0; inner < lm.max_inner; ++inner) {
      start = Clock::now();
      view.push_values();
      const Eigen::VectorXd dx = ne.solve(lambda, lm.damping);
      stats.t_solve += seconds_since(start);
      start = Clock::now();
      ne.update_solution(dx);
      const double f_new = ne.evaluate().cost;
      if (f_new < s.cost) {
        view.discard_top();
        lambda *= lm.lambda_down;
        accepted = true;
      } else {
        view.pop_values();
        lambda *= lm.lambda_up;
      }
      stats.t_update += seconds_since(start);
      if (accepted) break;
    }
    report.iterations.push_back(stats);
    if (!accepted) {
      report.termination = Termination::MaxInnerRejections;
      report.final_chi2 = s.cost;
      return report;
    }
    if (it >= config.max_iterations) break;

    const double f_old = s.cost;
    start = Clock::now();
    s = ne.build();
    stats = make_stats(it + 1, s, lambda);
    stats.t_linearize = seconds_since(start);
    check_valid(s);
    if (relative_change_small(f_old, s.cost, config.epsilon)) {
      report.iterations.push_back(stats);
      report.termination = Termination::Converged;
      report.final_chi2 = s.cost;
      return report;
    }
  }
  report.termination = Termination::MaxIterations;
  report.final_chi2 = ne.evaluate().cost;
  return report;
}

SolverReport optimize(GraphView& view, const SolverConfig& config, const RobustifierPolicy& policy) {
  switch (config.algorithm) {
    case Algorithm::LevenbergMarquardt:
      return levenberg_marquardt(view, config, policy);
    case Algorithm::GaussNewton:
    case Algorithm::DampedGaussNewton:
      return gauss_newton(view, config, policy);
  }
  return gauss_newton(view, config, policy);
}

std::vector<Eigen::MatrixXd> compute_covariance(GraphView& view, const std::vector<VariableKey>& targets,
                                                const SolverConfig& config, const RobustifierPolicy& policy) {
  NormalEquations ne(view, policy, config.ordering);
  if (config.recompute_H_inliers) {
    ne.build_inliers();
  } else {
    ne.build();
  }
  return ne.covariance(targets);
}

}  // namespace ils
