#include "cli.hpp"

#include <CLI11.hpp>
#include <Eigen/Geometry>
#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "ils/dataio.hpp"
#include "ils/errors.hpp"
#include "ils/factors.hpp"
#include "ils/format.hpp"
#include "ils/rng.hpp"

namespace ils::cli {

using Json = nlohmann::ordered_json;

namespace {

std::string_view ordering_name(OrderingMethod method) {
  return method == OrderingMethod::MinimumDegree ? "amd" : "natural";
}

OrderingMethod parse_ordering(std::string_view name) {
  if (name == "amd") return OrderingMethod::MinimumDegree;
  if (name == "natural") return OrderingMethod::Natural;
  throw Error(ErrorCode::InvalidArgument, "unknown ordering '" + std::string(name) + "'");
}

void reject_unknown(const Json& object, std::initializer_list<std::string_view> known, const std::string& where) {
  if (!object.is_object()) throw Error(ErrorCode::InvalidArgument, where + " must be an object");
  for (const auto& item : object.items()) {
    if (std::find(known.begin(), known.end(), item.key()) == known.end()) {
      throw Error(ErrorCode::InvalidArgument, "unknown config key '" + where + "." + item.key() + "'");
    }
  }
}

template <typename T>
void read(const Json& object, const char* key, T& value) {
  if (object.contains(key)) value = object.at(key).get<T>();
}

}  // namespace

std::string dump_config(const RunConfig& config) {
  const SolverConfig& s = config.solver;
  Json lm;
  lm["lambda_init_tau"] = s.lm.lambda_init_tau;
  lm["lambda_up"] = s.lm.lambda_up;
  lm["lambda_down"] = s.lm.lambda_down;
  lm["max_inner"] = s.lm.max_inner;
  lm["damping"] = damping_name(s.lm.damping);

  Json solver;
  solver["algorithm"] = algorithm_name(s.algorithm);
  solver["max_iterations"] = s.max_iterations;
  solver["epsilon"] = s.epsilon;
  solver["lm"] = lm;
  solver["damped_gn_lambda"] = s.damped_gn_lambda;
  solver["auto_fix_first"] = s.auto_fix_first;
  solver["recompute_H_inliers"] = s.recompute_H_inliers;
  solver["ordering"] = ordering_name(s.ordering);

  Json rules = Json::object();
  for (const auto& [type, kernel] : config.kernels.rules()) rules[type] = format_kernel(kernel);
  Json kernels;
  kernels["fallback"] = format_kernel(config.kernels.fallback());
  kernels["rules"] = rules;

  Json root;
  root["solver"] = solver;
  root["kernels"] = kernels;
  root["input"] = config.input;
  root["output"] = config.output;
  root["stats"] = config.stats;
  root["fix"] = config.fix;
  root["seed"] = config.seed;
  return root.dump(2) + "\n";
}

RunConfig parse_config(std::string_view text) {
  Json root;
  try {
    root = Json::parse(text);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("config: ") + e.what());
  }
  RunConfig config;
  try {
    reject_unknown(root, {"solver", "kernels", "input", "output", "stats", "fix", "seed"}, "config");
    if (root.contains("solver")) {
      const Json& s = root.at("solver");
      reject_unknown(s, {"algorithm", "max_iterations", "epsilon", "lm", "damped_gn_lambda", "auto_fix_first",
                         "recompute_H_inliers", "ordering"},
                     "solver");
      SolverConfig& out = config.solver;
      if (s.contains("algorithm")) out.algorithm = parse_algorithm(s.at("algorithm").get<std::string>());
      read(s, "max_iterations", out.max_iterations);
      read(s, "epsilon", out.epsilon);
      read(s, "damped_gn_lambda", out.damped_gn_lambda);
      read(s, "auto_fix_first", out.auto_fix_first);
      read(s, "recompute_H_inliers", out.recompute_H_inliers);
      if (s.contains("ordering")) out.ordering = parse_ordering(s.at("ordering").get<std::string>());
      if (s.contains("lm")) {
        const Json& lm = s.at("lm");
        reject_unknown(lm, {"lambda_init_tau", "lambda_up", "lambda_down", "max_inner", "damping"}, "solver.lm");
        read(lm, "lambda_init_tau", out.lm.lambda_init_tau);
        read(lm, "lambda_up", out.lm.lambda_up);
        read(lm, "lambda_down", out.lm.lambda_down);
        read(lm, "max_inner", out.lm.max_inner);
        if (lm.contains("damping")) out.lm.damping = parse_damping(lm.at("damping").get<std::string>());
      }
      out.validate();
    }
    if (root.contains("kernels")) {
      const Json& k = root.at("kernels");
      reject_unknown(k, {"fallback", "rules"}, "kernels");
      if (k.contains("fallback")) config.kernels.set_fallback(parse_kernel(k.at("fallback").get<std::string>()));
      if (k.contains("rules")) {
        const Json& rules = k.at("rules");
        if (!rules.is_object()) throw Error(ErrorCode::InvalidArgument, "kernels.rules must be an object");
        for (const auto& item : rules.items()) {
          config.kernels.set_rule(item.key(), parse_kernel(item.value().get<std::string>()));
        }
      }
    }
    read(root, "input", config.input);
    read(root, "output", config.output);
    read(root, "stats", config.stats);
    read(root, "fix", config.fix);
    read(root, "seed", config.seed);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("config: ") + e.what());
  }
  return config;
}

void apply_kernel_option(RobustifierPolicy& policy, std::string_view option) {
  const auto first = option.find(':');
  const auto second = first == std::string_view::npos ? std::string_view::npos : option.find(':', first + 1);
  if (second == std::string_view::npos) {
    policy.set_fallback(parse_kernel(option));
  } else {
    policy.set_rule(std::string(option.substr(second + 1)), parse_kernel(option.substr(0, second)));
  }
}

IcpData generate_icp_data(std::size_t num_points, std::uint64_t seed) {
  Rng rng(seed);
  IcpData data;
  data.fixed.reserve(num_points);
  for (std::size_t i = 0; i < num_points; ++i) {
    data.fixed.emplace_back(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
  }
  const Eigen::Vector3d t_dir = Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal()).normalized();
  const Eigen::Vector3d axis = Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal()).normalized();
  const double distance = rng.uniform();
  const double angle = rng.uniform(0.0, 0.5);
  data.truth = Isometry3d(Eigen::AngleAxisd(angle, axis).toRotationMatrix(), distance * t_dir);
  for (std::size_t i = 0; i < num_points; ++i) {
    data.moving.push_back(data.truth * data.fixed[i]);
    data.correspondences.push_back({i, i});
  }
  return data;
}

IcpRun run_icp(const IcpData& data, const SolverConfig& config, const RobustifierPolicy& policy) {
  FactorGraph graph;
  const VariableKey pose = graph.add_variable(Isometry3d::Identity());
  CorrespondencePool pool;
  pool.moving = data.moving;
  for (const auto& p : data.fixed) pool.fixed.emplace_back(p);
  pool.correspondences = data.correspondences;
  pool.prototype = std::make_shared<IcpFactor>(pose, Eigen::Vector3d::Zero(), Eigen::Vector3d::Zero());
  graph.add_pool(std::move(pool));
  GraphView view = full_view(graph);
  IcpRun run;
  run.report = optimize(view, config, policy);
  run.estimate = std::get<Isometry3d>(graph.variable(pose).value);
  return run;
}

namespace {

namespace fs = std::filesystem;

bool bal_format(const std::string& path, const std::string& format) {
  if (format == "bal") return true;
  if (format == "g2o") return false;
  if (!format.empty()) throw Error(ErrorCode::InvalidArgument, "unknown format '" + format + "'");
  return fs::path(path).extension() == ".bal";
}

FactorGraph load_graph(const std::string& path, const std::string& format) {
  return bal_format(path, format) ? load_bal(fs::path(path)) : load_pose_graph(fs::path(path));
}

void save_graph(const FactorGraph& graph, const std::string& path, const std::string& format) {
  if (bal_format(path, format)) {
    save_bal(graph, fs::path(path));
  } else {
    save_pose_graph(graph, fs::path(path));
  }
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path + "' for reading");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw Error(ErrorCode::IoError, "failed writing '" + path + "'");
}

void write_stats(const std::string& path, const SolverReport& report, bool timings) {
  if (path.empty()) return;
  std::string text;
  for (const auto& s : report.iterations) text += format_stats_line(s, timings) + "\n";
  write_text(path, text);
}

void print_report(std::ostream& out, const SolverReport& report, double seconds) {
  out << "termination " << termination_name(report.termination) << "\n"
      << "iterations " << report.iterations.size() << "\n"
      << "final_chi2 " << format_double(report.final_chi2) << "\n"
      << "wall_time_s " << format_double(seconds) << "\n";
}

void apply_fix(FactorGraph& graph, RunConfig& config) {
  if (config.fix.empty()) return;
  if (config.fix == "first") {
    config.solver.auto_fix_first = true;
    return;
  }
  VariableKey key = 0;
  const auto [ptr, ec] = std::from_chars(config.fix.data(), config.fix.data() + config.fix.size(), key);
  if (ec != std::errc() || ptr != config.fix.data() + config.fix.size()) {
    throw Error(ErrorCode::InvalidArgument, "--fix expects a variable id or 'first'");
  }
  if (!graph.has_variable(key)) throw Error(ErrorCode::InvalidArgument, "--fix: no variable " + config.fix);
  graph.set_status(key, VariableStatus::Fixed);
}

/// Solver and kernel flags shared by optimize and icp.
struct SolverFlags {
  std::string config_path;
  std::string dump_config_path;
  std::string algorithm;
  int iterations = 0;
  double epsilon = 0.0;
  std::vector<std::string> kernels;
  std::string fix;
  bool fix_first = false;
  std::uint64_t seed = 0;
  std::string stats;
  std::string output;
  std::string input;
  bool timings = false;

  CLI::Option* o_algorithm = nullptr;
  CLI::Option* o_iterations = nullptr;
  CLI::Option* o_epsilon = nullptr;
  CLI::Option* o_fix = nullptr;
  CLI::Option* o_seed = nullptr;
  CLI::Option* o_stats = nullptr;
  CLI::Option* o_output = nullptr;
  CLI::Option* o_input = nullptr;

  void add_to(CLI::App& app) {
    app.add_option("--config", config_path, "JSON run configuration; flags override it");
    app.add_option("--dump-config", dump_config_path, "write the effective configuration and continue");
    o_algorithm = app.add_option("--algorithm", algorithm, "gn | lm | dgn");
    o_iterations = app.add_option("--iterations", iterations, "maximum iterations");
    o_epsilon = app.add_option("--epsilon", epsilon, "relative termination threshold");
    app.add_option("--kernel", kernels, "kind:c or kind:c:factor-type (repeatable)");
    o_fix = app.add_option("--fix", fix, "variable id to hold fixed, or 'first'");
    app.add_flag("--fix-first", fix_first, "fix the lowest-key pose when nothing is fixed");
    o_seed = app.add_option("--seed", seed, "random seed");
    o_stats = app.add_option("--stats", stats, "per-iteration statistics file (JSON lines)");
    o_output = app.add_option("--output,-o", output, "output path");
    app.add_flag("--timings", timings, "include per-phase timings in the statistics");
  }

  RunConfig resolve() const {
    RunConfig config;
    if (!config_path.empty()) config = parse_config(read_text(config_path));
    if (o_algorithm->count()) config.solver.algorithm = parse_algorithm(algorithm);
    if (o_iterations->count()) config.solver.max_iterations = iterations;
    if (o_epsilon->count()) config.solver.epsilon = epsilon;
    for (const auto& k : kernels) apply_kernel_option(config.kernels, k);
    if (o_fix->count()) config.fix = fix;
    if (fix_first) config.fix = "first";
    if (o_seed->count()) config.seed = seed;
    if (o_stats->count()) config.stats = stats;
    if (o_output->count()) config.output = output;
    if (o_input && o_input->count()) config.input = input;
    config.solver.validate();
    if (!dump_config_path.empty()) write_text(dump_config_path, dump_config(config));
    return config;
  }
};

int cmd_optimize(SolverFlags& flags, const std::string& format, std::ostream& out) {
  RunConfig config = flags.resolve();
  if (config.input.empty()) throw Error(ErrorCode::InvalidArgument, "optimize needs an input graph");
  FactorGraph graph = load_graph(config.input, format);
  apply_fix(graph, config);
  GraphView view = full_view(graph);
  const auto start = std::chrono::steady_clock::now();
  const SolverReport report = optimize(view, config.solver, config.kernels);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_stats(config.stats, report, flags.timings);
  if (!config.output.empty()) save_graph(graph, config.output, format);
  print_report(out, report, seconds);
  return report.converged() ? kExitOk : kExitNotConverged;
}

int cmd_icp(SolverFlags& flags, const std::string& fixed_path, const std::string& moving_path,
            const std::string& corr_path, std::size_t generate, const std::vector<double>& truth,
            std::ostream& out) {
  RunConfig config = flags.resolve();
  if (!flags.o_iterations->count() && flags.config_path.empty()) config.solver.max_iterations = 10;
  IcpData data;
  if (generate > 0) {
    data = generate_icp_data(generate, config.seed);
  } else {
    if (fixed_path.empty() || moving_path.empty()) {
      throw Error(ErrorCode::InvalidArgument, "icp needs --fixed and --moving, or --generate");
    }
    data.fixed = load_point_cloud(fs::path(fixed_path));
    data.moving = load_point_cloud(fs::path(moving_path));
    if (!corr_path.empty()) {
      data.correspondences = load_correspondences(fs::path(corr_path));
    } else {
      if (data.fixed.size() != data.moving.size()) {
        throw Error(ErrorCode::InvalidArgument, "clouds differ in size; pass --correspondences");
      }
      for (std::size_t i = 0; i < data.fixed.size(); ++i) data.correspondences.push_back({i, i});
    }
    if (truth.size() == 6) data.truth = v2t<double>(Vector6d(Eigen::Map<const Vector6d>(truth.data())));
  }
  const auto start = std::chrono::steady_clock::now();
  const IcpRun run = run_icp(data, config.solver, config.kernels);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_stats(config.stats, run.report, flags.timings);
  const RegistrationError e = registration_error(run.estimate, data.truth);
  print_report(out, run.report, seconds);
  out << "e_pos " << format_double(e.e_pos) << "\n"
      << "e_rot " << format_double(e.e_rot) << "\n";
  if (!config.output.empty()) {
    const Eigen::Quaterniond q(run.estimate.rotation());
    const auto& t = run.estimate.translation();
    std::string text;
    for (double v : {t.x(), t.y(), t.z(), q.x(), q.y(), q.z(), q.w()}) {
      text += (text.empty() ? "" : " ") + format_double(v);
    }
    write_text(config.output, text + "\n");
  }
  return run.report.converged() ? kExitOk : kExitNotConverged;
}

VariableKey default_root(const FactorGraph& graph) {
  std::optional<VariableKey> first_pose;
  for (const auto& [key, v] : graph.variables()) {
    const bool pose = v.kind() == VariableKind::Pose3 || v.kind() == VariableKind::Pose2;
    if (!pose) continue;
    if (v.status == VariableStatus::Fixed) return key;
    if (!first_pose) first_pose = key;
  }
  if (!first_pose) throw Error(ErrorCode::InvalidArgument, "graph has no pose variable");
  return *first_pose;
}

int report_error(const Error& e, std::ostream& err) {
  err << "error: " << e.what() << "\n";
  return e.code() == ErrorCode::NotPositiveDefinite ? kExitNotPositiveDefinite : kExitError;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Iterative least-squares solver for factor graphs"};
  app.require_subcommand(1);

  // generate
  auto* generate = app.add_subcommand("generate", "synthetic pose graph at ground truth");
  std::string shape = "sphere";
  int poses = 100;
  bool no_closures = false;
  bool planar = false;
  std::uint64_t gen_seed = 0;
  std::string gen_output;
  generate->add_option("--shape", shape, "ring | grid | sphere | torus");
  generate->add_option("--poses", poses, "number of poses");
  generate->add_flag("--no-closures", no_closures, "odometry edges only");
  generate->add_flag("--planar", planar, "SE(2) poses (ring and grid)");
  generate->add_option("--seed", gen_seed, "random seed");
  generate->add_option("--output,-o", gen_output, "output graph")->required();

  // perturb
  auto* perturb = app.add_subcommand("perturb", "add white Gaussian noise to measurements");
  std::string perturb_input;
  std::string perturb_output;
  std::vector<double> sigma_t{0.0, 0.0, 0.0};
  std::vector<double> sigma_r{0.0, 0.0, 0.0};
  std::vector<double> sigma_land{0.0, 0.0, 0.0};
  std::uint64_t perturb_seed = 0;
  perturb->add_option("--input,-i", perturb_input, "input graph")->required();
  perturb->add_option("--output,-o", perturb_output, "output graph")->required();
  perturb->add_option("--sigma-t", sigma_t, "translation variances (m^2), 1 or 3 values")->expected(1, 3);
  perturb->add_option("--sigma-r", sigma_r, "rotation variances (rad^2), 1 or 3 values")->expected(1, 3);
  perturb->add_option("--sigma-land", sigma_land, "landmark variances (m^2), 1 or 3 values")->expected(1, 3);
  perturb->add_option("--seed", perturb_seed, "random seed");

  // init
  auto* init = app.add_subcommand("init", "breadth-first initialization");
  std::string init_input;
  std::string init_output;
  VariableKey root = 0;
  auto* root_opt = init->add_option("--root", root, "root pose (default: first fixed pose, else lowest key)");
  init->add_option("--input,-i", init_input, "input graph")->required();
  init->add_option("--output,-o", init_output, "output graph")->required();

  // optimize
  auto* opt = app.add_subcommand("optimize", "run the solver on a graph file");
  SolverFlags opt_flags;
  std::string format;
  opt_flags.add_to(*opt);
  opt_flags.o_input = opt->add_option("--input,-i", opt_flags.input, "input graph");
  opt->add_option("--format", format, "g2o | bal (default: by extension)");

  // ate
  auto* ate = app.add_subcommand("ate", "absolute trajectory error");
  std::string estimate_path;
  std::string truth_path;
  bool no_align = false;
  ate->add_option("--estimate", estimate_path, "estimated graph")->required();
  ate->add_option("--ground-truth", truth_path, "ground-truth graph")->required();
  ate->add_flag("--no-align", no_align, "skip rigid alignment");

  // icp
  auto* icp = app.add_subcommand("icp", "point-to-point registration with perfect associations");
  SolverFlags icp_flags;
  std::string fixed_path;
  std::string moving_path;
  std::string corr_path;
  std::size_t generate_points = 0;
  std::vector<double> truth;
  icp_flags.add_to(*icp);
  icp->add_option("--fixed", fixed_path, "fixed cloud");
  icp->add_option("--moving", moving_path, "moving cloud");
  icp->add_option("--correspondences", corr_path, "moving_idx fixed_idx lines (default: by index)");
  icp->add_option("--generate", generate_points, "generate a random cloud of this size");
  icp->add_option("--truth", truth, "true transform x y z phi gamma psi")->expected(6);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitError;
  }

  try {
    if (generate->parsed()) {
      SyntheticSpec spec;
      spec.kind = parse_shape(shape);
      spec.n_poses = poses;
      spec.loop_closures = !no_closures;
      spec.planar = planar;
      spec.seed = gen_seed;
      save_pose_graph(generate_synthetic(spec).ground_truth, fs::path(gen_output));
      return kExitOk;
    }
    if (perturb->parsed()) {
      const auto expand = [](const std::vector<double>& v) {
        return v.size() == 1 ? Eigen::Vector3d::Constant(v[0]) : Eigen::Vector3d(v[0], v[1], v[2]);
      };
      if (sigma_t.size() == 2 || sigma_r.size() == 2 || sigma_land.size() == 2) {
        throw Error(ErrorCode::InvalidArgument, "variances take 1 or 3 values");
      }
      NoiseSpec noise;
      noise.sigma_t = expand(sigma_t);
      noise.sigma_r = expand(sigma_r);
      noise.sigma_land = expand(sigma_land);
      noise.seed = perturb_seed;
      save_pose_graph(perturb_awgn(load_pose_graph(fs::path(perturb_input)), noise), fs::path(perturb_output));
      return kExitOk;
    }
    if (init->parsed()) {
      FactorGraph graph = load_pose_graph(fs::path(init_input));
      breadth_first_init(graph, root_opt->count() ? root : default_root(graph));
      save_pose_graph(graph, fs::path(init_output));
      return kExitOk;
    }
    if (opt->parsed()) return cmd_optimize(opt_flags, format, out);
    if (ate->parsed()) {
      const TrajectoryMetrics m =
          ate_rmse(load_pose_graph(fs::path(estimate_path)), load_pose_graph(fs::path(truth_path)), !no_align);
      out << "ate_pos " << format_double(m.ate_pos) << "\n"
          << "ate_rot " << format_double(m.ate_rot) << "\n";
      return kExitOk;
    }
    if (icp->parsed()) {
      return cmd_icp(icp_flags, fixed_path, moving_path, corr_path, generate_points, truth, out);
    }
  } catch (const Error& e) {
    return report_error(e, err);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}

}  // namespace ils::cli
