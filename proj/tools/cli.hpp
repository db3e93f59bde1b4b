#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "ils/dataio.hpp"
#include "ils/robust.hpp"
#include "ils/solver.hpp"

namespace ils::cli {

/// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitNotPositiveDefinite = 2;
inline constexpr int kExitNotConverged = 3;

struct RunConfig {
  SolverConfig solver;
  RobustifierPolicy kernels;
  std::string input;
  std::string output;
  std::string stats;
  std::string fix;  ///< variable id, "first", or empty
  std::uint64_t seed = 0;

  bool operator==(const RunConfig&) const = default;
};

/// Pretty-printed JSON; parse_config(dump_config(c)) == c and the text is a
/// fixed point of parse/dump.
std::string dump_config(const RunConfig& config);
RunConfig parse_config(std::string_view text);

/// Applies a `kind:c` or `kind:c:factor-type` kernel option.
void apply_kernel_option(RobustifierPolicy& policy, std::string_view option);

struct IcpData {
  std::vector<Eigen::Vector3d> fixed;
  std::vector<Eigen::Vector3d> moving;  ///< truth * fixed
  std::vector<Correspondence> correspondences;
  Isometry3d truth;
};

/// Uniform cloud in [-1, 1]^3, a random transform with |t| <= 1 m and angle
/// <= 0.5 rad, and perfect index-to-index associations.
IcpData generate_icp_data(std::size_t num_points, std::uint64_t seed);

struct IcpRun {
  Isometry3d estimate;
  SolverReport report;
};

/// Registers the moving cloud onto the fixed one starting from the identity.
IcpRun run_icp(const IcpData& data, const SolverConfig& config, const RobustifierPolicy& policy = {});

/// Runs one command line (without the program name).
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ils::cli
