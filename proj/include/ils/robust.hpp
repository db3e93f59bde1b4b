#pragma once

// Robust kernels rho(u) over u = sqrt(chi2) and the IRLS weight
// gamma = rho'(u) / u that rescales a factor's information matrix.

#include <map>
#include <string>
#include <string_view>

namespace ils {

enum class KernelKind { Quadratic, Huber, Cauchy, GemanMcClure, Saturated };

struct Kernel {
  KernelKind kind = KernelKind::Quadratic;
  double threshold = 1.0;

  static Kernel quadratic() { return {KernelKind::Quadratic, 1.0}; }
  static Kernel huber(double c) { return {KernelKind::Huber, c}; }
  static Kernel cauchy(double c) { return {KernelKind::Cauchy, c}; }
  static Kernel geman_mcclure(double c) { return {KernelKind::GemanMcClure, c}; }
  static Kernel saturated(double c) { return {KernelKind::Saturated, c}; }

  bool operator==(const Kernel&) const = default;
};

struct Robustified {
  double gamma;  ///< IRLS weight applied to the information matrix
  double rho;    ///< kernel value rho(u)
};

/// Throws InvalidArgument when the threshold is not strictly positive.
void validate(const Kernel& kernel);

double kernel_rho(const Kernel& kernel, double u);
/// d rho / d u
double kernel_derivative(const Kernel& kernel, double u);

/// gamma and rho for a factor with the given chi2 >= 0. At u = 0 gamma takes
/// its limit rho''(0) = 1 for every kernel.
Robustified robustify(const Kernel& kernel, double chi2);

std::string_view kernel_name(KernelKind kind);

/// Parses `<kind>:<threshold>`, e.g. `huber:1.0`. A bare `quadratic` is accepted.
Kernel parse_kernel(std::string_view spec);
std::string format_kernel(const Kernel& kernel);

/// Factor-type -> kernel rules with a fallback for unregistered types.
class RobustifierPolicy {
 public:
  RobustifierPolicy() = default;
  explicit RobustifierPolicy(Kernel fallback) : fallback_(fallback) {}

  void set_rule(const std::string& factor_type, const Kernel& kernel);
  void set_fallback(const Kernel& kernel);

  const Kernel& kernel_for(std::string_view factor_type) const;
  const Kernel& fallback() const { return fallback_; }
  const std::map<std::string, Kernel, std::less<>>& rules() const { return rules_; }

  bool operator==(const RobustifierPolicy&) const = default;

 private:
  Kernel fallback_ = Kernel::quadratic();
  std::map<std::string, Kernel, std::less<>> rules_;
};

}  // namespace ils
