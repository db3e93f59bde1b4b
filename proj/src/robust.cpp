#include "ils/robust.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "ils/errors.hpp"
#include "ils/format.hpp"

namespace ils {

void validate(const Kernel& kernel) {
  if (!(kernel.threshold > 0.0) || !std::isfinite(kernel.threshold)) {
    throw Error(ErrorCode::InvalidArgument, "kernel threshold must be positive");
  }
}

double kernel_rho(const Kernel& kernel, double u) {
  const double c = kernel.threshold;
  const double u2 = u * u;
  switch (kernel.kind) {
    case KernelKind::Quadratic:
      return 0.5 * u2;
    case KernelKind::Huber:
      return u <= c ? 0.5 * u2 : c * (u - 0.5 * c);
    case KernelKind::Cauchy:
      return 0.5 * c * c * std::log1p(u2 / (c * c));
    case KernelKind::GemanMcClure:
      return 0.5 * u2 / (1.0 + u2 / (c * c));
    case KernelKind::Saturated:
      return 0.5 * std::min(u2, c * c);
  }
  return 0.5 * u2;
}

double kernel_derivative(const Kernel& kernel, double u) {
  return robustify(kernel, u * u).gamma * u;
}

Robustified robustify(const Kernel& kernel, double chi2) {
  const double u = std::sqrt(std::max(chi2, 0.0));
  const double c = kernel.threshold;
  double gamma = 1.0;
  switch (kernel.kind) {
    case KernelKind::Quadratic:
      break;
    case KernelKind::Huber:
      if (u > c) gamma = c / u;
      break;
    case KernelKind::Cauchy:
      gamma = 1.0 / (1.0 + chi2 / (c * c));
      break;
    case KernelKind::GemanMcClure: {
      const double s = 1.0 + chi2 / (c * c);
      gamma = 1.0 / (s * s);
      break;
    }
    case KernelKind::Saturated:
      // rho is flat past the threshold.
      if (u > c) gamma = 0.0;
      break;
  }
  return {gamma, kernel_rho(kernel, u)};
}

std::string_view kernel_name(KernelKind kind) {
  switch (kind) {
    case KernelKind::Quadratic: return "quadratic";
    case KernelKind::Huber: return "huber";
    case KernelKind::Cauchy: return "cauchy";
    case KernelKind::GemanMcClure: return "geman_mcclure";
    case KernelKind::Saturated: return "saturated";
  }
  return "quadratic";
}

namespace {

KernelKind parse_kind(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char ch) { return std::tolower(ch); });
  std::replace(lower.begin(), lower.end(), '-', '_');
  if (lower == "quadratic" || lower == "l2") return KernelKind::Quadratic;
  if (lower == "huber") return KernelKind::Huber;
  if (lower == "cauchy") return KernelKind::Cauchy;
  if (lower == "geman_mcclure" || lower == "gm") return KernelKind::GemanMcClure;
  if (lower == "saturated") return KernelKind::Saturated;
  throw Error(ErrorCode::InvalidArgument, "unknown kernel '" + std::string(name) + "'");
}

}  // namespace

Kernel parse_kernel(std::string_view spec) {
  const auto colon = spec.find(':');
  Kernel kernel;
  kernel.kind = parse_kind(spec.substr(0, colon));
  if (colon == std::string_view::npos) {
    if (kernel.kind != KernelKind::Quadratic) {
      throw Error(ErrorCode::InvalidArgument, "kernel '" + std::string(spec) + "' needs a threshold");
    }
    return kernel;
  }
  const std::string_view number = spec.substr(colon + 1);
  double c = 0.0;
  const auto [ptr, ec] = std::from_chars(number.data(), number.data() + number.size(), c);
  if (ec != std::errc() || ptr != number.data() + number.size()) {
    throw Error(ErrorCode::InvalidArgument, "bad kernel threshold in '" + std::string(spec) + "'");
  }
  kernel.threshold = c;
  validate(kernel);
  return kernel;
}

std::string format_kernel(const Kernel& kernel) {
  return std::string(kernel_name(kernel.kind)) + ":" + format_double(kernel.threshold);
}

void RobustifierPolicy::set_rule(const std::string& factor_type, const Kernel& kernel) {
  validate(kernel);
  rules_[factor_type] = kernel;
}

void RobustifierPolicy::set_fallback(const Kernel& kernel) {
  validate(kernel);
  fallback_ = kernel;
}

const Kernel& RobustifierPolicy::kernel_for(std::string_view factor_type) const {
  auto it = rules_.find(factor_type);
  return it == rules_.end() ? fallback_ : it->second;
}

}  // namespace ils
