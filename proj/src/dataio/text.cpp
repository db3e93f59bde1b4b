#include "text.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>

namespace ils::detail {

bool LineReader::next(std::vector<std::string_view>& tokens) {
  while (std::getline(in_, buffer_)) {
    ++line_;
    tokens.clear();
    std::size_t pos = 0;
    while (pos < buffer_.size()) {
      while (pos < buffer_.size() && std::isspace(static_cast<unsigned char>(buffer_[pos]))) ++pos;
      if (pos >= buffer_.size()) break;
      std::size_t end = pos;
      while (end < buffer_.size() && !std::isspace(static_cast<unsigned char>(buffer_[end]))) ++end;
      tokens.emplace_back(buffer_.data() + pos, end - pos);
      pos = end;
    }
    if (tokens.empty() || tokens.front().front() == '#') continue;
    return true;
  }
  return false;
}

void parse_error(long line, const std::string& message) {
  throw Error(ErrorCode::ParseError, "line " + std::to_string(line) + ": " + message, line);
}

double parse_double(std::string_view token, long line) {
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size() || !std::isfinite(value)) {
    parse_error(line, "expected a number, got '" + std::string(token) + "'");
  }
  return value;
}

long long parse_integer(std::string_view token, long line) {
  long long value = 0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size()) {
    parse_error(line, "expected an integer, got '" + std::string(token) + "'");
  }
  return value;
}

void rethrow_at_line(const Error& error, long line) {
  const ErrorCode code = error.code() == ErrorCode::NonPSDInformation ? ErrorCode::NonPSDInformation
                                                                      : ErrorCode::ParseError;
  std::string message = error.what();
  throw Error(code, "line " + std::to_string(line) + ": " + message, line);
}

double quantum_for(double magnitude) {
  int exponent = 0;
  std::frexp(std::max(1.0, std::abs(magnitude)), &exponent);
  return std::ldexp(1.0, exponent - 40);
}

std::vector<double> snap_fixed_point(std::vector<double> p,
                                     const std::function<std::vector<double>(const std::vector<double>&)>& roundtrip,
                                     const std::vector<double>& quanta) {
  constexpr int kMaxSteps = 64;
  const auto round_to_grid = [&](std::vector<double>& v) {
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::round(v[i] / quanta[i]) * quanta[i] + 0.0;
  };
  round_to_grid(p);
  std::vector<std::vector<double>> seen{p};
  for (int step = 0; step < kMaxSteps; ++step) {
    p = roundtrip(p);
    round_to_grid(p);
    auto hit = std::find(seen.begin(), seen.end(), p);
    if (hit != seen.end()) return *std::min_element(hit, seen.end());
    seen.push_back(p);
  }
  return p;
}

std::vector<double> quaternion_of(const Eigen::Matrix3d& r) {
  Eigen::Quaterniond q(r);
  q.normalize();
  if (q.w() < 0.0) q.coeffs() = -q.coeffs();
  return {q.x(), q.y(), q.z(), q.w()};
}

Eigen::Matrix3d rotation_of_quaternion(double x, double y, double z, double w, long line) {
  Eigen::Quaterniond q(w, x, y, z);
  if (!(q.norm() > 1e-12)) parse_error(line, "zero-length quaternion");
  return q.normalized().toRotationMatrix();
}

std::vector<double> stable_quaternion(const Eigen::Matrix3d& r) {
  return snap_fixed_point(quaternion_of(r), [](const std::vector<double>& q) {
    return quaternion_of(rotation_of_quaternion(q[0], q[1], q[2], q[3]));
  }, std::vector<double>(4, quantum_for(1.0)));
}

void open_for_reading(std::ifstream& in, const std::string& path) {
  in.open(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path + "' for reading");
}

void open_for_writing(std::ofstream& out, const std::string& path) {
  out.open(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot open '" + path + "' for writing");
}

}  // namespace ils::detail
