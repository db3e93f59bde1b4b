#pragma once

#include <Eigen/Core>

#include <functional>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

#include "ils/errors.hpp"

namespace ils::detail {

/// Whitespace tokenizer that skips blank lines and '#' comments.
class LineReader {
 public:
  explicit LineReader(std::istream& in) : in_(in) {}

  bool next(std::vector<std::string_view>& tokens);
  long line() const { return line_; }

 private:
  std::istream& in_;
  std::string buffer_;
  long line_ = 0;
};

[[noreturn]] void parse_error(long line, const std::string& message);

double parse_double(std::string_view token, long line);
long long parse_integer(std::string_view token, long line);

/// Rethrows library errors raised while building a graph as file errors
/// carrying the line number.
[[noreturn]] void rethrow_at_line(const Error& error, long line);

/// Rounds p to multiples of `quanta`, then iterates p <- round(roundtrip(p))
/// until a value repeats and returns the lexicographically smallest member of
/// the cycle. Writing that member and reading it back yields the same member.
std::vector<double> snap_fixed_point(std::vector<double> p,
                                     const std::function<std::vector<double>(const std::vector<double>&)>& roundtrip,
                                     const std::vector<double>& quanta);

/// Grid step for values of magnitude up to `magnitude`, well above round-off.
double quantum_for(double magnitude);

/// Unit quaternion (x, y, z, w) with w >= 0.
std::vector<double> quaternion_of(const Eigen::Matrix3d& r);
Eigen::Matrix3d rotation_of_quaternion(double x, double y, double z, double w, long line = -1);

/// Quaternion of `r` snapped so that it survives a write/read cycle unchanged.
std::vector<double> stable_quaternion(const Eigen::Matrix3d& r);

void open_for_reading(std::ifstream& in, const std::string& path);
void open_for_writing(std::ofstream& out, const std::string& path);

}  // namespace ils::detail
