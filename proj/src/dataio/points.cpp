#include <fstream>
#include <ostream>

#include "ils/dataio.hpp"
#include "ils/format.hpp"
#include "text.hpp"

namespace ils {

std::vector<Eigen::Vector3d> load_point_cloud(std::istream& in) {
  std::vector<Eigen::Vector3d> points;
  detail::LineReader reader(in);
  std::vector<std::string_view> tokens;
  while (reader.next(tokens)) {
    if (tokens.size() != 3) detail::parse_error(reader.line(), "point lines hold exactly 3 numbers");
    points.emplace_back(detail::parse_double(tokens[0], reader.line()), detail::parse_double(tokens[1], reader.line()),
                        detail::parse_double(tokens[2], reader.line()));
  }
  return points;
}

std::vector<Eigen::Vector3d> load_point_cloud(const std::filesystem::path& path) {
  std::ifstream in;
  detail::open_for_reading(in, path.string());
  return load_point_cloud(in);
}

void save_point_cloud(const std::vector<Eigen::Vector3d>& points, std::ostream& out) {
  for (const auto& p : points) {
    out << format_double(p.x()) << ' ' << format_double(p.y()) << ' ' << format_double(p.z()) << '\n';
  }
}

void save_point_cloud(const std::vector<Eigen::Vector3d>& points, const std::filesystem::path& path) {
  std::ofstream out;
  detail::open_for_writing(out, path.string());
  save_point_cloud(points, out);
}

std::vector<Correspondence> load_correspondences(std::istream& in) {
  std::vector<Correspondence> correspondences;
  detail::LineReader reader(in);
  std::vector<std::string_view> tokens;
  while (reader.next(tokens)) {
    if (tokens.size() != 2) detail::parse_error(reader.line(), "correspondence lines hold exactly 2 indices");
    const long long moving = detail::parse_integer(tokens[0], reader.line());
    const long long fixed = detail::parse_integer(tokens[1], reader.line());
    if (moving < 0 || fixed < 0) detail::parse_error(reader.line(), "negative index");
    correspondences.push_back({static_cast<std::size_t>(moving), static_cast<std::size_t>(fixed)});
  }
  return correspondences;
}

std::vector<Correspondence> load_correspondences(const std::filesystem::path& path) {
  std::ifstream in;
  detail::open_for_reading(in, path.string());
  return load_correspondences(in);
}

void save_correspondences(const std::vector<Correspondence>& correspondences, std::ostream& out) {
  for (const auto& c : correspondences) out << c.moving << ' ' << c.fixed << '\n';
}

void save_correspondences(const std::vector<Correspondence>& correspondences, const std::filesystem::path& path) {
  std::ofstream out;
  detail::open_for_writing(out, path.string());
  save_correspondences(correspondences, out);
}

}  // namespace ils
