#include <fstream>
#include <ostream>

#include "ils/dataio.hpp"
#include "ils/format.hpp"
#include "text.hpp"

namespace ils {

using detail::LineReader;
using detail::parse_double;
using detail::parse_error;
using detail::parse_integer;

namespace {

constexpr std::string_view kVertexSe2 = "VERTEX_SE2";
constexpr std::string_view kEdgeSe2 = "EDGE_SE2";
constexpr std::string_view kVertexXy = "VERTEX_XY";
constexpr std::string_view kEdgeSe2Xy = "EDGE_SE2_XY";
constexpr std::string_view kVertexSe3 = "VERTEX_SE3:QUAT";
constexpr std::string_view kEdgeSe3 = "EDGE_SE3:QUAT";
constexpr std::string_view kFix = "FIX";

void expect_tokens(const std::vector<std::string_view>& tokens, std::size_t count, long line) {
  if (tokens.size() != count) {
    parse_error(line, std::string(tokens.front()) + " expects " + std::to_string(count - 1) + " fields, got " +
                          std::to_string(tokens.size() - 1));
  }
}

Eigen::MatrixXd upper_triangular(const std::vector<std::string_view>& tokens, std::size_t first, int n, long line) {
  Eigen::MatrixXd m(n, n);
  std::size_t k = first;
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      m(i, j) = parse_double(tokens[k++], line);
      m(j, i) = m(i, j);
    }
  }
  return m;
}

double field(const std::vector<std::string_view>& tokens, std::size_t i, long line) {
  return parse_double(tokens[i], line);
}

void write_upper_triangular(std::ostream& out, const Eigen::MatrixXd& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = i; j < m.cols(); ++j) out << ' ' << format_double(m(i, j));
  }
}

void write_numbers(std::ostream& out, std::initializer_list<double> values) {
  for (double v : values) out << ' ' << format_double(v);
}

void write_isometry3(std::ostream& out, const Isometry3d& x) {
  const auto q = detail::stable_quaternion(x.rotation());
  const auto& t = x.translation();
  write_numbers(out, {t.x(), t.y(), t.z(), q[0], q[1], q[2], q[3]});
}

Isometry3d read_isometry3(const std::vector<std::string_view>& tokens, std::size_t first, long line) {
  const Eigen::Vector3d t(field(tokens, first, line), field(tokens, first + 1, line), field(tokens, first + 2, line));
  const Eigen::Matrix3d r =
      detail::rotation_of_quaternion(field(tokens, first + 3, line), field(tokens, first + 4, line),
                                     field(tokens, first + 5, line), field(tokens, first + 6, line), line);
  return Isometry3d(r, t);
}

}  // namespace

FactorGraph load_pose_graph(std::istream& in) {
  FactorGraph graph;
  LineReader reader(in);
  std::vector<std::string_view> tokens;
  while (reader.next(tokens)) {
    const long line = reader.line();
    const std::string_view tag = tokens.front();
    try {
      if (tag == kVertexSe2) {
        expect_tokens(tokens, 5, line);
        graph.add_variable(parse_integer(tokens[1], line),
                           Isometry2d(field(tokens, 4, line),
                                      Eigen::Vector2d(field(tokens, 2, line), field(tokens, 3, line))));
      } else if (tag == kVertexXy) {
        expect_tokens(tokens, 4, line);
        graph.add_variable(parse_integer(tokens[1], line),
                           Eigen::Vector2d(field(tokens, 2, line), field(tokens, 3, line)));
      } else if (tag == kVertexSe3) {
        expect_tokens(tokens, 9, line);
        graph.add_variable(parse_integer(tokens[1], line), read_isometry3(tokens, 2, line));
      } else if (tag == kEdgeSe2) {
        expect_tokens(tokens, 12, line);
        const Isometry2d z(field(tokens, 5, line), Eigen::Vector2d(field(tokens, 3, line), field(tokens, 4, line)));
        graph.add_factor(std::make_unique<Se2PgoFactor>(parse_integer(tokens[1], line),
                                                        parse_integer(tokens[2], line), z,
                                                        upper_triangular(tokens, 6, 3, line)));
      } else if (tag == kEdgeSe2Xy) {
        expect_tokens(tokens, 8, line);
        const Eigen::Vector2d z(field(tokens, 3, line), field(tokens, 4, line));
        graph.add_factor(std::make_unique<Se2LandmarkFactor>(parse_integer(tokens[1], line),
                                                             parse_integer(tokens[2], line), z,
                                                             upper_triangular(tokens, 5, 2, line)));
      } else if (tag == kEdgeSe3) {
        expect_tokens(tokens, 31, line);
        graph.add_factor(std::make_unique<Se3PgoFactor>(parse_integer(tokens[1], line),
                                                        parse_integer(tokens[2], line),
                                                        read_isometry3(tokens, 3, line),
                                                        upper_triangular(tokens, 10, 6, line)));
      } else if (tag == kFix) {
        if (tokens.size() < 2) parse_error(line, "FIX expects at least one id");
        for (std::size_t i = 1; i < tokens.size(); ++i) {
          const VariableKey key = parse_integer(tokens[i], line);
          if (!graph.has_variable(key)) parse_error(line, "FIX of unknown vertex " + std::to_string(key));
          graph.set_status(key, VariableStatus::Fixed);
        }
      } else {
        throw Error(ErrorCode::UnknownTag, "line " + std::to_string(line) + ": unknown tag '" + std::string(tag) + "'",
                    line);
      }
    } catch (const Error& e) {
      if (e.location() == line &&
          (e.code() == ErrorCode::ParseError || e.code() == ErrorCode::UnknownTag)) {
        throw;
      }
      detail::rethrow_at_line(e, line);
    }
  }
  return graph;
}

FactorGraph load_pose_graph(const std::filesystem::path& path) {
  std::ifstream in;
  detail::open_for_reading(in, path.string());
  return load_pose_graph(in);
}

void save_pose_graph(const FactorGraph& graph, std::ostream& out) {
  if (!graph.pools().empty()) throw Error(ErrorCode::InvalidArgument, "correspondence pools have no pose-graph record");
  for (const auto& [key, v] : graph.variables()) {
    if (const auto* x = std::get_if<Isometry2d>(&v.value)) {
      out << kVertexSe2 << ' ' << key;
      write_numbers(out, {x->translation().x(), x->translation().y(), x->angle()});
    } else if (const auto* p = std::get_if<Eigen::Vector2d>(&v.value)) {
      out << kVertexXy << ' ' << key;
      write_numbers(out, {p->x(), p->y()});
    } else if (const auto* x3 = std::get_if<Isometry3d>(&v.value)) {
      out << kVertexSe3 << ' ' << key;
      write_isometry3(out, *x3);
    } else {
      throw Error(ErrorCode::InvalidArgument,
                  "variable " + std::to_string(key) + " of kind " + std::string(kind_name(v.kind())) +
                      " has no pose-graph record");
    }
    out << '\n';
  }
  for (const auto& [key, v] : graph.variables()) {
    if (v.status == VariableStatus::Fixed) out << kFix << ' ' << key << '\n';
  }
  for (const auto& [key, factor] : graph.factors()) {
    const auto& vars = factor->variables();
    if (const auto* f = dynamic_cast<const Se2PgoFactor*>(factor.get())) {
      const auto& z = f->measurement();
      out << kEdgeSe2 << ' ' << vars[0] << ' ' << vars[1];
      write_numbers(out, {z.translation().x(), z.translation().y(), z.angle()});
    } else if (const auto* l = dynamic_cast<const Se2LandmarkFactor*>(factor.get())) {
      out << kEdgeSe2Xy << ' ' << vars[0] << ' ' << vars[1];
      write_numbers(out, {l->measurement().x(), l->measurement().y()});
    } else if (const auto* f3 = dynamic_cast<const Se3PgoFactor*>(factor.get())) {
      out << kEdgeSe3 << ' ' << vars[0] << ' ' << vars[1];
      write_isometry3(out, f3->measurement());
    } else {
      throw Error(ErrorCode::InvalidArgument, "factor " + std::to_string(key) + " of type '" +
                                                  std::string(factor->type_tag()) + "' has no pose-graph record");
    }
    write_upper_triangular(out, factor->information());
    out << '\n';
  }
}

void save_pose_graph(const FactorGraph& graph, const std::filesystem::path& path) {
  std::ofstream out;
  detail::open_for_writing(out, path.string());
  save_pose_graph(graph, out);
  if (!out) throw Error(ErrorCode::IoError, "failed writing '" + path.string() + "'");
}

}  // namespace ils
