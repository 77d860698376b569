#ifndef PERFEXP_SENSITIVITY_HPP
#define PERFEXP_SENSITIVITY_HPP

#include "perfexp/error.hpp"
#include "perfexp/feature_matrix.hpp"
#include "perfexp/regressor.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

namespace perfexp {

/// values(f, w) is the mean derivative of the output at step tau with
/// respect to feature f at step tau + (w - half_window), in normalized
/// input units.
struct SensitivityMap {
  std::vector<std::string> feature_names;
  int half_window = 8;
  Eigen::MatrixXd values;
  std::size_t centers = 0; // number of (piece, tau) pairs averaged

  int width() const { return 2 * half_window + 1; }
};

/// Derivatives of the output at `tau` with respect to every normalized input
/// cell (rows = steps, columns = features).
inline Eigen::MatrixXd output_input_jacobian(const Regressor &model,
                                             const Eigen::MatrixXd &normalized, Eigen::Index tau) {
  detail::Trace tr = detail::run(model.params, normalized);
  Eigen::VectorXd seed = Eigen::VectorXd::Zero(normalized.rows());
  seed(tau) = 1.0;
  return detail::backward(model.params, tr, normalized, seed).dx;
}

/// Averages the windowed Jacobian over every center tau in [W, T - W - 1] of
/// every piece, accumulating in piece order then tau order.
inline SensitivityMap sensitivity_map(const Regressor &model,
                                      std::span<const FeatureMatrix> pieces, int half_window) {
  if (half_window < 0)
    throw Error(ErrorKind::configuration, "window must be >= 0");
  SensitivityMap map;
  map.half_window = half_window;
  map.feature_names = model.columns;
  if (map.feature_names.size() != static_cast<std::size_t>(model.input_dim)) {
    map.feature_names.clear();
    for (int j = 0; j < model.input_dim; ++j)
      map.feature_names.push_back("x" + std::to_string(j));
  }
  const Eigen::Index W = half_window;
  map.values = Eigen::MatrixXd::Zero(model.input_dim, 2 * W + 1);
  for (const FeatureMatrix &fm : pieces) {
    if (static_cast<int>(fm.width()) != model.input_dim)
      throw Error(ErrorKind::shape, "piece '" + fm.piece_id + "' has the wrong feature width");
    const auto T = static_cast<Eigen::Index>(fm.size());
    if (T <= 2 * W + 1)
      continue;
    Eigen::MatrixXd x = normalize_rows(model, fm.rows);
    for (Eigen::Index tau = W; tau + W < T; ++tau) {
      Eigen::MatrixXd jac = output_input_jacobian(model, x, tau);
      map.values += jac.middleRows(tau - W, 2 * W + 1).transpose();
      ++map.centers;
    }
  }
  if (map.centers == 0)
    throw Error(ErrorKind::size, "every piece is too short for a window of " +
                                     std::to_string(half_window));
  map.values /= static_cast<double>(map.centers);
  return map;
}

inline std::string sensitivity_csv(const SensitivityMap &map) {
  std::ostringstream os;
  os.precision(17);
  os << "feature";
  for (int w = 0; w < map.width(); ++w)
    os << "," << (w - map.half_window);
  os << "\n";
  for (std::size_t f = 0; f < map.feature_names.size(); ++f) {
    os << map.feature_names[f];
    for (int w = 0; w < map.width(); ++w)
      os << "," << map.values(static_cast<Eigen::Index>(f), w);
    os << "\n";
  }
  return os.str();
}

namespace detail {

struct Rgb {
  int r, g, b;
};

// Diverging scale: -1 -> blue, 0 -> white, +1 -> red.
inline Rgb diverging_color(double v) {
  v = std::clamp(v, -1.0, 1.0);
  const Rgb white{255, 255, 255}, red{178, 24, 43}, blue{33, 102, 172};
  const Rgb &end = v >= 0.0 ? red : blue;
  const double t = std::abs(v);
  auto mix = [&](int a, int b) { return static_cast<int>(std::lround(a + (b - a) * t)); };
  return {mix(white.r, end.r), mix(white.g, end.g), mix(white.b, end.b)};
}

inline std::string hex(Rgb c) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c.r, c.g, c.b);
  return buf;
}

inline std::string xml_escape(const std::string &s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
    case '&': out += "&amp;"; break;
    case '<': out += "&lt;"; break;
    case '>': out += "&gt;"; break;
    case '"': out += "&quot;"; break;
    default: out += ch;
    }
  }
  return out;
}

} // namespace detail

/// SVG heat map with one labelled row per feature and one column per
/// offset. Colors share one symmetric scale whose extreme is max |value|.
inline std::string render_map_svg(const SensitivityMap &map) {
  constexpr int cell = 24, left = 70, top = 30, bottom = 30;
  const int cols = map.width();
  const auto rows = static_cast<int>(map.feature_names.size());
  const int width = left + cols * cell + 10;
  const int height = top + rows * cell + bottom;
  const double scale = map.values.size() ? map.values.cwiseAbs().maxCoeff() : 0.0;

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  os << "<g class=\"cells\">\n";
  for (int f = 0; f < rows; ++f) {
    for (int w = 0; w < cols; ++w) {
      const double v = map.values(f, w);
      const double norm = scale > 0.0 ? v / scale : 0.0;
      os << "<rect x=\"" << left + w * cell << "\" y=\"" << top + f * cell << "\" width=\"" << cell
         << "\" height=\"" << cell << "\" fill=\"" << detail::hex(detail::diverging_color(norm))
         << "\"/>\n";
    }
  }
  os << "</g>\n<g class=\"labels\" font-family=\"sans-serif\" font-size=\"11\">\n";
  for (int f = 0; f < rows; ++f) {
    os << "<text class=\"feature\" x=\"" << left - 4 << "\" y=\"" << top + f * cell + cell / 2 + 4
       << "\" text-anchor=\"end\">" << detail::xml_escape(map.feature_names[static_cast<std::size_t>(f)])
       << "</text>\n";
  }
  for (int w = 0; w < cols; ++w) {
    const int offset = w - map.half_window;
    os << "<text class=\"offset\" x=\"" << left + w * cell + cell / 2 << "\" y=\"" << top - 6
       << "\" text-anchor=\"middle\">" << (offset == 0 ? std::string("\xcf\x84") : std::to_string(offset))
       << "</text>\n";
  }
  os << "</g>\n";
  os << "<rect class=\"center\" x=\"" << left + map.half_window * cell << "\" y=\"" << top
     << "\" width=\"" << cell << "\" height=\"" << rows * cell
     << "\" fill=\"none\" stroke=\"#000000\" stroke-width=\"1.5\"/>\n";
  os << "</svg>\n";
  return os.str();
}

inline void render_map(const SensitivityMap &map, const std::string &path) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw Error(ErrorKind::io, "cannot write '" + path + "'");
  out << render_map_svg(map);
  if (!out)
    throw Error(ErrorKind::io, "failed writing '" + path + "'");
}

} // namespace perfexp

#endif
