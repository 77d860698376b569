#ifndef PERFEXP_FEATURE_MATRIX_HPP
#define PERFEXP_FEATURE_MATRIX_HPP

#include "perfexp/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <string_view>
#include <vector>

namespace perfexp {

enum class FeatureSet { E, S, ES };

inline constexpr std::array<FeatureSet, 3> all_feature_sets = {
    FeatureSet::E, FeatureSet::S, FeatureSet::ES};

inline std::string_view to_string(FeatureSet s) {
  switch (s) {
  case FeatureSet::E: return "E";
  case FeatureSet::S: return "S";
  case FeatureSet::ES: return "E+S";
  }
  return "E";
}

inline FeatureSet feature_set_from_string(std::string_view s) {
  if (s == "E") return FeatureSet::E;
  if (s == "S") return FeatureSet::S;
  if (s == "E+S" || s == "ES") return FeatureSet::ES;
  throw Error(ErrorKind::configuration,
              "unknown feature set '" + std::string(s) + "'");
}

inline const std::vector<std::string> &expectancy_columns() {
  static const std::vector<std::string> cols{"ic_m", "h_m", "ic_c", "h_c"};
  return cols;
}

inline const std::vector<std::string> &score_columns() {
  static const std::vector<std::string> cols{
      "pitch_h", "pitch_l", "pitch_m", "vic_1", "vic_2",
      "vic_3",   "b_phi",   "b_d",     "b_s",   "b_w"};
  return cols;
}

inline std::vector<std::string> columns_for(FeatureSet s) {
  switch (s) {
  case FeatureSet::E: return expectancy_columns();
  case FeatureSet::S: return score_columns();
  case FeatureSet::ES: {
    std::vector<std::string> c = expectancy_columns();
    c.insert(c.end(), score_columns().begin(), score_columns().end());
    return c;
  }
  }
  return {};
}

// Binary indicator columns are passed to the regressor unnormalized.
inline bool is_binary_column(std::string_view name) {
  return name == "b_d" || name == "b_s" || name == "b_w";
}

/// Per-onset feature rows of one piece. Column order is fixed by the
/// feature set: E = [ic_m, h_m, ic_c, h_c], S = the ten score columns,
/// E+S = E columns followed by S columns.
struct FeatureMatrix {
  std::string piece_id;
  FeatureSet feature_set = FeatureSet::S;
  std::vector<std::string> columns;
  Eigen::MatrixXd rows;

  FeatureMatrix() = default;
  FeatureMatrix(std::string id, FeatureSet set, std::size_t n_rows)
      : piece_id(std::move(id)), feature_set(set), columns(columns_for(set)),
        rows(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_rows),
                                   static_cast<Eigen::Index>(columns.size()))) {}

  std::size_t size() const { return static_cast<std::size_t>(rows.rows()); }
  std::size_t width() const { return columns.size(); }

  bool all_finite() const { return rows.allFinite(); }
};

inline FeatureMatrix concat_features(const FeatureMatrix &expectancy,
                                     const FeatureMatrix &score) {
  if (expectancy.feature_set != FeatureSet::E || score.feature_set != FeatureSet::S)
    throw Error(ErrorKind::shape, "concat_features expects an E and an S matrix");
  if (expectancy.size() != score.size())
    throw Error(ErrorKind::shape, "piece '" + score.piece_id +
                                      "': E and S matrices differ in row count");
  FeatureMatrix out(score.piece_id, FeatureSet::ES, score.size());
  out.rows << expectancy.rows, score.rows;
  return out;
}

} // namespace perfexp

#endif
