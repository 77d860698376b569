#ifndef PERFEXP_METRICS_HPP
#define PERFEXP_METRICS_HPP

#include "perfexp/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace perfexp {

struct FoldPlan {
  int k = 5;
  std::uint64_t seed = 0;
  std::map<std::string, int> assignments;

  std::vector<std::string> test_ids(int fold) const {
    std::vector<std::string> out;
    for (const auto &[id, f] : assignments)
      if (f == fold)
        out.push_back(id);
    return out;
  }
};

/// Seeded shuffle followed by round-robin assignment, so fold sizes differ
/// by at most one.
inline FoldPlan make_folds(std::span<const std::string> piece_ids, int k, std::uint64_t seed) {
  if (k < 2)
    throw Error(ErrorKind::configuration, "number of folds must be >= 2");
  if (static_cast<std::size_t>(k) > piece_ids.size())
    throw Error(ErrorKind::configuration, "more folds (" + std::to_string(k) + ") than pieces (" +
                                              std::to_string(piece_ids.size()) + ")");
  std::vector<std::string> ids(piece_ids.begin(), piece_ids.end());
  std::vector<std::string> check = ids;
  std::sort(check.begin(), check.end());
  if (std::adjacent_find(check.begin(), check.end()) != check.end())
    throw Error(ErrorKind::configuration, "piece ids must be unique");
  std::mt19937_64 rng(seed);
  std::shuffle(ids.begin(), ids.end(), rng);
  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  for (std::size_t i = 0; i < ids.size(); ++i)
    plan.assignments[ids[i]] = static_cast<int>(i % static_cast<std::size_t>(k));
  return plan;
}

namespace detail {

inline void check_pair(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size())
    throw Error(ErrorKind::shape, "prediction and target lengths differ");
  if (pred.size() < 2)
    throw Error(ErrorKind::size, "metrics need at least 2 values");
}

inline double mean(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

} // namespace detail

// Coefficient of determination 1 - SS_res / SS_tot.
inline double r_squared(std::span<const double> pred, std::span<const double> target) {
  detail::check_pair(pred, target);
  const double m = detail::mean(target);
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    ss_res += (target[i] - pred[i]) * (target[i] - pred[i]);
    ss_tot += (target[i] - m) * (target[i] - m);
  }
  if (ss_tot == 0.0)
    throw Error(ErrorKind::undefined_metric, "R^2 undefined for a constant target");
  return 1.0 - ss_res / ss_tot;
}

inline double pearson_r(std::span<const double> pred, std::span<const double> target) {
  detail::check_pair(pred, target);
  const double mx = detail::mean(pred), my = detail::mean(target);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    sxy += (pred[i] - mx) * (target[i] - my);
    sxx += (pred[i] - mx) * (pred[i] - mx);
    syy += (target[i] - my) * (target[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0)
    throw Error(ErrorKind::undefined_metric, "Pearson r undefined for a constant series");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

} // namespace perfexp

#endif
