#ifndef PERFEXP_EXPECTANCY_COMBINE_HPP
#define PERFEXP_EXPECTANCY_COMBINE_HPP

#include "perfexp/error.hpp"
#include "perfexp/expectancy/distribution.hpp"

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

namespace perfexp::expectancy {

namespace detail {
// Relative entropies below this are clamped so a point mass gets a large but
// finite weight.
inline constexpr double min_relative_entropy = 1e-9;
} // namespace detail

/// Entropy-weighted geometric mean. Each input gets weight
/// (H_k / H_max)^-bias, so confident (low-entropy) predictions dominate.
inline Distribution combine_distributions(std::span<const Distribution> dists,
                                          double bias) {
  if (dists.empty())
    throw Error(ErrorKind::combination, "combine_distributions: no inputs");
  if (!(bias > 0.0))
    throw Error(ErrorKind::configuration, "combination bias must be > 0");
  for (const Distribution &d : dists)
    if (d.symbols != dists.front().symbols)
      throw Error(ErrorKind::combination, "combine_distributions: mismatched alphabets");
  if (dists.size() == 1)
    return dists.front();

  const Alphabet &alpha = dists.front().symbols;
  const double h_max = max_entropy(alpha.size());
  if (h_max == 0.0)
    return dists.front();

  std::vector<double> weight(dists.size());
  for (std::size_t k = 0; k < dists.size(); ++k) {
    double rel = std::max(entropy(dists[k]) / h_max, detail::min_relative_entropy);
    weight[k] = std::pow(rel, -bias);
  }
  double wsum = 0.0;
  for (double w : weight)
    wsum += w;

  Distribution out{alpha, std::vector<double>(alpha.size(), 0.0)};
  std::vector<double> logp(alpha.size(), 0.0);
  std::vector<char> zero(alpha.size(), 0);
  for (std::size_t k = 0; k < dists.size(); ++k) {
    const double w = weight[k] / wsum;
    for (std::size_t i = 0; i < alpha.size(); ++i) {
      const double p = dists[k].probs[i];
      if (p <= 0.0)
        zero[i] = 1;
      else
        logp[i] += w * std::log(p);
    }
  }
  const double top = [&] {
    double m = -INFINITY;
    for (std::size_t i = 0; i < alpha.size(); ++i)
      if (!zero[i])
        m = std::max(m, logp[i]);
    return m;
  }();
  if (!std::isfinite(top))
    throw Error(ErrorKind::combination, "combine_distributions: inputs have disjoint support");
  for (std::size_t i = 0; i < alpha.size(); ++i)
    out.probs[i] = zero[i] ? 0.0 : std::exp(logp[i] - top);
  out.normalize();
  return out;
}

} // namespace perfexp::expectancy

#endif
