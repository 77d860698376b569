#ifndef PERFEXP_STATS_HPP
#define PERFEXP_STATS_HPP

#include "perfexp/error.hpp"

#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/erf.hpp>
#include <boost/math/tools/roots.hpp>

#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace perfexp {

struct TukeyRow {
  std::size_t first = 0, second = 0;
  double mean_difference = 0.0; // mean(second) - mean(first)
  double q = 0.0;
  double q_critical = 0.0;
  double p_value = 1.0;
  bool significant = false;
};

struct StatTestResult {
  double F = 0.0;
  int df_between = 0;
  int df_within = 0;
  double p_value = 1.0;
  double ms_within = 0.0;
  std::vector<TukeyRow> tukey;
};

namespace detail {

struct GroupSummary {
  std::vector<double> means;
  std::vector<std::size_t> sizes;
  double ss_between = 0.0;
  double ss_within = 0.0;
  int df_between = 0;
  int df_within = 0;
};

inline GroupSummary summarize(std::span<const std::vector<double>> groups) {
  if (groups.size() < 2)
    throw Error(ErrorKind::undefined_test, "ANOVA needs at least 2 groups");
  GroupSummary s;
  std::size_t n = 0;
  for (const auto &g : groups) {
    if (g.size() < 2)
      throw Error(ErrorKind::undefined_test, "every ANOVA group needs at least 2 values");
    double m = 0.0;
    for (double v : g)
      m += v;
    m /= static_cast<double>(g.size());
    s.means.push_back(m);
    s.sizes.push_back(g.size());
    n += g.size();
  }
  // pairwise form of sum n_i (m_i - grand)^2: exactly zero when the means agree
  for (std::size_t i = 0; i < groups.size(); ++i) {
    for (std::size_t j = i + 1; j < groups.size(); ++j) {
      const double d = s.means[i] - s.means[j];
      s.ss_between += static_cast<double>(s.sizes[i]) * static_cast<double>(s.sizes[j]) * d * d;
    }
    for (double v : groups[i])
      s.ss_within += (v - s.means[i]) * (v - s.means[i]);
  }
  s.ss_between /= static_cast<double>(n);
  s.df_between = static_cast<int>(groups.size()) - 1;
  s.df_within = static_cast<int>(n - groups.size());
  return s;
}

inline double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI); }
inline double normal_cdf(double z) { return 0.5 * boost::math::erfc(-z / std::sqrt(2.0)); }

// P(range of k iid standard normals < w).
inline double normal_range_cdf(double w, int k) {
  if (w <= 0.0)
    return 0.0;
  auto f = [&](double z) {
    const double inner = normal_cdf(z + w) - normal_cdf(z);
    return normal_pdf(z) * std::pow(std::max(inner, 0.0), k - 1);
  };
  const double v = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, -9.0, 9.0, 12, 1e-12);
  return std::min(1.0, static_cast<double>(k) * v);
}

} // namespace detail

inline constexpr int tukey_max_groups = 20;

/// CDF of the studentized range Q(k, df): the normal range CDF integrated
/// against the density of s = sqrt(chi2_df / df).
inline double studentized_range_cdf(double q, int k, double df) {
  if (k < 2 || k > tukey_max_groups || !(df >= 1.0))
    throw Error(ErrorKind::configuration,
                "studentized range supports 2.." + std::to_string(tukey_max_groups) +
                    " groups and df >= 1");
  if (q <= 0.0)
    return 0.0;
  if (df > 5e4)
    return detail::normal_range_cdf(q, k);
  const double log_norm = 0.5 * df * std::log(df) - std::lgamma(0.5 * df) -
                          (0.5 * df - 1.0) * std::log(2.0);
  auto density = [&](double s) {
    if (s <= 0.0)
      return 0.0;
    return std::exp(log_norm + (df - 1.0) * std::log(s) - 0.5 * df * s * s);
  };
  const double lo = std::max(0.0, 1.0 - 12.0 / std::sqrt(df));
  const double hi = 1.0 + 12.0 / std::sqrt(df);
  auto f = [&](double s) { return density(s) * detail::normal_range_cdf(q * s, k); };
  const double v = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, lo, hi, 15, 1e-10);
  return std::clamp(v, 0.0, 1.0);
}

// Upper-tail critical value: P(Q > q) = alpha.
inline double studentized_range_quantile(double alpha, int k, double df) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw Error(ErrorKind::configuration, "alpha must be in (0, 1)");
  auto g = [&](double q) { return studentized_range_cdf(q, k, df) - (1.0 - alpha); };
  double hi = 10.0;
  while (g(hi) < 0.0)
    hi *= 2.0;
  boost::math::tools::eps_tolerance<double> tol(40);
  std::uintmax_t iters = 200;
  auto [a, b] = boost::math::tools::toms748_solve(g, 0.0, hi, g(0.0), g(hi), tol, iters);
  return 0.5 * (a + b);
}

/// One-way ANOVA F = MS_between / MS_within with its F-distribution p-value.
inline StatTestResult anova_oneway(std::span<const std::vector<double>> groups) {
  detail::GroupSummary s = detail::summarize(groups);
  StatTestResult r;
  r.df_between = s.df_between;
  r.df_within = s.df_within;
  if (s.ss_within == 0.0 && s.ss_between == 0.0)
    throw Error(ErrorKind::undefined_test, "ANOVA undefined: no variance within or between groups");
  const double ms_between = s.ss_between / s.df_between;
  r.ms_within = s.ss_within / s.df_within;
  if (s.ss_within == 0.0) {
    r.F = std::numeric_limits<double>::infinity();
    r.p_value = 0.0;
    return r;
  }
  r.F = ms_between / r.ms_within;
  boost::math::fisher_f dist(s.df_between, s.df_within);
  r.p_value = boost::math::cdf(boost::math::complement(dist, r.F));
  return r;
}

/// Tukey-Kramer pairwise comparisons. Critical values and p-values come from
/// the studentized range distribution evaluated numerically.
inline std::vector<TukeyRow> tukey_hsd(std::span<const std::vector<double>> groups, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw Error(ErrorKind::configuration, "alpha must be in (0, 1)");
  detail::GroupSummary s = detail::summarize(groups);
  const int k = static_cast<int>(groups.size());
  const double df = s.df_within;
  const double ms_within = s.ss_within / df;
  const double q_crit = studentized_range_quantile(alpha, k, df);
  std::vector<TukeyRow> rows;
  for (std::size_t a = 0; a < groups.size(); ++a) {
    for (std::size_t b = a + 1; b < groups.size(); ++b) {
      TukeyRow row;
      row.first = a;
      row.second = b;
      row.mean_difference = s.means[b] - s.means[a];
      row.q_critical = q_crit;
      const double se = std::sqrt(0.5 * ms_within *
                                  (1.0 / static_cast<double>(s.sizes[a]) +
                                   1.0 / static_cast<double>(s.sizes[b])));
      if (se == 0.0) {
        row.q = row.mean_difference == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
      } else {
        row.q = std::abs(row.mean_difference) / se;
      }
      row.p_value = std::isinf(row.q) ? 0.0 : 1.0 - studentized_range_cdf(row.q, k, df);
      row.significant = row.q > q_crit;
      rows.push_back(row);
    }
  }
  return rows;
}

} // namespace perfexp

#endif
