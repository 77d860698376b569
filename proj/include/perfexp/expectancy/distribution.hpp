#ifndef PERFEXP_EXPECTANCY_DISTRIBUTION_HPP
#define PERFEXP_EXPECTANCY_DISTRIBUTION_HPP

#include "perfexp/error.hpp"

#include <algorithm>
#include <climits>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

namespace perfexp::expectancy {

using Symbol = int;

// Reserved symbols. UNDEF marks positions where a derived viewpoint has no
// value (the first event for interval-based viewpoints); UNSEEN stands in
// for harmony symbols that never occurred in training.
inline constexpr Symbol undef_symbol = INT_MIN;
inline constexpr Symbol unseen_symbol = INT_MIN + 1;

// Sorted, duplicate-free symbol set.
using Alphabet = std::vector<Symbol>;

inline Alphabet make_alphabet(std::vector<Symbol> symbols) {
  std::sort(symbols.begin(), symbols.end());
  symbols.erase(std::unique(symbols.begin(), symbols.end()), symbols.end());
  return symbols;
}

inline std::ptrdiff_t alphabet_index(const Alphabet &a, Symbol s) {
  auto it = std::lower_bound(a.begin(), a.end(), s);
  if (it == a.end() || *it != s)
    return -1;
  return it - a.begin();
}

/// Probability mass over an alphabet; probs[i] belongs to symbols[i].
struct Distribution {
  Alphabet symbols;
  std::vector<double> probs;

  std::size_t size() const { return symbols.size(); }

  double at(Symbol s) const {
    std::ptrdiff_t i = alphabet_index(symbols, s);
    return i < 0 ? 0.0 : probs[static_cast<std::size_t>(i)];
  }

  double total() const { return std::accumulate(probs.begin(), probs.end(), 0.0); }

  void normalize() {
    const double t = total();
    if (t > 0.0)
      for (double &p : probs)
        p /= t;
  }

  static Distribution uniform(const Alphabet &alphabet) {
    Distribution d{alphabet, std::vector<double>(alphabet.size(),
                                                 1.0 / static_cast<double>(alphabet.size()))};
    return d;
  }
};

inline constexpr double probability_floor = 1e-12;

/// Information content of an observed symbol, in bits.
inline double ic(const Distribution &dist, Symbol observed) {
  std::ptrdiff_t i = alphabet_index(dist.symbols, observed);
  if (i < 0)
    throw Error(ErrorKind::domain,
                "symbol " + std::to_string(observed) + " is outside the alphabet");
  const double p = std::max(dist.probs[static_cast<std::size_t>(i)], probability_floor);
  return p >= 1.0 ? 0.0 : -std::log2(p);
}

inline double entropy(const Distribution &dist) {
  double h = 0.0;
  for (double p : dist.probs)
    if (p > 0.0)
      h -= p * std::log2(p);
  return std::max(h, 0.0);
}

inline double max_entropy(std::size_t alphabet_size) {
  return alphabet_size > 1 ? std::log2(static_cast<double>(alphabet_size)) : 0.0;
}

} // namespace perfexp::expectancy

#endif
