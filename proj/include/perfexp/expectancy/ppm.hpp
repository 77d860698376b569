#ifndef PERFEXP_EXPECTANCY_PPM_HPP
#define PERFEXP_EXPECTANCY_PPM_HPP

#include "perfexp/error.hpp"
#include "perfexp/expectancy/distribution.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

namespace perfexp::expectancy {

/// Variable-order n-gram statistics. counts[context][symbol] is the number of
/// times `symbol` followed `context` in training, for every context length
/// 0..max_order (the empty context holds unigram counts).
struct ContextModel {
  int max_order = 3;
  Alphabet alphabet;
  std::map<std::vector<Symbol>, std::map<Symbol, std::uint64_t>> counts;

  bool empty() const { return counts.empty(); }

  // Records the event at `pos` under each of its contexts.
  void observe(std::span<const Symbol> seq, std::size_t pos) {
    const Symbol s = seq[pos];
    if (alphabet_index(alphabet, s) < 0) {
      alphabet.insert(std::lower_bound(alphabet.begin(), alphabet.end(), s), s);
    }
    const std::size_t top = std::min<std::size_t>(pos, static_cast<std::size_t>(max_order));
    for (std::size_t k = 0; k <= top; ++k) {
      std::vector<Symbol> ctx(seq.begin() + static_cast<std::ptrdiff_t>(pos - k),
                              seq.begin() + static_cast<std::ptrdiff_t>(pos));
      ++counts[std::move(ctx)][s];
    }
  }

  void train(std::span<const Symbol> seq) {
    for (std::size_t i = 0; i < seq.size(); ++i)
      observe(seq, i);
  }
};

inline ContextModel ppm_train(std::span<const std::vector<Symbol>> sequences,
                              int max_order, const Alphabet &declared = {}) {
  if (sequences.empty())
    throw Error(ErrorKind::training, "ppm_train: empty training set");
  if (max_order < 0)
    throw Error(ErrorKind::configuration, "ppm_train: max_order must be >= 0");
  ContextModel m;
  m.max_order = max_order;
  m.alphabet = make_alphabet(declared);
  for (const auto &seq : sequences)
    m.train(seq);
  return m;
}

/// PPM with escape method C and exclusion. Starting from the longest usable
/// context, each order assigns c(s)/(n+d) to its not-yet-predicted symbols
/// and passes d/(n+d) down, where n and d count only non-excluded symbols.
/// Orders whose context was never seen (or whose symbols are all excluded)
/// are skipped without an escape. What remains goes uniformly to the symbols
/// no order predicted.
inline Distribution ppm_predict(const ContextModel &model,
                                std::span<const Symbol> context) {
  const Alphabet &alpha = model.alphabet;
  if (alpha.empty())
    throw Error(ErrorKind::model, "ppm_predict: empty alphabet");
  Distribution out{alpha, std::vector<double>(alpha.size(), 0.0)};
  std::vector<char> excluded(alpha.size(), 0);
  double mass = 1.0;

  const std::size_t top =
      std::min<std::size_t>(context.size(), static_cast<std::size_t>(model.max_order));
  std::vector<Symbol> key;
  for (std::size_t k = top + 1; k-- > 0;) {
    key.assign(context.end() - static_cast<std::ptrdiff_t>(k), context.end());
    auto it = model.counts.find(key);
    if (it == model.counts.end())
      continue;
    std::uint64_t n = 0, d = 0;
    for (const auto &[sym, c] : it->second) {
      if (!excluded[static_cast<std::size_t>(alphabet_index(alpha, sym))]) {
        n += c;
        ++d;
      }
    }
    if (d == 0)
      continue;
    const double denom = static_cast<double>(n + d);
    for (const auto &[sym, c] : it->second) {
      auto idx = static_cast<std::size_t>(alphabet_index(alpha, sym));
      if (excluded[idx])
        continue;
      out.probs[idx] += mass * static_cast<double>(c) / denom;
      excluded[idx] = 1;
    }
    mass *= static_cast<double>(d) / denom;
  }

  const auto remaining =
      static_cast<std::size_t>(std::count(excluded.begin(), excluded.end(), 0));
  if (remaining > 0) {
    const double share = mass / static_cast<double>(remaining);
    for (std::size_t i = 0; i < alpha.size(); ++i)
      if (!excluded[i])
        out.probs[i] += share;
  }
  out.normalize();
  return out;
}

inline nlohmann::json to_json(const ContextModel &m) {
  nlohmann::json j;
  j["max_order"] = m.max_order;
  j["alphabet"] = m.alphabet;
  j["contexts"] = nlohmann::json::array();
  for (const auto &[ctx, table] : m.counts) {
    nlohmann::json row;
    row["context"] = ctx;
    row["counts"] = nlohmann::json::array();
    for (const auto &[sym, c] : table)
      row["counts"].push_back({sym, c});
    j["contexts"].push_back(std::move(row));
  }
  return j;
}

inline ContextModel context_model_from_json(const nlohmann::json &j) {
  try {
    ContextModel m;
    m.max_order = j.at("max_order").get<int>();
    m.alphabet = make_alphabet(j.at("alphabet").get<std::vector<Symbol>>());
    for (const auto &row : j.at("contexts")) {
      auto &table = m.counts[row.at("context").get<std::vector<Symbol>>()];
      for (const auto &pair : row.at("counts"))
        table[pair.at(0).get<Symbol>()] = pair.at(1).get<std::uint64_t>();
    }
    return m;
  } catch (const nlohmann::json::exception &e) {
    throw Error(ErrorKind::model, std::string("malformed context model: ") + e.what());
  }
}

} // namespace perfexp::expectancy

#endif
