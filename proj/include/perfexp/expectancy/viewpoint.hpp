#ifndef PERFEXP_EXPECTANCY_VIEWPOINT_HPP
#define PERFEXP_EXPECTANCY_VIEWPOINT_HPP

#include "perfexp/corpus.hpp"
#include "perfexp/error.hpp"
#include "perfexp/expectancy/distribution.hpp"
#include "perfexp/score_features.hpp"

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace perfexp::expectancy {

enum class Viewpoint { cpitch, cpint, contour, vic_tuple };

inline std::string_view to_string(Viewpoint v) {
  switch (v) {
  case Viewpoint::cpitch: return "cpitch";
  case Viewpoint::cpint: return "cpint";
  case Viewpoint::contour: return "contour";
  case Viewpoint::vic_tuple: return "vic_tuple";
  }
  return "cpitch";
}

inline Viewpoint viewpoint_from_string(std::string_view s) {
  for (Viewpoint v : {Viewpoint::cpitch, Viewpoint::cpint, Viewpoint::contour,
                      Viewpoint::vic_tuple})
    if (to_string(v) == s)
      return v;
  throw Error(ErrorKind::configuration, "unknown viewpoint '" + std::string(s) + "'");
}

// Interval viewpoints have no value at the first event.
inline bool is_derived(Viewpoint v) {
  return v == Viewpoint::cpint || v == Viewpoint::contour;
}

struct SymbolSequence {
  std::string alphabet_id;
  std::vector<Symbol> symbols;
};

// Melody pitches plus, for each, the onset-group index it came from.
struct MelodySequence {
  SymbolSequence pitches;
  std::vector<std::size_t> onset_index;
};

inline MelodySequence encode_melody(const Piece &piece) {
  MelodySequence out;
  out.pitches.alphabet_id = "cpitch";
  OnsetSequence seq = group_by_onset(piece);
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (const Note *m = seq.groups[i].melody()) {
      out.pitches.symbols.push_back(m->midi_pitch);
      out.onset_index.push_back(i);
    }
  }
  if (out.pitches.symbols.empty())
    throw Error(ErrorKind::empty_melody, "piece '" + piece.id + "' has no melody notes");
  return out;
}

// A vic tuple is a strictly ascending list of classes in 1..11, so it is
// stored as the bit set of its classes: class c sets bit c.
inline Symbol harmony_symbol(std::span<const int> classes) {
  Symbol s = 0;
  for (int c : classes)
    s |= 1 << c;
  return s;
}

inline std::vector<int> harmony_classes(Symbol s) {
  std::vector<int> out;
  for (int c = 1; c <= 11; ++c)
    if (s & (1 << c))
      out.push_back(c);
  return out;
}

inline std::string harmony_label(Symbol s) {
  if (s == unseen_symbol)
    return "UNSEEN";
  std::string out = "(";
  bool first = true;
  for (int c : harmony_classes(s)) {
    if (!first)
      out += ",";
    out += std::to_string(c);
    first = false;
  }
  return out + ")";
}

inline SymbolSequence encode_harmony(const Piece &piece) {
  SymbolSequence out;
  out.alphabet_id = "vic_tuple";
  for (const OnsetGroup &g : group_by_onset(piece).groups)
    out.symbols.push_back(harmony_symbol(interval_classes(g)));
  return out;
}

inline Symbol derive_symbol(Viewpoint vp, std::optional<Symbol> previous, Symbol current) {
  switch (vp) {
  case Viewpoint::cpitch:
  case Viewpoint::vic_tuple:
    return current;
  case Viewpoint::cpint:
    return previous ? current - *previous : undef_symbol;
  case Viewpoint::contour:
    if (!previous)
      return undef_symbol;
    return current > *previous ? 1 : (current < *previous ? -1 : 0);
  }
  throw Error(ErrorKind::configuration, "unknown viewpoint");
}

inline std::vector<Symbol> derive_viewpoint(std::span<const Symbol> seq, Viewpoint vp) {
  std::vector<Symbol> out;
  out.reserve(seq.size());
  for (std::size_t i = 0; i < seq.size(); ++i) {
    std::optional<Symbol> prev;
    if (i > 0)
      prev = seq[i - 1];
    out.push_back(derive_symbol(vp, prev, seq[i]));
  }
  return out;
}

inline SymbolSequence derive_viewpoint(const SymbolSequence &seq, Viewpoint vp) {
  return {std::string(to_string(vp)), derive_viewpoint(seq.symbols, vp)};
}

/// Alphabet a viewpoint's model needs so that every basic symbol stays
/// reachable: all pairwise differences for cpint, {-1, 0, +1} for contour.
inline Alphabet derived_alphabet(Viewpoint vp, const Alphabet &basic) {
  switch (vp) {
  case Viewpoint::cpitch:
  case Viewpoint::vic_tuple:
    return basic;
  case Viewpoint::cpint: {
    if (basic.empty())
      return {};
    const Symbol span = basic.back() - basic.front();
    Alphabet a;
    for (Symbol d = -span; d <= span; ++d)
      a.push_back(d);
    return a;
  }
  case Viewpoint::contour:
    return {-1, 0, 1};
  }
  return basic;
}

/// Maps a distribution over derived symbols onto the basic alphabet given the
/// previous basic symbol. Each derived symbol's mass is split uniformly over
/// the basic symbols that derive to it; the result is renormalized.
inline Distribution to_basic(const Distribution &derived, Viewpoint vp,
                             std::optional<Symbol> previous, const Alphabet &basic) {
  if (!is_derived(vp))
    return derived;
  std::vector<Symbol> image(basic.size());
  std::map<Symbol, std::size_t> preimage_size;
  for (std::size_t i = 0; i < basic.size(); ++i) {
    image[i] = derive_symbol(vp, previous, basic[i]);
    ++preimage_size[image[i]];
  }
  Distribution out{basic, std::vector<double>(basic.size(), 0.0)};
  for (std::size_t i = 0; i < basic.size(); ++i)
    out.probs[i] = derived.at(image[i]) / static_cast<double>(preimage_size[image[i]]);
  if (out.total() <= 0.0)
    return Distribution::uniform(basic);
  out.normalize();
  return out;
}

} // namespace perfexp::expectancy

#endif
