#ifndef PERFEXP_TESTS_SUPPORT_HPP
#define PERFEXP_TESTS_SUPPORT_HPP

#include "perfexp/corpus.hpp"

#include <algorithm>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

namespace testing_support {

using perfexp::MeterClass;
using perfexp::MeterSpan;
using perfexp::Note;
using perfexp::Piece;

inline Note note(double beat, int pitch, bool melody, double time, int velocity = 64) {
  Note n;
  n.onset_beats = beat;
  n.duration_beats = 1.0;
  n.midi_pitch = pitch;
  n.is_melody = melody;
  n.perf_onset_sec = time;
  n.perf_velocity = velocity;
  return n;
}

inline Piece piece(std::string id, std::vector<Note> notes,
                   MeterSpan meter = {0.0, 4.0, MeterClass::duple}) {
  Piece p;
  p.id = std::move(id);
  p.notes = std::move(notes);
  p.meters = {meter};
  return p;
}

// One melody note per beat position with the given performed times.
inline Piece timed_piece(const std::vector<double> &beats, const std::vector<double> &times) {
  std::vector<Note> notes;
  for (std::size_t i = 0; i < beats.size(); ++i)
    notes.push_back(note(beats[i], 60 + static_cast<int>(i % 12), true, times[i]));
  return piece("timed", notes);
}

// Monophonic melody at one beat per note and a steady half-second beat.
inline Piece melody_piece(std::string id, const std::vector<int> &pitches) {
  std::vector<Note> notes;
  for (std::size_t i = 0; i < pitches.size(); ++i)
    notes.push_back(note(static_cast<double>(i), pitches[i], true, 0.5 * static_cast<double>(i)));
  return piece(std::move(id), notes);
}

/// PPM-C with exclusion computed straight from the raw training sequences:
/// every context's follower counts are recounted by scanning for matches,
/// with no shared state with the library's trie.
inline std::vector<double> oracle_ppmc(const std::vector<std::vector<int>> &train, int max_order,
                                       const std::vector<int> &alphabet,
                                       const std::vector<int> &context) {
  std::map<int, double> prob;
  std::map<int, bool> excluded;
  for (int s : alphabet) {
    prob[s] = 0.0;
    excluded[s] = false;
  }
  double mass = 1.0;
  const int top = std::min<int>(static_cast<int>(context.size()), max_order);
  for (int k = top; k >= 0; --k) {
    std::vector<int> ctx(context.end() - k, context.end());
    std::map<int, int> follow;
    bool seen = false;
    for (const auto &seq : train) {
      for (std::size_t i = static_cast<std::size_t>(k); i < seq.size(); ++i) {
        if (std::equal(ctx.begin(), ctx.end(), seq.begin() + static_cast<std::ptrdiff_t>(i) - k)) {
          ++follow[seq[i]];
          seen = true;
        }
      }
    }
    if (!seen)
      continue;
    double n = 0.0, d = 0.0;
    for (auto [s, c] : follow)
      if (!excluded[s]) {
        n += c;
        d += 1;
      }
    if (d == 0.0)
      continue;
    for (auto [s, c] : follow)
      if (!excluded[s]) {
        prob[s] += mass * c / (n + d);
        excluded[s] = true;
      }
    mass *= d / (n + d);
  }
  int remaining = 0;
  for (int s : alphabet)
    remaining += excluded[s] ? 0 : 1;
  for (int s : alphabet)
    if (!excluded[s])
      prob[s] += mass / remaining;
  double total = 0.0;
  for (int s : alphabet)
    total += prob[s];
  std::vector<double> out;
  for (int s : alphabet)
    out.push_back(prob[s] / total);
  return out;
}

// All sequences over {0..a-1} with length in [1, max_len], shortest first.
inline std::vector<std::vector<int>> all_sequences(int a, int max_len) {
  std::vector<std::vector<int>> out;
  std::vector<std::vector<int>> layer{{}};
  for (int len = 1; len <= max_len; ++len) {
    std::vector<std::vector<int>> next;
    for (const auto &s : layer)
      for (int x = 0; x < a; ++x) {
        auto t = s;
        t.push_back(x);
        next.push_back(t);
      }
    out.insert(out.end(), next.begin(), next.end());
    layer = std::move(next);
  }
  return out;
}

} // namespace testing_support

#endif
