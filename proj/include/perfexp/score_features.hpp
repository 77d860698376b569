#ifndef PERFEXP_SCORE_FEATURES_HPP
#define PERFEXP_SCORE_FEATURES_HPP

#include "perfexp/corpus.hpp"
#include "perfexp/error.hpp"
#include "perfexp/feature_matrix.hpp"

#include <array>
#include <cmath>
#include <set>
#include <string>
#include <vector>

namespace perfexp {

struct PitchFeatures {
  double high = 0.0;
  double low = 0.0;
  double melody = 0.0;
};

struct MetricalFeatures {
  double phase = 0.0; // b_phi in [0, 1)
  int downbeat = 0;
  int secondary = 0;
  int weak = 0;
};

inline PitchFeatures pitch_features(const OnsetGroup &group) {
  PitchFeatures f;
  f.high = group.highest_pitch() / 127.0;
  f.low = group.lowest_pitch() / 127.0;
  if (const Note *m = group.melody())
    f.melody = m->midi_pitch / 127.0;
  return f;
}

// Distinct nonzero interval classes above the bass, ascending. Octaves and
// pitch-class repetitions collapse to the same class and class 0 is dropped.
inline std::vector<int> interval_classes(const OnsetGroup &group) {
  const int bass = group.lowest_pitch();
  std::set<int> classes;
  for (const Note &n : group.notes) {
    int c = (n.midi_pitch - bass) % 12;
    if (c != 0)
      classes.insert(c);
  }
  return {classes.begin(), classes.end()};
}

inline std::array<double, 3> vic_features(const OnsetGroup &group) {
  std::array<double, 3> out{0.0, 0.0, 0.0};
  std::vector<int> classes = interval_classes(group);
  for (std::size_t i = 0; i < classes.size() && i < 3; ++i)
    out[i] = classes[i] / 11.0;
  return out;
}

namespace detail {
// Phases within this distance of 0, 0.5 or 1 snap to the exact value, so
// triplet-based onsets written as decimals still hit the strong positions.
inline constexpr double phase_tolerance = 1e-9;
} // namespace detail

/// Bar phase and metrical strength of an onset. The onset is shifted by the
/// anacrusis so that the first notated downbeat has phase 0. The first span
/// also covers the pickup (negative shifted positions wrap into its last bar);
/// any later span must start at or before the onset.
inline MetricalFeatures metrical_features(double onset_beats,
                                          double anacrusis_beats,
                                          const MeterSpan &meter) {
  const double t = onset_beats - anacrusis_beats - meter.start_beat;
  if (t < -detail::phase_tolerance && meter.start_beat != 0.0)
    throw Error(ErrorKind::coverage,
                "onset " + std::to_string(onset_beats) +
                    " lies before the meter span starting at " +
                    std::to_string(meter.start_beat));
  const double bar = meter.bar_length_beats;
  double phase = std::fmod(t, bar);
  if (phase < 0.0)
    phase += bar;
  phase /= bar;
  if (std::abs(phase) < detail::phase_tolerance ||
      std::abs(phase - 1.0) < detail::phase_tolerance)
    phase = 0.0;
  if (std::abs(phase - 0.5) < detail::phase_tolerance)
    phase = 0.5;

  MetricalFeatures f;
  f.phase = phase;
  const bool duple = meter.classification == MeterClass::duple ||
                     meter.classification == MeterClass::compound_duple;
  if (phase == 0.0)
    f.downbeat = 1;
  else if (phase == 0.5 && duple)
    f.secondary = 1;
  else
    f.weak = 1;
  return f;
}

// Span in effect at a score onset: the last one starting at or before the
// anacrusis-shifted onset, or the first span for pickup notes.
inline const MeterSpan &active_meter(const Piece &piece, double onset_beats) {
  if (piece.meters.empty())
    throw Error(ErrorKind::coverage, "piece '" + piece.id + "' has no meter");
  const double t = onset_beats - piece.anacrusis_beats;
  const MeterSpan *active = &piece.meters.front();
  for (const MeterSpan &m : piece.meters) {
    if (m.start_beat <= t + detail::phase_tolerance)
      active = &m;
  }
  return *active;
}

inline FeatureMatrix assemble_score_matrix(const Piece &piece) {
  OnsetSequence seq = group_by_onset(piece);
  FeatureMatrix m(piece.id, FeatureSet::S, seq.size());
  for (std::size_t i = 0; i < seq.size(); ++i) {
    const OnsetGroup &g = seq.groups[i];
    PitchFeatures p = pitch_features(g);
    std::array<double, 3> v = vic_features(g);
    MetricalFeatures mf = metrical_features(
        g.onset_beats, piece.anacrusis_beats, active_meter(piece, g.onset_beats));
    m.rows(i, 0) = p.high;
    m.rows(i, 1) = p.low;
    m.rows(i, 2) = p.melody;
    m.rows(i, 3) = v[0];
    m.rows(i, 4) = v[1];
    m.rows(i, 5) = v[2];
    m.rows(i, 6) = mf.phase;
    m.rows(i, 7) = mf.downbeat;
    m.rows(i, 8) = mf.secondary;
    m.rows(i, 9) = mf.weak;
  }
  return m;
}

} // namespace perfexp

#endif
