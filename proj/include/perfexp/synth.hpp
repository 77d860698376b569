#ifndef PERFEXP_SYNTH_HPP
#define PERFEXP_SYNTH_HPP

#include "perfexp/corpus.hpp"
#include "perfexp/error.hpp"
#include "perfexp/score_features.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace perfexp {

// How performances are generated from the synthetic scores.
//  linear_score: velocity is a linear function of pitch_h and b_d; tempo is
//                a linear function of b_phi.
//  ic_tempo:     each beat period differs from the previous one in proportion
//                to the generator's melody information content, so slowing
//                happens on surprising melody notes.
//  random:       velocities and tempo fluctuate independently of the score.
enum class SynthRule { linear_score, ic_tempo, random };

inline std::string_view to_string(SynthRule r) {
  switch (r) {
  case SynthRule::linear_score: return "linear-score";
  case SynthRule::ic_tempo: return "ic-tempo";
  case SynthRule::random: return "random";
  }
  return "random";
}

inline SynthRule synth_rule_from_string(std::string_view s) {
  for (SynthRule r : {SynthRule::linear_score, SynthRule::ic_tempo, SynthRule::random})
    if (to_string(r) == s)
      return r;
  throw Error(ErrorKind::configuration, "unknown synthesis rule '" + std::string(s) + "'");
}

struct SynthOptions {
  int pieces = 20;
  int min_onsets = 60;
  int max_onsets = 120;
  std::uint64_t seed = 1;
  SynthRule rule = SynthRule::linear_score;
};

// Coefficients of the linear_score rule, exposed so tests can rebuild the
// noiseless target.
struct LinearScoreRule {
  static constexpr double vel_intercept = 0.15;
  static constexpr double vel_pitch_h = 0.6;
  static constexpr double vel_downbeat = 0.2;
  static constexpr double base_period = 0.5;
  static constexpr double period_phase = 0.2;
};

struct IcTempoRule {
  static constexpr double base_period = 0.6;
  static constexpr double seconds_per_bit = 0.01;
  static constexpr double min_period = 0.2;
};

namespace detail {

inline constexpr std::array<int, 15> synth_intervals = {-12, -7, -5, -4, -3, -2, -1, 0,
                                                        1,   2,  3,  4,  5,  7,  12};
inline constexpr std::array<double, 15> synth_interval_weight = {
    0.2, 0.4, 0.6, 0.8, 1.5, 4.0, 3.0, 1.0, 3.0, 4.0, 1.5, 0.8, 0.6, 0.4, 0.2};
inline constexpr int synth_low = 60, synth_high = 84;

// Distribution of the next interval given the previous one: repeating the
// previous interval is four times as likely, and intervals leaving the
// melody range are impossible.
inline std::vector<double> interval_probs(int pitch, int prev_interval, bool has_prev) {
  std::vector<double> w(synth_intervals.size());
  double total = 0.0;
  for (std::size_t k = 0; k < synth_intervals.size(); ++k) {
    const int next = pitch + synth_intervals[k];
    if (next < synth_low || next > synth_high) {
      w[k] = 0.0;
      continue;
    }
    w[k] = synth_interval_weight[k] * (has_prev && synth_intervals[k] == prev_interval ? 4.0 : 1.0);
    total += w[k];
  }
  for (double &x : w)
    x /= total;
  return w;
}

struct ChordShape {
  std::vector<int> offsets; // semitones above the bass
};

inline const std::vector<ChordShape> &chord_shapes() {
  static const std::vector<ChordShape> shapes{
      {{0}}, {{0, 12}}, {{0, 4, 7}}, {{0, 3, 7}}, {{0, 4, 7, 10}}, {{0, 7}}, {{0, 3, 6}}};
  return shapes;
}

} // namespace detail

/// Deterministic synthetic corpus of aligned score/performance pieces.
/// Every onset carries a melody note; about half also carry a chord below it.
inline std::vector<Piece> synthesize_corpus(const SynthOptions &opt) {
  if (opt.pieces < 1 || opt.min_onsets < 2 || opt.max_onsets < opt.min_onsets)
    throw Error(ErrorKind::configuration, "invalid synthesis parameters");
  std::mt19937_64 rng(opt.seed);
  auto uniform = [&](double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); };
  auto randint = [&](int a, int b) { return std::uniform_int_distribution<int>(a, b)(rng); };

  std::vector<Piece> corpus;
  for (int pi = 0; pi < opt.pieces; ++pi) {
    Piece p;
    p.id = "synth-" + std::string(pi < 9 ? "0" : "") + std::to_string(pi + 1);
    const int meter_kind = randint(0, 2);
    MeterSpan span;
    if (meter_kind == 0)
      span = {0.0, 4.0, MeterClass::duple};
    else if (meter_kind == 1)
      span = {0.0, 3.0, MeterClass::other};
    else
      span = {0.0, 6.0, MeterClass::compound_duple};
    p.meters.push_back(span);
    p.anacrusis_beats = randint(0, 3) == 0 ? 1.0 : 0.0;
    if (randint(0, 3) == 0) {
      // switch to 2/4 after four bars
      p.meters.push_back({4.0 * span.bar_length_beats, 2.0, MeterClass::duple});
    }

    const int n = randint(opt.min_onsets, opt.max_onsets);
    std::vector<double> beats(static_cast<std::size_t>(n));
    std::vector<double> durations(static_cast<std::size_t>(n));
    double b = 0.0;
    for (int i = 0; i < n; ++i) {
      const int r = randint(0, 9);
      const double dur = r < 6 ? 1.0 : (r < 9 ? 0.5 : 2.0);
      beats[static_cast<std::size_t>(i)] = b;
      durations[static_cast<std::size_t>(i)] = dur;
      b += dur;
    }

    // melody and its generative information content
    std::vector<int> melody(static_cast<std::size_t>(n));
    std::vector<double> true_ic(static_cast<std::size_t>(n));
    int pitch = randint(66, 78);
    melody[0] = pitch;
    true_ic[0] = std::log2(static_cast<double>(detail::synth_high - detail::synth_low + 1));
    int prev_interval = 0;
    for (int i = 1; i < n; ++i) {
      std::vector<double> probs = detail::interval_probs(pitch, prev_interval, i > 1);
      std::discrete_distribution<std::size_t> pick(probs.begin(), probs.end());
      const std::size_t k = pick(rng);
      prev_interval = detail::synth_intervals[k];
      pitch += prev_interval;
      melody[static_cast<std::size_t>(i)] = pitch;
      true_ic[static_cast<std::size_t>(i)] = -std::log2(probs[k]);
    }

    // per-onset score notes
    std::vector<std::vector<int>> onset_pitches(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      const int mel = melody[static_cast<std::size_t>(i)];
      std::vector<int> &ps = onset_pitches[static_cast<std::size_t>(i)];
      ps.push_back(mel);
      if (randint(0, 1) == 0) {
        const auto &shapes = detail::chord_shapes();
        const auto &shape = shapes[static_cast<std::size_t>(randint(0, static_cast<int>(shapes.size()) - 1))];
        const int bass = mel - randint(13, 24);
        for (int off : shape.offsets) {
          const int q = bass + off;
          if (q < mel && q >= 21 && std::find(ps.begin(), ps.end(), q) == ps.end())
            ps.push_back(q);
        }
      }
    }

    // score features needed by the performance rules
    std::vector<double> phase(static_cast<std::size_t>(n));
    std::vector<int> downbeat(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      const MeterSpan &m = active_meter(p, beats[static_cast<std::size_t>(i)]);
      MetricalFeatures mf = metrical_features(beats[static_cast<std::size_t>(i)], p.anacrusis_beats, m);
      phase[static_cast<std::size_t>(i)] = mf.phase;
      downbeat[static_cast<std::size_t>(i)] = mf.downbeat;
    }

    // beat periods (seconds per beat) between consecutive onsets
    std::vector<double> period(static_cast<std::size_t>(n), 0.5);
    std::vector<int> velocity(static_cast<std::size_t>(n), 64);
    switch (opt.rule) {
    case SynthRule::linear_score:
      for (int i = 0; i < n; ++i) {
        const auto u = static_cast<std::size_t>(i);
        const double high = *std::max_element(onset_pitches[u].begin(), onset_pitches[u].end()) / 127.0;
        const double vel = LinearScoreRule::vel_intercept + LinearScoreRule::vel_pitch_h * high +
                           LinearScoreRule::vel_downbeat * downbeat[u];
        velocity[u] = std::clamp(static_cast<int>(std::lround(127.0 * vel)), 1, 127);
        period[u] = LinearScoreRule::base_period * (1.0 + LinearScoreRule::period_phase * phase[u]);
      }
      break;
    case SynthRule::ic_tempo: {
      double mean_ic = 0.0;
      for (int i = 0; i < n - 1; ++i)
        mean_ic += true_ic[static_cast<std::size_t>(i)];
      mean_ic /= (n - 1);
      // The walk is centred so the mean local period, and with it the scale
      // of BPR_d, is the same in every piece. The last local period repeats
      // the one before it, as in the BPR definition, so the centring runs
      // over that padded series.
      period[0] = 0.0;
      for (int i = 0; i + 1 < n; ++i) {
        const auto u = static_cast<std::size_t>(i);
        period[u + 1] = period[u] + IcTempoRule::seconds_per_bit * (true_ic[u] - mean_ic);
      }
      double mean_walk = 0.0;
      for (int i = 0; i + 1 < n; ++i)
        mean_walk += period[static_cast<std::size_t>(i)];
      mean_walk = (mean_walk + period[static_cast<std::size_t>(n - 2)]) / n;
      const double lowest = *std::min_element(period.begin(), period.end()) - mean_walk;
      const double base = std::max(IcTempoRule::base_period, IcTempoRule::min_period - lowest);
      for (double &x : period)
        x += base - mean_walk;
      for (int i = 0; i < n; ++i)
        velocity[static_cast<std::size_t>(i)] = std::clamp(
            static_cast<int>(std::lround(40 + 40.0 * melody[static_cast<std::size_t>(i)] / 127.0 +
                                         uniform(-8.0, 8.0))),
            1, 127);
      break;
    }
    case SynthRule::random:
      for (int i = 0; i < n; ++i) {
        const auto u = static_cast<std::size_t>(i);
        velocity[u] = randint(30, 110);
        period[u] = uniform(0.35, 0.75);
      }
      break;
    }

    double t = uniform(0.0, 0.5);
    for (int i = 0; i < n; ++i) {
      const auto u = static_cast<std::size_t>(i);
      for (int q : onset_pitches[u]) {
        Note note;
        note.onset_beats = beats[u];
        note.duration_beats = durations[u];
        note.midi_pitch = q;
        note.is_melody = q == melody[u];
        note.perf_onset_sec = t;
        note.perf_velocity = q == melody[u] ? velocity[u] : std::max(1, velocity[u] - 12);
        p.notes.push_back(note);
      }
      if (i + 1 < n)
        t += period[u] * (beats[u + 1] - beats[u]);
    }
    std::stable_sort(p.notes.begin(), p.notes.end(), detail::note_less);
    corpus.push_back(std::move(p));
  }
  return corpus;
}

} // namespace perfexp

#endif
