#ifndef PERFEXP_TARGETS_HPP
#define PERFEXP_TARGETS_HPP

#include "perfexp/corpus.hpp"
#include "perfexp/error.hpp"

#include <array>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

namespace perfexp {

enum class TargetKind { bpr, bpr_d, vel, vel_d };

inline constexpr std::array<TargetKind, 4> all_targets = {
    TargetKind::bpr, TargetKind::bpr_d, TargetKind::vel, TargetKind::vel_d};

inline std::string_view to_string(TargetKind k) {
  switch (k) {
  case TargetKind::bpr: return "bpr";
  case TargetKind::bpr_d: return "bpr_d";
  case TargetKind::vel: return "vel";
  case TargetKind::vel_d: return "vel_d";
  }
  return "bpr";
}

inline TargetKind target_from_string(std::string_view s) {
  for (TargetKind k : all_targets)
    if (to_string(k) == s)
      return k;
  throw Error(ErrorKind::configuration,
              "unknown target '" + std::string(s) + "'");
}

struct TargetSeries {
  TargetKind kind = TargetKind::bpr;
  std::string piece_id;
  std::vector<double> values;
};

/// Beat period ratio. The local period at onset i is the forward slope of
/// mean performed time over score beats; the last onset repeats the previous
/// period. The series is divided by its mean so it averages to 1.
inline TargetSeries compute_bpr(const OnsetSequence &seq) {
  const std::size_t n = seq.groups.size();
  if (n < 2)
    throw Error(ErrorKind::size, "piece '" + seq.piece_id +
                                     "': BPR needs at least 2 onset groups");
  std::vector<double> period(n);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double dt =
        seq.groups[i + 1].mean_perf_onset_sec - seq.groups[i].mean_perf_onset_sec;
    const double db = seq.groups[i + 1].onset_beats - seq.groups[i].onset_beats;
    period[i] = dt / db;
    if (!(period[i] > 0.0))
      throw Error(ErrorKind::degenerate_performance,
                  "piece '" + seq.piece_id + "': non-positive beat period at onset " +
                      std::to_string(i));
  }
  period[n - 1] = period[n - 2];
  const double mean =
      std::accumulate(period.begin(), period.end(), 0.0) / static_cast<double>(n);
  TargetSeries out{TargetKind::bpr, seq.piece_id, {}};
  out.values.reserve(n);
  for (double p : period)
    out.values.push_back(p / mean);
  return out;
}

inline TargetSeries compute_vel(const OnsetSequence &seq) {
  TargetSeries out{TargetKind::vel, seq.piece_id, {}};
  out.values.reserve(seq.groups.size());
  for (const OnsetGroup &g : seq.groups)
    out.values.push_back(static_cast<double>(g.max_velocity) / 127.0);
  return out;
}

// Forward difference, zero-padded at the end so the series keeps one value
// per onset group.
inline TargetSeries differentiate(const TargetSeries &series) {
  const std::size_t n = series.values.size();
  if (n < 2)
    throw Error(ErrorKind::size, "differentiate needs a series of length >= 2");
  TargetSeries out;
  out.piece_id = series.piece_id;
  switch (series.kind) {
  case TargetKind::bpr: out.kind = TargetKind::bpr_d; break;
  case TargetKind::vel: out.kind = TargetKind::vel_d; break;
  default:
    throw Error(ErrorKind::configuration, "cannot differentiate a derivative series");
  }
  out.values.resize(n, 0.0);
  for (std::size_t i = 0; i + 1 < n; ++i)
    out.values[i] = series.values[i + 1] - series.values[i];
  return out;
}

inline TargetSeries compute_target(const OnsetSequence &seq, TargetKind kind) {
  switch (kind) {
  case TargetKind::bpr: return compute_bpr(seq);
  case TargetKind::bpr_d: return differentiate(compute_bpr(seq));
  case TargetKind::vel: return compute_vel(seq);
  case TargetKind::vel_d: return differentiate(compute_vel(seq));
  }
  return compute_bpr(seq);
}

} // namespace perfexp

#endif
