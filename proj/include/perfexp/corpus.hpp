#ifndef PERFEXP_CORPUS_HPP
#define PERFEXP_CORPUS_HPP

#include "perfexp/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <type_traits>
#include <vector>

namespace perfexp {

// A score note aligned to its performed onset and velocity.
struct Note {
  double onset_beats = 0.0;
  double duration_beats = 1.0;
  int midi_pitch = 60;
  bool is_melody = false;
  double perf_onset_sec = 0.0;
  int perf_velocity = 64;

  bool operator==(const Note &) const = default;
};

enum class MeterClass { duple, compound_duple, other };

inline std::string_view to_string(MeterClass c) {
  switch (c) {
  case MeterClass::duple: return "duple";
  case MeterClass::compound_duple: return "compound-duple";
  case MeterClass::other: return "other";
  }
  return "other";
}

// start_beat is measured from the first notated downbeat, i.e. after the
// anacrusis has been removed.
struct MeterSpan {
  double start_beat = 0.0;
  double bar_length_beats = 4.0;
  MeterClass classification = MeterClass::duple;

  bool operator==(const MeterSpan &) const = default;
};

struct Piece {
  std::string id;
  std::vector<Note> notes;
  std::vector<MeterSpan> meters;
  double anacrusis_beats = 0.0;

  bool operator==(const Piece &) const = default;
};

struct OnsetGroup {
  double onset_beats = 0.0;
  std::vector<Note> notes;
  double mean_perf_onset_sec = 0.0;
  int max_velocity = 0;

  // nullptr when no note of the group is annotated as melody
  const Note *melody() const {
    auto it = std::find_if(notes.begin(), notes.end(),
                           [](const Note &n) { return n.is_melody; });
    return it == notes.end() ? nullptr : &*it;
  }
  int highest_pitch() const {
    return std::max_element(notes.begin(), notes.end(),
                            [](const Note &a, const Note &b) {
                              return a.midi_pitch < b.midi_pitch;
                            })
        ->midi_pitch;
  }
  int lowest_pitch() const {
    return std::min_element(notes.begin(), notes.end(),
                            [](const Note &a, const Note &b) {
                              return a.midi_pitch < b.midi_pitch;
                            })
        ->midi_pitch;
  }
};

struct OnsetSequence {
  std::string piece_id;
  std::vector<OnsetGroup> groups;

  std::size_t size() const { return groups.size(); }
};

enum class Severity { warning, error };

struct Diagnostic {
  Severity severity = Severity::error;
  std::string field;
  std::string message;
};

namespace detail {

inline bool note_less(const Note &a, const Note &b) {
  return std::tie(a.onset_beats, a.midi_pitch) <
         std::tie(b.onset_beats, b.midi_pitch);
}

} // namespace detail

// Groups notes by exact score onset. Assumes the notes are sorted, which
// parse_corpus guarantees.
inline OnsetSequence group_by_onset(const Piece &piece) {
  OnsetSequence seq;
  seq.piece_id = piece.id;
  for (const Note &n : piece.notes) {
    if (seq.groups.empty() || seq.groups.back().onset_beats != n.onset_beats) {
      OnsetGroup g;
      g.onset_beats = n.onset_beats;
      seq.groups.push_back(std::move(g));
    }
    seq.groups.back().notes.push_back(n);
  }
  for (OnsetGroup &g : seq.groups) {
    double sum = 0.0;
    int vmax = 0;
    for (const Note &n : g.notes) {
      sum += n.perf_onset_sec;
      vmax = std::max(vmax, n.perf_velocity);
    }
    g.mean_perf_onset_sec = sum / static_cast<double>(g.notes.size());
    g.max_velocity = vmax;
  }
  return seq;
}

/// Checks every Piece invariant without throwing. Errors make the piece
/// unusable; warnings flag conditions that parsing repairs (note order) or
/// that later stages reject (non-monotone performance).
inline std::vector<Diagnostic> validate_piece(const Piece &piece) {
  std::vector<Diagnostic> out;
  auto error = [&](std::string field, std::string msg) {
    out.push_back({Severity::error, std::move(field), std::move(msg)});
  };
  auto warning = [&](std::string field, std::string msg) {
    out.push_back({Severity::warning, std::move(field), std::move(msg)});
  };

  if (piece.id.empty())
    error("id", "empty piece id");
  if (!(piece.anacrusis_beats >= 0.0))
    error("anacrusis_beats", "anacrusis must be >= 0");

  if (piece.meters.empty()) {
    error("meters", "at least one meter span required");
  } else {
    if (piece.meters.front().start_beat != 0.0)
      error("meters", "first meter span must start at beat 0");
    for (std::size_t i = 0; i < piece.meters.size(); ++i) {
      const MeterSpan &m = piece.meters[i];
      if (!(m.bar_length_beats > 0.0))
        error("meters", "bar_length_beats must be > 0");
      if (i > 0 && !(m.start_beat > piece.meters[i - 1].start_beat))
        error("meters", "meter spans must be sorted and non-overlapping");
    }
  }

  for (const Note &n : piece.notes) {
    if (n.midi_pitch < 0 || n.midi_pitch > 127)
      error("midi_pitch", "pitch out of range");
    if (n.perf_velocity < 1 || n.perf_velocity > 127)
      error("perf_velocity", "velocity out of range");
    if (!(n.duration_beats > 0.0))
      error("duration_beats", "duration must be > 0");
    if (!(n.perf_onset_sec >= 0.0))
      error("perf_onset_sec", "performed onset must be >= 0");
  }

  if (!std::is_sorted(piece.notes.begin(), piece.notes.end(),
                      detail::note_less))
    warning("notes", "notes re-sorted");

  std::vector<Note> sorted = piece.notes;
  std::stable_sort(sorted.begin(), sorted.end(), detail::note_less);

  std::size_t distinct = 0;
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    int melody = 0;
    bool dup_pitch = false;
    while (j < sorted.size() && sorted[j].onset_beats == sorted[i].onset_beats) {
      melody += sorted[j].is_melody ? 1 : 0;
      if (j > i && sorted[j].midi_pitch == sorted[j - 1].midi_pitch)
        dup_pitch = true;
      ++j;
    }
    if (melody > 1)
      error("is_melody", "duplicate melody note");
    if (dup_pitch)
      error("midi_pitch", "duplicate pitch at onset");
    ++distinct;
    i = j;
  }
  if (distinct < 2)
    error("notes", "at least 2 distinct onsets required");

  if (distinct >= 2) {
    Piece tmp = piece;
    tmp.notes = std::move(sorted);
    OnsetSequence seq = group_by_onset(tmp);
    for (std::size_t i = 1; i < seq.groups.size(); ++i) {
      if (!(seq.groups[i].mean_perf_onset_sec >
            seq.groups[i - 1].mean_perf_onset_sec)) {
        warning("perf_onset_sec", "performance onsets not monotone");
        break;
      }
    }
  }
  return out;
}

namespace detail {

inline MeterClass meter_class_from(const std::string &s, const std::string &id) {
  if (s == "duple") return MeterClass::duple;
  if (s == "compound-duple") return MeterClass::compound_duple;
  if (s == "other") return MeterClass::other;
  throw ValidationError(id, "classification", "unknown meter class '" + s + "'");
}

template <class T>
T field(const nlohmann::json &obj, const char *name, const std::string &id) {
  auto it = obj.find(name);
  if (it == obj.end())
    throw ValidationError(id, name, "missing field");
  try {
    if constexpr (std::is_same_v<T, int>) {
      if (!it->is_number_integer())
        throw ValidationError(id, name, "expected integer");
    } else if constexpr (std::is_same_v<T, double>) {
      if (!it->is_number())
        throw ValidationError(id, name, "expected number");
    }
    return it->get<T>();
  } catch (const nlohmann::json::exception &e) {
    throw ValidationError(id, name, e.what());
  }
}

inline Piece piece_from_json(const nlohmann::json &j, std::size_t index) {
  std::string fallback = "#" + std::to_string(index);
  if (!j.is_object())
    throw ValidationError(fallback, "piece", "expected object");
  Piece p;
  p.id = field<std::string>(j, "id", fallback);
  if (auto it = j.find("anacrusis_beats"); it != j.end())
    p.anacrusis_beats = field<double>(j, "anacrusis_beats", p.id);
  auto meters = j.find("meters");
  if (meters == j.end() || !meters->is_array())
    throw ValidationError(p.id, "meters", "expected array");
  for (const auto &m : *meters) {
    MeterSpan span;
    span.start_beat = field<double>(m, "start_beat", p.id);
    span.bar_length_beats = field<double>(m, "bar_length_beats", p.id);
    span.classification =
        meter_class_from(field<std::string>(m, "classification", p.id), p.id);
    p.meters.push_back(span);
  }
  auto notes = j.find("notes");
  if (notes == j.end() || !notes->is_array())
    throw ValidationError(p.id, "notes", "expected array");
  for (const auto &n : *notes) {
    Note note;
    note.onset_beats = field<double>(n, "onset_beats", p.id);
    note.duration_beats = field<double>(n, "duration_beats", p.id);
    note.midi_pitch = field<int>(n, "midi_pitch", p.id);
    note.is_melody = field<bool>(n, "is_melody", p.id);
    note.perf_onset_sec = field<double>(n, "perf_onset_sec", p.id);
    note.perf_velocity = field<int>(n, "perf_velocity", p.id);
    p.notes.push_back(note);
  }
  return p;
}

inline void line_column(std::string_view text, std::size_t offset,
                        std::size_t &line, std::size_t &column) {
  line = 1;
  column = 1;
  for (std::size_t i = 0; i < offset && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      column = 1;
    } else {
      ++column;
    }
  }
}

} // namespace detail

/// Parses a corpus file (`{"pieces":[...]}`), validates every piece and
/// returns the pieces in file order with notes sorted by (onset, pitch).
/// Throws ParseError for malformed JSON and ValidationError for the first
/// invariant violation found.
inline std::vector<Piece> parse_corpus(std::string_view raw) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(raw.begin(), raw.end());
  } catch (const nlohmann::json::parse_error &e) {
    std::size_t line = 0, column = 0;
    std::size_t offset = e.byte > 0 ? e.byte - 1 : 0;
    detail::line_column(raw, offset, line, column);
    throw ParseError(std::string("malformed corpus JSON at line ") +
                         std::to_string(line) + ", column " +
                         std::to_string(column) + ": " + e.what(),
                     line, column, offset);
  }
  if (!doc.is_object() || !doc.contains("pieces") || !doc["pieces"].is_array())
    throw ParseError("corpus must be an object with a 'pieces' array", 1, 1, 0);

  std::vector<Piece> pieces;
  std::size_t index = 0;
  for (const auto &pj : doc["pieces"]) {
    Piece p = detail::piece_from_json(pj, index++);
    for (const Diagnostic &d : validate_piece(p)) {
      if (d.severity == Severity::error)
        throw ValidationError(p.id, d.field, d.message);
    }
    std::stable_sort(p.notes.begin(), p.notes.end(), detail::note_less);
    pieces.push_back(std::move(p));
  }
  return pieces;
}

inline nlohmann::json to_json(const Piece &p) {
  nlohmann::json j;
  j["id"] = p.id;
  j["anacrusis_beats"] = p.anacrusis_beats;
  j["meters"] = nlohmann::json::array();
  for (const MeterSpan &m : p.meters) {
    j["meters"].push_back({{"start_beat", m.start_beat},
                           {"bar_length_beats", m.bar_length_beats},
                           {"classification", std::string(to_string(m.classification))}});
  }
  j["notes"] = nlohmann::json::array();
  for (const Note &n : p.notes) {
    j["notes"].push_back({{"onset_beats", n.onset_beats},
                          {"duration_beats", n.duration_beats},
                          {"midi_pitch", n.midi_pitch},
                          {"is_melody", n.is_melody},
                          {"perf_onset_sec", n.perf_onset_sec},
                          {"perf_velocity", n.perf_velocity}});
  }
  return j;
}

inline std::string serialize_corpus(std::span<const Piece> pieces) {
  nlohmann::json doc;
  doc["pieces"] = nlohmann::json::array();
  for (const Piece &p : pieces)
    doc["pieces"].push_back(to_json(p));
  return doc.dump(1);
}

} // namespace perfexp

#endif
