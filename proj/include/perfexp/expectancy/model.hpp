#ifndef PERFEXP_EXPECTANCY_MODEL_HPP
#define PERFEXP_EXPECTANCY_MODEL_HPP

#include "perfexp/corpus.hpp"
#include "perfexp/error.hpp"
#include "perfexp/expectancy/combine.hpp"
#include "perfexp/expectancy/distribution.hpp"
#include "perfexp/expectancy/ppm.hpp"
#include "perfexp/expectancy/viewpoint.hpp"
#include "perfexp/feature_matrix.hpp"

#include <json.hpp>

#include <algorithm>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <vector>

namespace perfexp::expectancy {

struct ExpectancyConfig {
  int max_order = 3;
  bool stm = false;
  double bias = 1.0;
  double selection_threshold = 0.01;
  int selection_folds = 3;
  std::vector<Viewpoint> candidates{Viewpoint::cpitch, Viewpoint::cpint,
                                    Viewpoint::contour};
};

struct ViewpointSystem {
  std::vector<Viewpoint> selected;
  double combination_bias = 1.0;
};

struct MelodyModel {
  Alphabet alphabet; // basic chromatic pitches
  ViewpointSystem system;
  int max_order = 3;
  bool stm = false;
  std::map<Viewpoint, ContextModel> long_term;
};

struct HarmonyModel {
  ContextModel long_term; // alphabet always holds the empty tuple and UNSEEN
  bool stm = false;
  double bias = 1.0;
};

/// Contiguous pitch range spanned by the melody notes of a set of pieces.
/// Only score data is read, so the range may include pieces whose
/// performances are held out.
inline Alphabet melody_alphabet(std::span<const Piece> pieces) {
  int lo = 128, hi = -1;
  for (const Piece &p : pieces)
    for (const Note &n : p.notes)
      if (n.is_melody) {
        lo = std::min(lo, n.midi_pitch);
        hi = std::max(hi, n.midi_pitch);
      }
  Alphabet a;
  for (int p = lo; p <= hi; ++p)
    a.push_back(p);
  return a;
}

inline MelodyModel train_melody_model(std::span<const std::vector<Symbol>> sequences,
                                      const ViewpointSystem &system,
                                      const Alphabet &basic, int max_order, bool stm) {
  if (system.selected.empty())
    throw Error(ErrorKind::configuration, "viewpoint system is empty");
  if (basic.empty())
    throw Error(ErrorKind::model, "melody alphabet is empty");
  MelodyModel m;
  m.alphabet = basic;
  m.system = system;
  m.max_order = max_order;
  m.stm = stm;
  for (Viewpoint vp : system.selected) {
    ContextModel cm;
    cm.max_order = max_order;
    cm.alphabet = derived_alphabet(vp, basic);
    for (const auto &seq : sequences) {
      std::vector<Symbol> d = derive_viewpoint(seq, vp);
      std::span<const Symbol> defined(d);
      if (is_derived(vp))
        defined = defined.subspan(std::min<std::size_t>(1, defined.size()));
      cm.train(defined);
    }
    m.long_term.emplace(vp, std::move(cm));
  }
  return m;
}

namespace detail {

inline Distribution on_alphabet(const Distribution &d, const Alphabet &basic) {
  if (d.symbols == basic)
    return d;
  Distribution out{basic, std::vector<double>(basic.size(), 0.0)};
  for (std::size_t i = 0; i < basic.size(); ++i)
    out.probs[i] = d.at(basic[i]);
  if (out.total() <= 0.0)
    return Distribution::uniform(basic);
  out.normalize();
  return out;
}

inline Distribution combine_or_uniform(const std::vector<Distribution> &dists,
                                       const Alphabet &alphabet, double bias) {
  if (dists.empty())
    return Distribution::uniform(alphabet);
  return combine_distributions(dists, bias);
}

} // namespace detail

/// Predictive distribution over the basic pitch alphabet for every position
/// of a melody, each conditioned on the pitches before it. With the
/// short-term model enabled, a per-piece model learns the melody as it
/// unfolds and is merged with the long-term prediction.
inline std::vector<Distribution> melody_distributions(const MelodyModel &model,
                                                      std::span<const Symbol> pitches) {
  if (model.long_term.empty())
    throw Error(ErrorKind::model, "melody model is untrained");
  const Alphabet &basic = model.alphabet;
  const double bias = model.system.combination_bias;

  std::map<Viewpoint, std::vector<Symbol>> derived;
  std::map<Viewpoint, ContextModel> short_term;
  for (Viewpoint vp : model.system.selected) {
    derived[vp] = derive_viewpoint(pitches, vp);
    if (model.stm) {
      ContextModel cm;
      cm.max_order = model.max_order;
      cm.alphabet = model.long_term.at(vp).alphabet;
      short_term.emplace(vp, std::move(cm));
    }
  }

  std::vector<Distribution> out;
  out.reserve(pitches.size());
  for (std::size_t i = 0; i < pitches.size(); ++i) {
    std::optional<Symbol> prev;
    if (i > 0)
      prev = pitches[i - 1];
    std::vector<Distribution> ltm, stm;
    for (Viewpoint vp : model.system.selected) {
      const std::size_t start = is_derived(vp) ? 1 : 0;
      if (i < start)
        continue;
      std::span<const Symbol> ctx =
          std::span<const Symbol>(derived[vp]).subspan(start, i - start);
      ltm.push_back(detail::on_alphabet(
          to_basic(ppm_predict(model.long_term.at(vp), ctx), vp, prev, basic), basic));
      if (model.stm)
        stm.push_back(detail::on_alphabet(
            to_basic(ppm_predict(short_term.at(vp), ctx), vp, prev, basic), basic));
    }
    Distribution dist = detail::combine_or_uniform(ltm, basic, bias);
    if (model.stm) {
      std::vector<Distribution> both{dist, detail::combine_or_uniform(stm, basic, bias)};
      dist = combine_distributions(both, bias);
    }
    out.push_back(std::move(dist));

    if (model.stm) {
      for (Viewpoint vp : model.system.selected) {
        const std::size_t start = is_derived(vp) ? 1 : 0;
        if (i < start)
          continue;
        std::span<const Symbol> upto =
            std::span<const Symbol>(derived[vp]).subspan(start, i + 1 - start);
        short_term.at(vp).observe(upto, i - start);
      }
    }
  }
  return out;
}

/// Mean information content per event of `test` under a system trained on
/// `train`.
inline double cross_entropy(std::span<const std::vector<Symbol>> train,
                            std::span<const std::vector<Symbol>> test,
                            const ViewpointSystem &system, const Alphabet &basic,
                            int max_order, bool stm) {
  MelodyModel m = train_melody_model(train, system, basic, max_order, stm);
  double total = 0.0;
  std::size_t count = 0;
  for (const auto &seq : test) {
    std::vector<Distribution> dists = melody_distributions(m, seq);
    for (std::size_t i = 0; i < seq.size(); ++i) {
      total += ic(dists[i], seq[i]);
      ++count;
    }
  }
  return count == 0 ? 0.0 : total / static_cast<double>(count);
}

// k-fold cross entropy over the training melodies; sequence j belongs to
// fold j mod k.
inline double cv_cross_entropy(std::span<const std::vector<Symbol>> sequences,
                               const ViewpointSystem &system, const Alphabet &basic,
                               int max_order, bool stm, int folds) {
  const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(folds), sequences.size());
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t f = 0; f < k; ++f) {
    std::vector<std::vector<Symbol>> train, test;
    for (std::size_t j = 0; j < sequences.size(); ++j)
      (j % k == f ? test : train).push_back(sequences[j]);
    MelodyModel m = train_melody_model(train, system, basic, max_order, stm);
    for (const auto &seq : test) {
      std::vector<Distribution> dists = melody_distributions(m, seq);
      for (std::size_t i = 0; i < seq.size(); ++i) {
        total += ic(dists[i], seq[i]);
        ++count;
      }
    }
  }
  return count == 0 ? 0.0 : total / static_cast<double>(count);
}

struct Selection {
  ViewpointSystem system;
  // Cross entropy after each accepted step; non-increasing.
  std::vector<double> cross_entropy;
};

/// Forward stepwise viewpoint selection. Adds, one at a time, the candidate
/// that most lowers internal cross-validated cross entropy, stopping when
/// the best gain is below the threshold. The first pick is always kept.
inline Selection stepwise_select(std::span<const std::vector<Symbol>> sequences,
                                 std::span<const Viewpoint> candidates,
                                 const Alphabet &basic, const ExpectancyConfig &config) {
  if (sequences.size() < 2)
    throw Error(ErrorKind::training, "stepwise_select needs at least 2 training sequences");
  if (std::none_of(sequences.begin(), sequences.end(),
                   [](const auto &s) { return s.size() >= 2; }))
    throw Error(ErrorKind::training, "stepwise_select: all training sequences shorter than 2");
  if (candidates.empty())
    throw Error(ErrorKind::configuration, "stepwise_select: no candidate viewpoints");
  if (config.selection_folds < 2)
    throw Error(ErrorKind::configuration, "selection folds must be >= 2");

  std::vector<Viewpoint> pool;
  for (Viewpoint vp : candidates)
    if (std::find(pool.begin(), pool.end(), vp) == pool.end())
      pool.push_back(vp);

  Selection sel;
  sel.system.combination_bias = config.bias;
  double current = std::numeric_limits<double>::infinity();
  for (;;) {
    std::optional<Viewpoint> best;
    double best_ce = std::numeric_limits<double>::infinity();
    for (Viewpoint vp : pool) {
      if (std::find(sel.system.selected.begin(), sel.system.selected.end(), vp) !=
          sel.system.selected.end())
        continue;
      ViewpointSystem trial = sel.system;
      trial.selected.push_back(vp);
      double ce = cv_cross_entropy(sequences, trial, basic, config.max_order, config.stm,
                                   config.selection_folds);
      if (ce < best_ce) {
        best_ce = ce;
        best = vp;
      }
    }
    if (!best)
      break;
    if (!sel.system.selected.empty() && current - best_ce < config.selection_threshold)
      break;
    sel.system.selected.push_back(*best);
    sel.cross_entropy.push_back(best_ce);
    current = best_ce;
  }
  return sel;
}

inline HarmonyModel train_harmony_model(std::span<const std::vector<Symbol>> sequences,
                                        int max_order, bool stm, double bias) {
  HarmonyModel m;
  m.long_term = ppm_train(sequences, max_order, {0, unseen_symbol});
  m.stm = stm;
  m.bias = bias;
  return m;
}

// Replaces symbols missing from the alphabet with UNSEEN.
inline std::vector<Symbol> map_to_alphabet(std::span<const Symbol> seq, const Alphabet &a) {
  std::vector<Symbol> out(seq.begin(), seq.end());
  for (Symbol &s : out)
    if (alphabet_index(a, s) < 0)
      s = unseen_symbol;
  return out;
}

inline std::vector<Distribution> harmony_distributions(const HarmonyModel &model,
                                                       std::span<const Symbol> symbols) {
  if (model.long_term.empty())
    throw Error(ErrorKind::model, "harmony model is untrained");
  std::vector<Symbol> seq = map_to_alphabet(symbols, model.long_term.alphabet);
  ContextModel short_term;
  short_term.max_order = model.long_term.max_order;
  short_term.alphabet = model.long_term.alphabet;

  std::vector<Distribution> out;
  out.reserve(seq.size());
  for (std::size_t i = 0; i < seq.size(); ++i) {
    std::span<const Symbol> ctx = std::span<const Symbol>(seq).first(i);
    Distribution d = ppm_predict(model.long_term, ctx);
    if (model.stm) {
      std::vector<Distribution> both{d, ppm_predict(short_term, ctx)};
      d = combine_distributions(both, model.bias);
      short_term.observe(seq, i);
    }
    out.push_back(std::move(d));
  }
  return out;
}

struct ExpectancyModels {
  ExpectancyConfig config;
  MelodyModel melody;
  HarmonyModel harmony;
  std::vector<double> selection_cross_entropy;
};

/// Trains melody (with viewpoint selection) and harmony models on a set of
/// pieces. `basic` is the melody pitch alphabet; when empty it is taken from
/// the training pieces.
inline ExpectancyModels train_expectancy(std::span<const Piece> pieces,
                                         const ExpectancyConfig &config,
                                         Alphabet basic = {}) {
  if (pieces.empty())
    throw Error(ErrorKind::training, "no training pieces for expectancy models");
  std::vector<std::vector<Symbol>> melodies, harmonies;
  for (const Piece &p : pieces) {
    harmonies.push_back(encode_harmony(p).symbols);
    bool has_melody = std::any_of(p.notes.begin(), p.notes.end(),
                                  [](const Note &n) { return n.is_melody; });
    if (has_melody)
      melodies.push_back(encode_melody(p).pitches.symbols);
  }
  if (melodies.empty())
    throw Error(ErrorKind::empty_melody, "no training piece has melody notes");
  if (basic.empty())
    basic = melody_alphabet(pieces);

  ExpectancyModels out;
  out.config = config;
  ViewpointSystem system;
  system.combination_bias = config.bias;
  if (config.candidates.size() == 1 || melodies.size() < 2) {
    system.selected = {config.candidates.front()};
  } else {
    Selection sel = stepwise_select(melodies, config.candidates, basic, config);
    system = sel.system;
    out.selection_cross_entropy = sel.cross_entropy;
  }
  out.melody = train_melody_model(melodies, system, basic, config.max_order, config.stm);
  out.harmony = train_harmony_model(harmonies, config.max_order, config.stm, config.bias);
  return out;
}

/// Per-onset [IC_m, H_m, IC_c, H_c] in bits. Onsets without a melody note
/// repeat the last melody values (zero before the first melody note).
inline FeatureMatrix expectancy_features(const Piece &piece, const ExpectancyModels &models) {
  if (models.melody.long_term.empty() || models.harmony.long_term.empty())
    throw Error(ErrorKind::model, "expectancy models are untrained");
  OnsetSequence seq = group_by_onset(piece);
  FeatureMatrix m(piece.id, FeatureSet::E, seq.size());

  std::vector<double> ic_m(seq.size(), 0.0), h_m(seq.size(), 0.0);
  bool has_melody = std::any_of(piece.notes.begin(), piece.notes.end(),
                                [](const Note &n) { return n.is_melody; });
  if (has_melody) {
    MelodySequence mel = encode_melody(piece);
    for (Symbol p : mel.pitches.symbols)
      if (alphabet_index(models.melody.alphabet, p) < 0)
        throw Error(ErrorKind::domain, "piece '" + piece.id + "': melody pitch " +
                                           std::to_string(p) +
                                           " outside the model's pitch alphabet");
    std::vector<Distribution> dists =
        melody_distributions(models.melody, mel.pitches.symbols);
    std::size_t next = 0;
    double cur_ic = 0.0, cur_h = 0.0;
    for (std::size_t i = 0; i < seq.size(); ++i) {
      if (next < mel.onset_index.size() && mel.onset_index[next] == i) {
        cur_ic = ic(dists[next], mel.pitches.symbols[next]);
        cur_h = entropy(dists[next]);
        ++next;
      }
      ic_m[i] = cur_ic;
      h_m[i] = cur_h;
    }
  }

  SymbolSequence harmony = encode_harmony(piece);
  std::vector<Symbol> mapped = map_to_alphabet(harmony.symbols, models.harmony.long_term.alphabet);
  std::vector<Distribution> hd = harmony_distributions(models.harmony, mapped);
  for (std::size_t i = 0; i < seq.size(); ++i) {
    m.rows(static_cast<Eigen::Index>(i), 0) = ic_m[i];
    m.rows(static_cast<Eigen::Index>(i), 1) = h_m[i];
    m.rows(static_cast<Eigen::Index>(i), 2) = ic(hd[i], mapped[i]);
    m.rows(static_cast<Eigen::Index>(i), 3) = entropy(hd[i]);
  }
  return m;
}

inline nlohmann::json to_json(const ExpectancyModels &m) {
  nlohmann::json j;
  j["format"] = "perfexp-expectancy";
  j["version"] = 1;
  nlohmann::json cfg;
  cfg["max_order"] = m.config.max_order;
  cfg["stm"] = m.config.stm;
  cfg["bias"] = m.config.bias;
  cfg["selection_threshold"] = m.config.selection_threshold;
  cfg["selection_folds"] = m.config.selection_folds;
  cfg["candidates"] = nlohmann::json::array();
  for (Viewpoint vp : m.config.candidates)
    cfg["candidates"].push_back(std::string(to_string(vp)));
  j["config"] = cfg;

  nlohmann::json mel;
  mel["alphabet"] = m.melody.alphabet;
  mel["max_order"] = m.melody.max_order;
  mel["stm"] = m.melody.stm;
  mel["combination_bias"] = m.melody.system.combination_bias;
  mel["viewpoints"] = nlohmann::json::array();
  mel["models"] = nlohmann::json::object();
  for (Viewpoint vp : m.melody.system.selected) {
    mel["viewpoints"].push_back(std::string(to_string(vp)));
    mel["models"][std::string(to_string(vp))] = to_json(m.melody.long_term.at(vp));
  }
  mel["selection_cross_entropy"] = m.selection_cross_entropy;
  j["melody"] = mel;

  nlohmann::json har;
  har["stm"] = m.harmony.stm;
  har["bias"] = m.harmony.bias;
  har["model"] = to_json(m.harmony.long_term);
  j["harmony"] = har;
  return j;
}

inline ExpectancyModels expectancy_models_from_json(const nlohmann::json &j) {
  try {
    if (j.at("format").get<std::string>() != "perfexp-expectancy" ||
        j.at("version").get<int>() != 1)
      throw Error(ErrorKind::model, "unsupported expectancy model format");
    ExpectancyModels m;
    const auto &cfg = j.at("config");
    m.config.max_order = cfg.at("max_order").get<int>();
    m.config.stm = cfg.at("stm").get<bool>();
    m.config.bias = cfg.at("bias").get<double>();
    m.config.selection_threshold = cfg.at("selection_threshold").get<double>();
    m.config.selection_folds = cfg.at("selection_folds").get<int>();
    m.config.candidates.clear();
    for (const auto &c : cfg.at("candidates"))
      m.config.candidates.push_back(viewpoint_from_string(c.get<std::string>()));

    const auto &mel = j.at("melody");
    m.melody.alphabet = make_alphabet(mel.at("alphabet").get<std::vector<Symbol>>());
    m.melody.max_order = mel.at("max_order").get<int>();
    m.melody.stm = mel.at("stm").get<bool>();
    m.melody.system.combination_bias = mel.at("combination_bias").get<double>();
    for (const auto &v : mel.at("viewpoints")) {
      Viewpoint vp = viewpoint_from_string(v.get<std::string>());
      m.melody.system.selected.push_back(vp);
      m.melody.long_term.emplace(
          vp, context_model_from_json(mel.at("models").at(v.get<std::string>())));
    }
    m.selection_cross_entropy = mel.at("selection_cross_entropy").get<std::vector<double>>();

    const auto &har = j.at("harmony");
    m.harmony.stm = har.at("stm").get<bool>();
    m.harmony.bias = har.at("bias").get<double>();
    m.harmony.long_term = context_model_from_json(har.at("model"));
    return m;
  } catch (const nlohmann::json::exception &e) {
    throw Error(ErrorKind::model, std::string("malformed expectancy model: ") + e.what());
  }
}

} // namespace perfexp::expectancy

#endif
