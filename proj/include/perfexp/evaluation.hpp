#ifndef PERFEXP_EVALUATION_HPP
#define PERFEXP_EVALUATION_HPP

#include "perfexp/corpus.hpp"
#include "perfexp/error.hpp"
#include "perfexp/expectancy/model.hpp"
#include "perfexp/feature_matrix.hpp"
#include "perfexp/metrics.hpp"
#include "perfexp/regressor.hpp"
#include "perfexp/score_features.hpp"
#include "perfexp/stats.hpp"
#include "perfexp/targets.hpp"

#include <boost/crc.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

namespace perfexp {

struct ModelOptions {
  FeatureSet feature_set = FeatureSet::ES;
  TargetKind target = TargetKind::bpr;
  int hidden = 5;
  TrainingConfig training;
  expectancy::ExpectancyConfig expectancy;
  // Shuffles each piece's target values across its onsets (null control).
  bool permute_targets = false;
  // Expectancy features of training pieces come from models that did not see
  // the piece (training piece j is held out in internal fold j mod k). In-sample
  // IC is biased low relative to the held-out IC seen at test time. 0 disables.
  int crossfit_folds = 5;
};

struct EvaluationOptions {
  ModelOptions model;
  int folds = 5;
  std::uint64_t seed = 0;
  bool pooled = false;
};

inline bool needs_expectancy(FeatureSet s) { return s != FeatureSet::S; }

inline std::uint32_t stable_hash(const std::string &s) {
  boost::crc_32_type crc;
  crc.process_bytes(s.data(), s.size());
  return crc.checksum();
}

// splitmix64 step, used to derive independent seeds from one run seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline FeatureMatrix build_features(const Piece &piece, FeatureSet set,
                                    const expectancy::ExpectancyModels *models) {
  if (set == FeatureSet::S)
    return assemble_score_matrix(piece);
  if (!models)
    throw Error(ErrorKind::model, "feature set " + std::string(to_string(set)) +
                                      " needs trained expectancy models");
  FeatureMatrix e = expectancy::expectancy_features(piece, *models);
  if (set == FeatureSet::E)
    return e;
  return concat_features(e, assemble_score_matrix(piece));
}

inline TargetSeries build_target(const Piece &piece, TargetKind kind, bool permute,
                                 std::uint64_t seed) {
  TargetSeries t;
  try {
    t = compute_target(group_by_onset(piece), kind);
  } catch (const Error &e) {
    throw Error(e.kind(), "target extraction failed for piece '" + piece.id + "': " + e.what());
  }
  if (permute) {
    std::mt19937_64 rng(derive_seed(seed, stable_hash(piece.id)));
    std::shuffle(t.values.begin(), t.values.end(), rng);
  }
  return t;
}

/// Everything learned from one training set: expectancy models (if the
/// feature set uses them) and the regressor.
struct FittedModel {
  std::optional<expectancy::ExpectancyModels> expectancy;
  Regressor regressor;
  std::vector<double> train_loss;
  std::vector<double> validation_loss;
  int best_epoch = 0;
  std::vector<std::string> training_pieces;
  std::vector<std::string> validation_pieces;
};

/// Fits expectancy models and the regressor on `train` only. `melody_pitches`
/// is the pitch alphabet for the melody model (score-derived).
inline FittedModel fit_model(std::span<const Piece> train, const ModelOptions &options,
                             const expectancy::Alphabet &melody_pitches, std::uint64_t seed) {
  if (train.empty())
    throw Error(ErrorKind::training, "no training pieces");
  FittedModel fm;
  for (const Piece &p : train)
    fm.training_pieces.push_back(p.id);
  if (needs_expectancy(options.feature_set))
    fm.expectancy = expectancy::train_expectancy(train, options.expectancy, melody_pitches);

  std::vector<TrainingExample> examples;
  examples.reserve(train.size());
  for (const Piece &p : train) {
    examples.push_back({build_features(p, options.feature_set,
                                       fm.expectancy ? &*fm.expectancy : nullptr),
                        build_target(p, options.target, options.permute_targets, seed)});
  }
  const auto k = static_cast<std::size_t>(std::max(0, options.crossfit_folds));
  if (fm.expectancy && k >= 2 && train.size() >= 2) {
    const std::size_t folds = std::min(k, train.size());
    for (std::size_t f = 0; f < folds; ++f) {
      std::vector<Piece> rest;
      for (std::size_t j = 0; j < train.size(); ++j)
        if (j % folds != f)
          rest.push_back(train[j]);
      const expectancy::ExpectancyModels held_out =
          expectancy::train_expectancy(rest, options.expectancy, melody_pitches);
      for (std::size_t j = f; j < train.size(); j += folds)
        examples[j].features = build_features(train[j], options.feature_set, &held_out);
    }
  }
  Regressor init = init_regressor(static_cast<int>(columns_for(options.feature_set).size()),
                                  options.hidden, derive_seed(seed, 1));
  TrainingConfig tc = options.training;
  tc.seed = derive_seed(seed, 2);
  TrainingResult tr = perfexp::train(init, examples, tc);
  fm.regressor = std::move(tr.model);
  fm.train_loss = std::move(tr.train_loss);
  fm.validation_loss = std::move(tr.validation_loss);
  fm.best_epoch = tr.best_epoch;
  fm.validation_pieces = std::move(tr.validation_pieces);
  return fm;
}

inline std::vector<double> predict(const FittedModel &model, const Piece &piece) {
  FeatureMatrix fm = build_features(piece, model.regressor.feature_set,
                                    model.expectancy ? &*model.expectancy : nullptr);
  return forward(model.regressor, fm);
}

inline nlohmann::json to_json(const FittedModel &m) {
  nlohmann::json j;
  j["format"] = "perfexp-model";
  j["version"] = 1;
  j["regressor"] = to_json(m.regressor);
  j["expectancy"] = m.expectancy ? expectancy::to_json(*m.expectancy) : nlohmann::json(nullptr);
  j["training_pieces"] = m.training_pieces;
  j["validation_pieces"] = m.validation_pieces;
  j["best_epoch"] = m.best_epoch;
  j["train_loss"] = m.train_loss;
  j["validation_loss"] = m.validation_loss;
  return j;
}

inline FittedModel fitted_model_from_json(const nlohmann::json &j) {
  try {
    if (j.at("format").get<std::string>() != "perfexp-model" || j.at("version").get<int>() != 1)
      throw Error(ErrorKind::model, "unsupported model file format");
    FittedModel m;
    m.regressor = regressor_from_json(j.at("regressor"));
    if (!j.at("expectancy").is_null())
      m.expectancy = expectancy::expectancy_models_from_json(j.at("expectancy"));
    m.training_pieces = j.at("training_pieces").get<std::vector<std::string>>();
    m.validation_pieces = j.at("validation_pieces").get<std::vector<std::string>>();
    m.best_epoch = j.at("best_epoch").get<int>();
    m.train_loss = j.at("train_loss").get<std::vector<double>>();
    m.validation_loss = j.at("validation_loss").get<std::vector<double>>();
    return m;
  } catch (const nlohmann::json::exception &e) {
    throw Error(ErrorKind::model, std::string("malformed model file: ") + e.what());
  }
}

struct PieceResult {
  std::string piece_id;
  int fold = 0;
  std::size_t onsets = 0;
  std::optional<double> r2;
  std::optional<double> r;
};

struct EvaluationReport {
  FeatureSet feature_set = FeatureSet::ES;
  TargetKind target = TargetKind::bpr;
  int folds = 5;
  std::uint64_t seed = 0;
  std::vector<PieceResult> pieces; // fold order, then corpus order
  double mean_r2 = 0.0;
  double mean_r = 0.0;
  std::size_t n_r2 = 0;
  std::size_t n_r = 0;
  std::optional<double> pooled_r2;
  std::optional<double> pooled_r;
  std::vector<std::string> warnings;
  std::vector<nlohmann::json> fold_summaries;

  std::vector<double> r2_values() const {
    std::vector<double> v;
    for (const PieceResult &p : pieces)
      if (p.r2)
        v.push_back(*p.r2);
    return v;
  }
};

inline void aggregate(EvaluationReport &report) {
  double s2 = 0.0, sr = 0.0;
  report.n_r2 = report.n_r = 0;
  for (const PieceResult &p : report.pieces) {
    if (p.r2) {
      s2 += *p.r2;
      ++report.n_r2;
    }
    if (p.r) {
      sr += *p.r;
      ++report.n_r;
    }
  }
  report.mean_r2 = report.n_r2 ? s2 / static_cast<double>(report.n_r2) : 0.0;
  report.mean_r = report.n_r ? sr / static_cast<double>(report.n_r) : 0.0;
}

/// k-fold cross-validation over pieces. For every fold, expectancy models
/// and the regressor see only the training pieces; metrics are computed per
/// test piece and averaged over pieces. Pieces with an undefined metric are
/// left out of that average and reported as warnings.
inline EvaluationReport evaluate_cv(std::span<const Piece> corpus, const EvaluationOptions &options,
                                    std::vector<FittedModel> *fold_models = nullptr) {
  std::vector<std::string> ids;
  for (const Piece &p : corpus)
    ids.push_back(p.id);
  FoldPlan plan = make_folds(ids, options.folds, options.seed);
  const expectancy::Alphabet pitches = needs_expectancy(options.model.feature_set)
                                           ? expectancy::melody_alphabet(corpus)
                                           : expectancy::Alphabet{};

  EvaluationReport report;
  report.feature_set = options.model.feature_set;
  report.target = options.model.target;
  report.folds = options.folds;
  report.seed = options.seed;
  std::vector<double> pooled_pred, pooled_target;

  for (int f = 0; f < plan.k; ++f) {
    std::vector<Piece> train, test;
    for (const Piece &p : corpus)
      (plan.assignments.at(p.id) == f ? test : train).push_back(p);
    FittedModel model =
        fit_model(train, options.model, pitches, derive_seed(options.seed, static_cast<std::uint64_t>(f)));

    for (const Piece &p : test) {
      std::vector<double> pred = predict(model, p);
      TargetSeries target = build_target(p, options.model.target, options.model.permute_targets,
                                         derive_seed(options.seed, static_cast<std::uint64_t>(f)));
      PieceResult row;
      row.piece_id = p.id;
      row.fold = f;
      row.onsets = pred.size();
      try {
        row.r2 = r_squared(pred, target.values);
      } catch (const Error &e) {
        report.warnings.push_back("piece '" + p.id + "': " + e.what() + "; excluded from mean R^2");
      }
      try {
        row.r = pearson_r(pred, target.values);
      } catch (const Error &e) {
        report.warnings.push_back("piece '" + p.id + "': " + e.what() + "; excluded from mean r");
      }
      if (options.pooled) {
        pooled_pred.insert(pooled_pred.end(), pred.begin(), pred.end());
        pooled_target.insert(pooled_target.end(), target.values.begin(), target.values.end());
      }
      report.pieces.push_back(std::move(row));
    }

    nlohmann::json summary;
    summary["fold"] = f;
    summary["test_pieces"] = plan.test_ids(f);
    summary["validation_pieces"] = model.validation_pieces;
    summary["best_epoch"] = model.best_epoch;
    summary["epochs_run"] = model.train_loss.size();
    if (model.expectancy) {
      nlohmann::json vps = nlohmann::json::array();
      for (auto vp : model.expectancy->melody.system.selected)
        vps.push_back(std::string(expectancy::to_string(vp)));
      summary["melody_viewpoints"] = vps;
    }
    report.fold_summaries.push_back(std::move(summary));
    if (fold_models)
      fold_models->push_back(std::move(model));
  }
  aggregate(report);
  if (options.pooled && pooled_pred.size() >= 2) {
    try {
      report.pooled_r2 = r_squared(pooled_pred, pooled_target);
      report.pooled_r = pearson_r(pooled_pred, pooled_target);
    } catch (const Error &e) {
      report.warnings.push_back(std::string("pooled metrics: ") + e.what());
    }
  }
  return report;
}

inline nlohmann::json to_json(const EvaluationReport &r) {
  nlohmann::json j;
  j["feature_set"] = std::string(to_string(r.feature_set));
  j["target"] = std::string(to_string(r.target));
  j["folds"] = r.folds;
  j["seed"] = r.seed;
  j["mean_r2"] = r.mean_r2;
  j["mean_r"] = r.mean_r;
  j["pieces_in_mean_r2"] = r.n_r2;
  j["pieces_in_mean_r"] = r.n_r;
  if (r.pooled_r2)
    j["pooled_r2"] = *r.pooled_r2;
  if (r.pooled_r)
    j["pooled_r"] = *r.pooled_r;
  j["pieces"] = nlohmann::json::array();
  for (const PieceResult &p : r.pieces) {
    j["pieces"].push_back({{"piece_id", p.piece_id},
                           {"fold", p.fold},
                           {"onsets", p.onsets},
                           {"r2", p.r2 ? nlohmann::json(*p.r2) : nlohmann::json(nullptr)},
                           {"r", p.r ? nlohmann::json(*p.r) : nlohmann::json(nullptr)}});
  }
  j["fold_training"] = r.fold_summaries;
  j["warnings"] = r.warnings;
  return j;
}

/// One row per feature set, an (R^2, r) column pair per target.
inline std::string table1_csv(std::span<const EvaluationReport> reports) {
  std::vector<TargetKind> targets;
  std::vector<FeatureSet> sets;
  for (const EvaluationReport &r : reports) {
    if (std::find(targets.begin(), targets.end(), r.target) == targets.end())
      targets.push_back(r.target);
    if (std::find(sets.begin(), sets.end(), r.feature_set) == sets.end())
      sets.push_back(r.feature_set);
  }
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(3);
  os << "feature_set";
  for (TargetKind t : targets)
    os << "," << to_string(t) << "_r2," << to_string(t) << "_r";
  os << "\n";
  for (FeatureSet s : sets) {
    os << to_string(s);
    for (TargetKind t : targets) {
      auto it = std::find_if(reports.begin(), reports.end(), [&](const EvaluationReport &r) {
        return r.feature_set == s && r.target == t;
      });
      if (it == reports.end())
        os << ",,";
      else
        os << "," << it->mean_r2 << "," << it->mean_r;
    }
    os << "\n";
  }
  return os.str();
}

/// One-way ANOVA and Tukey HSD over the per-piece R^2 values of several
/// feature sets for a single target.
inline nlohmann::json compare_feature_sets(std::span<const EvaluationReport> reports, double alpha = 0.05) {
  nlohmann::json j;
  std::vector<std::vector<double>> groups;
  std::vector<std::string> names;
  for (const EvaluationReport &r : reports) {
    groups.push_back(r.r2_values());
    names.push_back(std::string(to_string(r.feature_set)));
  }
  if (!reports.empty())
    j["target"] = std::string(to_string(reports.front().target));
  j["groups"] = names;
  j["alpha"] = alpha;
  try {
    StatTestResult a = anova_oneway(groups);
    j["anova"] = {{"F", a.F},
                  {"df_between", a.df_between},
                  {"df_within", a.df_within},
                  {"p_value", a.p_value},
                  {"significant", a.p_value < alpha}};
  } catch (const Error &e) {
    j["anova"] = {{"error", e.what()}};
  }
  try {
    nlohmann::json rows = nlohmann::json::array();
    for (const TukeyRow &t : tukey_hsd(groups, alpha)) {
      rows.push_back({{"pair", names[t.first] + " vs " + names[t.second]},
                      {"mean_difference", t.mean_difference},
                      {"q", t.q},
                      {"q_critical", t.q_critical},
                      {"p_value", t.p_value},
                      {"significant", t.significant}});
    }
    j["tukey"] = rows;
  } catch (const Error &e) {
    j["tukey"] = {{"error", e.what()}};
  }
  return j;
}

} // namespace perfexp

#endif
