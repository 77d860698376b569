#ifndef PERFEXP_CLI_HPP
#define PERFEXP_CLI_HPP

#include "perfexp/corpus.hpp"
#include "perfexp/error.hpp"
#include "perfexp/evaluation.hpp"
#include "perfexp/expectancy/model.hpp"
#include "perfexp/sensitivity.hpp"
#include "perfexp/synth.hpp"
#include "perfexp/targets.hpp"

#include <boost/crc.hpp>
#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#ifndef PERFEXP_VERSION
#define PERFEXP_VERSION "0.0.0"
#endif

namespace perfexp::cli {

inline const std::vector<std::string> &commands() {
  static const std::vector<std::string> c{"validate", "targets",     "features", "train",
                                          "evaluate", "compare",     "sensitivity", "synth"};
  return c;
}

/// Every option of a run. Keys of the JSON config file use the field names;
/// command-line flags of the same name (with '-' for '_') override them.
struct RunConfig {
  std::string corpus;
  std::string out = ".";
  std::string model;
  std::string feature_set = "E+S";
  std::string target = "bpr"; // or "all" for evaluate / compare
  int folds = 5;
  std::uint64_t seed = 0;
  // expectancy
  int max_order = 3;
  bool stm = false;
  double bias = 1.0;
  double selection_threshold = 0.01;
  int selection_folds = 3;
  int crossfit_folds = 5;
  // regressor
  int hidden = 5;
  double learning_rate = 1e-3;
  int max_epochs = 500;
  int patience = 25;
  double validation_fraction = 0.15;
  bool permute_targets = false;
  bool pooled = false;
  // sensitivity
  int window = 8;
  // synth
  int pieces = 20;
  int min_onsets = 60;
  int max_onsets = 120;
  std::string rule = "linear-score";

  void validate() const {
    feature_set_from_string(feature_set);
    if (target != "all")
      target_from_string(target);
    if (folds < 2)
      throw Error(ErrorKind::configuration, "folds must be >= 2");
    if (max_order < 0)
      throw Error(ErrorKind::configuration, "max_order must be >= 0");
    if (!(bias > 0.0))
      throw Error(ErrorKind::configuration, "bias must be > 0");
    if (crossfit_folds < 0 || crossfit_folds == 1)
      throw Error(ErrorKind::configuration, "crossfit_folds must be 0 or >= 2");
    if (hidden < 1)
      throw Error(ErrorKind::configuration, "hidden must be >= 1");
    if (window < 0)
      throw Error(ErrorKind::configuration, "window must be >= 0");
    if (out.empty())
      throw Error(ErrorKind::configuration, "output directory must be non-empty");
    synth_rule_from_string(rule);
    training().validate();
  }

  TrainingConfig training() const {
    TrainingConfig t;
    t.learning_rate = learning_rate;
    t.max_epochs = max_epochs;
    t.patience = patience;
    t.validation_fraction = validation_fraction;
    t.seed = seed;
    return t;
  }

  expectancy::ExpectancyConfig expectancy() const {
    expectancy::ExpectancyConfig e;
    e.max_order = max_order;
    e.stm = stm;
    e.bias = bias;
    e.selection_threshold = selection_threshold;
    e.selection_folds = selection_folds;
    return e;
  }

  ModelOptions model_options(FeatureSet set, TargetKind kind) const {
    ModelOptions m;
    m.feature_set = set;
    m.target = kind;
    m.hidden = hidden;
    m.training = training();
    m.expectancy = expectancy();
    m.permute_targets = permute_targets;
    m.crossfit_folds = crossfit_folds;
    return m;
  }

  std::vector<TargetKind> targets() const {
    if (target == "all")
      return {all_targets.begin(), all_targets.end()};
    return {target_from_string(target)};
  }
};

inline nlohmann::json to_json(const RunConfig &c) {
  return {{"corpus", c.corpus},
          {"out", c.out},
          {"model", c.model},
          {"feature_set", c.feature_set},
          {"target", c.target},
          {"folds", c.folds},
          {"seed", c.seed},
          {"max_order", c.max_order},
          {"stm", c.stm},
          {"bias", c.bias},
          {"selection_threshold", c.selection_threshold},
          {"selection_folds", c.selection_folds},
          {"crossfit_folds", c.crossfit_folds},
          {"hidden", c.hidden},
          {"learning_rate", c.learning_rate},
          {"max_epochs", c.max_epochs},
          {"patience", c.patience},
          {"validation_fraction", c.validation_fraction},
          {"permute_targets", c.permute_targets},
          {"pooled", c.pooled},
          {"window", c.window},
          {"pieces", c.pieces},
          {"min_onsets", c.min_onsets},
          {"max_onsets", c.max_onsets},
          {"rule", c.rule}};
}

/// Overlays the keys present in `j` onto `c`. Unknown keys are an error so
/// typos do not silently fall back to defaults.
inline void apply_json(RunConfig &c, const nlohmann::json &j) {
  if (!j.is_object())
    throw Error(ErrorKind::configuration, "config file must hold a JSON object");
  const nlohmann::json known = to_json(c);
  for (const auto &[key, value] : j.items())
    if (!known.contains(key))
      throw Error(ErrorKind::configuration, "unknown config key '" + key + "'");
  try {
    auto get = [&](const char *key, auto &field) {
      if (j.contains(key))
        field = j.at(key).get<std::remove_reference_t<decltype(field)>>();
    };
    get("corpus", c.corpus);
    get("out", c.out);
    get("model", c.model);
    get("feature_set", c.feature_set);
    get("target", c.target);
    get("folds", c.folds);
    get("seed", c.seed);
    get("max_order", c.max_order);
    get("stm", c.stm);
    get("bias", c.bias);
    get("selection_threshold", c.selection_threshold);
    get("selection_folds", c.selection_folds);
    get("crossfit_folds", c.crossfit_folds);
    get("hidden", c.hidden);
    get("learning_rate", c.learning_rate);
    get("max_epochs", c.max_epochs);
    get("patience", c.patience);
    get("validation_fraction", c.validation_fraction);
    get("permute_targets", c.permute_targets);
    get("pooled", c.pooled);
    get("window", c.window);
    get("pieces", c.pieces);
    get("min_onsets", c.min_onsets);
    get("max_onsets", c.max_onsets);
    get("rule", c.rule);
  } catch (const nlohmann::json::exception &e) {
    throw Error(ErrorKind::configuration, std::string("bad config value: ") + e.what());
  }
}

inline std::string read_file(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error(ErrorKind::io, "cannot read '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path &path, const std::string &text) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw Error(ErrorKind::io, "cannot write '" + path.string() + "'");
  out << text;
  if (!out)
    throw Error(ErrorKind::io, "failed writing '" + path.string() + "'");
}

inline std::string crc32_hex(const std::string &bytes) {
  boost::crc_32_type crc;
  crc.process_bytes(bytes.data(), bytes.size());
  std::ostringstream os;
  os << std::hex << std::setw(8) << std::setfill('0') << crc.checksum();
  return os.str();
}

/// Shared state of one command invocation.
class Runner {
public:
  Runner(std::string command, RunConfig config, std::ostream &out)
      : command_(std::move(command)), cfg_(std::move(config)), out_(out) {}

  int run() {
    cfg_.validate();
    if (command_ == "validate") return validate();
    if (command_ == "targets") return targets();
    if (command_ == "features") return features();
    if (command_ == "train") return train_cmd();
    if (command_ == "evaluate") return evaluate();
    if (command_ == "compare") return compare();
    if (command_ == "sensitivity") return sensitivity();
    if (command_ == "synth") return synth();
    throw Error(ErrorKind::usage, "unknown command '" + command_ + "'");
  }

private:
  std::string command_;
  RunConfig cfg_;
  std::ostream &out_;
  nlohmann::json inputs_ = nlohmann::json::object();
  std::vector<std::string> outputs_;

  std::filesystem::path out_dir() {
    std::filesystem::path dir(cfg_.out);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec)
      throw Error(ErrorKind::io, "cannot create output directory '" + cfg_.out + "'");
    return dir;
  }

  void emit(const std::string &name, const std::string &text) {
    write_file(out_dir() / name, text);
    outputs_.push_back(name);
  }

  std::string load_input(const std::string &role, const std::string &path) {
    if (path.empty())
      throw Error(ErrorKind::usage, "--" + role + " is required for '" + command_ + "'");
    std::string bytes = read_file(path);
    inputs_[role] = {{"path", path}, {"crc32", crc32_hex(bytes)}, {"bytes", bytes.size()}};
    return bytes;
  }

  std::vector<Piece> load_corpus() { return parse_corpus(load_input("corpus", cfg_.corpus)); }

  void write_manifest() {
    nlohmann::json m;
    m["command"] = command_;
    m["config"] = to_json(cfg_);
    m["seed"] = cfg_.seed;
    m["versions"] = {{"perfexp", PERFEXP_VERSION},
                     {"model_format", 1},
                     {"expectancy_format", 1},
                     {"regressor_format", 1}};
    m["inputs"] = inputs_;
    m["outputs"] = outputs_;
    write_file(out_dir() / "manifest.json", m.dump(2) + "\n");
  }

  int validate() {
    const std::string raw = load_input("corpus", cfg_.corpus);
    nlohmann::json doc;
    try {
      // parse_corpus reports syntax errors with their position and stops at the
      // first invalid piece; diagnostics below cover every piece instead.
      doc = nlohmann::json::parse(raw);
    } catch (const nlohmann::json::parse_error &) {
      parse_corpus(raw);
    }
    if (!doc.is_object() || !doc.contains("pieces") || !doc["pieces"].is_array())
      parse_corpus(raw);
    std::size_t errors = 0, index = 0;
    nlohmann::json report = nlohmann::json::array();
    for (const auto &pj : doc["pieces"]) {
      std::vector<Diagnostic> diags;
      std::string id = "#" + std::to_string(index);
      try {
        Piece p = detail::piece_from_json(pj, index);
        id = p.id;
        diags = validate_piece(p);
      } catch (const ValidationError &e) {
        id = e.piece_id();
        diags.push_back({Severity::error, e.field(), e.what()});
      }
      ++index;
      for (const Diagnostic &d : diags) {
        const bool err = d.severity == Severity::error;
        errors += err ? 1 : 0;
        out_ << id << "\t" << (err ? "error" : "warning") << "\t" << d.field << "\t" << d.message
             << "\n";
        report.push_back({{"piece_id", id},
                          {"severity", err ? "error" : "warning"},
                          {"field", d.field},
                          {"message", d.message}});
      }
    }
    out_ << index << " pieces, " << errors << " errors\n";
    return errors == 0 ? 0 : 1;
  }

  int targets() {
    std::vector<Piece> corpus = load_corpus();
    std::ostringstream os;
    os.precision(17);
    os << "piece_id,onset_index,onset_beats,bpr,bpr_d,vel,vel_d\n";
    for (const Piece &p : corpus) {
      OnsetSequence seq = group_by_onset(p);
      TargetSeries bpr, vel;
      try {
        bpr = compute_bpr(seq);
      } catch (const Error &e) {
        throw Error(e.kind(), "piece '" + p.id + "': " + e.what());
      }
      vel = compute_vel(seq);
      TargetSeries bpr_d = differentiate(bpr), vel_d = differentiate(vel);
      for (std::size_t i = 0; i < seq.size(); ++i)
        os << p.id << "," << i << "," << seq.groups[i].onset_beats << "," << bpr.values[i] << ","
           << bpr_d.values[i] << "," << vel.values[i] << "," << vel_d.values[i] << "\n";
    }
    emit("targets.csv", os.str());
    write_manifest();
    return 0;
  }

  int features() {
    std::vector<Piece> corpus = load_corpus();
    const FeatureSet set = feature_set_from_string(cfg_.feature_set);
    std::optional<expectancy::ExpectancyModels> models;
    if (needs_expectancy(set))
      models = expectancy::train_expectancy(corpus, cfg_.expectancy(), expectancy::melody_alphabet(corpus));
    std::ostringstream os;
    os.precision(17);
    os << "piece_id,onset_index,onset_beats";
    for (const std::string &c : columns_for(set))
      os << "," << c;
    os << "\n";
    for (const Piece &p : corpus) {
      FeatureMatrix fm = build_features(p, set, models ? &*models : nullptr);
      OnsetSequence seq = group_by_onset(p);
      for (std::size_t i = 0; i < fm.size(); ++i) {
        os << p.id << "," << i << "," << seq.groups[i].onset_beats;
        for (Eigen::Index j = 0; j < fm.rows.cols(); ++j)
          os << "," << fm.rows(static_cast<Eigen::Index>(i), j);
        os << "\n";
      }
    }
    emit("features.csv", os.str());
    if (models)
      emit("expectancy_model.json", expectancy::to_json(*models).dump(1) + "\n");
    write_manifest();
    return 0;
  }

  int train_cmd() {
    std::vector<Piece> corpus = load_corpus();
    const FeatureSet set = feature_set_from_string(cfg_.feature_set);
    if (cfg_.target == "all")
      throw Error(ErrorKind::configuration, "train needs a single target");
    const TargetKind kind = target_from_string(cfg_.target);
    FittedModel fm = fit_model(corpus, cfg_.model_options(set, kind),
                               needs_expectancy(set) ? expectancy::melody_alphabet(corpus)
                                                     : expectancy::Alphabet{},
                               cfg_.seed);
    emit("model.json", to_json(fm).dump(1) + "\n");
    write_manifest();
    out_ << "trained " << to_string(set) << " model for " << to_string(kind) << " on "
         << corpus.size() << " pieces; best epoch " << fm.best_epoch << "\n";
    return 0;
  }

  EvaluationOptions eval_options(FeatureSet set, TargetKind kind) const {
    EvaluationOptions o;
    o.model = cfg_.model_options(set, kind);
    o.folds = cfg_.folds;
    o.seed = cfg_.seed;
    o.pooled = cfg_.pooled;
    return o;
  }

  int evaluate() {
    std::vector<Piece> corpus = load_corpus();
    const FeatureSet set = feature_set_from_string(cfg_.feature_set);
    std::vector<EvaluationReport> reports;
    nlohmann::json doc;
    doc["reports"] = nlohmann::json::array();
    const std::vector<TargetKind> kinds = cfg_.targets();
    for (TargetKind kind : kinds) {
      std::vector<FittedModel> models;
      reports.push_back(evaluate_cv(corpus, eval_options(set, kind), &models));
      doc["reports"].push_back(to_json(reports.back()));
      for (std::size_t f = 0; f < models.size(); ++f) {
        std::string name = kinds.size() == 1
                               ? "model_" + std::to_string(f) + ".json"
                               : "model_" + std::string(to_string(kind)) + "_" + std::to_string(f) + ".json";
        emit(name, to_json(models[f]).dump(1) + "\n");
      }
      out_ << to_string(set) << " " << to_string(kind) << ": mean R2 " << reports.back().mean_r2
           << ", mean r " << reports.back().mean_r << "\n";
    }
    emit("report.json", doc.dump(2) + "\n");
    emit("table1.csv", table1_csv(reports));
    write_manifest();
    return 0;
  }

  int compare() {
    std::vector<Piece> corpus = load_corpus();
    std::vector<EvaluationReport> reports;
    nlohmann::json doc, stats;
    doc["reports"] = nlohmann::json::array();
    stats["comparisons"] = nlohmann::json::array();
    for (TargetKind kind : cfg_.targets()) {
      std::vector<EvaluationReport> per_target;
      for (FeatureSet set : all_feature_sets) {
        per_target.push_back(evaluate_cv(corpus, eval_options(set, kind)));
        doc["reports"].push_back(to_json(per_target.back()));
        out_ << to_string(set) << " " << to_string(kind) << ": mean R2 " << per_target.back().mean_r2
             << ", mean r " << per_target.back().mean_r << "\n";
      }
      stats["comparisons"].push_back(compare_feature_sets(per_target));
      reports.insert(reports.end(), per_target.begin(), per_target.end());
    }
    emit("report.json", doc.dump(2) + "\n");
    emit("table1.csv", table1_csv(reports));
    emit("stats.json", stats.dump(2) + "\n");
    write_manifest();
    return 0;
  }

  int sensitivity() {
    std::vector<Piece> corpus = load_corpus();
    FittedModel fm = fitted_model_from_json([&] {
      try {
        return nlohmann::json::parse(load_input("model", cfg_.model));
      } catch (const nlohmann::json::parse_error &e) {
        throw Error(ErrorKind::model, std::string("model file is not JSON: ") + e.what());
      }
    }());
    std::vector<FeatureMatrix> pieces;
    for (const Piece &p : corpus)
      pieces.push_back(build_features(p, fm.regressor.feature_set,
                                      fm.expectancy ? &*fm.expectancy : nullptr));
    SensitivityMap map = sensitivity_map(fm.regressor, pieces, cfg_.window);
    const std::string stem = "sensitivity_" + std::string(to_string(fm.regressor.target));
    emit(stem + ".csv", sensitivity_csv(map));
    emit(stem + ".svg", render_map_svg(map));
    write_manifest();
    out_ << "averaged " << map.centers << " centers\n";
    return 0;
  }

  int synth() {
    if (cfg_.corpus.empty())
      throw Error(ErrorKind::usage, "--corpus names the file synth writes");
    SynthOptions o;
    o.pieces = cfg_.pieces;
    o.min_onsets = cfg_.min_onsets;
    o.max_onsets = cfg_.max_onsets;
    o.seed = cfg_.seed;
    o.rule = synth_rule_from_string(cfg_.rule);
    std::vector<Piece> corpus = synthesize_corpus(o);
    write_file(cfg_.corpus, serialize_corpus(corpus) + "\n");
    out_ << "wrote " << corpus.size() << " pieces to " << cfg_.corpus << "\n";
    return 0;
  }
};

inline nlohmann::json error_record(const std::string &kind, const std::string &message) {
  return {{"error", {{"kind", kind}, {"message", message}}}};
}

/// Runs one command. Returns the process exit status; failures are reported
/// on `err` as a single-line JSON error record.
inline int run(const std::string &command, const RunConfig &config, std::ostream &out,
               std::ostream &err) {
  try {
    if (std::find(commands().begin(), commands().end(), command) == commands().end())
      throw Error(ErrorKind::usage, "unknown command '" + command + "'");
    return Runner(command, config, out).run();
  } catch (const Error &e) {
    err << error_record(std::string(to_string(e.kind())), e.what()).dump() << "\n";
    return e.kind() == ErrorKind::usage ? 2 : 1;
  } catch (const std::exception &e) {
    err << error_record("internal", e.what()).dump() << "\n";
    return 1;
  }
}

} // namespace perfexp::cli

#endif
