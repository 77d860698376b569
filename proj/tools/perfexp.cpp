#include "perfexp/cli.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <map>

namespace {

using perfexp::cli::RunConfig;

// A flag bound to a temporary; copied into the config only when given, so
// flags override the config file and the file overrides defaults.
template <class T> struct Flag {
  T value{};
  std::string name;
  void apply(const CLI::App &sub, T &field) const {
    if (!name.empty() && sub.count(name) > 0)
      field = value;
  }
};

struct Flags {
  std::string config_path;
  Flag<std::string> corpus, out, model, feature_set, target, rule;
  Flag<int> folds, max_order, selection_folds, crossfit_folds, hidden, max_epochs, patience, window, pieces,
      min_onsets, max_onsets;
  Flag<std::uint64_t> seed;
  Flag<double> bias, selection_threshold, learning_rate, validation_fraction;
  Flag<bool> stm, permute_targets, pooled;

  void add(CLI::App &app) {
    app.add_option("--config", config_path, "flat JSON config file");
    corpus.name = "--corpus";
    app.add_option("--corpus", corpus.value, "corpus JSON file");
    out.name = "--out";
    app.add_option("--out", out.value, "output directory");
    model.name = "--model";
    app.add_option("--model", model.value, "fitted model JSON (sensitivity)");
    feature_set.name = "--feature-set";
    app.add_option("--feature-set", feature_set.value, "E, S or E+S");
    target.name = "--target";
    app.add_option("--target", target.value, "bpr, bpr_d, vel, vel_d or all");
    folds.name = "--folds";
    app.add_option("--folds", folds.value, "cross-validation folds");
    seed.name = "--seed";
    app.add_option("--seed", seed.value, "random seed");
    max_order.name = "--max-order";
    app.add_option("--max-order", max_order.value, "PPM maximum context order");
    stm.name = "--stm";
    app.add_flag("--stm", stm.value, "add the short-term model");
    bias.name = "--bias";
    app.add_option("--bias", bias.value, "entropy weighting exponent");
    selection_threshold.name = "--selection-threshold";
    app.add_option("--selection-threshold", selection_threshold.value, "viewpoint selection gain (bits)");
    selection_folds.name = "--selection-folds";
    app.add_option("--selection-folds", selection_folds.value, "viewpoint selection folds");
    crossfit_folds.name = "--crossfit-folds";
    app.add_option("--crossfit-folds", crossfit_folds.value, "held-out folds for training-piece expectancy features");
    hidden.name = "--hidden";
    app.add_option("--hidden", hidden.value, "LSTM units per direction");
    learning_rate.name = "--learning-rate";
    app.add_option("--learning-rate", learning_rate.value, "Adam step size");
    max_epochs.name = "--max-epochs";
    app.add_option("--max-epochs", max_epochs.value, "epoch limit");
    patience.name = "--patience";
    app.add_option("--patience", patience.value, "early stopping patience");
    validation_fraction.name = "--validation-fraction";
    app.add_option("--validation-fraction", validation_fraction.value, "held-out training share");
    permute_targets.name = "--permute-targets";
    app.add_flag("--permute-targets", permute_targets.value, "shuffle targets (control)");
    pooled.name = "--pooled";
    app.add_flag("--pooled", pooled.value, "also report pooled R2");
    window.name = "--window";
    app.add_option("--window", window.value, "sensitivity half window");
    pieces.name = "--pieces";
    app.add_option("--pieces", pieces.value, "synthetic pieces");
    min_onsets.name = "--min-onsets";
    app.add_option("--min-onsets", min_onsets.value, "synthetic minimum onsets");
    max_onsets.name = "--max-onsets";
    app.add_option("--max-onsets", max_onsets.value, "synthetic maximum onsets");
    rule.name = "--rule";
    app.add_option("--rule", rule.value, "linear-score, ic-tempo or random");
  }

  RunConfig resolve(const CLI::App &sub) const {
    RunConfig c;
    if (!config_path.empty()) {
      const std::string raw = perfexp::cli::read_file(config_path);
      try {
        perfexp::cli::apply_json(c, nlohmann::json::parse(raw));
      } catch (const nlohmann::json::parse_error &e) {
        throw perfexp::Error(perfexp::ErrorKind::configuration, std::string("config is not JSON: ") + e.what());
      }
    }
    corpus.apply(sub, c.corpus);
    out.apply(sub, c.out);
    model.apply(sub, c.model);
    feature_set.apply(sub, c.feature_set);
    target.apply(sub, c.target);
    folds.apply(sub, c.folds);
    seed.apply(sub, c.seed);
    max_order.apply(sub, c.max_order);
    stm.apply(sub, c.stm);
    bias.apply(sub, c.bias);
    selection_threshold.apply(sub, c.selection_threshold);
    selection_folds.apply(sub, c.selection_folds);
    crossfit_folds.apply(sub, c.crossfit_folds);
    hidden.apply(sub, c.hidden);
    learning_rate.apply(sub, c.learning_rate);
    max_epochs.apply(sub, c.max_epochs);
    patience.apply(sub, c.patience);
    validation_fraction.apply(sub, c.validation_fraction);
    permute_targets.apply(sub, c.permute_targets);
    pooled.apply(sub, c.pooled);
    window.apply(sub, c.window);
    pieces.apply(sub, c.pieces);
    min_onsets.apply(sub, c.min_onsets);
    max_onsets.apply(sub, c.max_onsets);
    rule.apply(sub, c.rule);
    return c;
  }
};

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Expectancy features for expressive performance modelling", "perfexp"};
  app.set_version_flag("--version", PERFEXP_VERSION);
  app.require_subcommand(1);
  Flags flags;
  std::string command;
  std::map<std::string, CLI::App *> subs;
  const std::map<std::string, std::string> blurbs{
      {"validate", "check a corpus and report per-piece problems"},
      {"targets", "write per-onset BPR, VEL and their differences"},
      {"features", "train expectancy models and write the feature matrix"},
      {"train", "fit one model on the whole corpus"},
      {"evaluate", "cross-validate one feature set"},
      {"compare", "cross-validate E, S and E+S and test the differences"},
      {"sensitivity", "average input-output Jacobian map of a trained model"},
      {"synth", "generate a synthetic corpus"},
  };
  for (const std::string &name : perfexp::cli::commands()) {
    CLI::App *sub = app.add_subcommand(name, blurbs.at(name));
    subs[name] = sub;
    flags.add(*sub);
    sub->callback([&command, name] { command = name; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion &e) {
    return app.exit(e);
  } catch (const CLI::ParseError &e) {
    std::cerr << perfexp::cli::error_record("usage", e.what()).dump() << "\n";
    return 2;
  }
  perfexp::cli::RunConfig config;
  try {
    config = flags.resolve(*subs.at(command));
  } catch (const perfexp::Error &e) {
    std::cerr << perfexp::cli::error_record(std::string(perfexp::to_string(e.kind())), e.what()).dump()
              << "\n";
    return 1;
  }
  return perfexp::cli::run(command, config, std::cout, std::cerr);
}
