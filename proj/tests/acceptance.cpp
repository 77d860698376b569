// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure.

#include "perfexp/evaluation.hpp"
#include "perfexp/expectancy/combine.hpp"
#include "perfexp/expectancy/model.hpp"
#include "perfexp/sensitivity.hpp"
#include "perfexp/synth.hpp"
#include "support.hpp"

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>

using namespace perfexp;
using testing_support::note;
using testing_support::piece;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  double limit_seconds;
  std::function<Outcome()> run;
};

std::string fmt(const char *f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::vector<Piece> corpus(SynthRule rule, std::uint64_t seed) {
  SynthOptions o;
  o.pieces = 20;
  o.min_onsets = 60;
  o.max_onsets = 120;
  o.seed = seed;
  o.rule = rule;
  return synthesize_corpus(o);
}

EvaluationOptions options(FeatureSet set, TargetKind target) {
  EvaluationOptions o;
  o.model.feature_set = set;
  o.model.target = target;
  o.folds = 5;
  o.seed = 2024;
  return o;
}

// 1 -------------------------------------------------------------------------
Outcome formula_oracles() {
  std::vector<std::string> bad;
  OnsetGroup triad =
      group_by_onset(piece("t", {note(0, 60, false, 0), note(0, 64, false, 0), note(0, 67, true, 0)})).groups[0];
  if (vic_features(triad) != std::array<double, 3>{4.0 / 11.0, 7.0 / 11.0, 0.0})
    bad.push_back("vic triad");
  MetricalFeatures a = metrical_features(2.0, 0.0, {0.0, 4.0, MeterClass::duple});
  if (!(a.secondary == 1 && a.downbeat == 0 && a.weak == 0 && a.phase == 0.5))
    bad.push_back("beat 3 of 4/4");
  MetricalFeatures b = metrical_features(3.0, 0.0, {0.0, 6.0, MeterClass::compound_duple});
  if (!(b.secondary == 1 && b.phase == 0.5))
    bad.push_back("eighth 4 of 6/8");
  TargetSeries bpr = compute_bpr(group_by_onset(testing_support::timed_piece({0, 1, 2, 4}, {0, 0.5, 1.0, 2.5})));
  const double want[] = {0.5 / 0.625, 0.5 / 0.625, 0.75 / 0.625, 0.75 / 0.625}; // mean of the four periods
  for (std::size_t i = 0; i < 4; ++i)
    if (std::abs(bpr.values[i] - want[i]) > 1e-12)
      bad.push_back("bpr[" + std::to_string(i) + "]");
  std::string d = bad.empty() ? "all exact" : "";
  for (const auto &s : bad)
    d += s + " ";
  return {bad.empty(), d};
}

// 2 -------------------------------------------------------------------------
Outcome ppm_equivalence() {
  double worst = 0.0;
  std::size_t queries = 0;
  for (int A = 1; A <= 4; ++A) {
    std::vector<int> alphabet(static_cast<std::size_t>(A));
    std::iota(alphabet.begin(), alphabet.end(), 0);
    const auto sequences = testing_support::all_sequences(A, 6);
    for (int order = 0; order <= 3; ++order) {
      // contexts up to one symbol longer than the order exercise truncation
      const auto contexts = testing_support::all_sequences(A, std::min(order + 1, 3));
      for (const auto &seq : sequences) {
        std::vector<std::vector<int>> train{seq};
        expectancy::ContextModel m = expectancy::ppm_train(train, order, alphabet);
        auto check = [&](const std::vector<int> &ctx) {
          expectancy::Distribution got = expectancy::ppm_predict(m, ctx);
          std::vector<double> want = testing_support::oracle_ppmc(train, order, alphabet, ctx);
          for (std::size_t i = 0; i < want.size(); ++i)
            worst = std::max(worst, std::abs(got.probs[i] - want[i]));
          ++queries;
        };
        check({});
        for (const auto &ctx : contexts)
          check(ctx);
      }
    }
  }
  return {worst <= 1e-12, std::to_string(queries) + " queries, max error " + fmt("%.2e", worst)};
}

// 3 -------------------------------------------------------------------------
Outcome information_identities() {
  using namespace expectancy;
  std::mt19937_64 rng(77);
  std::size_t count = 0;
  double worst_sum = 0.0, worst_h = 0.0;
  bool bounds = true;
  auto check = [&](const Distribution &d) {
    ++count;
    worst_sum = std::max(worst_sum, std::abs(d.total() - 1.0));
    double h_ic = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i)
      h_ic += d.probs[i] * ic(d, d.symbols[i]);
    const double h = entropy(d);
    worst_h = std::max(worst_h, std::abs(h - h_ic));
    if (h < 0.0 || h > max_entropy(d.size()) + 1e-12)
      bounds = false;
  };
  auto random_alphabet = [&](int n) {
    Alphabet a(static_cast<std::size_t>(n));
    std::iota(a.begin(), a.end(), 0);
    return a;
  };
  std::gamma_distribution<double> gamma(0.3, 1.0);
  while (count < 4000) { // sparse Dirichlet draws, many near point masses
    const int n = 1 + static_cast<int>(rng() % 30);
    Distribution d{random_alphabet(n), std::vector<double>(static_cast<std::size_t>(n))};
    for (double &p : d.probs)
      p = gamma(rng);
    if (d.total() <= 0.0)
      continue;
    d.normalize();
    check(d);
  }
  while (count < 7000) { // PPM predictions from random models and contexts
    const int A = 2 + static_cast<int>(rng() % 8);
    std::vector<std::vector<Symbol>> train(1 + rng() % 3);
    for (auto &s : train) {
      s.resize(1 + rng() % 20);
      for (Symbol &x : s)
        x = static_cast<Symbol>(rng() % static_cast<unsigned>(A));
    }
    ContextModel m = ppm_train(train, static_cast<int>(rng() % 4), random_alphabet(A));
    std::vector<Symbol> ctx(rng() % 5);
    for (Symbol &x : ctx)
      x = static_cast<Symbol>(rng() % static_cast<unsigned>(A));
    check(ppm_predict(m, ctx));
  }
  std::uniform_real_distribution<double> bias(0.1, 4.0);
  while (count < 9000) { // entropy-weighted combinations
    const int n = 2 + static_cast<int>(rng() % 12);
    std::vector<Distribution> ds(1 + rng() % 3);
    for (auto &d : ds) {
      d = {random_alphabet(n), std::vector<double>(static_cast<std::size_t>(n))};
      for (double &p : d.probs)
        p = gamma(rng) + 1e-300;
      d.normalize();
    }
    check(combine_distributions(ds, bias(rng)));
  }
  Alphabet pitches;
  for (int p = 55; p <= 79; ++p)
    pitches.push_back(p);
  std::vector<std::vector<Symbol>> melodies(5);
  for (auto &s : melodies) {
    int p = 67;
    for (int i = 0; i < 40; ++i) {
      p = std::clamp(p + static_cast<int>(rng() % 9) - 4, 55, 79);
      s.push_back(p);
    }
  }
  MelodyModel mm = train_melody_model(melodies, {{Viewpoint::cpitch, Viewpoint::cpint, Viewpoint::contour}, 1.0},
                                      pitches, 3, true);
  while (count < 10000) { // full melody pipeline incl. short-term model
    std::vector<Symbol> test;
    int p = 60 + static_cast<int>(rng() % 12);
    for (int i = 0; i < 25; ++i) {
      p = std::clamp(p + static_cast<int>(rng() % 11) - 5, 55, 79);
      test.push_back(p);
    }
    for (const Distribution &d : melody_distributions(mm, test))
      check(d);
  }
  const bool pass = worst_sum <= 1e-9 && worst_h <= 1e-9 && bounds;
  return {pass, std::to_string(count) + " distributions, max |sum-1| " + fmt("%.1e", worst_sum) +
                    ", max |H-sum p*IC| " + fmt("%.1e", worst_h) + (bounds ? ", bounds hold" : ", BOUNDS VIOLATED")};
}

// 4 -------------------------------------------------------------------------
Outcome gradient_check() {
  std::mt19937_64 rng(4242);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> jitter(-0.5, 0.5);
  const int dims[] = {4, 10, 14};
  double worst = 0.0;
  const int instances = 24;
  for (int k = 0; k < instances; ++k) {
    const int D = dims[k % 3];
    const int H = 2 + k % 4;
    const int T = 3 + k % 6;
    Regressor r = init_regressor(D, H, static_cast<std::uint64_t>(k));
    Eigen::VectorXd theta = r.params.flatten();
    for (Eigen::Index i = 0; i < theta.size(); ++i)
      theta(i) += jitter(rng);
    r.params.assign(theta);
    const FeatureSet set = D == 4 ? FeatureSet::E : (D == 10 ? FeatureSet::S : FeatureSet::ES);
    FeatureMatrix x("g", set, static_cast<std::size_t>(T));
    for (Eigen::Index i = 0; i < x.rows.size(); ++i)
      x.rows.data()[i] = normal(rng);
    r.norm.mean = Eigen::VectorXd::Constant(D, 0.2);
    r.norm.scale = Eigen::VectorXd::Constant(D, 1.5);
    TargetSeries t;
    for (int i = 0; i < T; ++i)
      t.values.push_back(normal(rng));
    worst = std::max(worst, grad_check(r, x, t, 1e-5));
  }
  return {worst < 1e-4, std::to_string(instances) + " instances, max relative error " + fmt("%.2e", worst)};
}

// 5 -------------------------------------------------------------------------
Outcome learning_sanity() {
  auto c = corpus(SynthRule::linear_score, 505);
  EvaluationReport real = evaluate_cv(c, options(FeatureSet::S, TargetKind::vel));
  EvaluationOptions perm = options(FeatureSet::S, TargetKind::vel);
  perm.model.permute_targets = true;
  EvaluationReport null = evaluate_cv(c, perm);
  return {real.mean_r2 > 0.9 && null.mean_r2 <= 0.05,
          "S/VEL mean R2 " + fmt("%.4f", real.mean_r2) + " (> 0.9), permuted " + fmt("%.4f", null.mean_r2) +
              " (<= 0.05)"};
}

// 6 -------------------------------------------------------------------------
Outcome expectancy_trend() {
  auto c = corpus(SynthRule::ic_tempo, 606);
  EvaluationReport e = evaluate_cv(c, options(FeatureSet::E, TargetKind::bpr_d));
  EvaluationReport s = evaluate_cv(c, options(FeatureSet::S, TargetKind::bpr_d));
  EvaluationReport es = evaluate_cv(c, options(FeatureSet::ES, TargetKind::bpr_d));
  return {e.mean_r > 0.3 && es.mean_r2 >= s.mean_r2 - 0.02,
          "E mean r " + fmt("%.3f", e.mean_r) + " (> 0.3); E+S R2 " + fmt("%.3f", es.mean_r2) + " vs S R2 " +
              fmt("%.3f", s.mean_r2) + " - 0.02"};
}

// 7 -------------------------------------------------------------------------
Outcome statistics_oracles() {
  std::vector<std::vector<double>> g{{1, 2, 3}, {2, 3, 4}, {3, 4, 5}};
  StatTestResult r = anova_oneway(g);
  const bool f_ok = std::abs(r.F - 3.0) <= 1e-9 && r.df_between == 2 && r.df_within == 6;
  std::vector<std::vector<double>> same{{0.2, 0.5, 0.9}, {0.2, 0.5, 0.9}, {0.2, 0.5, 0.9}};
  StatTestResult z = anova_oneway(same);
  bool none = true;
  for (const TukeyRow &row : tukey_hsd(same, 0.05))
    none = none && !row.significant;
  return {f_ok && z.F == 0.0 && none, "F " + fmt("%.12g", r.F) + " df (" + std::to_string(r.df_between) + "," +
                                          std::to_string(r.df_within) + "); identical groups F " + fmt("%g", z.F) +
                                          (none ? ", no significant pairs" : ", SIGNIFICANT PAIR")};
}

// 8 -------------------------------------------------------------------------
Outcome protocol_invariants() {
  auto c = corpus(SynthRule::ic_tempo, 808);
  EvaluationOptions o = options(FeatureSet::ES, TargetKind::bpr_d);
  o.model.training.max_epochs = 40;

  std::vector<FittedModel> before;
  EvaluationReport first = evaluate_cv(c, o, &before);
  std::map<std::string, int> tested;
  for (const PieceResult &p : first.pieces)
    ++tested[p.piece_id];
  bool partition = tested.size() == c.size();
  for (const auto &[id, n] : tested)
    partition = partition && n == 1;

  const bool identical = to_json(first).dump() == to_json(evaluate_cv(c, o)).dump();

  std::vector<std::string> ids;
  for (const Piece &p : c)
    ids.push_back(p.id);
  const FoldPlan plan = make_folds(ids, o.folds, o.seed);
  bool no_leak = true;
  for (int f = 0; f < o.folds; ++f) {
    // replace one test piece's performance with a constant-tempo, pianissimo one
    auto altered = c;
    const std::string victim = plan.test_ids(f).front();
    for (Piece &p : altered)
      if (p.id == victim)
        for (Note &n : p.notes) {
          n.perf_velocity = 1;
          n.perf_onset_sec = 0.4 * n.onset_beats;
        }
    if (f > 0)
      break; // one deletion is enough; the rest of the folds are covered below
    std::vector<FittedModel> after;
    evaluate_cv(altered, o, &after);
    for (int g = 0; g < o.folds; ++g) {
      const bool trains_on_victim = plan.assignments.at(victim) != g;
      const bool same = to_json(before[static_cast<std::size_t>(g)]).dump() ==
                        to_json(after[static_cast<std::size_t>(g)]).dump();
      if (!trains_on_victim && !same)
        no_leak = false;
    }
  }
  return {partition && identical && no_leak,
          std::string(partition ? "partition ok" : "PARTITION BROKEN") + ", " +
              (identical ? "reports byte-identical" : "REPORTS DIFFER") + ", " +
              (no_leak ? "deletion test clean" : "LEAKAGE")};
}

// 9 -------------------------------------------------------------------------
Outcome sensitivity_correctness() {
  std::mt19937_64 rng(909);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> jitter(-0.6, 0.6);
  const int W = 3;
  Regressor m = init_regressor(14, 3, 9);
  Eigen::VectorXd theta = m.params.flatten();
  for (Eigen::Index i = 0; i < theta.size(); ++i)
    theta(i) += jitter(rng);
  m.params.assign(theta);
  m.columns = columns_for(FeatureSet::ES);
  std::vector<FeatureMatrix> pieces;
  for (int p = 0; p < 2; ++p) {
    FeatureMatrix x("s" + std::to_string(p), FeatureSet::ES, static_cast<std::size_t>(9 + p));
    for (Eigen::Index i = 0; i < x.rows.size(); ++i)
      x.rows.data()[i] = normal(rng);
    pieces.push_back(x);
  }
  SensitivityMap map = sensitivity_map(m, pieces, W);
  Eigen::MatrixXd fd = Eigen::MatrixXd::Zero(14, 2 * W + 1);
  std::size_t centers = 0;
  for (const FeatureMatrix &p : pieces) {
    Eigen::MatrixXd x = normalize_rows(m, p.rows);
    for (Eigen::Index tau = W; tau + W < x.rows(); ++tau, ++centers)
      for (Eigen::Index f = 0; f < 14; ++f)
        for (Eigen::Index w = 0; w <= 2 * W; ++w) {
          Eigen::MatrixXd up = x, down = x;
          up(tau - W + w, f) += 1e-4;
          down(tau - W + w, f) -= 1e-4;
          fd(f, w) += (detail::run(m.params, up).y(tau) - detail::run(m.params, down).y(tau)) / 2e-4;
        }
  }
  fd /= static_cast<double>(centers);
  const double fd_err = (map.values - fd).cwiseAbs().maxCoeff();

  // no recurrence and a closed forget gate: each output sees only its own step
  Regressor z = m;
  for (LstmBlock *blk : {&z.params.fwd, &z.params.bwd}) {
    blk->U.setZero();
    blk->W.middleRows(3, 3).setZero(); // forget-gate rows
    blk->b.segment(3, 3).setConstant(-40.0);
  }
  SensitivityMap zm = sensitivity_map(z, pieces, W);
  double off = 0.0;
  for (int w = 0; w <= 2 * W; ++w)
    if (w != W)
      off = std::max(off, zm.values.col(w).cwiseAbs().maxCoeff());
  const double on = zm.values.col(W).cwiseAbs().maxCoeff();

  bool svg_ok = true;
  try {
    std::istringstream in(render_map_svg(map));
    boost::property_tree::ptree doc;
    boost::property_tree::read_xml(in, doc);
    std::size_t labels = 0, cells = 0;
    for (const auto &[name, g] : doc.get_child("svg")) {
      if (name != "g")
        continue;
      for (const auto &[tag, child] : g) {
        if (tag == "rect")
          ++cells;
        if (tag == "text" && child.get<std::string>("<xmlattr>.class") == "feature")
          ++labels;
      }
    }
    svg_ok = labels == 14 && cells == 14 * static_cast<std::size_t>(2 * W + 1);
  } catch (const std::exception &) {
    svg_ok = false;
  }
  return {fd_err <= 1e-5 && off < 1e-12 && on > 0.0 && svg_ok,
          "max |analytic-FD| " + fmt("%.2e", fd_err) + ", zero-recurrence off-center max " + fmt("%.1e", off) +
              (svg_ok ? ", SVG valid" : ", SVG INVALID")};
}

} // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "formula oracles", 1.0, formula_oracles},
      {2, "PPM equivalence", 30.0, ppm_equivalence},
      {3, "information-theory identities", 1e9, information_identities},
      {4, "gradient check", 60.0, gradient_check},
      {5, "learning sanity", 600.0, learning_sanity},
      {6, "expectancy trend analogue", 900.0, expectancy_trend},
      {7, "statistics oracles", 1e9, statistics_oracles},
      {8, "protocol invariants", 1e9, protocol_invariants},
      {9, "sensitivity correctness", 1e9, sensitivity_correctness},
  };
  int failed = 0;
  for (const Criterion &c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception &e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs < c.limit_seconds;
    const bool pass = o.pass && in_time;
    failed += pass ? 0 : 1;
    std::cout << (pass ? "PASS" : "FAIL") << "  " << c.id << ". " << c.name << ": " << o.detail << " ["
              << fmt("%.2f", secs) << " s" << (c.limit_seconds < 1e9 ? " / limit " + fmt("%g", c.limit_seconds) + " s" : "")
              << (in_time ? "" : ", OVER TIME LIMIT") << "]" << std::endl;
  }
  std::cout << (criteria.size() - static_cast<std::size_t>(failed)) << "/" << criteria.size() << " criteria passed"
            << std::endl;
  return failed == 0 ? 0 : 1;
}
