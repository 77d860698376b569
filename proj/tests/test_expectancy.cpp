#include "perfexp/expectancy/combine.hpp"
#include "perfexp/expectancy/distribution.hpp"
#include "perfexp/expectancy/model.hpp"
#include "perfexp/expectancy/ppm.hpp"
#include "perfexp/expectancy/viewpoint.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace perfexp;
using namespace perfexp::expectancy;
using testing_support::melody_piece;
using testing_support::note;
using testing_support::piece;

namespace {

template <class F> ErrorKind kind_of(F &&f) {
  try {
    f();
  } catch (const Error &e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorKind::usage;
}

Distribution dist(std::vector<Symbol> s, std::vector<double> p) { return {make_alphabet(s), p}; }

double kl(const Distribution &p, const Distribution &q) {
  double d = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p.probs[i] > 0)
      d += p.probs[i] * std::log2(p.probs[i] / q.probs[i]);
  return d;
}

constexpr Symbol a = 0, b = 1;

} // namespace

TEST(Distribution, InformationContent) {
  Distribution d = dist({0, 1, 2}, {0.5, 0.25, 0.25});
  EXPECT_DOUBLE_EQ(ic(d, 0), 1.0);
  EXPECT_DOUBLE_EQ(ic(d, 1), 2.0);
  EXPECT_DOUBLE_EQ(ic(dist({7}, {1.0}), 7), 0.0);
  EXPECT_EQ(kind_of([&] { ic(d, 9); }), ErrorKind::domain);
  // floor keeps impossible events finite
  EXPECT_NEAR(ic(dist({0, 1}, {1.0, 0.0}), 1), -std::log2(1e-12), 1e-9);
}

TEST(Distribution, Entropy) {
  EXPECT_DOUBLE_EQ(entropy(Distribution::uniform(make_alphabet({0, 1, 2, 3}))), 2.0);
  EXPECT_DOUBLE_EQ(entropy(dist({0, 1}, {1.0, 0.0})), 0.0);
  EXPECT_DOUBLE_EQ(entropy(dist({0, 1}, {0.5, 0.5})), 1.0);
}

TEST(Ppm, CountsOfAlternatingSequence) {
  std::vector<std::vector<Symbol>> train{{a, b, a, b}};
  ContextModel m = ppm_train(train, 1);
  // hand enumeration of all 0- and 1-grams with their followers
  EXPECT_EQ(m.counts.at({}).at(a), 2u);
  EXPECT_EQ(m.counts.at({}).at(b), 2u);
  EXPECT_EQ(m.counts.at({a}).at(b), 2u);
  EXPECT_EQ(m.counts.at({a}).count(a), 0u);
  EXPECT_EQ(m.counts.at({b}).at(a), 1u);
  EXPECT_EQ(m.counts.at({b}).count(b), 0u);
  EXPECT_EQ(m.counts.size(), 3u);
}

TEST(Ppm, SingleSymbolAlphabetIsCertain) {
  std::vector<std::vector<Symbol>> train{{5, 5, 5}};
  ContextModel m = ppm_train(train, 2);
  std::vector<Symbol> ctx{5, 5};
  EXPECT_NEAR(ppm_predict(m, ctx).at(5), 1.0, 1e-15);
}

TEST(Ppm, OrderZeroIgnoresContext) {
  std::vector<std::vector<Symbol>> train{{a, b, b, a, b}};
  ContextModel m = ppm_train(train, 0);
  std::vector<Symbol> c1{a}, c2{b, b};
  Distribution p = ppm_predict(m, c1), q = ppm_predict(m, c2);
  EXPECT_EQ(p.probs, q.probs);
  // 2/7 and 3/7; the escape 2/7 finds nothing unseen and is renormalized away
  EXPECT_NEAR(p.at(a), 2.0 / 5.0, 1e-15);
  EXPECT_NEAR(p.at(b), 3.0 / 5.0, 1e-15);
}

TEST(Ppm, RepeatedSymbolHandComputation) {
  std::vector<std::vector<Symbol>> train{{a, a, a, a}};
  const Alphabet ab{a, b};
  std::vector<Symbol> ctx{a};
  // unigram counts only: a seen 4 times, escape 1/5 goes to b
  Distribution p0 = ppm_predict(ppm_train(train, 0, ab), ctx);
  EXPECT_NEAR(p0.at(a), 4.0 / 5.0, 1e-15);
  EXPECT_NEAR(p0.at(b), 1.0 / 5.0, 1e-15);
  // with the order-1 context a: a follows a three times; the order-0 level is
  // fully excluded, so the escape 1/4 reaches b through order -1
  Distribution p1 = ppm_predict(ppm_train(train, 1, ab), ctx);
  EXPECT_NEAR(p1.at(a), 3.0 / 4.0, 1e-15);
  EXPECT_NEAR(p1.at(b), 1.0 / 4.0, 1e-15);
}

TEST(Ppm, UntrainedContextIsUniform) {
  ContextModel m;
  m.max_order = 2;
  m.alphabet = {a, b};
  std::vector<Symbol> ctx{a};
  Distribution p = ppm_predict(m, ctx);
  EXPECT_DOUBLE_EQ(p.at(a), 0.5);
  EXPECT_DOUBLE_EQ(p.at(b), 0.5);
}

TEST(Ppm, Errors) {
  std::vector<std::vector<Symbol>> none;
  EXPECT_EQ(kind_of([&] { ppm_train(none, 2); }), ErrorKind::training);
  ContextModel empty;
  EXPECT_EQ(kind_of([&] { ppm_predict(empty, {}); }), ErrorKind::model);
}

TEST(Ppm, MatchesBruteForceOnPairsOfSequences) {
  // the acceptance suite covers single sequences exhaustively; here two
  // random sequences share one model
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 400; ++trial) {
    const int A = 2 + static_cast<int>(rng() % 3);
    const int order = static_cast<int>(rng() % 4);
    std::vector<std::vector<int>> train(2);
    for (auto &s : train) {
      s.resize(1 + rng() % 6);
      for (int &x : s)
        x = static_cast<int>(rng() % static_cast<unsigned>(A));
    }
    std::vector<int> alphabet(static_cast<std::size_t>(A));
    std::iota(alphabet.begin(), alphabet.end(), 0);
    ContextModel m = ppm_train(train, order, alphabet);
    for (int len = 0; len <= 4; ++len) {
      std::vector<int> ctx(static_cast<std::size_t>(len));
      for (int &x : ctx)
        x = static_cast<int>(rng() % static_cast<unsigned>(A));
      Distribution got = ppm_predict(m, ctx);
      std::vector<double> want = testing_support::oracle_ppmc(train, order, alphabet, ctx);
      for (std::size_t i = 0; i < want.size(); ++i)
        ASSERT_NEAR(got.probs[i], want[i], 1e-12);
    }
  }
}

TEST(Ppm, JsonRoundTrip) {
  std::vector<std::vector<Symbol>> train{{1, 2, 3, 1, 2}, {3, 3, 1}};
  ContextModel m = ppm_train(train, 2);
  ContextModel back = context_model_from_json(to_json(m));
  EXPECT_EQ(back.counts, m.counts);
  EXPECT_EQ(back.alphabet, m.alphabet);
  EXPECT_EQ(back.max_order, m.max_order);
}

TEST(Viewpoints, EncodeMelody) {
  MelodySequence m = encode_melody(melody_piece("m", {60, 64, 67}));
  EXPECT_EQ(m.pitches.symbols, (std::vector<Symbol>{60, 64, 67}));
  Piece gap = piece("g", {note(0, 60, true, 0), note(1, 48, false, 0.5), note(2, 62, true, 1.0)});
  MelodySequence g = encode_melody(gap);
  EXPECT_EQ(g.pitches.symbols.size(), 2u);
  EXPECT_EQ(g.onset_index, (std::vector<std::size_t>{0, 2}));
  Piece accomp = piece("acc", {note(0, 48, false, 0), note(1, 50, false, 0.5)});
  EXPECT_EQ(kind_of([&] { encode_melody(accomp); }), ErrorKind::empty_melody);
}

TEST(Viewpoints, EncodeHarmony) {
  Piece p = piece("h", {note(0, 60, false, 0), note(0, 64, false, 0), note(0, 67, true, 0),
                        note(1, 60, true, 0.5), note(2, 60, false, 1.0), note(2, 72, true, 1.0)});
  SymbolSequence h = encode_harmony(p);
  ASSERT_EQ(h.symbols.size(), 3u);
  EXPECT_EQ(harmony_classes(h.symbols[0]), (std::vector<int>{4, 7}));
  EXPECT_EQ(harmony_label(h.symbols[0]), "(4,7)");
  EXPECT_EQ(h.symbols[1], harmony_symbol(std::vector<int>{}));
  EXPECT_EQ(h.symbols[2], h.symbols[1]);
  EXPECT_EQ(harmony_label(h.symbols[1]), "()");
}

TEST(Viewpoints, Derivations) {
  std::vector<Symbol> s{60, 64, 67};
  EXPECT_EQ(derive_viewpoint(s, Viewpoint::cpint), (std::vector<Symbol>{undef_symbol, 4, 3}));
  EXPECT_EQ(derive_viewpoint(s, Viewpoint::contour), (std::vector<Symbol>{undef_symbol, 1, 1}));
  std::vector<Symbol> flat{60, 60};
  EXPECT_EQ(derive_viewpoint(flat, Viewpoint::contour), (std::vector<Symbol>{undef_symbol, 0}));
  EXPECT_EQ(derive_viewpoint(s, Viewpoint::cpitch), s);
  EXPECT_EQ(kind_of([] { viewpoint_from_string("scale-degree"); }), ErrorKind::configuration);
}

TEST(Viewpoints, DerivedMassSplitsOverPreimage) {
  const Alphabet basic{60, 61, 62, 63, 64};
  Distribution contour = dist({-1, 0, 1}, {0.2, 0.2, 0.6});
  Distribution p = to_basic(contour, Viewpoint::contour, Symbol{62}, basic);
  EXPECT_NEAR(p.at(60), 0.1, 1e-15);
  EXPECT_NEAR(p.at(61), 0.1, 1e-15);
  EXPECT_NEAR(p.at(62), 0.2, 1e-15);
  EXPECT_NEAR(p.at(63), 0.3, 1e-15);
  EXPECT_NEAR(p.at(64), 0.3, 1e-15);
  // every basic symbol has a preimage: the mapping is total
  for (Symbol prev : basic)
    for (Symbol s : basic)
      EXPECT_GE(alphabet_index(derived_alphabet(Viewpoint::cpint, basic),
                               derive_symbol(Viewpoint::cpint, prev, s)), 0);
}

TEST(Combine, SingleIsUnchangedAndIdenticalIsIdempotent) {
  Distribution d = dist({0, 1, 2}, {0.2, 0.3, 0.5});
  std::vector<Distribution> one{d};
  EXPECT_EQ(combine_distributions(one, 1.0).probs, d.probs);
  std::vector<Distribution> two{d, d};
  Distribution c = combine_distributions(two, 1.0);
  for (std::size_t i = 0; i < 3; ++i)
    EXPECT_NEAR(c.probs[i], d.probs[i], 1e-12);
}

TEST(Combine, EntropyWeightingFavoursPeakedModel) {
  Distribution uniform = Distribution::uniform(make_alphabet({0, 1, 2, 3}));
  Distribution peaked = dist({0, 1, 2, 3}, {0.85, 0.05, 0.05, 0.05});
  std::vector<Distribution> both{uniform, peaked};
  Distribution weighted = combine_distributions(both, 1.0);
  // unweighted geometric mean, computed directly
  Distribution plain = dist({0, 1, 2, 3}, {0, 0, 0, 0});
  for (std::size_t i = 0; i < 4; ++i)
    plain.probs[i] = std::sqrt(uniform.probs[i] * peaked.probs[i]);
  plain.normalize();
  EXPECT_LT(kl(peaked, weighted), kl(peaked, plain));
  EXPECT_NEAR(weighted.total(), 1.0, 1e-12);
}

TEST(Combine, MismatchedAlphabetsFail) {
  std::vector<Distribution> ds{dist({0, 1}, {0.5, 0.5}), dist({0, 2}, {0.5, 0.5})};
  EXPECT_EQ(kind_of([&] { combine_distributions(ds, 1.0); }), ErrorKind::combination);
}

namespace {

std::vector<std::vector<Symbol>> chromatic_scales() {
  std::vector<std::vector<Symbol>> out;
  for (int start = 60; start < 66; ++start) {
    std::vector<Symbol> s;
    for (int i = 0; i < 12; ++i)
      s.push_back(start + i);
    out.push_back(s);
  }
  return out;
}

Alphabet range_alphabet(int lo, int hi) {
  Alphabet a;
  for (int p = lo; p <= hi; ++p)
    a.push_back(p);
  return a;
}

} // namespace

TEST(Selection, OneCandidateIsForced) {
  auto seqs = chromatic_scales();
  std::vector<Viewpoint> only{Viewpoint::contour};
  Selection s = stepwise_select(seqs, only, range_alphabet(60, 77), {});
  EXPECT_EQ(s.system.selected, only);
}

TEST(Selection, DuplicateCandidateNeverAdded) {
  auto seqs = chromatic_scales();
  std::vector<Viewpoint> dup{Viewpoint::cpitch, Viewpoint::cpitch};
  Selection s = stepwise_select(seqs, dup, range_alphabet(60, 77), {});
  EXPECT_EQ(s.system.selected.size(), 1u);
}

TEST(Selection, ChromaticScalesChooseIntervals) {
  auto seqs = chromatic_scales();
  const Alphabet basic = range_alphabet(60, 77);
  ExpectancyConfig cfg;
  // oracle: single-viewpoint cross entropies under the same internal CV
  const double ce_pitch = cv_cross_entropy(seqs, {{Viewpoint::cpitch}, 1.0}, basic, cfg.max_order, false, 3);
  const double ce_int = cv_cross_entropy(seqs, {{Viewpoint::cpint}, 1.0}, basic, cfg.max_order, false, 3);
  EXPECT_LT(ce_int, ce_pitch);
  Selection s = stepwise_select(seqs, cfg.candidates, basic, cfg);
  ASSERT_FALSE(s.system.selected.empty());
  EXPECT_EQ(s.system.selected.front(), Viewpoint::cpint);
  EXPECT_NEAR(s.cross_entropy.front(), ce_int, 1e-12);
  for (std::size_t i = 1; i < s.cross_entropy.size(); ++i)
    EXPECT_LE(s.cross_entropy[i], s.cross_entropy[i - 1]);
}

TEST(Selection, HistoryNeverIncreasesOnRandomMelodies) {
  std::mt19937_64 rng(3);
  std::vector<std::vector<Symbol>> seqs(6);
  for (auto &s : seqs) {
    int p = 66;
    for (int i = 0; i < 30; ++i) {
      p = std::clamp(p + static_cast<int>(rng() % 7) - 3, 60, 72);
      s.push_back(p);
    }
  }
  Selection sel = stepwise_select(seqs, ExpectancyConfig{}.candidates, range_alphabet(60, 72), {});
  for (std::size_t i = 1; i < sel.cross_entropy.size(); ++i)
    EXPECT_LE(sel.cross_entropy[i], sel.cross_entropy[i - 1]);
}

TEST(Selection, NeedsUsableSequences) {
  std::vector<std::vector<Symbol>> tiny{{60}, {62}};
  EXPECT_EQ(kind_of([&] { stepwise_select(tiny, ExpectancyConfig{}.candidates, range_alphabet(60, 62), {}); }),
            ErrorKind::training);
}

TEST(Melody, DerivedModelsAreTranspositionInvariant) {
  std::vector<std::vector<Symbol>> train{{60, 62, 64, 62, 60, 67, 65, 64}, {64, 65, 67, 69, 67, 65}};
  std::vector<Symbol> test{62, 64, 65, 64, 62};
  std::vector<Symbol> up = test;
  for (Symbol &s : up)
    s += 5;
  for (Viewpoint vp : {Viewpoint::cpint, Viewpoint::contour}) {
    MelodyModel m = train_melody_model(train, {{vp}, 1.0}, range_alphabet(55, 80), 3, false);
    const ContextModel &cm = m.long_term.at(vp);
    std::vector<Symbol> d0 = derive_viewpoint(test, vp), d1 = derive_viewpoint(up, vp);
    for (std::size_t i = 2; i < d0.size(); ++i) {
      std::span<const Symbol> c0(d0.data() + 1, i - 1), c1(d1.data() + 1, i - 1);
      EXPECT_EQ(ic(ppm_predict(cm, c0), d0[i]), ic(ppm_predict(cm, c1), d1[i]));
    }
  }
}

TEST(Melody, DistributionsAreNormalized) {
  std::vector<std::vector<Symbol>> train{{60, 62, 64, 62, 60, 67, 65, 64}, {64, 65, 67, 69, 67, 65}};
  std::vector<Symbol> test{62, 64, 65, 64, 62, 71};
  for (bool stm : {false, true}) {
    MelodyModel m = train_melody_model(
        train, {{Viewpoint::cpitch, Viewpoint::cpint, Viewpoint::contour}, 1.0}, range_alphabet(58, 74), 3, stm);
    std::vector<Distribution> ds = melody_distributions(m, test);
    ASSERT_EQ(ds.size(), test.size());
    for (const Distribution &d : ds) {
      EXPECT_NEAR(d.total(), 1.0, 1e-9);
      EXPECT_GE(entropy(d), 0.0);
      EXPECT_LE(entropy(d), max_entropy(d.size()) + 1e-12);
    }
  }
}

TEST(Features, RepeatedPatternBecomesPredictable) {
  std::vector<int> pattern;
  for (int r = 0; r < 12; ++r)
    for (int p : {60, 64, 67, 72})
      pattern.push_back(p);
  std::vector<Piece> corpus{melody_piece("r1", pattern), melody_piece("r2", pattern),
                            melody_piece("r3", pattern)};
  ExpectancyConfig cfg;
  cfg.max_order = 3;
  ExpectancyModels models = train_expectancy(corpus, cfg);
  FeatureMatrix e = expectancy_features(corpus[0], models);
  ASSERT_EQ(e.rows.cols(), 4);
  for (Eigen::Index i = 8; i < e.rows.rows(); ++i)
    EXPECT_LT(e.rows(i, 0), 0.05) << "row " << i;
}

TEST(Features, FirstOnsetEntropyIsOrderZeroEntropy) {
  std::vector<Piece> corpus{melody_piece("a", {60, 62, 64, 65, 67}), melody_piece("b", {67, 65, 64, 62, 60})};
  ExpectancyConfig cfg;
  cfg.candidates = {Viewpoint::cpitch};
  ExpectancyModels models = train_expectancy(corpus, cfg);
  FeatureMatrix e = expectancy_features(corpus[0], models);
  Distribution first = ppm_predict(models.melody.long_term.at(Viewpoint::cpitch), {});
  EXPECT_NEAR(e.rows(0, 1), entropy(first), 1e-12);
  EXPECT_NEAR(e.rows(0, 0), ic(first, 60), 1e-12);
}

TEST(Features, MelodyGapsCarryForward) {
  Piece p = piece("gap", {note(0, 48, false, 0.0), note(1, 62, true, 0.5), note(2, 50, false, 1.0),
                          note(3, 64, true, 1.5)});
  std::vector<Piece> corpus{p, melody_piece("m", {60, 62, 64, 65})};
  ExpectancyModels models = train_expectancy(corpus, {});
  FeatureMatrix e = expectancy_features(p, models);
  EXPECT_EQ(e.rows(0, 0), 0.0);
  EXPECT_EQ(e.rows(0, 1), 0.0);
  EXPECT_EQ(e.rows(2, 0), e.rows(1, 0));
  EXPECT_EQ(e.rows(2, 1), e.rows(1, 1));
  EXPECT_NE(e.rows(3, 0), 0.0);
  for (Eigen::Index i = 0; i < 4; ++i) {
    EXPECT_GE(e.rows(i, 2), 0.0); // harmony IC
    EXPECT_GE(e.rows(i, 3), 0.0);
  }
}

TEST(Features, UnseenHarmonyFallsBackToUnseenSymbol) {
  std::vector<Piece> train{melody_piece("a", {60, 62, 64}), melody_piece("b", {64, 62, 60})};
  ExpectancyModels models = train_expectancy(train, {}, range_alphabet(55, 80));
  Piece chordal = piece("c", {note(0, 60, false, 0), note(0, 63, false, 0), note(0, 66, true, 0),
                              note(1, 64, true, 0.5)});
  FeatureMatrix e = expectancy_features(chordal, models);
  EXPECT_TRUE(e.all_finite());
  EXPECT_GT(e.rows(0, 2), 0.0);
}

TEST(Features, UntrainedModelsFail) {
  ExpectancyModels none;
  EXPECT_EQ(kind_of([&] { expectancy_features(melody_piece("x", {60, 62}), none); }), ErrorKind::model);
}

TEST(Features, ModelsSurviveJson) {
  std::vector<Piece> corpus{melody_piece("a", {60, 62, 64, 65, 67, 65}), melody_piece("b", {67, 65, 64, 62, 60})};
  ExpectancyConfig cfg;
  cfg.stm = true;
  ExpectancyModels models = train_expectancy(corpus, cfg);
  ExpectancyModels back = expectancy_models_from_json(nlohmann::json::parse(to_json(models).dump()));
  FeatureMatrix x = expectancy_features(corpus[1], models), y = expectancy_features(corpus[1], back);
  EXPECT_EQ(x.rows, y.rows);
}
