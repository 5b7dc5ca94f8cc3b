#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "hirsute/errors.hpp"
#include "hirsute/scoring.hpp"
#include "hirsute/synthgen.hpp"
#include "support/fixtures.hpp"
#include "support/oracle.hpp"

using namespace hirsute;

TEST(Cosine, Examples) {
  const std::vector<float> a = {1.0f, 0.0f};
  const float h = static_cast<float>(1.0 / std::sqrt(2.0));
  const std::vector<float> b = {h, h};
  EXPECT_NEAR(cosine(a, b), 0.70710678, 1e-7);
  EXPECT_EQ(cosine(a, a), 1.0);
  EXPECT_EQ(cosine(a, std::vector<float>{0.0f, 1.0f}), 0.0);
  EXPECT_THROW(cosine(a, std::vector<float>{1.0f}), UsageError);
  // Clamped even when float rounding overshoots.
  const std::vector<float> big = {1.0000001f, 0.0f};
  EXPECT_EQ(cosine(big, big), 1.0);
}

TEST(Cosine, SelfSimilarityOfUnitRows) {
  GenConfig cfg;
  cfg.n_subjects = 20;
  cfg.dim = 77;
  const auto d = generate(cfg);
  for (std::size_t i = 0; i < d.embeddings.count(); ++i) {
    EXPECT_NEAR(cosine(d.embeddings.row(i), d.embeddings.row(i)), 1.0, 1e-6);
  }
}

TEST(TailCapacity, Ceiling) {
  EXPECT_EQ(tail_capacity(0, 1e-3), 0u);
  EXPECT_EQ(tail_capacity(1, 1e-3), 1u);
  EXPECT_EQ(tail_capacity(1000, 1e-3), 1u);
  EXPECT_EQ(tail_capacity(1001, 1e-3), 2u);
  EXPECT_EQ(tail_capacity(10, 1.0), 10u);
}

TEST(ScoreSet, FromScoresKeepsExtremes) {
  std::vector<double> s = {0.5, -0.2, 0.9, 0.1, 0.9, 0.3};
  const auto hi = ScoreSet::from_scores_with_capacity(s, TailSide::kHigh, 3, 0.5);
  EXPECT_EQ(hi.tail(), (std::vector<double>{0.5, 0.9, 0.9}));
  EXPECT_EQ(hi.count(), 6u);
  EXPECT_EQ(hi.min(), -0.2);
  EXPECT_EQ(hi.max(), 0.9);
  const auto lo = ScoreSet::from_scores_with_capacity(s, TailSide::kLow, 2, 0.5);
  EXPECT_EQ(lo.tail(), (std::vector<double>{-0.2, 0.1}));
  std::uint64_t sum = 0;
  for (const auto c : hi.histogram()) sum += c;
  EXPECT_EQ(sum, 6u);
}

TEST(ScoreSet, ProbesCountExactly) {
  std::vector<double> s = {0.1, 0.2, 0.2, 0.4};
  const auto set = ScoreSet::from_scores(s, TailSide::kHigh, 0.25, {}, {0.2, 0.35});
  EXPECT_EQ(set.probe_count_ge(0.2), 3u);
  EXPECT_EQ(set.probe_count_ge(0.35), 1u);
  EXPECT_FALSE(set.probe_count_ge(0.3));
}

TEST(ScoringSmall, TwoSubjectsTwoImages) {
  const auto ds = fixtures::dataset({{"a1", "a", "X", 0.0},
                                     {"a2", "a", "X", 0.0},
                                     {"b1", "b", "X", 0.0},
                                     {"b2", "b", "X", 0.0}});
  const auto store = EmbeddingStore::from_rows(2, {1, 0, 1, 1, 0, 1, -1, 1});
  const std::vector<PairCategory> cats = {PairCategory::parse("cl_vs_cl")};
  const auto gen = score_pairs(ds, store, PairSpec{PairKind::kGenuine}, cats);
  const auto imp = score_pairs(ds, store, PairSpec{PairKind::kImpostor}, cats);
  EXPECT_EQ(gen[0].scores.count(), 2u);
  EXPECT_EQ(imp[0].scores.count(), 4u);
}

namespace {

struct Case {
  SyntheticData data;
  std::vector<std::optional<std::string>> scopes;
  bool cross = false;
};

Case random_case(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  GenConfig cfg;
  cfg.n_subjects = 10 + rng() % 90;
  cfg.images_per_subject = 1 + rng() % 4;
  cfg.dim = 4 + rng() % 40;
  cfg.hair_axis_strength = (rng() % 3) * 0.4;
  cfg.demographics = rng() % 2 ? std::vector<std::string>{"A", "B"}
                               : std::vector<std::string>{"A"};
  cfg.seed = seed;
  Case c{generate(cfg), {std::nullopt}, rng() % 2 == 0};
  for (const auto& d : cfg.demographics) c.scopes.emplace_back(d);
  return c;
}

std::vector<PairCategory> every_category() {
  std::vector<PairCategory> out;
  for (int a = 0; a < 4; ++a) {
    for (int b = a; b < 4; ++b) {
      out.emplace_back(static_cast<RatioClass>(a), static_cast<RatioClass>(b));
    }
  }
  return out;
}

}  // namespace

TEST(ScorePairs, MatchesOracleAcrossWorkersAndBlocks) {
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    const auto c = random_case(seed);
    std::vector<CellKey> keys;
    for (const auto& scope : c.scopes) {
      for (const auto kind : {PairKind::kGenuine, PairKind::kImpostor}) {
        keys.push_back({kind, std::nullopt, scope});
        for (const auto& cat : every_category()) keys.push_back({kind, cat, scope});
      }
    }
    ScoringOptions opt;
    opt.cross_demographic = c.cross;
    opt.tail_fraction = 0.01;
    opt.histogram.bins = 1000;
    opt.block_size = 7;
    opt.workers = 1;
    const auto one = score_pairs(c.data.dataset, c.data.embeddings, keys, opt);
    opt.workers = 4;
    opt.block_size = 16;
    const auto four = score_pairs(c.data.dataset, c.data.embeddings, keys, opt);
    ASSERT_EQ(one, four) << "seed " << seed;

    ASSERT_EQ(one.size(), keys.size());
    for (std::size_t k = 0; k < keys.size(); ++k) {
      const auto& key = keys[k];
      oracle::Query q;
      q.genuine = key.kind == PairKind::kGenuine;
      q.scope = key.scope;
      q.cross_demographic = c.cross;
      if (key.category) {
        q.category = {static_cast<int>(key.category->left()),
                      static_cast<int>(key.category->right())};
      }
      const auto ref = oracle::scores(c.data.dataset, c.data.embeddings, q);
      const auto& s = one[k].scores;
      ASSERT_EQ(s.count(), ref.size()) << key.name();
      if (ref.empty()) continue;
      ASSERT_EQ(s.min(), ref.front());
      ASSERT_EQ(s.max(), ref.back());
      const auto kcap = static_cast<std::size_t>(std::ceil(ref.size() * 0.01));
      ASSERT_EQ(s.tail(), oracle::extreme(ref, kcap, !q.genuine)) << key.name();
      ASSERT_EQ(s.histogram(), oracle::histogram(ref, 1000)) << key.name();
    }
  }
}

TEST(ScorePairs, EmptyCellsAllowed) {
  const auto ds = fixtures::dataset({{"a", "s1", "X", 0.0}, {"b", "s2", "X", 0.0}});
  const auto store = EmbeddingStore::from_rows(2, {1, 0, 0, 1});
  const std::vector<CellKey> keys = {{PairKind::kGenuine, std::nullopt, std::nullopt},
                                     {PairKind::kImpostor, PairCategory::parse("fh_L2_vs_fh_L2"),
                                      std::nullopt}};
  const auto cells = score_pairs(ds, store, keys);
  EXPECT_TRUE(cells[0].scores.empty());
  EXPECT_TRUE(cells[1].scores.empty());
}

TEST(Merge, IdentityCommutativityAndConcatenation) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> n(0.0, 0.2);
  for (int t = 0; t < 20; ++t) {
    std::vector<double> a(1000), b(1000 + rng() % 500);
    for (auto& v : a) v = std::clamp(n(rng), -1.0, 1.0);
    for (auto& v : b) v = std::clamp(n(rng) + 0.05, -1.0, 1.0);
    const auto side = t % 2 ? TailSide::kHigh : TailSide::kLow;
    const auto sa = ScoreSet::from_scores(a, side, 0.01, {}, {0.1});
    const auto sb = ScoreSet::from_scores(b, side, 0.01, {}, {0.1});
    const ScoreSet empty(side, 0, 0.01, {}, {0.1});
    EXPECT_EQ(ScoreSet::merge(sa, empty), sa);
    EXPECT_EQ(ScoreSet::merge(sa, sb), ScoreSet::merge(sb, sa));

    std::vector<double> all(a);
    all.insert(all.end(), b.begin(), b.end());
    std::sort(all.begin(), all.end());
    const auto m = ScoreSet::merge(sa, sb);
    EXPECT_EQ(m.count(), all.size());
    // Only the prefix both truncated inputs can vouch for survives, and it is
    // exact.
    const auto k = std::min(sa.tail().size(), sb.tail().size());
    EXPECT_EQ(m.tail(), oracle::extreme(all, k, side == TailSide::kHigh));
    EXPECT_EQ(m.capacity(), static_cast<std::size_t>(std::ceil(all.size() * 0.01)));
    EXPECT_EQ(m.histogram(), oracle::histogram(all, kDefaultHistogramBins));
    EXPECT_EQ(m.probe_count_ge(0.1), oracle::count_ge(all, 0.1));
  }
}

TEST(Merge, Associative) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-1, 1);
  auto make = [&](std::size_t n) {
    std::vector<double> v(n);
    for (auto& x : v) x = u(rng);
    return ScoreSet::from_scores(v, TailSide::kHigh, 0.02);
  };
  const auto a = make(300), b = make(700), c = make(450);
  EXPECT_EQ(ScoreSet::merge(ScoreSet::merge(a, b), c),
            ScoreSet::merge(a, ScoreSet::merge(b, c)));
}

TEST(Merge, ConfigMismatchRejected) {
  std::vector<double> v = {0.1, 0.2};
  const auto a = ScoreSet::from_scores(v, TailSide::kHigh, 0.5);
  EXPECT_THROW(ScoreSet::merge(a, ScoreSet::from_scores(v, TailSide::kLow, 0.5)), UsageError);
  EXPECT_THROW(ScoreSet::merge(a, ScoreSet::from_scores(v, TailSide::kHigh, 0.5, {10})),
               UsageError);
  EXPECT_THROW(ScoreSet::merge(a, ScoreSet::from_scores(v, TailSide::kHigh, 0.25)), UsageError);
}

TEST(Cache, RoundTripAndCorruption) {
  oracle::TempDir dir("cache");
  const auto c = random_case(3);
  std::vector<CellKey> keys = {{PairKind::kImpostor, std::nullopt, std::string("A")},
                               {PairKind::kGenuine, PairCategory::parse("cl_vs_fh_L1"),
                                std::nullopt}};
  const std::vector<std::vector<double>> probes = {{0.1, 0.2}, {}};
  const auto cells = score_pairs(c.data.dataset, c.data.embeddings, keys, {}, probes);
  const auto p = dir.path() / "s.fhsc";
  write_score_cache(cells, p);
  EXPECT_EQ(read_score_cache(p), cells);

  auto bytes = fixtures::read_file(p);
  fixtures::write_file(dir.path() / "trunc.fhsc", bytes.substr(0, bytes.size() / 2));
  EXPECT_THROW(read_score_cache(dir.path() / "trunc.fhsc"), DataError);
  auto bad = bytes;
  bad[4] = 9;  // version
  fixtures::write_file(dir.path() / "ver.fhsc", bad);
  EXPECT_THROW(read_score_cache(dir.path() / "ver.fhsc"), DataError);
  fixtures::write_file(dir.path() / "magic.fhsc", "NOPE" + bytes.substr(4));
  EXPECT_THROW(read_score_cache(dir.path() / "magic.fhsc"), DataError);
}

TEST(HistogramCsv, NonEmptyBins) {
  oracle::TempDir dir("hist");
  std::vector<double> v = {-1.0, 0.0, 0.0, 1.0};
  const auto s = ScoreSet::from_scores(v, TailSide::kHigh, 1.0, {4});
  write_histogram_csv(s, dir.path() / "h.csv");
  EXPECT_EQ(fixtures::read_file(dir.path() / "h.csv"),
            "bin_lower,count\n-1.000000,1\n0.000000,2\n0.500000,1\n");
}
