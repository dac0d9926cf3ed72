#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "playseq/eval.hpp"

namespace playseq {
namespace {

Ranking ranking_of(std::vector<ArtistId> items) {
  Ranking r;
  for (ArtistId a : items) r.push(a, 0.0);
  return r;
}

// Second, independent implementation: position search by index arithmetic.
double naive_map(const std::vector<ArtistId>& targets,
                 const std::vector<std::vector<ArtistId>>& ranks,
                 std::size_t K) {
  double total = 0;
  for (std::size_t u = 0; u < targets.size(); ++u) {
    std::size_t f = 0;
    for (std::size_t r = 1; r <= std::min(K, ranks[u].size()); ++r)
      if (ranks[u][r - 1] == targets[u] && f == 0) f = r;
    total += f == 0 ? 0.0 : 1.0 / f;
  }
  return total / targets.size();
}

TEST(ApAtK, WorkedExample) {
  EXPECT_EQ(ap_at_k(1, ranking_of({1, 2, 3, 4, 5})), 1.0);
  EXPECT_EQ(ap_at_k(1, ranking_of({2, 1, 3, 4, 5})), 0.5);
  EXPECT_EQ(ap_at_k(9, ranking_of({1, 2, 3})), 0.0);
  EXPECT_EQ(ap_at_k(4, ranking_of({1, 2, 3, 4})), 0.25);
}

TEST(ApAtK, DuplicatesRejected) {
  EXPECT_THROW(ap_at_k(1, ranking_of({1, 2, 1})), ArgumentError);
}

TEST(ApAtK, IgnoresItemsBelowTarget) {
  std::mt19937_64 rng(2);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<ArtistId> items(15);
    for (ArtistId a = 0; a < 15; ++a) items[a] = a;
    std::shuffle(items.begin(), items.end(), rng);
    const ArtistId target = items[rep % 5];
    auto tail_changed = items;
    std::shuffle(tail_changed.begin() + rep % 5 + 1, tail_changed.end(), rng);
    EXPECT_EQ(ap_at_k(target, ranking_of(items)),
              ap_at_k(target, ranking_of(tail_changed)));
  }
}

TEST(MapAtK, Examples) {
  const std::vector<ArtistId> t{1, 9};
  const std::vector<Ranking> r{ranking_of({1, 2}), ranking_of({1, 2})};
  EXPECT_EQ(map_at_k(t, r, 10), 0.5);
  const std::vector<ArtistId> t2{3, 4, 5};
  const std::vector<Ranking> r2{ranking_of({3}), ranking_of({4, 3}),
                                ranking_of({5, 0, 1})};
  EXPECT_EQ(map_at_k(t2, r2, 10), 1.0);
  EXPECT_THROW(map_at_k(t, std::vector<Ranking>{ranking_of({1})}, 10),
               ArgumentError);
  EXPECT_THROW(map_at_k({}, {}, 10), ArgumentError);
}

TEST(MapAtK, MatchesNaiveImplementationAndBounds) {
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<ArtistId> target(0, 14);
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t users = 1 + rep % 13;
    std::vector<ArtistId> targets;
    std::vector<std::vector<ArtistId>> raw;
    std::vector<Ranking> ranks;
    for (std::size_t u = 0; u < users; ++u) {
      std::vector<ArtistId> items(12);
      for (ArtistId a = 0; a < 12; ++a) items[a] = a;
      std::shuffle(items.begin(), items.end(), rng);
      targets.push_back(target(rng));
      raw.push_back(items);
      ranks.push_back(ranking_of(items));
    }
    double prev = 0.0;
    for (std::size_t K = 1; K <= 12; ++K) {
      const double m = map_at_k(targets, ranks, K);
      EXPECT_NEAR(m, naive_map(targets, raw, K), 1e-15);
      EXPECT_GE(m, 0.0);
      EXPECT_LE(m, 1.0);
      EXPECT_GE(m, prev);
      prev = m;
    }
  }
}

// Every sequence ends with the artist it plays most often in its prefix.
Corpus most_frequent_last_fixture() {
  return Corpus({{0, 0, 1, 0}, {2, 1, 2, 2}, {3, 3, 3, 3}, {1, 4, 4, 4}},
                {10, 11, 12, 13, 14});
}

BenchConfig small_config() {
  BenchConfig c;
  c.n_states = 3;
  c.em.max_iters = 10;
  c.k_neighbors = 3;
  c.mixture = {4, 3, 1};
  c.K = 4;
  return c;
}

TEST(BenchAll, HfCurrentPerfectOnFixture) {
  const auto report = bench_all(most_frequent_last_fixture(), small_config());
  EXPECT_EQ(report.score("HF_current"), 1.0);
  EXPECT_EQ(report.protocol, "leave-last-out");
  EXPECT_EQ(report.n_users, 4u);
}

TEST(BenchAll, ModelSetAndBounds) {
  const auto corpus = generate_synthetic(80, 12, 20, 3, 6).corpus;
  auto config = small_config();
  config.models = {"HMM", "HF_corpus"};
  const auto report = bench_all(corpus, config);
  ASSERT_EQ(report.per_model.size(), 2u);
  EXPECT_EQ(report.per_model[0].name, "HMM");
  EXPECT_EQ(report.per_model[1].name, "HF_corpus");
  ASSERT_TRUE(report.hmm_training.has_value());

  const auto full = bench_all(corpus, small_config());
  ASSERT_EQ(full.per_model.size(), 6u);
  for (const auto& r : full.per_model) {
    EXPECT_GE(r.map_at_k, 0.0);
    EXPECT_LE(r.map_at_k, 1.0);
  }
  const std::string table = report_to_text(full);
  for (const auto& name : all_model_names())
    EXPECT_NE(table.find(name), std::string::npos);
}

TEST(BenchAll, JsonDeterministicAcrossThreads) {
  const auto corpus = generate_synthetic(120, 15, 30, 4, 11).corpus;
  auto config = small_config();
  config.threads = 1;
  const auto a = report_to_json(bench_all(corpus, config));
  config.threads = 8;
  const auto b = report_to_json(bench_all(corpus, config));
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.find("seconds"), std::string::npos);
  config.record_timings = true;
  EXPECT_NE(report_to_json(bench_all(corpus, config)).find("seconds"),
            std::string::npos);
}

TEST(BenchAll, ExternalTargets) {
  const Corpus corpus({{0, 0, 1}, {1, 1, 2}}, {10, 11, 12});
  std::istringstream in("10\n99\n");
  const auto targets = read_targets(in, corpus);
  EXPECT_EQ(targets, (std::vector<ArtistId>{0, 3}));
  auto config = small_config();
  config.models = {"HF_current"};
  config.mixture = {2, 1, 1};
  const auto report = bench_all(corpus, config, targets);
  EXPECT_EQ(report.protocol, "external-targets");
  // User 0 ranks [0, 1] so the hit is at rank 1; user 1's target is unknown.
  EXPECT_EQ(report.score("HF_current"), 0.5);

  std::istringstream short_file("10\n");
  EXPECT_THROW(read_targets(short_file, corpus), FormatError);
  std::istringstream bad("10\nx\n");
  EXPECT_THROW(read_targets(bad, corpus), ParseError);
}

TEST(BenchAll, ConfigValidation) {
  const auto corpus = most_frequent_last_fixture();
  auto c = small_config();
  c.mixture = {4, 4, 4};
  EXPECT_THROW(bench_all(corpus, c), ConfigError);
  c = small_config();
  c.models = {"HMM", "Oracle"};
  EXPECT_THROW(bench_all(corpus, c), ConfigError);
  c = small_config();
  c.em.tol = -1;
  EXPECT_THROW(bench_all(corpus, c), ConfigError);
}

TEST(BenchAll, ErrorsNameTheModel) {
  try {
    try {
      throw NumericError("likelihood is NaN");
    } catch (...) {
      detail::rethrow_for_model("HMM");
    }
    FAIL();
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("model HMM"), std::string::npos);
  }
}

TEST(CfVariant, Parse) {
  for (auto v : {CfVariant::user, CfVariant::item, CfVariant::binary_pseudo,
                 CfVariant::pseudo})
    EXPECT_EQ(parse_cf_variant(to_string(v)), v);
  EXPECT_THROW(parse_cf_variant("pearson"), ConfigError);
}

}  // namespace
}  // namespace playseq
