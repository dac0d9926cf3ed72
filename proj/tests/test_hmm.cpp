#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "playseq/corpus.hpp"
#include "playseq/hmm.hpp"

namespace playseq {
namespace {

HmmModel to_model(const oracle::Hmm& h) {
  const std::size_t n = h.pi.size(), m = h.emit[0].size();
  HmmModel model{h.pi, Matrix(n, n), Matrix(n, m)};
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) model.trans(i, j) = h.trans[i][j];
    for (std::size_t k = 0; k < m; ++k) model.emit(i, k) = h.emit[i][k];
  }
  return model;
}

oracle::Hmm two_state() {
  return {{0.6, 0.4}, {{0.7, 0.3}, {0.4, 0.6}}, {{0.9, 0.1}, {0.2, 0.8}}};
}

Sequence random_seq(std::mt19937_64& rng, std::size_t len, std::size_t m) {
  std::uniform_int_distribution<std::uint32_t> d(0, m - 1);
  Sequence s(len);
  for (auto& o : s) o = d(rng);
  return s;
}

TEST(InitRandom, SingleCell) {
  const auto m = init_random(1, 1, 99);
  EXPECT_EQ(m.pi, std::vector<double>{1.0});
  EXPECT_EQ(m.trans(0, 0), 1.0);
  EXPECT_EQ(m.emit(0, 0), 1.0);
}

TEST(InitRandom, DeterministicAndStrictlyPositive) {
  EXPECT_EQ(init_random(3, 5, 11), init_random(3, 5, 11));
  EXPECT_FALSE(init_random(3, 5, 11) == init_random(3, 5, 12));
  const auto m = init_random(2, 4, 3);
  for (double v : m.pi) EXPECT_TRUE(v > 0 && v < 1);
  for (double v : m.trans.data()) EXPECT_TRUE(v > 0 && v < 1);
  for (double v : m.emit.data()) EXPECT_TRUE(v > 0 && v < 1);
  EXPECT_NO_THROW(validate(m));
  EXPECT_THROW(init_random(0, 3, 1), ArgumentError);
  EXPECT_THROW(init_random(3, 0, 1), ArgumentError);
}

TEST(Forward, SingleStateIsProductOfEmissions) {
  HmmModel m{{1.0}, Matrix(1, 1, 1.0), Matrix(1, 2, 0.5)};
  const auto f = forward(m, Sequence{0, 1});
  EXPECT_NEAR(std::exp(f.log_likelihood), 0.25, 1e-15);
}

TEST(Forward, TwoStateMatchesPathEnumeration) {
  const auto h = two_state();
  const Sequence seq{0, 1, 0};
  const auto f = forward(to_model(h), seq);
  EXPECT_NEAR(std::exp(f.log_likelihood), oracle::likelihood(h, seq), 1e-12);
  for (std::size_t t = 0; t < seq.size(); ++t) {
    double row = 0;
    for (double v : f.scaled_alpha.row(t)) row += v;
    EXPECT_NEAR(row, 1.0, 1e-9);
  }
  double logsum = 0;
  for (double c : f.scale_factors) logsum += std::log(c);
  EXPECT_DOUBLE_EQ(logsum, f.log_likelihood);
}

TEST(Forward, LengthOneBaseCase) {
  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 10; ++rep) {
    const auto h = oracle::random_hmm(rng, 3, 4);
    for (std::uint32_t o = 0; o < 4; ++o) {
      double expected = 0;
      for (std::size_t i = 0; i < 3; ++i) expected += h.pi[i] * h.emit[i][o];
      EXPECT_NEAR(std::exp(forward(to_model(h), Sequence{o}).log_likelihood),
                  expected, 1e-15);
    }
  }
}

TEST(Forward, RandomModelsMatchEnumeration) {
  std::mt19937_64 rng(2024);
  int cases = 0;
  for (std::size_t n = 1; n <= 3; ++n)
    for (std::size_t m = 1; m <= 3; ++m)
      for (std::size_t len = 1; len <= 6; ++len)
        for (int rep = 0; rep < 2; ++rep, ++cases) {
          const auto h = oracle::random_hmm(rng, n, m);
          const auto seq = random_seq(rng, len, m);
          const double expected = oracle::likelihood(h, seq);
          const double got = std::exp(forward(to_model(h), seq).log_likelihood);
          EXPECT_NEAR(got / expected, 1.0, 1e-10)
              << "n=" << n << " m=" << m << " len=" << len;
        }
  EXPECT_GE(cases, 100);
}

TEST(Forward, OutOfVocabularyNamesPosition) {
  const auto m = to_model(two_state());
  try {
    forward(m, Sequence{0, 1, 2, 0});
    FAIL() << "expected DomainError";
  } catch (const DomainError& e) {
    EXPECT_EQ(e.position(), 2u);
  }
  EXPECT_THROW(forward(m, Sequence{}), ArgumentError);
}

TEST(Forward, ZeroProbabilitySequenceIsNumericError) {
  HmmModel m{{1.0}, Matrix(1, 1, 1.0), Matrix(1, 2)};
  m.emit(0, 0) = 1.0;
  EXPECT_THROW(forward(m, Sequence{0, 1}), NumericError);
}

TEST(Backward, LastRowOnesAndAlphaBetaIdentity) {
  std::mt19937_64 rng(17);
  for (int rep = 0; rep < 20; ++rep) {
    const auto model = to_model(oracle::random_hmm(rng, 3, 4));
    const auto seq = random_seq(rng, 7, 4);
    const auto f = forward(model, seq);
    const auto beta = backward(model, seq, f.scale_factors);
    for (double v : beta.row(seq.size() - 1)) EXPECT_EQ(v, 1.0);
    for (std::size_t t = 0; t < seq.size(); ++t) {
      double s = 0;
      for (std::size_t i = 0; i < 3; ++i) s += f.scaled_alpha(t, i) * beta(t, i);
      EXPECT_NEAR(s, 1.0, 1e-9);
    }
  }
}

TEST(Backward, PosteriorsMatchEnumeration) {
  const auto h = two_state();
  const Sequence seq{0, 1, 0};
  const auto model = to_model(h);
  const auto f = forward(model, seq);
  const auto gamma = state_posteriors(f, backward(model, seq, f.scale_factors));
  const auto expected = oracle::posteriors(h, seq);
  for (std::size_t t = 0; t < seq.size(); ++t) {
    EXPECT_NEAR(gamma(t, 0) + gamma(t, 1), 1.0, 1e-12);
    for (std::size_t i = 0; i < 2; ++i)
      EXPECT_NEAR(gamma(t, i), expected[t][i], 1e-12);
  }
}

TEST(Backward, LengthMismatch) {
  const auto m = to_model(two_state());
  EXPECT_THROW(backward(m, Sequence{0, 1}, std::vector<double>{1.0}),
               ArgumentError);
}

TEST(BaumWelch, OneThenTwoIterations) {
  const auto syn = generate_synthetic(50, 10, 6, 2, 3);
  const auto init = init_random(2, 6, 4);
  const auto one = baum_welch(init, syn.corpus.sequences(), {1, 1e-12, 1e-6, 1});
  const auto two = baum_welch(init, syn.corpus.sequences(), {2, 1e-12, 1e-6, 1});
  ASSERT_EQ(one.report.log_likelihood_trace.size(), 2u);
  ASSERT_EQ(two.report.log_likelihood_trace.size(), 3u);
  EXPECT_EQ(one.report.iterations_run, 1u);
  EXPECT_GE(two.report.log_likelihood_trace[1],
            two.report.log_likelihood_trace[0]);
  EXPECT_EQ(one.report.log_likelihood_trace[1],
            two.report.log_likelihood_trace[1]);
  EXPECT_EQ(one.model, baum_welch(init, syn.corpus.sequences(),
                                  {1, 1e-12, 1e-6, 1}).model);
}

TEST(BaumWelch, SingleStateOneStepUpdate) {
  HmmModel init{{1.0}, Matrix(1, 1, 1.0), Matrix(1, 2, 0.5)};
  const std::vector<Sequence> data{{0, 0, 0, 0}};
  const auto exact = baum_welch(init, data, {1, 1e-4, 0.0, 1});
  EXPECT_EQ(exact.model.emit(0, 0), 1.0);
  EXPECT_EQ(exact.model.emit(0, 1), 0.0);

  // With smoothing eps the unseen symbol keeps eps / (4 + 2 eps).
  const double eps = 1e-6;
  const auto smoothed = baum_welch(init, data, {1, 1e-4, eps, 1});
  EXPECT_NEAR(smoothed.model.emit(0, 1), eps / (4 + 2 * eps), 1e-18);
  EXPECT_NEAR(smoothed.model.emit(0, 0), (4 + eps) / (4 + 2 * eps), 1e-15);
}

TEST(BaumWelch, FitsTrainingDataAtLeastAsWellAsPlantedModel) {
  const auto syn = generate_synthetic(500, 29, 6, 2, 21);
  const auto& data = syn.corpus.sequences();
  const auto trained =
      baum_welch(init_random(2, 6, 22), data, {500, 1e-10, 1e-6, 1});
  EXPECT_GE(log_likelihood(trained.model, data),
            log_likelihood(syn.planted, data));
}

TEST(BaumWelch, MonotoneTraceAndValidAfterEveryStep) {
  const auto syn = generate_synthetic(60, 15, 8, 3, 8);
  const auto& data = syn.corpus.sequences();
  HmmModel model = init_random(4, 8, 9);
  double prev = -INFINITY;
  for (int step = 0; step < 15; ++step) {
    const auto r = baum_welch(model, data, {1, 1e-300, 1e-6, 1});
    EXPECT_NO_THROW(validate(r.model));
    EXPECT_GE(r.report.log_likelihood_trace[0] - prev, -1e-9);
    EXPECT_GE(r.report.log_likelihood_trace[1] -
                  r.report.log_likelihood_trace[0],
              -1e-9);
    prev = r.report.log_likelihood_trace[1];
    model = r.model;
  }
}

TEST(BaumWelch, ConvergenceFlag) {
  const auto syn = generate_synthetic(40, 10, 5, 2, 12);
  const auto loose =
      baum_welch(init_random(2, 5, 1), syn.corpus.sequences(), {200, 1e-3});
  EXPECT_TRUE(loose.report.converged);
  EXPECT_LT(loose.report.iterations_run, 200u);
  const auto capped =
      baum_welch(init_random(2, 5, 1), syn.corpus.sequences(), {2, 1e-300});
  EXPECT_FALSE(capped.report.converged);
  EXPECT_EQ(capped.report.iterations_run, 2u);
}

TEST(BaumWelch, ThreadCountDoesNotChangeResult) {
  const auto syn = generate_synthetic(200, 12, 10, 3, 30);
  const auto init = init_random(5, 10, 31);
  const auto a = baum_welch(init, syn.corpus.sequences(), {10, 1e-300, 1e-6, 1});
  const auto b = baum_welch(init, syn.corpus.sequences(), {10, 1e-300, 1e-6, 8});
  EXPECT_EQ(a.model, b.model);
  EXPECT_EQ(a.report.log_likelihood_trace, b.report.log_likelihood_trace);
}

TEST(BaumWelch, ArgumentErrors) {
  const auto init = init_random(2, 3, 1);
  const std::vector<Sequence> none;
  const std::vector<Sequence> one{{0, 1}};
  EXPECT_THROW(baum_welch(init, none, {}), ArgumentError);
  EXPECT_THROW(baum_welch(init, one, {0, 1e-4}), ArgumentError);
  EXPECT_THROW(baum_welch(init, one, {10, 0.0}), ArgumentError);
  EXPECT_THROW(baum_welch(init, one, {10, -1.0}), ArgumentError);
  EXPECT_THROW(baum_welch(init, std::vector<Sequence>{{0, 3}}, {}), DomainError);
}

TEST(NextSymbol, SingleStateIsEmissionRow) {
  HmmModel m{{1.0}, Matrix(1, 1, 1.0), Matrix(1, 3)};
  m.emit(0, 0) = 0.7;
  m.emit(0, 1) = 0.2;
  m.emit(0, 2) = 0.1;
  const auto p = next_symbol_distribution(m, Sequence{2, 0, 1});
  EXPECT_EQ(p, (std::vector<double>{0.7, 0.2, 0.1}));
}

TEST(NextSymbol, MatchesEnumeration) {
  std::mt19937_64 rng(77);
  auto check = [](const oracle::Hmm& h, const Sequence& seq) {
    const auto p = next_symbol_distribution(to_model(h), seq);
    const auto expected = oracle::next_symbol(h, seq);
    double sum = 0;
    for (std::size_t k = 0; k < p.size(); ++k) {
      EXPECT_NEAR(p[k], expected[k], 1e-12);
      sum += p[k];
    }
    EXPECT_NEAR(sum, 1.0, 1e-9);
  };
  check(two_state(), Sequence{0, 1, 0});
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t n = 1 + rep % 3, m = 1 + (rep / 3) % 3;
    check(oracle::random_hmm(rng, n, m), random_seq(rng, 1 + rep % 5, m));
  }
}

TEST(NextSymbol, DeterministicCycle) {
  HmmModel m{{1.0, 0.0, 0.0}, Matrix(3, 3), Matrix(3, 3)};
  for (std::size_t i = 0; i < 3; ++i) {
    m.trans(i, (i + 1) % 3) = 1.0;
    m.emit(i, i) = 1.0;
  }
  EXPECT_EQ(next_symbol_distribution(m, Sequence{0, 1}),
            (std::vector<double>{0, 0, 1}));
  EXPECT_EQ(next_symbol_distribution(m, Sequence{0, 1, 2}),
            (std::vector<double>{1, 0, 0}));
}

// Raw (unscaled) forward variables times any positive constant, normalized
// and propagated, give the same prediction as the scaled recursion.
TEST(NextSymbol, InvariantToForwardScaling) {
  std::mt19937_64 rng(4);
  for (int rep = 0; rep < 20; ++rep) {
    const auto h = oracle::random_hmm(rng, 3, 3);
    const auto seq = random_seq(rng, 5, 3);
    std::vector<double> raw(3, 0.0);
    oracle::for_each_path(3, seq.size(), [&](const auto& path) {
      raw[path.back()] += oracle::joint(h, path, seq);
    });
    for (double c : {1e-200, 1.0, 1e200}) {
      std::vector<double> d = raw;
      double total = 0;
      for (double& v : d) total += (v *= c);
      for (double& v : d) v /= total;
      std::vector<double> p(3, 0.0);
      for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j)
          for (std::size_t k = 0; k < 3; ++k)
            p[k] += d[i] * h.trans[i][j] * h.emit[j][k];
      const auto got = next_symbol_distribution(to_model(h), seq);
      for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(got[k], p[k], 1e-12);
    }
  }
}

TEST(Validate, RejectsBrokenModels) {
  auto m = init_random(2, 3, 1);
  m.emit(1, 0) += 0.2;
  EXPECT_THROW(validate(m), ValidationError);
  auto neg = init_random(2, 3, 1);
  neg.trans(0, 0) = -neg.trans(0, 0);
  EXPECT_THROW(validate(neg), ValidationError);
}

}  // namespace
}  // namespace playseq
