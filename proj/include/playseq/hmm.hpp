#pragma once

// Discrete hidden Markov model: scaled forward/backward passes, pooled
// multi-sequence Baum-Welch, and one-step-ahead symbol prediction.

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "playseq/errors.hpp"
#include "playseq/parallel.hpp"
#include "playseq/random.hpp"
#include "playseq/types.hpp"

namespace playseq {

inline constexpr double kStochasticTolerance = 1e-9;

// Parameters lambda = (pi, A, B). trans(i, j) = P(q_{t+1} = j | q_t = i),
// emit(j, k) = P(o_t = k | q_t = j).
struct HmmModel {
  std::vector<double> pi;
  Matrix trans;
  Matrix emit;

  std::size_t n_states() const noexcept { return pi.size(); }
  std::size_t vocab_size() const noexcept { return emit.cols(); }

  friend bool operator==(const HmmModel&, const HmmModel&) = default;
};

namespace detail {

inline void check_distribution(std::span<const double> row,
                               const std::string& what) {
  double total = 0.0;
  for (double v : row) {
    if (!(v >= 0.0) || !std::isfinite(v))
      throw ValidationError(what + " has a negative or non-finite entry");
    total += v;
  }
  if (std::abs(total - 1.0) > kStochasticTolerance)
    throw ValidationError(what + " sums to " + std::to_string(total) +
                          ", expected 1");
}

}  // namespace detail

// Throws ValidationError unless every HmmModel invariant holds.
inline void validate(const HmmModel& model) {
  const std::size_t n = model.n_states();
  if (n == 0 || model.vocab_size() == 0)
    throw ValidationError("model needs at least one state and one symbol");
  if (model.trans.rows() != n || model.trans.cols() != n)
    throw ValidationError("transition matrix must be n_states x n_states");
  if (model.emit.rows() != n)
    throw ValidationError("emission matrix must have n_states rows");
  detail::check_distribution(model.pi, "pi");
  for (std::size_t i = 0; i < n; ++i) {
    detail::check_distribution(model.trans.row(i),
                               "trans row " + std::to_string(i));
    detail::check_distribution(model.emit.row(i),
                               "emit row " + std::to_string(i));
  }
}

// Random model with every row drawn uniform(0,1) and normalized.
inline HmmModel init_random(std::size_t n_states, std::size_t vocab_size,
                            std::uint64_t seed) {
  if (n_states == 0 || vocab_size == 0)
    throw ArgumentError("init_random: n_states and vocab_size must be >= 1");
  Rng rng(seed);
  HmmModel model{rng.stochastic_row(n_states), Matrix(n_states, n_states),
                 Matrix(n_states, vocab_size)};
  for (std::size_t i = 0; i < n_states; ++i) {
    auto row = rng.stochastic_row(n_states);
    std::copy(row.begin(), row.end(), model.trans.row(i).begin());
  }
  for (std::size_t i = 0; i < n_states; ++i) {
    auto row = rng.stochastic_row(vocab_size);
    std::copy(row.begin(), row.end(), model.emit.row(i).begin());
  }
  return model;
}

// scaled_alpha rows sum to one; scale_factors[t] is the row sum before
// normalization, so log P(O | lambda) = sum_t log scale_factors[t].
struct ForwardResult {
  Matrix scaled_alpha;
  std::vector<double> scale_factors;
  double log_likelihood = 0.0;
};

inline void check_symbols(const HmmModel& model,
                          std::span<const ArtistId> seq) {
  if (seq.empty()) throw ArgumentError("observation sequence is empty");
  for (std::size_t t = 0; t < seq.size(); ++t)
    if (seq[t] >= model.vocab_size())
      throw DomainError("symbol " + std::to_string(seq[t]) + " at position " +
                            std::to_string(t) + " is outside vocabulary of " +
                            std::to_string(model.vocab_size()),
                        t);
}

inline ForwardResult forward(const HmmModel& model,
                             std::span<const ArtistId> seq) {
  check_symbols(model, seq);
  const std::size_t n = model.n_states();
  const std::size_t len = seq.size();
  ForwardResult out{Matrix(len, n), std::vector<double>(len), 0.0};

  for (std::size_t t = 0; t < len; ++t) {
    auto cur = out.scaled_alpha.row(t);
    if (t == 0) {
      for (std::size_t i = 0; i < n; ++i)
        cur[i] = model.pi[i] * model.emit(i, seq[0]);
    } else {
      auto prev = out.scaled_alpha.row(t - 1);
      for (std::size_t j = 0; j < n; ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) acc += prev[i] * model.trans(i, j);
        cur[j] = acc * model.emit(j, seq[t]);
      }
    }
    double sum = 0.0;
    for (double v : cur) sum += v;
    if (!(sum > 0.0) || !std::isfinite(sum))
      throw NumericError("observation sequence has zero probability at position " +
                         std::to_string(t));
    for (double& v : cur) v /= sum;
    out.scale_factors[t] = sum;
    out.log_likelihood += std::log(sum);
  }
  return out;
}

// Scaled backward variables matching forward()'s scale factors: the last row
// is all ones and sum_i alpha_hat[t][i] * beta_hat[t][i] == 1 for every t.
inline Matrix backward(const HmmModel& model, std::span<const ArtistId> seq,
                       std::span<const double> scale_factors) {
  if (scale_factors.size() != seq.size())
    throw ArgumentError("backward: " + std::to_string(scale_factors.size()) +
                        " scale factors for a sequence of length " +
                        std::to_string(seq.size()));
  check_symbols(model, seq);
  const std::size_t n = model.n_states();
  const std::size_t len = seq.size();
  Matrix beta(len, n, 1.0);
  for (std::size_t t = len - 1; t-- > 0;) {
    auto next = beta.row(t + 1);
    auto cur = beta.row(t);
    const ArtistId sym = seq[t + 1];
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j)
        acc += model.trans(i, j) * model.emit(j, sym) * next[j];
      cur[i] = acc / scale_factors[t + 1];
    }
  }
  return beta;
}

// Posterior state marginals gamma[t][i] = P(q_t = i | O, lambda).
inline Matrix state_posteriors(const ForwardResult& fwd, const Matrix& beta) {
  Matrix gamma(beta.rows(), beta.cols());
  for (std::size_t t = 0; t < beta.rows(); ++t)
    for (std::size_t i = 0; i < beta.cols(); ++i)
      gamma(t, i) = fwd.scaled_alpha(t, i) * beta(t, i);
  return gamma;
}

struct TrainOptions {
  std::size_t max_iters = 100;
  // Relative improvement (l_t - l_{t-1}) / (|l_{t-1}| + 1) below which
  // training stops.
  double tol = 1e-4;
  // Added to every expected-count numerator of trans and emit.
  double smoothing = 1e-6;
  std::size_t threads = 1;
};

struct TrainReport {
  // Number of parameter updates applied.
  std::size_t iterations_run = 0;
  // Total log-likelihood of the training data before the first update and
  // after each update; size is iterations_run + 1.
  std::vector<double> log_likelihood_trace;
  bool converged = false;
};

struct TrainResult {
  HmmModel model;
  TrainReport report;
};

namespace detail {

struct ExpectedCounts {
  std::vector<double> pi;
  Matrix trans;
  Matrix emit;
  double log_likelihood = 0.0;

  ExpectedCounts(std::size_t n, std::size_t m)
      : pi(n, 0.0), trans(n, n), emit(n, m) {}

  void add(const ExpectedCounts& other) {
    for (std::size_t i = 0; i < pi.size(); ++i) pi[i] += other.pi[i];
    for (std::size_t i = 0; i < trans.rows(); ++i) {
      auto dst = trans.row(i);
      auto src = other.trans.row(i);
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
      auto edst = emit.row(i);
      auto esrc = other.emit.row(i);
      for (std::size_t k = 0; k < edst.size(); ++k) edst[k] += esrc[k];
    }
    log_likelihood += other.log_likelihood;
  }
};

inline void accumulate(const HmmModel& model, std::span<const ArtistId> seq,
                       ExpectedCounts& counts) {
  const std::size_t n = model.n_states();
  const ForwardResult fwd = forward(model, seq);
  const Matrix beta = backward(model, seq, fwd.scale_factors);
  counts.log_likelihood += fwd.log_likelihood;

  for (std::size_t t = 0; t < seq.size(); ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      const double g = fwd.scaled_alpha(t, i) * beta(t, i);
      if (t == 0) counts.pi[i] += g;
      counts.emit(i, seq[t]) += g;
    }
    if (t + 1 == seq.size()) break;
    const ArtistId sym = seq[t + 1];
    const double inv_scale = 1.0 / fwd.scale_factors[t + 1];
    for (std::size_t i = 0; i < n; ++i) {
      const double a = fwd.scaled_alpha(t, i) * inv_scale;
      for (std::size_t j = 0; j < n; ++j)
        counts.trans(i, j) +=
            a * model.trans(i, j) * model.emit(j, sym) * beta(t + 1, j);
    }
  }
}

inline void normalize_into(std::span<const double> counts, double smoothing,
                           std::span<double> out) {
  double total = 0.0;
  for (double c : counts) total += c + smoothing;
  if (!(total > 0.0)) {
    // No evidence at all for this row: fall back to uniform.
    for (double& v : out) v = 1.0 / static_cast<double>(out.size());
    return;
  }
  for (std::size_t k = 0; k < out.size(); ++k)
    out[k] = (counts[k] + smoothing) / total;
}

// Sequences are grouped into fixed-size blocks independent of the thread
// count; block sums are reduced in block order so results are bit-identical
// for any number of threads.
inline constexpr std::size_t kBlockSize = 32;

inline ExpectedCounts expected_counts(const HmmModel& model,
                                      std::span<const Sequence> sequences,
                                      std::size_t threads) {
  const std::size_t n = model.n_states();
  const std::size_t m = model.vocab_size();
  const std::size_t blocks = (sequences.size() + kBlockSize - 1) / kBlockSize;
  std::vector<ExpectedCounts> partial(blocks, ExpectedCounts(n, m));
  parallel_for(blocks, threads, [&](std::size_t b) {
    const std::size_t end = std::min(sequences.size(), (b + 1) * kBlockSize);
    for (std::size_t s = b * kBlockSize; s < end; ++s)
      accumulate(model, sequences[s], partial[b]);
  });
  ExpectedCounts total(n, m);
  for (const auto& p : partial) total.add(p);
  return total;
}

inline HmmModel maximize(const ExpectedCounts& counts, double smoothing) {
  const std::size_t n = counts.pi.size();
  HmmModel next{std::vector<double>(n), Matrix(n, n),
                Matrix(n, counts.emit.cols())};
  normalize_into(counts.pi, 0.0, next.pi);
  for (std::size_t i = 0; i < n; ++i) {
    normalize_into(counts.trans.row(i), smoothing, next.trans.row(i));
    normalize_into(counts.emit.row(i), smoothing, next.emit.row(i));
  }
  return next;
}

}  // namespace detail

// Total log-likelihood of a set of sequences.
inline double log_likelihood(const HmmModel& model,
                             std::span<const Sequence> sequences) {
  double total = 0.0;
  for (const auto& seq : sequences) total += forward(model, seq).log_likelihood;
  return total;
}

// Multi-sequence Baum-Welch. Expected counts are pooled over all sequences
// before each re-normalization.
inline TrainResult baum_welch(const HmmModel& init,
                              std::span<const Sequence> sequences,
                              const TrainOptions& options = {}) {
  if (sequences.empty())
    throw ArgumentError("baum_welch: at least one training sequence required");
  if (options.max_iters == 0)
    throw ArgumentError("baum_welch: max_iters must be >= 1");
  if (!(options.tol > 0.0)) throw ArgumentError("baum_welch: tol must be > 0");
  if (!(options.smoothing >= 0.0))
    throw ArgumentError("baum_welch: smoothing must be >= 0");
  validate(init);

  TrainResult result{init, {}};
  auto& report = result.report;
  for (std::size_t iter = 0;; ++iter) {
    const auto counts =
        detail::expected_counts(result.model, sequences, options.threads);
    const double ll = counts.log_likelihood;
    if (!std::isfinite(ll))
      throw NumericError("non-finite training log-likelihood at iteration " +
                         std::to_string(iter));
    report.log_likelihood_trace.push_back(ll);
    if (iter > 0) {
      const double prev = report.log_likelihood_trace[iter - 1];
      if ((ll - prev) / (std::abs(prev) + 1.0) < options.tol) {
        report.converged = true;
        break;
      }
    }
    if (iter == options.max_iters) break;
    result.model = detail::maximize(counts, options.smoothing);
    report.iterations_run = iter + 1;
  }
  return result;
}

// P(o_{T+1} = k | o_1..o_T): filtered state distribution, one transition,
// then emission.
inline std::vector<double> next_symbol_distribution(
    const HmmModel& model, std::span<const ArtistId> seq) {
  const ForwardResult fwd = forward(model, seq);
  const auto filtered = fwd.scaled_alpha.row(seq.size() - 1);
  const std::size_t n = model.n_states();
  std::vector<double> state(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      state[j] += filtered[i] * model.trans(i, j);
  std::vector<double> p(model.vocab_size(), 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    auto row = model.emit.row(j);
    for (std::size_t k = 0; k < p.size(); ++k) p[k] += state[j] * row[k];
  }
  return p;
}

}  // namespace playseq
