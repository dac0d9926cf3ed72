#pragma once

// Top-n rankings, the two frequency baselines and the HMM/CF mixture.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "playseq/cf.hpp"
#include "playseq/corpus.hpp"
#include "playseq/errors.hpp"
#include "playseq/hmm.hpp"

namespace playseq {

// Ordered candidate artists, best first. Backfilled entries carry
// kNotScorable as their score.
struct Ranking {
  std::vector<ArtistId> items;
  std::vector<double> scores;

  std::size_t size() const noexcept { return items.size(); }
  bool contains(ArtistId a) const {
    return std::find(items.begin(), items.end(), a) != items.end();
  }
  void push(ArtistId a, double score) {
    items.push_back(a);
    scores.push_back(score);
  }

  friend bool operator==(const Ranking&, const Ranking&) = default;
};

struct MixtureConfig {
  std::size_t n = 10;
  std::size_t n1 = 7;  // HMM slots
  std::size_t n2 = 3;  // CF slots

  void validate() const {
    if (n == 0) throw ConfigError("mixture: n must be >= 1");
    if (n1 + n2 != n)
      throw ConfigError("mixture: n1 + n2 = " + std::to_string(n1 + n2) +
                        " but n = " + std::to_string(n));
  }
};

// Highest-scoring n candidates. Exact score ties go to the artist with the
// higher corpus frequency, then to the lower id. Entries that are -inf or
// NaN are not candidates, so the result may be shorter than n.
inline Ranking top_n(std::span<const double> scores, std::size_t n,
                     const FrequencyTable& freqs) {
  if (n == 0) throw ArgumentError("top_n: n must be >= 1");
  if (freqs.size() != scores.size())
    throw ArgumentError("top_n: " + std::to_string(scores.size()) +
                        " scores but " + std::to_string(freqs.size()) +
                        " frequency entries");
  std::vector<ArtistId> cand;
  cand.reserve(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i)
    if (scores[i] > kNotScorable) cand.push_back(static_cast<ArtistId>(i));
  const std::size_t keep = std::min(n, cand.size());
  std::partial_sort(cand.begin(), cand.begin() + keep, cand.end(),
                    [&](ArtistId a, ArtistId b) {
                      if (scores[a] != scores[b]) return scores[a] > scores[b];
                      if (freqs.counts[a] != freqs.counts[b])
                        return freqs.counts[a] > freqs.counts[b];
                      return a < b;
                    });
  Ranking out;
  for (std::size_t r = 0; r < keep; ++r) out.push(cand[r], scores[cand[r]]);
  return out;
}

inline Ranking top_n(const ScoreVector& scores, std::size_t n,
                     const FrequencyTable& freqs) {
  return top_n(std::span<const double>(scores.scores), n, freqs);
}

// Appends items of `source` not yet in `ranking` until it holds n items.
inline void backfill(Ranking& ranking, const Ranking& source, std::size_t n) {
  for (ArtistId a : source.items) {
    if (ranking.size() >= n) return;
    if (!ranking.contains(a)) ranking.push(a, kNotScorable);
  }
}

// Most played artists over the whole corpus; count ties by lower id.
inline Ranking hf_corpus(const FrequencyTable& freqs, std::size_t n) {
  std::vector<double> scores(freqs.counts.begin(), freqs.counts.end());
  return top_n(scores, n, freqs);
}

// Most played artists within one user's own sequence. Ties go by corpus
// frequency, then id; short lists are backfilled from hf_corpus order.
inline Ranking hf_current(std::span<const ArtistId> user_seq, std::size_t n,
                          const FrequencyTable& freqs) {
  if (user_seq.empty()) throw ArgumentError("hf_current: empty sequence");
  std::vector<double> local(freqs.size(), kNotScorable);
  for (ArtistId a : user_seq) {
    if (a >= freqs.size())
      throw ArgumentError("hf_current: artist id outside vocabulary");
    local[a] = local[a] == kNotScorable ? 1.0 : local[a] + 1.0;
  }
  Ranking out = top_n(local, n, freqs);
  backfill(out, hf_corpus(freqs, n), n);
  return out;
}

// Ranking of a score vector backfilled to n from hf_corpus order.
inline Ranking rank_scores(const ScoreVector& scores, std::size_t n,
                           const FrequencyTable& freqs) {
  Ranking out = top_n(scores, n, freqs);
  if (out.size() < n) backfill(out, hf_corpus(freqs, n), n);
  return out;
}

inline Ranking hmm_predict(const HmmModel& model,
                           std::span<const ArtistId> user_seq, std::size_t n,
                           const FrequencyTable& freqs) {
  if (model.vocab_size() != freqs.size())
    throw ArgumentError("hmm_predict: model has " +
                        std::to_string(model.vocab_size()) +
                        " symbols but the corpus has " +
                        std::to_string(freqs.size()) + " artists");
  const auto p = next_symbol_distribution(model, user_seq);
  Ranking out = top_n(p, n, freqs);
  if (out.size() < n) backfill(out, hf_corpus(freqs, n), n);
  return out;
}

// Experimental: adds lambda * freq(a) / total to every scorable entry
// instead of using frequencies only as tie-breakers. Off unless lambda > 0.
inline void blend_frequency(std::span<double> scores,
                            const FrequencyTable& freqs, double lambda) {
  if (lambda == 0.0 || freqs.total == 0) return;
  for (std::size_t a = 0; a < scores.size(); ++a)
    if (scores[a] > kNotScorable)
      scores[a] += lambda * static_cast<double>(freqs.counts[a]) /
                   static_cast<double>(freqs.total);
}

// Mixture operator: the first n1 HMM candidates, then the first n2 CF
// candidates, skipping any already emitted. Short results are filled from
// the rest of hmm_rank, then the rest of cf_rank, then `fallback`. Both input
// orders are preserved.
inline Ranking mhmm_predict(const Ranking& hmm_rank, const Ranking& cf_rank,
                            const MixtureConfig& config,
                            const Ranking& fallback) {
  config.validate();
  Ranking out;
  auto take = [&](const Ranking& src, std::size_t from, std::size_t to) {
    to = std::min(to, src.size());
    for (std::size_t r = from; r < to && out.size() < config.n; ++r)
      if (!out.contains(src.items[r])) out.push(src.items[r], src.scores[r]);
  };
  take(hmm_rank, 0, config.n1);
  take(cf_rank, 0, config.n2);
  take(hmm_rank, config.n1, hmm_rank.size());
  take(cf_rank, config.n2, cf_rank.size());
  backfill(out, fallback, config.n);
  return out;
}

}  // namespace playseq
