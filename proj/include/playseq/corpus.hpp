#pragma once

// Play-sequence corpus: CSV ingestion, synthetic generation from a planted
// HMM, frequency statistics and leave-last-out splitting.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "playseq/errors.hpp"
#include "playseq/hmm.hpp"
#include "playseq/random.hpp"
#include "playseq/rating_matrix.hpp"
#include "playseq/types.hpp"

namespace playseq {

// External artist code as it appears in input files.
using ArtistCode = std::uint64_t;

// Rectangular table of per-user play sequences over dense artist ids.
// codes()[id] is the external code of internal id `id`.
class Corpus {
 public:
  Corpus(std::vector<Sequence> sequences, std::vector<ArtistCode> codes)
      : sequences_(std::move(sequences)), codes_(std::move(codes)) {
    if (sequences_.empty()) throw ArgumentError("corpus has no sequences");
    if (codes_.empty()) throw ArgumentError("corpus vocabulary is empty");
    const std::size_t len = sequences_.front().size();
    if (len == 0) throw ArgumentError("corpus sequences are empty");
    for (std::size_t u = 0; u < sequences_.size(); ++u) {
      if (sequences_[u].size() != len)
        throw ArgumentError("sequence " + std::to_string(u) + " has length " +
                            std::to_string(sequences_[u].size()) +
                            ", expected " + std::to_string(len));
      for (ArtistId a : sequences_[u])
        if (a >= codes_.size())
          throw ArgumentError("artist id " + std::to_string(a) +
                              " outside vocabulary of " +
                              std::to_string(codes_.size()));
    }
    index_.reserve(codes_.size());
    for (std::size_t i = 0; i < codes_.size(); ++i)
      if (!index_.emplace(codes_[i], static_cast<ArtistId>(i)).second)
        throw ArgumentError("duplicate external artist code " +
                            std::to_string(codes_[i]));
  }

  std::size_t users() const noexcept { return sequences_.size(); }
  std::size_t length() const noexcept { return sequences_.front().size(); }
  std::size_t vocab_size() const noexcept { return codes_.size(); }

  const std::vector<Sequence>& sequences() const noexcept { return sequences_; }
  const Sequence& sequence(std::size_t u) const { return sequences_.at(u); }
  const std::vector<ArtistCode>& codes() const noexcept { return codes_; }

  ArtistCode code_of(ArtistId id) const { return codes_.at(id); }
  std::optional<ArtistId> id_of(ArtistCode code) const {
    auto it = index_.find(code);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  friend bool operator==(const Corpus& a, const Corpus& b) {
    return a.sequences_ == b.sequences_ && a.codes_ == b.codes_;
  }

 private:
  std::vector<Sequence> sequences_;
  std::vector<ArtistCode> codes_;
  std::unordered_map<ArtistCode, ArtistId> index_;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
    s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

}  // namespace detail

// Headerless CSV, one user per row, comma-separated non-negative integer
// codes. LF and CRLF line endings are accepted. A header row or a leading
// user-id column is not recognized: a header fails to parse, and an id column
// would be read as an artist. Ids are assigned densely in order of first
// appearance (row-major).
inline Corpus parse_csv(std::istream& in) {
  std::vector<Sequence> rows;
  std::vector<ArtistCode> codes;
  std::unordered_map<ArtistCode, ArtistId> index;
  std::string line;
  std::size_t line_no = 0;
  std::size_t width = 0;
  std::size_t blank_line = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::trim(line).empty()) {
      if (!blank_line) blank_line = line_no;
      continue;
    }
    if (blank_line)
      throw FormatError("blank line inside the corpus", blank_line);
    Sequence row;
    std::string_view rest(line);
    std::size_t column = 0;
    for (;;) {
      ++column;
      const auto comma = rest.find(',');
      const auto field = detail::trim(rest.substr(0, comma));
      ArtistCode code = 0;
      const auto* end = field.data() + field.size();
      const auto [ptr, ec] = std::from_chars(field.data(), end, code);
      if (field.empty() || ec != std::errc() || ptr != end)
        throw ParseError("\"" + std::string(field) +
                             "\" is not a non-negative integer",
                         line_no, column);
      auto [it, inserted] =
          index.emplace(code, static_cast<ArtistId>(codes.size()));
      if (inserted) codes.push_back(code);
      row.push_back(it->second);
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (rows.empty()) {
      width = row.size();
    } else if (row.size() != width) {
      throw FormatError("row has " + std::to_string(row.size()) +
                            " fields, expected " + std::to_string(width),
                        line_no);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw EmptyInputError("corpus file has no rows");
  if (width < 2)
    throw FormatError("corpus needs at least 2 columns, found " +
                          std::to_string(width),
                      1);
  return Corpus(std::move(rows), std::move(codes));
}

inline Corpus load_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArgumentError("cannot open corpus file " + path);
  return parse_csv(in);
}

// Writes external codes, LF line endings.
inline void write_csv(const Corpus& corpus, std::ostream& out) {
  for (const auto& seq : corpus.sequences()) {
    for (std::size_t t = 0; t < seq.size(); ++t) {
      if (t) out << ',';
      out << corpus.code_of(seq[t]);
    }
    out << '\n';
  }
}

inline void write_csv(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArgumentError("cannot open " + path + " for writing");
  write_csv(corpus, out);
  if (!out) throw ArgumentError("failed writing " + path);
}

struct SyntheticCorpus {
  Corpus corpus;
  HmmModel planted;
};

// Draws a random HMM (rows uniform(0,1), normalized) and samples every
// sequence from it. Internal ids equal external codes 0..n_artists-1, so the
// vocabulary covers all n_artists even if some are never emitted. Callers
// may want to warn when n_states > n_artists.
inline SyntheticCorpus generate_synthetic(std::size_t n_users,
                                          std::size_t seq_len,
                                          std::size_t n_artists,
                                          std::size_t n_states,
                                          std::uint64_t seed) {
  if (n_users == 0 || seq_len == 0 || n_artists == 0 || n_states == 0)
    throw ArgumentError("generate_synthetic: all counts must be >= 1");
  HmmModel planted = init_random(n_states, n_artists, seed);
  // Separate stream for sampling so the planted model equals
  // init_random(n_states, n_artists, seed).
  Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<Sequence> sequences(n_users, Sequence(seq_len));
  for (auto& seq : sequences) {
    std::size_t state = rng.categorical(planted.pi);
    for (std::size_t t = 0; t < seq_len; ++t) {
      if (t) state = rng.categorical(planted.trans.row(state));
      seq[t] = static_cast<ArtistId>(rng.categorical(planted.emit.row(state)));
    }
  }
  std::vector<ArtistCode> codes(n_artists);
  for (std::size_t a = 0; a < n_artists; ++a) codes[a] = a;
  return {Corpus(std::move(sequences), std::move(codes)), std::move(planted)};
}

struct FrequencyTable {
  std::vector<std::uint64_t> counts;
  std::uint64_t total = 0;

  std::size_t size() const noexcept { return counts.size(); }
};

inline FrequencyTable artist_frequencies(const Corpus& corpus) {
  FrequencyTable table{std::vector<std::uint64_t>(corpus.vocab_size(), 0), 0};
  for (const auto& seq : corpus.sequences())
    for (ArtistId a : seq) ++table.counts[a];
  table.total = static_cast<std::uint64_t>(corpus.users()) * corpus.length();
  return table;
}

// prefixes.sequence(u) followed by targets[u] is the original sequence u.
// prefixes keeps the full vocabulary of the source corpus.
struct HoldoutSplit {
  Corpus prefixes;
  std::vector<ArtistId> targets;
};

inline HoldoutSplit split_holdout(const Corpus& corpus) {
  if (corpus.length() < 2)
    throw ArgumentError("split_holdout: sequences need length >= 2");
  std::vector<Sequence> prefixes;
  std::vector<ArtistId> targets;
  prefixes.reserve(corpus.users());
  targets.reserve(corpus.users());
  for (const auto& seq : corpus.sequences()) {
    prefixes.emplace_back(seq.begin(), seq.end() - 1);
    targets.push_back(seq.back());
  }
  return {Corpus(std::move(prefixes), corpus.codes()), std::move(targets)};
}

// Entry (u, a) is the number of plays of artist a in sequence u.
inline RatingMatrix to_rating_matrix(const Corpus& corpus) {
  Matrix counts(corpus.users(), corpus.vocab_size());
  for (std::size_t u = 0; u < corpus.users(); ++u)
    for (ArtistId a : corpus.sequence(u)) counts(u, a) += 1.0;
  return RatingMatrix(std::move(counts));
}

// FNV-1a over the corpus shape, codes and ids. Used to key on-disk caches.
inline std::uint64_t content_hash(const Corpus& corpus) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::uint64_t v) {
    for (int b = 0; b < 8; ++b) {
      h ^= (v >> (8 * b)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  };
  mix(corpus.users());
  mix(corpus.length());
  mix(corpus.vocab_size());
  for (ArtistCode c : corpus.codes()) mix(c);
  for (const auto& seq : corpus.sequences())
    for (ArtistId a : seq) mix(a);
  return h;
}

}  // namespace playseq
