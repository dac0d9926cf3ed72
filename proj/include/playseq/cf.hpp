#pragma once

// User- and item-based collaborative filtering over play counts.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "playseq/errors.hpp"
#include "playseq/rating_matrix.hpp"
#include "playseq/types.hpp"

namespace playseq {

inline constexpr double kNotScorable = -std::numeric_limits<double>::infinity();

// k nearest entities (users or items), most similar first, ties by index.
struct Neighborhood {
  std::vector<std::size_t> ids;
  std::vector<double> sims;
};

// Predicted preference of one user for every artist. Entries without any
// neighbor evidence hold kNotScorable and mask == false.
struct ScoreVector {
  std::vector<double> scores;
  std::vector<bool> mask;

  explicit ScoreVector(std::size_t size = 0)
      : scores(size, kNotScorable), mask(size, false) {}

  void set(std::size_t i, double v) {
    scores[i] = v;
    mask[i] = true;
  }

  friend bool operator==(const ScoreVector&, const ScoreVector&) = default;
};

// a.b / (|a| |b|), 0 when either vector is all zeros. Computed as
// a.b / sqrt(|a|^2 |b|^2), which is exactly symmetric and gives exactly 1
// for a == b.
inline double cosine_similarity(std::span<const double> a,
                                std::span<const double> b) {
  if (a.size() != b.size())
    throw ArgumentError("cosine_similarity: lengths " +
                        std::to_string(a.size()) + " and " +
                        std::to_string(b.size()) + " differ");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / std::sqrt(na * nb);
}

namespace detail {

inline bool more_similar(const std::pair<double, std::size_t>& x,
                         const std::pair<double, std::size_t>& y) {
  if (x.first != y.first) return x.first > y.first;
  return x.second < y.second;
}

inline Neighborhood take_top(std::vector<std::pair<double, std::size_t>> cand,
                             std::size_t k) {
  const std::size_t keep = std::min(k, cand.size());
  std::partial_sort(cand.begin(), cand.begin() + keep, cand.end(),
                    more_similar);
  Neighborhood nb;
  nb.ids.reserve(keep);
  nb.sims.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) {
    nb.ids.push_back(cand[i].second);
    nb.sims.push_back(cand[i].first);
  }
  return nb;
}

inline double squared_norm(const RatingMatrix& m, std::size_t u) {
  double acc = 0.0;
  for (ArtistId i : m.row_nonzeros(u)) acc += m(u, i) * m(u, i);
  return acc;
}

// Same value as cosine_similarity(row u, row v), walking nonzeros only.
inline double row_cosine(const RatingMatrix& m, std::size_t u, std::size_t v,
                         double norm_u, double norm_v) {
  if (norm_u == 0.0 || norm_v == 0.0) return 0.0;
  auto a = m.row_nonzeros(u);
  auto b = m.row_nonzeros(v);
  double dot = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] < b[j]) {
      ++i;
    } else if (b[j] < a[i]) {
      ++j;
    } else {
      dot += m(u, a[i]) * m(v, b[j]);
      ++i;
      ++j;
    }
  }
  return dot / std::sqrt(norm_u * norm_v);
}

inline void check_user(const RatingMatrix& m, std::size_t u, std::size_t k) {
  if (u >= m.users())
    throw ArgumentError("user index " + std::to_string(u) + " out of range (" +
                        std::to_string(m.users()) + " users)");
  if (k == 0) throw ArgumentError("neighborhood size k must be >= 1");
}

}  // namespace detail

// The k users other than u with the highest cosine similarity to u.
inline Neighborhood user_neighborhood(const RatingMatrix& matrix, std::size_t u,
                                      std::size_t k) {
  detail::check_user(matrix, u, k);
  const double norm_u = detail::squared_norm(matrix, u);
  std::vector<std::pair<double, std::size_t>> cand;
  cand.reserve(matrix.users() - 1);
  for (std::size_t v = 0; v < matrix.users(); ++v) {
    if (v == u) continue;
    cand.emplace_back(detail::row_cosine(matrix, u, v, norm_u,
                                         detail::squared_norm(matrix, v)),
                      v);
  }
  return detail::take_top(std::move(cand), k);
}

// Mean-centered user-based prediction
//   P(u,i) = mean(u) + sum_v s(u,v) (r(v,i) - mean(v)) / sum_v |s(u,v)|
// over the k-user neighborhood. Everything is non-scorable when the
// similarity mass is zero.
inline ScoreVector user_cf_scores(const RatingMatrix& matrix, std::size_t u,
                                  std::size_t k) {
  const Neighborhood nb = user_neighborhood(matrix, u, k);
  ScoreVector out(matrix.items());
  double mass = 0.0;
  for (double s : nb.sims) mass += std::abs(s);
  if (mass == 0.0) return out;
  const auto means = matrix.row_means();
  for (std::size_t i = 0; i < matrix.items(); ++i) {
    double acc = 0.0;
    for (std::size_t n = 0; n < nb.ids.size(); ++n) {
      const std::size_t v = nb.ids[n];
      acc += nb.sims[n] * (matrix(v, i) - means[v]);
    }
    out.set(i, means[u] + acc / mass);
  }
  return out;
}

// Precomputed item-item cosine similarities between the columns of a rating
// matrix. Only strictly positive similarities are stored; every other pair
// has similarity 0 and contributes nothing to any neighborhood sum. Each row
// is sorted by similarity descending, then item id ascending, so the prefix
// of length k is the item's k-neighborhood (padded with zero-similarity
// items when shorter).
class ItemSimilarity {
 public:
  using Entry = std::pair<ArtistId, double>;

  ItemSimilarity() = default;
  explicit ItemSimilarity(std::vector<std::vector<Entry>> rows)
      : rows_(std::move(rows)) {}

  static ItemSimilarity build(const RatingMatrix& matrix) {
    const std::size_t items = matrix.items();
    std::vector<double> norms(items, 0.0);
    for (std::size_t i = 0; i < items; ++i)
      for (std::size_t u : matrix.col_nonzeros(i))
        norms[i] += matrix(u, i) * matrix(u, i);

    std::vector<std::vector<Entry>> rows(items);
    std::vector<double> dot(items, 0.0);
    std::vector<ArtistId> touched;
    for (std::size_t i = 0; i < items; ++i) {
      touched.clear();
      // Users are visited in ascending order, so every dot[j] accumulates
      // its terms in the same order as a dense column product.
      for (std::size_t u : matrix.col_nonzeros(i)) {
        const double r_ui = matrix(u, i);
        for (ArtistId j : matrix.row_nonzeros(u)) {
          if (j == i) continue;
          if (dot[j] == 0.0) touched.push_back(j);
          dot[j] += r_ui * matrix(u, j);
        }
      }
      auto& row = rows[i];
      row.reserve(touched.size());
      for (ArtistId j : touched) {
        row.emplace_back(j, dot[j] / std::sqrt(norms[i] * norms[j]));
        dot[j] = 0.0;
      }
      std::sort(row.begin(), row.end(), [](const Entry& x, const Entry& y) {
        if (x.second != y.second) return x.second > y.second;
        return x.first < y.first;
      });
    }
    return ItemSimilarity(std::move(rows));
  }

  std::size_t items() const noexcept { return rows_.size(); }

  // Positive similarities of item i, most similar first.
  std::span<const Entry> row(std::size_t i) const { return rows_.at(i); }

  double operator()(std::size_t i, std::size_t j) const {
    for (const auto& [id, s] : rows_.at(i))
      if (id == j) return s;
    return 0.0;
  }

  friend bool operator==(const ItemSimilarity&, const ItemSimilarity&) = default;

 private:
  std::vector<std::vector<Entry>> rows_;
};

// The k items other than i most similar to i.
inline Neighborhood item_neighborhood(const ItemSimilarity& sims, std::size_t i,
                                      std::size_t k) {
  if (i >= sims.items())
    throw ArgumentError("item index " + std::to_string(i) + " out of range");
  if (k == 0) throw ArgumentError("neighborhood size k must be >= 1");
  Neighborhood nb;
  for (const auto& [j, s] : sims.row(i)) {
    if (nb.ids.size() == k) return nb;
    nb.ids.push_back(j);
    nb.sims.push_back(s);
  }
  // Pad with zero-similarity items in ascending id order.
  std::vector<bool> used(sims.items(), false);
  used[i] = true;
  for (std::size_t j : nb.ids) used[j] = true;
  for (std::size_t j = 0; j < sims.items() && nb.ids.size() < k; ++j) {
    if (used[j]) continue;
    nb.ids.push_back(j);
    nb.sims.push_back(0.0);
  }
  return nb;
}

// Item-based prediction
//   P(u,i) = sum_{j in N(i)} s(i,j) r(u,j) / sum_{j in N(i)} |s(i,j)|
// where N(i) is the k-neighborhood of item column i.
inline ScoreVector item_cf_scores(const RatingMatrix& matrix,
                                  const ItemSimilarity& sims, std::size_t u,
                                  std::size_t k) {
  detail::check_user(matrix, u, k);
  if (sims.items() != matrix.items())
    throw ArgumentError("item similarity table does not match matrix width");
  ScoreVector out(matrix.items());
  for (std::size_t i = 0; i < matrix.items(); ++i) {
    const auto row = sims.row(i);
    const std::size_t depth = std::min(k, row.size());
    double num = 0.0, mass = 0.0;
    for (std::size_t n = 0; n < depth; ++n) {
      num += row[n].second * matrix(u, row[n].first);
      mass += std::abs(row[n].second);
    }
    if (mass > 0.0) out.set(i, num / mass);
  }
  return out;
}

inline ScoreVector item_cf_scores(const RatingMatrix& matrix, std::size_t u,
                                  std::size_t k) {
  return item_cf_scores(matrix, ItemSimilarity::build(matrix), u, k);
}

// Implicit-feedback pseudo-prediction: the score of item i is the sum of its
// similarities to the k most similar items (other than i) that user u has
// played. Every item is scorable; an item with no evidence scores 0.
inline ScoreVector pseudo_scores(const RatingMatrix& matrix,
                                 const ItemSimilarity& sims, std::size_t u,
                                 std::size_t k) {
  detail::check_user(matrix, u, k);
  if (sims.items() != matrix.items())
    throw ArgumentError("item similarity table does not match matrix width");
  ScoreVector out(matrix.items());
  for (std::size_t i = 0; i < matrix.items(); ++i) out.set(i, 0.0);

  // Similarity is symmetric, so the rows of the played items give s(i, j)
  // for every candidate i.
  std::vector<std::vector<std::pair<double, std::size_t>>> evidence(
      matrix.items());
  for (ArtistId j : matrix.row_nonzeros(u))
    for (const auto& [i, s] : sims.row(j)) evidence[i].emplace_back(s, j);
  for (std::size_t i = 0; i < matrix.items(); ++i) {
    auto& ev = evidence[i];
    if (ev.empty()) continue;
    const std::size_t keep = std::min(k, ev.size());
    std::partial_sort(ev.begin(), ev.begin() + keep, ev.end(),
                      detail::more_similar);
    double acc = 0.0;
    for (std::size_t n = 0; n < keep; ++n) acc += ev[n].first;
    out.scores[i] = acc;
  }
  return out;
}

// pseudo_scores on the binarized matrix (played = 1).
inline ScoreVector pseudo_scores_binary(const RatingMatrix& matrix,
                                        std::size_t u, std::size_t k) {
  const RatingMatrix bin = matrix.binarized();
  return pseudo_scores(bin, ItemSimilarity::build(bin), u, k);
}

// On-disk cache of an ItemSimilarity, keyed by a corpus content hash and the
// binarization flag. Layout (host byte order):
//   "PSQSIM01" | u64 hash | u8 binary | u64 items |
//   per item: u64 count, count x (u32 id, f64 sim)
namespace detail {

inline constexpr char kSimMagic[8] = {'P', 'S', 'Q', 'S', 'I', 'M', '0', '1'};

template <typename T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw FormatError("similarity cache is truncated");
  return v;
}

}  // namespace detail

inline void save_similarity_cache(const ItemSimilarity& sims,
                                  std::uint64_t corpus_hash, bool binary,
                                  const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArgumentError("cannot open " + path + " for writing");
  out.write(detail::kSimMagic, sizeof detail::kSimMagic);
  detail::put<std::uint64_t>(out, corpus_hash);
  detail::put<std::uint8_t>(out, binary ? 1 : 0);
  detail::put<std::uint64_t>(out, sims.items());
  for (std::size_t i = 0; i < sims.items(); ++i) {
    const auto row = sims.row(i);
    detail::put<std::uint64_t>(out, row.size());
    for (const auto& [j, s] : row) {
      detail::put<std::uint32_t>(out, j);
      detail::put<double>(out, s);
    }
  }
  if (!out) throw ArgumentError("failed writing " + path);
}

// Returns nullopt when the file is missing or was built for a different
// corpus or binarization; throws FormatError when it is corrupt.
inline std::optional<ItemSimilarity> load_similarity_cache(
    const std::string& path, std::uint64_t corpus_hash, bool binary) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  char magic[sizeof detail::kSimMagic];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, detail::kSimMagic, sizeof magic) != 0)
    throw FormatError("not a similarity cache file: " + path);
  if (detail::get<std::uint64_t>(in) != corpus_hash) return std::nullopt;
  if ((detail::get<std::uint8_t>(in) != 0) != binary) return std::nullopt;
  const auto items = detail::get<std::uint64_t>(in);
  std::vector<std::vector<ItemSimilarity::Entry>> rows(items);
  for (auto& row : rows) {
    const auto count = detail::get<std::uint64_t>(in);
    if (count >= items) throw FormatError("similarity cache row too long");
    row.reserve(count);
    for (std::uint64_t n = 0; n < count; ++n) {
      const auto j = detail::get<std::uint32_t>(in);
      const auto s = detail::get<double>(in);
      if (j >= items) throw FormatError("similarity cache id out of range");
      row.emplace_back(j, s);
    }
  }
  return ItemSimilarity(std::move(rows));
}

}  // namespace playseq
