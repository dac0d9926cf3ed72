#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "playseq/errors.hpp"
#include "playseq/types.hpp"

namespace playseq {

// User x artist matrix of non-negative play counts. Besides the dense
// values it keeps the ascending nonzero column indices of every row and the
// nonzero row indices of every column; similarity code walks those lists and
// skips only exact zeros, so its sums equal the dense sums bit for bit.
class RatingMatrix {
 public:
  explicit RatingMatrix(Matrix values) : values_(std::move(values)) {
    const std::size_t users = values_.rows();
    const std::size_t items = values_.cols();
    if (users == 0 || items == 0)
      throw ArgumentError("rating matrix must be non-empty");
    row_means_.resize(users);
    row_nonzeros_.resize(users);
    col_nonzeros_.resize(items);
    for (std::size_t u = 0; u < users; ++u) {
      double sum = 0.0;
      for (std::size_t i = 0; i < items; ++i) {
        const double v = values_(u, i);
        if (!(v >= 0.0) || !std::isfinite(v))
          throw ArgumentError("rating matrix entries must be finite and >= 0");
        sum += v;
        if (v != 0.0) {
          row_nonzeros_[u].push_back(static_cast<ArtistId>(i));
          col_nonzeros_[i].push_back(u);
        }
      }
      row_means_[u] = sum / static_cast<double>(items);
    }
  }

  std::size_t users() const noexcept { return values_.rows(); }
  std::size_t items() const noexcept { return values_.cols(); }
  const Matrix& values() const noexcept { return values_; }
  double operator()(std::size_t u, std::size_t i) const { return values_(u, i); }

  // Mean over all item columns, zeros included.
  std::span<const double> row_means() const noexcept { return row_means_; }
  std::span<const ArtistId> row_nonzeros(std::size_t u) const {
    return row_nonzeros_[u];
  }
  std::span<const std::size_t> col_nonzeros(std::size_t i) const {
    return col_nonzeros_[i];
  }

  // Copy with every positive entry replaced by 1.
  RatingMatrix binarized() const {
    Matrix bin(users(), items());
    for (std::size_t u = 0; u < users(); ++u)
      for (ArtistId i : row_nonzeros_[u]) bin(u, i) = 1.0;
    return RatingMatrix(std::move(bin));
  }

 private:
  Matrix values_;
  std::vector<double> row_means_;
  std::vector<std::vector<ArtistId>> row_nonzeros_;
  std::vector<std::vector<std::size_t>> col_nonzeros_;
};

}  // namespace playseq
