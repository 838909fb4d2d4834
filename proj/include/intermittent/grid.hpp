#pragma once

#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "intermittent/error.hpp"
#include "intermittent/maps.hpp"

namespace intermittent {

using SparseRM = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;

/// Markov partition of [0, 1] adapted to the ladder.
///
/// Cells in ascending order: a sink [0, z_{D+1}], the ladder cells J_D .. J_1
/// each split into q sub-cells, then M uniform cells on Y. Sub-cell s of J_k is
/// v0^k of the s-th of q equal pieces of Y, so f maps J_{k,s} onto J_{k-1,s}.
class LadderGrid {
 public:
  LadderGrid(const MapSpec& map, const ZLadder& ladder, std::size_t depth, std::size_t q, std::size_t y_cells)
      : map_(map), D_(depth), q_(q), M_(y_cells) {
    require(depth >= 1, "LadderGrid: depth must be >= 1");
    require(q >= 1 && y_cells >= q && y_cells % q == 0, "LadderGrid: y_cells must be a positive multiple of q");
    require(ladder.N() >= depth + 1, "LadderGrid: ladder too short for the requested depth");
    sub_.assign(D_ + 2, std::vector<double>(q_ + 1));
    for (std::size_t s = 0; s <= q_; ++s) sub_[0][s] = 0.5 + 0.5 * static_cast<double>(s) / static_cast<double>(q_);
    for (std::size_t k = 1; k <= D_ + 1; ++k) {
      sub_[k][0] = ladder.z[k + 1];
      sub_[k][q_] = ladder.z[k];
      for (std::size_t s = 1; s < q_; ++s) sub_[k][s] = v0(map, sub_[k - 1][s]);
    }
    sub_len_.assign(D_ + 2, std::vector<double>(q_));
    for (std::size_t k = 0; k <= D_ + 1; ++k) {
      for (std::size_t s = 0; s < q_; ++s) sub_len_[k][s] = sub_[k][s + 1] - sub_[k][s];
      if (q_ == 1) sub_len_[k][0] = ladder.lengths[k];
    }
    edges_.reserve(cells() + 1);
    edges_.push_back(0.0);
    for (std::size_t k = D_; k >= 1; --k)
      for (std::size_t s = 0; s < q_; ++s) edges_.push_back(sub_[k][s]);
    for (std::size_t j = 0; j < M_; ++j) edges_.push_back(0.5 + 0.5 * static_cast<double>(j) / static_cast<double>(M_));
    edges_.push_back(1.0);
    lengths_.resize(cells());
    lengths_[0] = ladder.z[D_ + 1];
    for (std::size_t k = 1; k <= D_; ++k)
      for (std::size_t s = 0; s < q_; ++s) lengths_[ladder_cell(k, s)] = sub_len_[k][s];
    for (std::size_t j = 0; j < M_; ++j) lengths_[y_cell(j)] = 0.5 / static_cast<double>(M_);
  }

  std::size_t depth() const { return D_; }
  std::size_t q() const { return q_; }
  std::size_t y_cells() const { return M_; }
  std::size_t cells() const { return 1 + D_ * q_ + M_; }

  std::size_t sink() const { return 0; }
  std::size_t ladder_cell(std::size_t k, std::size_t s) const { return 1 + (D_ - k) * q_ + s; }
  std::size_t y_cell(std::size_t j) const { return 1 + D_ * q_ + j; }
  std::size_t first_y() const { return y_cell(0); }
  bool is_y(std::size_t c) const { return c >= first_y(); }

  /// Ladder level of cell c: 0 for Y, D+1 for the sink.
  std::size_t level(std::size_t c) const {
    if (is_y(c)) return 0;
    if (c == 0) return D_ + 1;
    return D_ - (c - 1) / q_;
  }
  std::size_t sub_index(std::size_t c) const {
    if (is_y(c)) return (c - first_y()) / (M_ / q_);
    return c == 0 ? 0 : (c - 1) % q_;
  }

  const std::vector<double>& edges() const { return edges_; }
  const std::vector<double>& lengths() const { return lengths_; }
  double left(std::size_t c) const { return edges_[c]; }
  double right(std::size_t c) const { return edges_[c + 1]; }
  double center(std::size_t c) const { return 0.5 * (edges_[c] + edges_[c + 1]); }

  /// Cell containing x (cells are treated as closed on the right except the sink).
  std::size_t locate(double x) const {
    if (x <= edges_[1]) return 0;
    if (x >= 1.0) return cells() - 1;
    const auto it = std::lower_bound(edges_.begin(), edges_.end(), x);
    return static_cast<std::size_t>(it - edges_.begin()) - 1;
  }

  double sub_edge(std::size_t k, std::size_t s) const { return sub_[k][s]; }
  double sub_length(std::size_t k, std::size_t s) const { return sub_len_[k][s]; }
  const MapSpec& map() const { return map_; }

  /// Row-stochastic Lebesgue Ulam matrix: P(i, j) = leb(cell_i ∩ f^{-1} cell_j) / leb(cell_i).
  SparseRM forward_matrix() const {
    std::vector<Eigen::Triplet<double>> trip;
    const std::size_t n = cells();
    trip.reserve(n + D_ * q_ + 8 * M_);
    // sink: [0, z_{D+1}] maps onto [0, z_D]
    const double zs = lengths_[0];
    trip.emplace_back(0, 0, sub_[D_ + 1][0] / zs);
    for (std::size_t s = 0; s < q_; ++s) trip.emplace_back(0, ladder_cell(D_, s), sub_len_[D_ + 1][s] / zs);
    for (std::size_t k = 2; k <= D_; ++k)
      for (std::size_t s = 0; s < q_; ++s) trip.emplace_back(ladder_cell(k, s), ladder_cell(k - 1, s), 1.0);
    // J_1 sub-cells onto Y cells: Lebesgue share of each preimage v0(cell).
    std::vector<double> pre(M_ + 1);
    for (std::size_t j = 0; j <= M_; ++j) pre[j] = j == 0 ? sub_[1][0] : (j == M_ ? sub_[1][q_] : v0(map_, edges_[first_y() + j]));
    const std::size_t per = M_ / q_;
    for (std::size_t j = 0; j < M_; ++j) {
      const std::size_t s = j / per;
      trip.emplace_back(ladder_cell(1, s), y_cell(j), (pre[j + 1] - pre[j]) / sub_len_[1][s]);
    }
    // Y cells through the affine branch.
    for (std::size_t j = 0; j < M_; ++j) {
      const std::size_t c = y_cell(j);
      const double lo = 2.0 * left(c) - 1.0, hi = 2.0 * right(c) - 1.0;
      const double w = 1.0 / (hi - lo);
      for (std::size_t t = locate(std::nextafter(lo, 2.0)); t < n; ++t) {
        const double a = std::max(lo, left(t)), b = std::min(hi, right(t));
        // interior cells use their stored length, which is accurate near 0
        const double overlap = (left(t) >= lo && right(t) <= hi) ? lengths_[t] : b - a;
        if (b > a) trip.emplace_back(c, t, overlap * w);
        if (right(t) >= hi) break;
      }
    }
    SparseRM P(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    P.setFromTriplets(trip.begin(), trip.end());
    return P;
  }

 private:
  MapSpec map_;
  std::size_t D_, q_, M_;
  std::vector<std::vector<double>> sub_;
  std::vector<std::vector<double>> sub_len_;
  std::vector<double> edges_;
  std::vector<double> lengths_;
};

}  // namespace intermittent
