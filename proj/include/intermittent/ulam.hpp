#pragma once

#include <Eigen/Sparse>

#include <cmath>
#include <cstddef>
#include <vector>

#include "intermittent/error.hpp"
#include "intermittent/grid.hpp"

namespace intermittent {

/// Ulam discretization of f on a LadderGrid together with its stationary law.
struct UlamChain {
  LadderGrid grid;
  SparseRM P;   // forward, row-stochastic w.r.t. Lebesgue
  Vec pi;       // stationary cell masses
  SparseRM K;   // transfer operator w.r.t. pi: K(j, i) = pi_i P(i, j) / pi_j
  int iterations = 0;
  double residual = 0.0;

  std::size_t cells() const { return grid.cells(); }
  double density(std::size_t c) const { return pi[static_cast<Eigen::Index>(c)] / grid.lengths()[c]; }

  Vec apply_K(const Vec& phi) const { return K * phi; }
  Vec apply_P(const Vec& psi) const { return P * psi; }
  double integrate(const Vec& phi) const { return pi.dot(phi); }

  /// Lebesgue transfer operator on per-cell densities.
  SparseRM lebesgue_operator() const {
    SparseRM L = SparseRM(P.transpose());
    const auto& len = grid.lengths();
    for (Eigen::Index j = 0; j < L.outerSize(); ++j)
      for (SparseRM::InnerIterator it(L, j); it; ++it)
        it.valueRef() *= len[static_cast<std::size_t>(it.col())] / len[static_cast<std::size_t>(j)];
    return L;
  }

  Vec indicator_y() const {
    Vec v = Vec::Zero(static_cast<Eigen::Index>(cells()));
    v.tail(static_cast<Eigen::Index>(grid.y_cells())).setOnes();
    return v;
  }
};

/// Builds P and its stationary masses.
///
/// The stationary vector is obtained from the chain induced on Y, in which the
/// deterministic descent through the ladder is collapsed; ladder and sink
/// masses are then filled in from the flows out of Y.
inline UlamChain build_ulam_chain(const MapSpec& map, const ZLadder& ladder, std::size_t depth, std::size_t q,
                                  std::size_t y_cells, double tol = 1e-15, int max_iter = 200000) {
  UlamChain ch{LadderGrid(map, ladder, depth, q, y_cells), {}, {}, {}, 0, 0.0};
  const LadderGrid& g = ch.grid;
  ch.P = g.forward_matrix();
  const std::size_t M = g.y_cells(), D = g.depth();
  const std::size_t y0 = g.first_y();
  const double sink_stay = g.sub_edge(D + 1, 0) / g.lengths()[0];

  // w_s: exit distribution of the sink over the sub-cells of J_D.
  std::vector<double> w(q);
  double wsum = 0;
  for (std::size_t s = 0; s < q; ++s) wsum += (w[s] = g.sub_length(D + 1, s));
  for (auto& v : w) v /= wsum;

  Eigen::MatrixXd E = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(M), static_cast<Eigen::Index>(q));
  SparseRM PYY(static_cast<Eigen::Index>(M), static_cast<Eigen::Index>(M));
  std::vector<Eigen::Triplet<double>> tyy;
  // in_flow(i, level, s) is kept as per-row sparse lists for the later fill.
  struct Flow {
    std::size_t row, level, s;
    double p;
  };
  std::vector<Flow> flows;
  std::vector<double> to_sink(M, 0.0);
  for (std::size_t j = 0; j < M; ++j) {
    const auto r = static_cast<Eigen::Index>(y0 + j);
    for (SparseRM::InnerIterator it(ch.P, r); it; ++it) {
      const auto c = static_cast<std::size_t>(it.col());
      if (g.is_y(c)) {
        tyy.emplace_back(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(c - y0), it.value());
      } else if (c == 0) {
        to_sink[j] += it.value();
        for (std::size_t s = 0; s < q; ++s) E(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(s)) += it.value() * w[s];
      } else {
        const std::size_t s = g.sub_index(c);
        E(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(s)) += it.value();
        flows.push_back({j, g.level(c), s, it.value()});
      }
    }
  }
  PYY.setFromTriplets(tyy.begin(), tyy.end());
  Eigen::MatrixXd P1 = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(M));
  for (std::size_t s = 0; s < q; ++s)
    for (SparseRM::InnerIterator it(ch.P, static_cast<Eigen::Index>(g.ladder_cell(1, s))); it; ++it)
      P1(static_cast<Eigen::Index>(s), it.col() - static_cast<Eigen::Index>(y0)) = it.value();

  // Left power iteration x <- x (PYY + E P1).
  Eigen::RowVectorXd x = Eigen::RowVectorXd::Constant(static_cast<Eigen::Index>(M), 1.0 / static_cast<double>(M));
  double diff = 1.0;
  int it = 0;
  for (; it < max_iter; ++it) {
    Eigen::RowVectorXd nx = (PYY.transpose() * x.transpose()).transpose() + (x * E) * P1;
    nx /= nx.sum();
    diff = (nx - x).cwiseAbs().sum();
    x = nx;
    if (diff < tol) break;
  }
  if (diff >= 1e-10) throw NumericFailure("build_ulam_chain: induced power iteration stagnated", diff, 0.0);
  ch.iterations = it;
  ch.residual = diff;

  ch.pi = Vec::Zero(static_cast<Eigen::Index>(g.cells()));
  for (std::size_t j = 0; j < M; ++j) ch.pi[static_cast<Eigen::Index>(y0 + j)] = x[static_cast<Eigen::Index>(j)];
  // inflow per (level, s), then cumulative sums from the deepest level upwards
  std::vector<std::vector<double>> inflow(D + 1, std::vector<double>(q, 0.0));
  for (const auto& f : flows) inflow[f.level][f.s] += x[static_cast<Eigen::Index>(f.row)] * f.p;
  double sink_in = 0;
  for (std::size_t j = 0; j < M; ++j) sink_in += x[static_cast<Eigen::Index>(j)] * to_sink[j];
  for (std::size_t s = 0; s < q; ++s) {
    double acc = sink_in * w[s];
    for (std::size_t k = D; k >= 1; --k) {
      acc += inflow[k][s];
      ch.pi[static_cast<Eigen::Index>(g.ladder_cell(k, s))] = acc;
    }
  }
  ch.pi[0] = sink_in / (1.0 - sink_stay);
  ch.pi /= ch.pi.sum();

  // K = diag(pi)^-1 P^T diag(pi)
  ch.K = SparseRM(ch.P.transpose());
  for (Eigen::Index j = 0; j < ch.K.outerSize(); ++j)
    for (SparseRM::InnerIterator kt(ch.K, j); kt; ++kt) kt.valueRef() *= ch.pi[kt.col()] / ch.pi[j];
  return ch;
}

}  // namespace intermittent
