#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "intermittent/error.hpp"
#include "intermittent/grid.hpp"
#include "intermittent/maps.hpp"
#include "intermittent/rng.hpp"
#include "intermittent/ulam.hpp"

namespace intermittent {

/// Piecewise-constant density of nu on the q = 1 ladder partition.
struct DensityGrid {
  std::vector<double> edges;
  std::vector<double> lengths;
  std::vector<double> values;  // density w.r.t. Lebesgue
  std::string tag;
  std::size_t depth = 0;    // number of ladder cells J_D .. J_1
  std::size_t y_cells = 0;
  double truncation = 0.0;  // mass estimate lost to truncation (0 if exact)

  std::size_t cells() const { return values.size(); }
  double mass(std::size_t c) const { return values[c] * lengths[c]; }
  double total_mass() const {
    double m = 0;
    for (std::size_t c = 0; c < cells(); ++c) m += mass(c);
    return m;
  }
  std::size_t first_y() const { return 1 + depth; }
  /// Cell index of J_k (1 <= k <= depth).
  std::size_t ladder_cell(std::size_t k) const { return 1 + depth - k; }
  std::size_t locate(double x) const {
    if (x <= edges[1]) return 0;
    if (x >= 1.0) return cells() - 1;
    return static_cast<std::size_t>(std::lower_bound(edges.begin(), edges.end(), x) - edges.begin()) - 1;
  }
  double at(double x) const { return values[locate(x)]; }

  /// Mean of the density on [lo, 1], with partial cells weighted by overlap.
  double mass_above(double lo) const {
    double m = 0;
    for (std::size_t c = 0; c < cells(); ++c) {
      const double a = std::max(lo, edges[c]);
      if (edges[c + 1] > a) m += values[c] * (edges[c + 1] - a);
    }
    return m;
  }
};

/// An empty density on the q = 1 partition with the given depth and Y resolution.
inline DensityGrid density_layout(const ZLadder& ladder, std::size_t depth, std::size_t y_cells) {
  require(ladder.N() >= depth + 1, "density_layout: ladder too short");
  DensityGrid d;
  d.depth = depth;
  d.y_cells = y_cells;
  d.edges.push_back(0.0);
  for (std::size_t k = depth; k >= 1; --k) d.edges.push_back(ladder.z[k + 1]);
  for (std::size_t j = 0; j < y_cells; ++j) d.edges.push_back(0.5 + 0.5 * static_cast<double>(j) / static_cast<double>(y_cells));
  d.edges.push_back(1.0);
  d.lengths.push_back(ladder.z[depth + 1]);
  for (std::size_t k = depth; k >= 1; --k) d.lengths.push_back(ladder.lengths[k]);
  for (std::size_t j = 0; j < y_cells; ++j) d.lengths.push_back(0.5 / static_cast<double>(y_cells));
  d.values.assign(d.lengths.size(), 0.0);
  return d;
}

/// L1 distance of two densities on the same partition, restricted to [lo, 1].
inline double l1_distance(const DensityGrid& a, const DensityGrid& b, double lo = 0.0) {
  require(a.edges == b.edges, "l1_distance: densities live on different partitions");
  double s = 0;
  for (std::size_t c = 0; c < a.cells(); ++c) {
    const double left = std::max(lo, a.edges[c]);
    if (a.edges[c + 1] <= left) continue;
    const double w = left == a.edges[c] ? a.lengths[c] : a.edges[c + 1] - left;
    s += std::abs(a.values[c] - b.values[c]) * w;
  }
  return s;
}

/// Stationary density of the global Ulam chain, aggregated over sub-cells.
inline DensityGrid ulam_density(const UlamChain& ch, const ZLadder& ladder) {
  const LadderGrid& g = ch.grid;
  DensityGrid d = density_layout(ladder, g.depth(), g.y_cells());
  d.tag = "ulam";
  std::vector<double> mass(d.cells(), 0.0);
  for (std::size_t c = 0; c < g.cells(); ++c) {
    std::size_t t;
    if (c == 0) t = 0;
    else if (g.is_y(c)) t = d.first_y() + (c - g.first_y());
    else t = d.ladder_cell(g.level(c));
    mass[t] += ch.pi[static_cast<Eigen::Index>(c)];
  }
  for (std::size_t c = 0; c < d.cells(); ++c) d.values[c] = mass[c] / d.lengths[c];
  return d;
}

/// Density of the induced invariant measure w.r.t. normalized Lebesgue on Y.
struct InducedDensity {
  std::size_t cells = 0;
  std::vector<double> values;  // per-cell density, mean 1
  double residual = 0.0;       // largest row deficit of the Ulam matrix (mass with R > max_R)
  int iterations = 0;
  std::size_t max_R = 0;

  double mass(std::size_t i) const { return values[i] / static_cast<double>(cells); }
  /// nu_Y of [1/2, 1/2 + t], t in [0, 1/2].
  double cumulative(double t) const {
    const double pos = t * 2.0 * static_cast<double>(cells);
    const auto full = static_cast<std::size_t>(std::min(pos, static_cast<double>(cells)));
    double m = 0;
    for (std::size_t i = 0; i < full; ++i) m += mass(i);
    if (full < cells) m += values[full] * (pos - static_cast<double>(full)) / static_cast<double>(cells);
    return m;
  }
};

/// Ulam matrix of the induced map F_Y on M uniform cells of Y.
///
/// Preimages of cell j under the branch with return time n are the intervals
/// v1(v0^{n-1}[a_j, b_j]); overlaps are computed in the offset coordinate
/// t = y - 1/2, which keeps full precision for deep branches.
inline Eigen::MatrixXd induced_ulam_matrix(const MapSpec& map, const ZLadder& ladder, std::size_t M,
                                           std::size_t max_R) {
  require(M >= 2, "induced_ulam_matrix: need at least two cells");
  require(max_R >= 1 && max_R <= ladder.N(), "induced_ulam_matrix: max_R beyond ladder depth");
  Eigen::MatrixXd U = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(M), static_cast<Eigen::Index>(M));
  const double h = 0.5 / static_cast<double>(M);  // cell width in offset coordinates
  std::vector<double> cur(M + 1);
  for (std::size_t j = 0; j <= M; ++j) cur[j] = 0.5 + static_cast<double>(j) * h;
  for (std::size_t n = 1; n <= max_R; ++n) {
    if (n >= 2) {
      for (std::size_t j = 1; j < M; ++j) cur[j] = v0(map, cur[j]);
      cur[0] = ladder.z[n];
      cur[M] = ladder.z[n - 1];
    }
    for (std::size_t j = 0; j < M; ++j) {
      // offset coordinates of the preimage interval
      const double lo = 0.5 * cur[j], hi = 0.5 * cur[j + 1];
      const auto first = static_cast<std::size_t>(lo / h);
      for (std::size_t i = std::min(first, M - 1); i < M; ++i) {
        const double a = std::max(lo, static_cast<double>(i) * h);
        const double b = std::min(hi, static_cast<double>(i + 1) * h);
        if (b > a) U(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) += (b - a) / h;
        if (static_cast<double>(i + 1) * h >= hi) break;
      }
    }
  }
  return U;
}

inline InducedDensity induced_density(const MapSpec& map, const ZLadder& ladder, std::size_t cells,
                                      std::size_t max_R, double tol = 1e-13) {
  require(cells >= 32, "induced_density: need at least 32 cells");
  const Eigen::MatrixXd U = induced_ulam_matrix(map, ladder, cells, max_R);
  InducedDensity out;
  out.cells = cells;
  out.max_R = max_R;
  const Eigen::VectorXd rows = U.rowwise().sum();
  out.residual = (1.0 - rows.array()).abs().maxCoeff();
  Eigen::RowVectorXd x = Eigen::RowVectorXd::Constant(static_cast<Eigen::Index>(cells), 1.0 / static_cast<double>(cells));
  double diff = 1;
  int it = 0;
  for (; it < 100000 && diff >= tol; ++it) {
    Eigen::RowVectorXd nx = x * U;
    nx /= nx.sum();
    diff = (nx - x).cwiseAbs().sum();
    x = nx;
  }
  if (diff >= 1e-9) throw NumericFailure("induced_density: power iteration stagnated", diff, 0.0);
  out.iterations = it;
  out.values.resize(cells);
  for (std::size_t i = 0; i < cells; ++i) out.values[i] = x[static_cast<Eigen::Index>(i)] * static_cast<double>(cells);
  return out;
}

/// nu built from nu_Y: mass nu_Y(R > k) on J_k, normalized by E[R].
inline DensityGrid pull_back_density(const InducedDensity& induced, const ZLadder& ladder, std::size_t depth,
                                     std::size_t n_terms, double p) {
  require(n_terms >= depth && n_terms <= ladder.N(), "pull_back_density: bad truncation");
  require(induced.cells >= 1, "pull_back_density: empty induced density");
  DensityGrid d = density_layout(ladder, depth, induced.cells);
  d.tag = "pullback";
  // tail[k] = nu_Y(R > k) = nu_Y([1/2, 1/2 + z_k / 2])
  std::vector<double> tail(n_terms + 1);
  tail[0] = 1.0;
  for (std::size_t k = 1; k <= n_terms; ++k) tail[k] = induced.cumulative(0.5 * ladder.z[k]);
  double total = 0;
  for (double t : tail) total += t;
  // regularly varying tail: sum_{k > n} k^-p ~ n * term / (p - 1)
  const double missing = p > 1 ? tail[n_terms] * static_cast<double>(n_terms) / (p - 1.0) : 0.0;
  double sink = 0;
  for (std::size_t k = depth + 1; k <= n_terms; ++k) sink += tail[k];
  d.values[0] = sink / total / d.lengths[0];
  for (std::size_t k = 1; k <= depth; ++k) d.values[d.ladder_cell(k)] = tail[k] / total / d.lengths[d.ladder_cell(k)];
  for (std::size_t j = 0; j < induced.cells; ++j) d.values[d.first_y() + j] = induced.mass(j) / total / d.lengths[d.first_y() + j];
  d.truncation = missing / (total + missing);
  return d;
}

struct EmpiricalReport {
  DensityGrid density;
  std::size_t restarts = 0;
};

/// Orbit histogram. The start is x0 shifted by a seed-dependent jitter of size 1e-9.
inline EmpiricalReport empirical_density(const MapSpec& map, double x0, std::size_t burn_in, std::size_t n_iter,
                                         const DensityGrid& layout, std::uint64_t seed) {
  require(n_iter >= 100000, "empirical_density: n_iter must be at least 1e5");
  require(x0 > 0 && x0 < 1, "empirical_density: x0 outside (0, 1)");
  Rng rng = make_stream(seed, 0);
  auto fresh = [&] { return std::clamp(x0 + 1e-9 * (2.0 * uniform01(rng) - 1.0), 1e-12, 1.0 - 1e-12); };
  EmpiricalReport rep;
  rep.density = layout;
  rep.density.tag = "empirical";
  std::vector<double> counts(layout.cells(), 0.0);
  double x = fresh();
  for (std::size_t t = 0; t < burn_in + n_iter; ++t) {
    x = evaluate(map, x).f;
    if (x <= 0.0 || x >= 1.0) {  // 0 and 1 are fixed points of the floating-point orbit
      ++rep.restarts;
      x = fresh();
    }
    if (t >= burn_in) counts[layout.locate(x)] += 1.0;
  }
  for (std::size_t c = 0; c < layout.cells(); ++c)
    rep.density.values[c] = counts[c] / static_cast<double>(n_iter) / layout.lengths[c];
  return rep;
}

/// Gauss-Legendre nodes and weights on [-1, 1].
template <std::size_t N>
inline const std::array<std::pair<double, double>, N>& gauss_legendre() {
  static const std::array<std::pair<double, double>, N> table = [] {
    std::array<std::pair<double, double>, N> t{};
    for (std::size_t i = 0; i < N; ++i) {
      double x = std::cos(M_PI * (static_cast<double>(i) + 0.75) / (static_cast<double>(N) + 0.5));
      double dp = 1;
      for (int it = 0; it < 100; ++it) {
        double p0 = 1, p1 = x;
        for (std::size_t k = 2; k <= N; ++k) {
          const double p2 = ((2.0 * static_cast<double>(k) - 1.0) * x * p1 - (static_cast<double>(k) - 1.0) * p0) / static_cast<double>(k);
          p0 = p1;
          p1 = p2;
        }
        dp = static_cast<double>(N) * (x * p1 - p0) / (x * x - 1.0);
        const double dx = p1 / dp;
        x -= dx;
        if (std::abs(dx) < 1e-16) break;
      }
      t[i] = {x, 2.0 / ((1.0 - x * x) * dp * dp)};
    }
    return t;
  }();
  return table;
}

struct FixedPointReport {
  double max_relative_deviation = 0.0;  // over J_1 .. J_{check_depth}
  bool terms_positive = true;
  double truncation_tail = 0.0;  // largest estimated relative tail of the series
  std::vector<double> deviations;  // per J_k, k = 1..check_depth
};

/// Compares the density on J_k with the cell average of
/// sum_n |(v1 v0^n)'(x)| h(v1 v0^n x), using the density's own values on Y.
inline FixedPointReport density_fixed_point_check(const MapSpec& map, const DensityGrid& density,
                                                  std::size_t check_depth, std::size_t n_terms) {
  require(check_depth >= 1 && check_depth <= density.depth, "density_fixed_point_check: bad depth");
  for (std::size_t j = 0; j < density.y_cells; ++j)
    require(density.values[density.first_y() + j] > 0, "density_fixed_point_check: density must be positive on Y");
  FixedPointReport rep;
  const auto& gl = gauss_legendre<5>();
  const double M = static_cast<double>(density.y_cells);
  auto h_y = [&](double offset) {
    const auto i = std::min(static_cast<std::size_t>(offset * 2.0 * M), density.y_cells - 1);
    return density.values[density.first_y() + i];
  };
  for (std::size_t k = 1; k <= check_depth; ++k) {
    const std::size_t c = density.ladder_cell(k);
    const double a = density.edges[c], b = density.edges[c + 1];
    double avg = 0;
    for (const auto& [node, weight] : gl) {
      const double x = 0.5 * (a + b) + 0.5 * (b - a) * node;
      double y = x, d = 1.0, sum = 0, term = 0;
      for (std::size_t n = 0; n < n_terms; ++n) {
        if (n > 0) {
          y = v0(map, y);
          d /= evaluate(map, y).df;
        }
        term = 0.5 * d * h_y(0.5 * y);
        if (!(term > 0)) rep.terms_positive = false;
        sum += term;
      }
      const double p = map.p();
      rep.truncation_tail = std::max(rep.truncation_tail, term * static_cast<double>(n_terms) / p / sum);
      avg += 0.5 * weight * sum;
    }
    const double dev = std::abs(avg - density.values[c]) / density.values[c];
    rep.deviations.push_back(dev);
    rep.max_relative_deviation = std::max(rep.max_relative_deviation, dev);
  }
  return rep;
}

/// Kac partial sums: sum_{n <= N} n nu(Y ∩ {R = n}) from a stationary density.
/// Entry N - 1 of the result holds the partial sum up to N.
inline std::vector<double> kac_partial_sums(const DensityGrid& density, const ZLadder& ladder, std::size_t N) {
  require(N >= 1 && N <= ladder.N(), "kac_partial_sums: N beyond ladder depth");
  const double M = static_cast<double>(density.y_cells);
  // {R = n} ∩ Y = v1(J_{n-1}); in offset coordinates [z_n / 2, z_{n-1} / 2].
  auto mass_between = [&](double lo, double hi) {
    double m = 0;
    const auto first = static_cast<std::size_t>(lo * 2.0 * M);
    for (std::size_t i = first; i < density.y_cells; ++i) {
      const double a = std::max(lo, static_cast<double>(i) / (2.0 * M));
      const double b = std::min(hi, static_cast<double>(i + 1) / (2.0 * M));
      if (b > a) m += density.values[density.first_y() + i] * (b - a);
      if (static_cast<double>(i + 1) / (2.0 * M) >= hi) break;
    }
    return m;
  };
  std::vector<double> out(N);
  double acc = 0;
  for (std::size_t n = 1; n <= N; ++n) {
    acc += static_cast<double>(n) * mass_between(0.5 * ladder.z[n], 0.5 * ladder.z[n - 1]);
    out[n - 1] = acc;
  }
  return out;
}

/// L1 change of a density under one step of the Lebesgue transfer operator on
/// the q = 1 Ulam partition of the same layout.
inline double invariance_residual(const UlamChain& chain, const DensityGrid& density) {
  require(chain.grid.q() == 1 && chain.cells() == density.cells(), "invariance_residual: layout mismatch");
  const SparseRM L = chain.lebesgue_operator();
  Vec g(static_cast<Eigen::Index>(density.cells()));
  for (std::size_t c = 0; c < density.cells(); ++c) g[static_cast<Eigen::Index>(c)] = density.values[c];
  const Vec lg = L * g;
  double r = 0;
  for (std::size_t c = 0; c < density.cells(); ++c) r += std::abs(lg[static_cast<Eigen::Index>(c)] - g[static_cast<Eigen::Index>(c)]) * density.lengths[c];
  return r;
}

/// Smooth invariant density: Chebyshev collocation of the induced
/// Perron-Frobenius equation on Y, extended to [0, 1/2] by the pull-back series.
class SmoothDensity {
 public:
  SmoothDensity(const MapSpec& map, const ZLadder& ladder, std::size_t nodes = 40, std::size_t max_R = 10000)
      : map_(map), max_R_(std::min(max_R, ladder.N())), n_(nodes) {
    require(nodes >= 8, "SmoothDensity: need at least 8 nodes");
    x_.resize(n_);
    bw_.resize(n_);
    for (std::size_t k = 0; k < n_; ++k) {
      const double th = M_PI * (static_cast<double>(k) + 0.5) / static_cast<double>(n_);
      x_[k] = 0.75 + 0.25 * std::cos(th);
      bw_[k] = (k % 2 ? -1.0 : 1.0) * std::sin(th);
    }
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(n_));
    std::vector<double> basis(n_);
    for (std::size_t k = 0; k < n_; ++k) {
      double y = x_[k], d = 1.0;
      for (std::size_t n = 1; n <= max_R_; ++n) {
        if (n >= 2) {
          y = v0(map_, y);
          d /= evaluate(map_, y).df;
        }
        lagrange(0.5 + 0.5 * y, basis);
        for (std::size_t l = 0; l < n_; ++l) A(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(l)) += 0.5 * d * basis[l];
      }
    }
    Eigen::VectorXd v = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(n_));
    double diff = 1;
    for (int it = 0; it < 5000 && diff > 1e-15; ++it) {
      Eigen::VectorXd nv = A * v;
      nv /= nv.mean();
      diff = (nv - v).cwiseAbs().maxCoeff();
      v = nv;
    }
    vals_.assign(v.data(), v.data() + n_);
    // normalize to a probability on Y, then divide by E[R] = sum_k nu_Y(R > k)
    const double mass_y = integrate_y(0.5, 1.0);
    for (auto& c : vals_) c /= mass_y;
    double er = 1.0;
    for (std::size_t k = 1; k <= max_R_; ++k) er += integrate_y(0.5, 0.5 + 0.5 * ladder.z[k]);
    expected_return_ = er;
    for (auto& c : vals_) c /= er;
  }

  double expected_return() const { return expected_return_; }

  /// h on Y from the interpolant.
  double on_y(double y) const {
    std::vector<double> basis(n_);
    lagrange(y, basis);
    double s = 0;
    for (std::size_t l = 0; l < n_; ++l) s += basis[l] * vals_[l];
    return s;
  }

  double operator()(double x) const {
    require(x > 0 && x <= 1, "SmoothDensity: x outside (0, 1]");
    if (x > 0.5) return on_y(x);
    double y = x, d = 1.0, s = 0;
    for (std::size_t n = 0; n < max_R_; ++n) {
      if (n > 0) {
        y = v0(map_, y);
        d /= evaluate(map_, y).df;
      }
      s += 0.5 * d * on_y(0.5 + 0.5 * y);
    }
    return s;
  }

  /// Pointwise transfer operator K phi(x) with weights h/|f'| over the two preimages.
  template <typename Fn>
  double apply_K(const Fn& phi, double x) const {
    const double hx = (*this)(x);
    if (!(hx > 1e-12)) throw NumericFailure("apply_K: density below floor", hx, x);
    const double y = v0(map_, x);
    const double s = 0.5 * on_y(v1(x)) * phi(v1(x)) + (*this)(y) / evaluate(map_, y).df * phi(y);
    return s / hx;
  }

  const MapSpec& map() const { return map_; }

 private:
  void lagrange(double y, std::vector<double>& out) const {
    double denom = 0;
    for (std::size_t l = 0; l < n_; ++l) {
      const double diff = y - x_[l];
      if (diff == 0) {
        std::fill(out.begin(), out.end(), 0.0);
        out[l] = 1.0;
        return;
      }
      out[l] = bw_[l] / diff;
      denom += out[l];
    }
    for (auto& v : out) v /= denom;
  }

  double integrate_y(double a, double b) const {
    const auto& gl = gauss_legendre<16>();
    double s = 0;
    for (const auto& [node, weight] : gl) s += weight * on_y(0.5 * (a + b) + 0.5 * (b - a) * node);
    return 0.5 * (b - a) * s;
  }

  MapSpec map_;
  std::size_t max_R_;
  std::size_t n_;
  std::vector<double> x_, bw_, vals_;
  double expected_return_ = 1.0;
};

}  // namespace intermittent
