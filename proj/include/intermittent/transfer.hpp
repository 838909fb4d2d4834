#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <string>
#include <vector>

#include "intermittent/error.hpp"
#include "intermittent/ulam.hpp"

namespace intermittent {

/// Total variation of a grid function extended by zero outside [0, 1].
inline double bv_variation(const Vec& v) {
  if (v.size() == 0) return 0.0;
  double s = std::abs(v[0]) + std::abs(v[v.size() - 1]);
  for (Eigen::Index i = 1; i < v.size(); ++i) s += std::abs(v[i] - v[i - 1]);
  return s;
}

/// Variation of the signed measure d(phi) on [0, 1] (no jumps at the ends).
inline double interior_variation(const Vec& v) {
  double s = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) s += std::abs(v[i] - v[i - 1]);
  return s;
}

inline Vec mask_y(const UlamChain& ch, Vec v) {
  v.head(static_cast<Eigen::Index>(ch.grid.first_y())).setZero();
  return v;
}
inline Vec mask_0(const UlamChain& ch, Vec v) {
  v.tail(static_cast<Eigen::Index>(ch.grid.y_cells())).setZero();
  return v;
}

/// Cell averages of a function given by its antiderivative.
template <typename Anti>
inline Vec cell_average(const UlamChain& ch, const Anti& F) {
  Vec v(static_cast<Eigen::Index>(ch.cells()));
  for (std::size_t c = 0; c < ch.cells(); ++c)
    v[static_cast<Eigen::Index>(c)] = (F(ch.grid.right(c)) - F(ch.grid.left(c))) / (ch.grid.right(c) - ch.grid.left(c));
  return v;
}

/// Cell averages of the indicator of [a, b].
inline Vec interval_indicator(const UlamChain& ch, double a, double b) {
  return cell_average(ch, [a, b](double x) { return std::clamp(x, a, b) - a; });
}

/// Excursion operators on the Y grid.
///
/// Lambda_1 is K restricted to Y. For n >= 2 the kernel factors through the
/// q sub-cells of J_1: Lambda_n(j, i) = sum_s G(j, s) C_n(s, i) with
/// G(j, s) = P(J_{1,s}, y_j) / pi_j and C_n(s, i) = pi_i * P(y_i reaches J_{1,s} after n - 1 steps).
class ExcursionOperators {
 public:
  explicit ExcursionOperators(const UlamChain& ch) : ch_(ch) {
    const LadderGrid& g = ch.grid;
    M_ = g.y_cells();
    q_ = g.q();
    D_ = g.depth();
    const auto y0 = static_cast<Eigen::Index>(g.first_y());
    const auto Mi = static_cast<Eigen::Index>(M_);
    lambda1_ = ch.K.block(y0, y0, Mi, Mi);
    G_ = Eigen::MatrixXd::Zero(Mi, static_cast<Eigen::Index>(q_));
    for (std::size_t s = 0; s < q_; ++s)
      for (SparseRM::InnerIterator it(ch.P, static_cast<Eigen::Index>(g.ladder_cell(1, s))); it; ++it)
        G_(it.col() - y0, static_cast<Eigen::Index>(s)) = it.value() / ch.pi[it.col()];
    flow_.assign(D_ + 1, Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(q_), Mi));
    to_sink_ = Eigen::RowVectorXd::Zero(Mi);
    for (Eigen::Index i = 0; i < Mi; ++i) {
      const double pi_i = ch.pi[y0 + i];
      for (SparseRM::InnerIterator it(ch.P, y0 + i); it; ++it) {
        const auto c = static_cast<std::size_t>(it.col());
        if (g.is_y(c)) continue;
        if (c == 0) {
          to_sink_[i] += pi_i * it.value();
        } else {
          flow_[g.level(c)](static_cast<Eigen::Index>(g.sub_index(c)), i) += pi_i * it.value();
        }
      }
    }
    stay_ = g.sub_edge(D_ + 1, 0) / g.lengths()[0];
    w_.resize(static_cast<Eigen::Index>(q_));
    for (std::size_t s = 0; s < q_; ++s) w_[static_cast<Eigen::Index>(s)] = g.sub_length(D_ + 1, s);
    w_ /= w_.sum();
  }

  std::size_t y_cells() const { return M_; }
  std::size_t rank() const { return q_; }
  const SparseRM& lambda1() const { return lambda1_; }
  const Eigen::MatrixXd& G() const { return G_; }

  /// C_n (q x M) for n >= 2, including excursions through the sink when n > D + 1.
  Eigen::MatrixXd C(std::size_t n) const {
    require(n >= 2, "ExcursionOperators::C: n must be >= 2");
    if (n - 1 <= D_) return flow_[n - 1];
    // y -> sink, n - D - 2 further steps in the sink, exit to J_D, descend to J_1
    const double stay = std::pow(stay_, static_cast<double>(n - D_ - 2)) * (1.0 - stay_);
    return (w_ * to_sink_) * stay;
  }

  Vec apply(std::size_t n, const Vec& phi) const {
    require(n >= 1, "excursion operator index must be >= 1");
    if (n == 1) return lambda1_ * phi;
    return G_ * (C(n) * phi);
  }

  Eigen::MatrixXd dense(std::size_t n) const {
    if (n == 1) return Eigen::MatrixXd(lambda1_);
    return G_ * C(n);
  }

  /// sum_{n <= N} Lambda_n as a dense M x M matrix.
  Eigen::MatrixXd partial_sum(std::size_t N) const {
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(q_), static_cast<Eigen::Index>(M_));
    for (std::size_t n = 2; n <= N; ++n) acc += C(n);
    return Eigen::MatrixXd(lambda1_) + G_ * acc;
  }

  /// BV proxy of the operator norm: max over cell-aligned interval indicators of
  /// V(Lambda_n 1_I) / V(1_I), with V(1_I) = 2.
  double bv_norm(std::size_t n) const {
    const auto Mi = static_cast<Eigen::Index>(M_);
    double best = 0;
    if (n == 1) {
      const Eigen::MatrixXd L = Eigen::MatrixXd(lambda1_);
      for (Eigen::Index a = 0; a < Mi; ++a) {
        Vec acc = Vec::Zero(Mi);
        for (Eigen::Index b = a; b < Mi; ++b) {
          acc += L.col(b);
          best = std::max(best, bv_variation(acc) / 2.0);
        }
      }
      return best;
    }
    const Eigen::MatrixXd Cn = C(n);
    const std::size_t per = M_ / q_;
    // internal variation and end values of each block of G
    std::vector<double> vint(q_), first(q_), last(q_);
    for (std::size_t s = 0; s < q_; ++s) {
      const auto b0 = static_cast<Eigen::Index>(s * per);
      const auto bs = static_cast<Eigen::Index>(s);
      first[s] = G_(b0, bs);
      last[s] = G_(b0 + static_cast<Eigen::Index>(per) - 1, bs);
      double v = 0;
      for (Eigen::Index j = b0 + 1; j < b0 + static_cast<Eigen::Index>(per); ++j) v += std::abs(G_(j, bs) - G_(j - 1, bs));
      vint[s] = v;
    }
    std::vector<double> c(q_);
    for (Eigen::Index a = 0; a < Mi; ++a) {
      std::fill(c.begin(), c.end(), 0.0);
      for (Eigen::Index b = a; b < Mi; ++b) {
        for (std::size_t s = 0; s < q_; ++s) c[s] += Cn(static_cast<Eigen::Index>(s), b);
        double v = c[0] * first[0] + c[q_ - 1] * last[q_ - 1];
        for (std::size_t s = 0; s < q_; ++s) v += c[s] * vint[s];
        for (std::size_t s = 0; s + 1 < q_; ++s) v += std::abs(c[s] * last[s] - c[s + 1] * first[s + 1]);
        best = std::max(best, v / 2.0);
      }
    }
    return best;
  }

 private:
  const UlamChain& ch_;
  std::size_t M_ = 0, q_ = 0, D_ = 0;
  SparseRM lambda1_;
  Eigen::MatrixXd G_;
  std::vector<Eigen::MatrixXd> flow_;  // flow_[m](s, i) = pi_i P(y_i, J_{m,s})
  Eigen::RowVectorXd to_sink_;
  double stay_ = 0;
  Vec w_;
};

/// Restriction of a full-grid function to the Y cells.
inline Vec restrict_y(const UlamChain& ch, const Vec& phi) {
  return phi.tail(static_cast<Eigen::Index>(ch.grid.y_cells()));
}

/// integral over Y of phi against nu.
inline double integral_y(const UlamChain& ch, const Vec& phi_y) {
  return ch.pi.tail(static_cast<Eigen::Index>(ch.grid.y_cells())).dot(phi_y);
}

/// T_n phi for n = 0..N by the renewal recursion T_n = sum_{k=1}^n Lambda_k T_{n-k}.
inline std::vector<Vec> renewal_apply(const ExcursionOperators& ex, const Vec& phi_y, std::size_t N) {
  require(N <= 4096, "renewal_apply: N too large");
  std::vector<Vec> t(N + 1);
  std::vector<Eigen::MatrixXd> C(N + 1);
  for (std::size_t k = 2; k <= N; ++k) C[k] = ex.C(k);
  t[0] = phi_y;
  for (std::size_t n = 1; n <= N; ++n) {
    Vec acc = ex.lambda1() * t[n - 1];
    Vec coef = Vec::Zero(static_cast<Eigen::Index>(ex.rank()));
    for (std::size_t k = 2; k <= n; ++k) coef += C[k] * t[n - k];
    t[n] = acc + ex.G() * coef;
  }
  return t;
}

/// Dense T_1..T_N (index 0 holds the identity on Y).
inline std::vector<Eigen::MatrixXd> renewal_sequence(const ExcursionOperators& ex, std::size_t N) {
  require(N <= 512, "renewal_sequence: N is capped at 512");
  const auto M = static_cast<Eigen::Index>(ex.y_cells());
  require(static_cast<double>(N + 1) * static_cast<double>(M) * static_cast<double>(M) <= 6e7,
          "renewal_sequence: dense storage too large, use renewal_apply");
  std::vector<Eigen::MatrixXd> T(N + 1);
  T[0] = Eigen::MatrixXd::Identity(M, M);
  std::vector<Eigen::MatrixXd> C(N + 1);
  for (std::size_t k = 2; k <= N; ++k) C[k] = ex.C(k);
  for (std::size_t n = 1; n <= N; ++n) {
    Eigen::MatrixXd acc = ex.lambda1() * T[n - 1];
    Eigen::MatrixXd coef = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(ex.rank()), M);
    for (std::size_t k = 2; k <= n; ++k) coef += C[k] * T[n - k];
    T[n] = acc + ex.G() * coef;
  }
  return T;
}

/// T_n phi computed directly as 1_Y K^n 1_Y phi on the full grid.
inline Vec renewal_direct(const UlamChain& ch, const Vec& phi_y, std::size_t n) {
  Vec v = Vec::Zero(static_cast<Eigen::Index>(ch.cells()));
  v.tail(phi_y.size()) = phi_y;
  for (std::size_t k = 0; k < n; ++k) v = ch.K * v;
  return restrict_y(ch, v);
}

struct PathSplitResult {
  double residual = 0.0;     // sup |K^n phi - split|
  double c_integral = 0.0;   // nu(|C_n phi|)
  double c_bound = 0.0;      // sup|phi| nu([0, z_{n+1}])
  Vec kn_phi, split;
};

/// K^n phi against sum_{a+k+b=n} A_a T_k B_b phi + C_n phi, with
/// A_0 = B_0 = T_0 = 1_Y, A_a = M_0 (K M_0)^{a-1} K M_Y, B_b = M_Y (K M_0)^b,
/// T_k = M_Y K^k M_Y and C_n = M_0 (K M_0)^n.
inline PathSplitResult path_split_check(const UlamChain& ch, std::size_t n, const Vec& phi) {
  require(n >= 1 && n <= 64, "path_split_check: n must lie in [1, 64]");
  const auto& K = ch.K;
  // u_b = (K M_0)^b phi
  std::vector<Vec> u(n + 1);
  u[0] = phi;
  for (std::size_t b = 1; b <= n; ++b) u[b] = K * mask_0(ch, u[b - 1]);
  // v_m = sum_{k + b = m} T_k B_b phi
  std::vector<Vec> v(n + 1, Vec::Zero(phi.size()));
  for (std::size_t b = 0; b <= n; ++b) {
    Vec r = mask_y(ch, u[b]);
    v[b] += r;
    for (std::size_t k = 1; b + k <= n; ++k) {
      r = K * r;  // intermediate points of T_k are unrestricted
      v[b + k] += mask_y(ch, r);
    }
  }
  Vec split = v[n];  // a = 0
  for (std::size_t a = 1; a <= n; ++a) {
    Vec s = K * v[n - a];  // v already supported on Y
    for (std::size_t t = 1; t < a; ++t) s = K * mask_0(ch, s);
    split += mask_0(ch, s);
  }
  const Vec cn = mask_0(ch, u[n]);
  split += cn;
  PathSplitResult res;
  res.kn_phi = phi;
  for (std::size_t t = 0; t < n; ++t) res.kn_phi = K * res.kn_phi;
  res.residual = (res.kn_phi - split).cwiseAbs().maxCoeff();
  res.c_integral = ch.pi.dot(cn.cwiseAbs());
  // nu([0, z_{n+1}]) is the mass of the sink and the ladder cells of level > n
  double deep = 0;
  for (std::size_t c = 0; c < ch.cells(); ++c)
    if (!ch.grid.is_y(c) && ch.grid.level(c) > n) deep += ch.pi[static_cast<Eigen::Index>(c)];
  res.c_bound = phi.cwiseAbs().maxCoeff() * deep;
  res.split = std::move(split);
  return res;
}

/// Canonical BV_1 family: 101 half-indicators with ladder- and grid-aligned
/// endpoints, then the ramps x, x^2 and sqrt(x).
inline std::vector<Vec> alpha_test_family(const UlamChain& ch, const ZLadder& ladder) {
  std::vector<double> ends = {0.0};
  for (std::size_t k : {128u, 64u, 32u, 16u, 8u, 4u, 2u})
    if (k + 1 < ladder.z.size() && k <= ch.grid.depth()) ends.push_back(ladder.z[k]);
  for (int j = 0; j <= 8; ++j) ends.push_back(0.5 + j / 16.0);
  std::sort(ends.begin(), ends.end());
  ends.erase(std::unique(ends.begin(), ends.end()), ends.end());
  std::vector<Vec> fam;
  for (std::size_t i = 0; i < ends.size() && fam.size() < 101; ++i)
    for (std::size_t j = i + 1; j < ends.size() && fam.size() < 101; ++j)
      fam.push_back(0.5 * interval_indicator(ch, ends[i], ends[j]));
  fam.push_back(cell_average(ch, [](double x) { return 0.5 * x * x; }));
  fam.push_back(cell_average(ch, [](double x) { return x * x * x / 3.0; }));
  fam.push_back(cell_average(ch, [](double x) { return 2.0 / 3.0 * x * std::sqrt(x); }));
  return fam;
}

struct AlphaProfile {
  std::vector<std::size_t> n;
  std::vector<double> alpha;
};

/// alpha_1(n) = max over the family of nu(|K^n (phi - nu(phi))|), for every n in n_list.
inline AlphaProfile alpha_coefficient(const UlamChain& ch, const std::vector<Vec>& family,
                                      const std::vector<std::size_t>& n_list) {
  require(!family.empty(), "alpha_coefficient: empty test family");
  require(std::is_sorted(n_list.begin(), n_list.end()), "alpha_coefficient: n_list must be sorted");
  const auto cells = static_cast<Eigen::Index>(ch.cells());
  Eigen::MatrixXd Phi(cells, static_cast<Eigen::Index>(family.size()));
  for (std::size_t f = 0; f < family.size(); ++f) {
    Phi.col(static_cast<Eigen::Index>(f)) = family[f].array() - ch.pi.dot(family[f]);
  }
  AlphaProfile out;
  std::size_t cur = 0;
  for (std::size_t n : n_list) {
    for (; cur < n; ++cur) Phi = ch.K * Phi;
    double best = 0;
    for (Eigen::Index f = 0; f < Phi.cols(); ++f) best = std::max(best, ch.pi.dot(Phi.col(f).cwiseAbs()));
    out.n.push_back(n);
    out.alpha.push_back(best);
  }
  return out;
}

struct SpectralReport {
  double leading = 0.0;      // |lambda_1|
  double second = 0.0;       // |lambda_2|
  double gap = 0.0;
  double truncation = 0.0;   // 1 - nu_Y-weighted row mass of the truncated Lambda(1)
  bool left_vector_positive = false;
  Vec left_vector;           // normalized to a probability
};

inline SpectralReport spectral_probe(const UlamChain& ch, const ExcursionOperators& ex, std::size_t N_terms) {
  require(ex.y_cells() >= 64, "spectral_probe: need at least 64 Y cells");
  const Eigen::MatrixXd L = ex.partial_sum(N_terms);
  Eigen::EigenSolver<Eigen::MatrixXd> es(L.transpose());
  if (es.info() != Eigen::Success) throw NumericFailure("spectral_probe: eigen-solver failed", 0.0, 0.0);
  const auto ev = es.eigenvalues();
  std::vector<std::pair<double, Eigen::Index>> mods;
  for (Eigen::Index i = 0; i < ev.size(); ++i) mods.emplace_back(std::abs(ev[i]), i);
  std::sort(mods.begin(), mods.end(), [](auto& a, auto& b) { return a.first > b.first; });
  SpectralReport rep;
  rep.leading = mods[0].first;
  rep.second = mods.size() > 1 ? mods[1].first : 0.0;
  rep.gap = rep.leading - rep.second;
  Vec lv = es.eigenvectors().col(mods[0].second).real();
  lv /= lv.sum();
  rep.left_vector_positive = (lv.array() > 0).all();
  rep.left_vector = lv;
  const Vec piy = ch.pi.tail(static_cast<Eigen::Index>(ex.y_cells()));
  rep.truncation = 1.0 - piy.dot(L * Vec::Ones(L.cols())) / piy.sum();
  return rep;
}

/// Covariances <psi, K^k phi>_nu for k = 0..k_max (phi is centered first).
inline std::vector<double> covariance_series(const UlamChain& ch, const Vec& phi, const Vec& psi, std::size_t k_max) {
  Vec v = phi.array() - ch.pi.dot(phi);
  std::vector<double> out;
  out.reserve(k_max + 1);
  for (std::size_t k = 0; k <= k_max; ++k) {
    if (k > 0) v = ch.K * v;
    out.push_back(ch.pi.dot(psi.cwiseProduct(v)));
  }
  return out;
}

/// |<K phi, psi> - <phi, P psi>| in the nu inner product.
inline double duality_defect(const UlamChain& ch, const Vec& phi, const Vec& psi) {
  return std::abs(ch.pi.dot((ch.K * phi).cwiseProduct(psi)) - ch.pi.dot(phi.cwiseProduct(ch.P * psi)));
}

struct AbcProfile {
  std::vector<std::size_t> n;
  std::vector<double> var_a, var_b, var_c;
};

/// Variations of A_n phi, B_n phi and C_n phi along n = 1..n_max.
inline AbcProfile abc_variation_profile(const UlamChain& ch, const Vec& phi, std::size_t n_max) {
  AbcProfile out;
  Vec a = ch.K * mask_y(ch, phi);  // K M_Y phi, then (M_0 K) repeatedly
  Vec b = phi;                     // (K M_0)^n phi
  for (std::size_t n = 1; n <= n_max; ++n) {
    if (n > 1) a = ch.K * mask_0(ch, a);
    b = ch.K * mask_0(ch, b);
    out.n.push_back(n);
    out.var_a.push_back(bv_variation(mask_0(ch, a)));
    out.var_b.push_back(bv_variation(mask_y(ch, b)));
    out.var_c.push_back(bv_variation(mask_0(ch, b)));
  }
  return out;
}

}  // namespace intermittent
