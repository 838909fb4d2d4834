#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "intermittent/config.hpp"
#include "intermittent/io.hpp"
#include "intermittent/maps.hpp"
#include "intermittent/measure.hpp"
#include "intermittent/process.hpp"
#include "intermittent/stats.hpp"
#include "intermittent/tower.hpp"
#include "intermittent/transfer.hpp"
#include "intermittent/ulam.hpp"

namespace intermittent {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

inline constexpr const char* kVersion = "0.1.0";

inline MapSpec map_from_config(const ExperimentConfig::Map& m) {
  const SlowVaryFn rho = slowvary_from_tag(m.rho, m.rho_a, m.rho_b, SvOrientation::AtZero);
  return m.check_mode ? MapSpec::unnormalized(m.gamma, rho) : MapSpec::make(m.gamma, rho);
}

inline Observable make_observable(const std::string& kind, double alpha, double lo, double hi, const MapSpec& map) {
  if (kind == "identity") return Observable::identity();
  if (kind == "power") return Observable::power(alpha);
  if (kind == "indicator") return Observable::indicator(lo, hi);
  if (kind == "coboundary") return Observable::coboundary(map, alpha);
  throw InvalidInput("unknown observable '" + kind + "'");
}

inline std::uint64_t stage_seed(std::uint64_t seed, const std::string& stage) {
  return splitmix64(seed ^ io::fnv1a64(stage));
}

/// Shared state of one run: lazily built artifacts, written files and diagnostics.
class RunContext {
 public:
  RunContext(ExperimentConfig cfg, fs::path out, std::ostream* log = nullptr)
      : cfg_(std::move(cfg)), out_(std::move(out)), log_(log), map_(map_from_config(cfg_.map)) {
    fs::create_directories(out_);
  }

  const ExperimentConfig& config() const { return cfg_; }
  const MapSpec& map() const { return map_; }
  const fs::path& out() const { return out_; }
  int threads() const { return cfg_.run.threads; }

  /// Ladder with at least N rungs. Prefixes do not depend on the size built.
  const ZLadder& ladder(std::size_t N) {
    if (!ladder_ || ladder_->N() < N) ladder_ = std::make_unique<ZLadder>(z_ladder(map_, std::max<std::size_t>(N, 2)));
    return *ladder_;
  }

  std::size_t density_ladder_size() const {
    const auto& d = cfg_.density;
    return std::max({d.depth + 1, d.max_R, d.kac_N, d.smooth_max_R});
  }

  const InducedDensity& induced() {
    if (induced_) return *induced_;
    const auto& d = cfg_.density;
    std::string key = serialize_map() + "|" + std::to_string(d.y_cells) + "|" + std::to_string(d.max_R);
    const fs::path cache = out_ / "cache" / ("induced_" + io::hex64(io::fnv1a64(key)) + ".json");
    if (fs::exists(cache)) {
      const json j = json::parse(io::read_file(cache));
      InducedDensity ind;
      ind.cells = j.at("cells").get<std::size_t>();
      ind.values = j.at("values").get<std::vector<double>>();
      ind.residual = j.at("residual").get<double>();
      ind.iterations = j.at("iterations").get<int>();
      ind.max_R = j.at("max_R").get<std::size_t>();
      induced_ = std::make_unique<InducedDensity>(std::move(ind));
      cache_status_["induced"] = "hit";
    } else {
      induced_ = std::make_unique<InducedDensity>(
          induced_density(map_, ladder(density_ladder_size()), d.y_cells, d.max_R));
      fs::create_directories(cache.parent_path());
      json j;
      j["cells"] = induced_->cells;
      j["values"] = induced_->values;
      j["residual"] = induced_->residual;
      j["iterations"] = induced_->iterations;
      j["max_R"] = induced_->max_R;
      io::write_file(cache, j.dump());
      cache_status_["induced"] = "miss";
    }
    return *induced_;
  }

  const DensityGrid& pullback() {
    if (!pullback_) {
      const auto& d = cfg_.density;
      pullback_ = std::make_unique<DensityGrid>(
          pull_back_density(induced(), ladder(density_ladder_size()), d.depth, d.max_R, map_.p()));
    }
    return *pullback_;
  }

  const SmoothDensity& smooth() {
    if (!smooth_) {
      const auto& d = cfg_.density;
      smooth_ = std::make_unique<SmoothDensity>(map_, ladder(density_ladder_size()), d.smooth_nodes, d.smooth_max_R);
    }
    return *smooth_;
  }

  Observable centered_observable(const std::string& kind, double alpha, double lo, double hi) {
    const Observable raw = make_observable(kind, alpha, lo, hi, map_);
    return center(raw, smooth(), pullback(), std::min(cfg_.density.center_depth, cfg_.density.depth));
  }

  void write(const std::string& name, const io::Csv& csv) {
    const std::string text = csv.str();
    io::write_file(out_ / name, text);
    files_[name] = {io::fnv1a64(text), text.size()};
  }

  json& diag(const std::string& stage) { return diagnostics_[stage]; }
  const json& diagnostics() const { return diagnostics_; }
  const std::map<std::string, std::pair<std::uint64_t, std::size_t>>& files() const { return files_; }
  const std::map<std::string, std::string>& cache_status() const { return cache_status_; }

  void say(const std::string& msg) {
    if (log_) *log_ << msg << std::endl;
  }

 private:
  std::string serialize_map() const {
    ExperimentConfig c;
    c.map = cfg_.map;
    std::string s;
    visit_fields(c, [&](const char* sec, const char* key, const auto& v) {
      if (std::string(sec) == "map") s += std::string(key) + "=" + detail::FieldIO::format(v) + ";";
    });
    return s;
  }

  ExperimentConfig cfg_;
  fs::path out_;
  std::ostream* log_;
  MapSpec map_;
  std::unique_ptr<ZLadder> ladder_;
  std::unique_ptr<InducedDensity> induced_;
  std::unique_ptr<DensityGrid> pullback_;
  std::unique_ptr<SmoothDensity> smooth_;
  json diagnostics_ = json::object();
  std::map<std::string, std::pair<std::uint64_t, std::size_t>> files_;
  std::map<std::string, std::string> cache_status_;
};

// ---------------------------------------------------------------------------
// Stages

inline void stage_ladder(RunContext& ctx) {
  const auto& cfg = ctx.config();
  const ZLadder& lad = ctx.ladder(cfg.ladder.N);
  io::Csv csv({"n", "z", "length", "ratio"});
  for (std::size_t n = 1; n <= cfg.ladder.N; ++n)
    csv.row({static_cast<long long>(n), lad.z[n], lad.lengths[n], asymptotic_ratio(ctx.map(), lad, n)});
  ctx.write("ladder.csv", csv);
  const std::size_t n = std::min(cfg.tolerances.ladder_n, cfg.ladder.N);
  ctx.diag("ladder")["ratio_at_n"] = asymptotic_ratio(ctx.map(), lad, n);
  ctx.diag("ladder")["n"] = n;
}

inline void stage_tails(RunContext& ctx) {
  const auto& t = ctx.config().tails;
  const ZLadder& lad = ctx.ladder(t.n_hi + 1);
  // empirical m(R > n) from Lebesgue-uniform points of Y
  std::vector<long> R(t.samples);
  const std::uint64_t seed = stage_seed(ctx.config().run.seed, "tails");
  const std::size_t chunk = 65536;
  parallel_for((t.samples + chunk - 1) / chunk, ctx.threads(), [&](std::size_t c) {
    Rng rng = make_stream(seed, c);
    for (std::size_t i = c * chunk; i < std::min(t.samples, (c + 1) * chunk); ++i) {
      const double x = 0.5 + 0.5 * uniform01(rng);
      try {
        R[i] = return_time(lad, x);
      } catch (const LadderExhausted&) {
        R[i] = static_cast<long>(lad.N()) + 2;
      }
    }
  });
  std::sort(R.begin(), R.end());
  io::Csv csv({"n", "z", "empirical", "count"});
  for (long n : stats::geometric_grid(static_cast<long>(t.n_lo), static_cast<long>(t.n_hi), static_cast<int>(t.points))) {
    const auto cnt = static_cast<long long>(R.end() - std::upper_bound(R.begin(), R.end(), n));
    csv.row({static_cast<long long>(n), lad.z[static_cast<std::size_t>(n)],
             static_cast<double>(cnt) / static_cast<double>(t.samples), cnt});
  }
  ctx.write("tails.csv", csv);
}

inline void stage_density(RunContext& ctx) {
  const auto& d = ctx.config().density;
  const MapSpec& map = ctx.map();
  const ZLadder& lad = ctx.ladder(ctx.density_ladder_size());
  const UlamChain ch = build_ulam_chain(map, lad, d.depth, 1, d.y_cells);
  const DensityGrid ud = ulam_density(ch, lad);
  const DensityGrid& pb = ctx.pullback();
  const auto emp = empirical_density(map, d.x0, d.burn_in, d.empirical_iter, ud,
                                     stage_seed(ctx.config().run.seed, "density"));
  io::Csv dens({"cell", "left", "right", "ulam", "pullback", "empirical"});
  for (std::size_t c = 0; c < ud.cells(); ++c)
    dens.row({static_cast<long long>(c), ud.edges[c], ud.edges[c + 1], ud.values[c], pb.values[c],
              emp.density.values[c]});
  ctx.write("density.csv", dens);

  const auto kac_u = kac_partial_sums(ud, lad, d.kac_N);
  const auto kac_p = kac_partial_sums(pb, lad, d.kac_N);
  io::Csv kac({"N", "ulam", "pullback"});
  for (std::size_t n = 1; n <= d.kac_N; ++n) kac.row({static_cast<long long>(n), kac_u[n - 1], kac_p[n - 1]});
  ctx.write("kac.csv", kac);

  io::Csv hr({"n", "ulam", "pullback", "empirical"});
  for (std::size_t n = d.h_from; n <= std::min(d.h_to, d.depth); ++n) {
    const std::size_t c = ud.ladder_cell(n);
    const double nn = static_cast<double>(n);
    hr.row({static_cast<long long>(n), ud.values[c] / nn, pb.values[c] / nn, emp.density.values[c] / nn});
  }
  ctx.write("hratio.csv", hr);

  const std::size_t fp_depth = std::min(d.fixed_point_depth, d.depth);
  const auto fp = density_fixed_point_check(map, pb, fp_depth, d.max_R);
  io::Csv fpc({"k", "deviation"});
  for (std::size_t k = 1; k <= fp.deviations.size(); ++k) fpc.row({static_cast<long long>(k), fp.deviations[k - 1]});
  ctx.write("fixed_point.csv", fpc);

  auto& g = ctx.diag("density");
  g["induced_residual"] = ctx.induced().residual;
  g["pullback_truncation"] = pb.truncation;
  g["empirical_restarts"] = emp.restarts;
  g["invariance_residual_pullback"] = invariance_residual(ch, pb);
  g["fixed_point_max_deviation"] = fp.max_relative_deviation;
  g["expected_return_smooth"] = ctx.smooth().expected_return();
}

inline void stage_operators(RunContext& ctx) {
  const auto& o = ctx.config().operators;
  const MapSpec& map = ctx.map();
  const ZLadder& lad = ctx.ladder(std::max(o.depth, o.split_depth) + 2);
  const UlamChain ch = build_ulam_chain(map, lad, o.depth, o.q, o.y_cells);
  const ExcursionOperators ex(ch);
  const auto M = static_cast<Eigen::Index>(o.y_cells);

  io::Csv bv({"n", "bv_norm"});
  for (long n : stats::geometric_grid(static_cast<long>(o.bv_lo), static_cast<long>(o.bv_hi), static_cast<int>(o.bv_points)))
    bv.row({static_cast<long long>(n), ex.bv_norm(static_cast<std::size_t>(n))});
  ctx.write("bvnorm.csv", bv);

  const Eigen::MatrixXd S = ex.partial_sum(o.sum_N);
  const Vec one = Vec::Ones(M);
  const auto sp = spectral_probe(ch, ex, o.sum_N);
  io::Csv ls({"N", "sup_deviation", "leading", "second", "gap", "truncation", "left_positive"});
  ls.row({static_cast<long long>(o.sum_N), (S * one - one).cwiseAbs().maxCoeff(), sp.leading, sp.second, sp.gap,
          sp.truncation, static_cast<long long>(sp.left_vector_positive)});
  ctx.write("lambda_sum.csv", ls);

  // renewal: 1_Y, a ramp and a half indicator on Y
  std::vector<Vec> tests{one};
  Vec ramp(M), half = Vec::Zero(M);
  for (Eigen::Index j = 0; j < M; ++j) ramp[j] = (static_cast<double>(j) + 0.5) / static_cast<double>(M);
  half.head(M / 2).setOnes();
  tests.push_back(ramp);
  tests.push_back(half);
  const auto grid = stats::geometric_grid(static_cast<long>(o.renewal_lo), static_cast<long>(o.renewal_N),
                                          static_cast<int>(o.renewal_points));
  std::vector<double> worst(grid.size(), 0.0);
  double recursion_gap = 0;
  for (const Vec& phi : tests) {
    const auto T = renewal_apply(ex, phi, o.renewal_N);
    const double target = integral_y(ch, phi);
    for (std::size_t g = 0; g < grid.size(); ++g)
      worst[g] = std::max(worst[g], (T[static_cast<std::size_t>(grid[g])].array() - target).abs().maxCoeff());
    const std::size_t nd = std::min<std::size_t>(32, o.renewal_N);
    recursion_gap = std::max(recursion_gap, (renewal_direct(ch, phi, nd) - T[nd]).cwiseAbs().maxCoeff());
  }
  io::Csv rn({"n", "deviation"});
  for (std::size_t g = 0; g < grid.size(); ++g) rn.row({static_cast<long long>(grid[g]), worst[g]});
  ctx.write("renewal.csv", rn);

  const UlamChain small = build_ulam_chain(map, lad, o.split_depth, 1, o.split_y_cells);
  Vec phi = interval_indicator(small, 0.6, 0.8);
  phi.array() -= small.pi.dot(phi);
  io::Csv sc({"n", "residual", "c_integral", "c_bound"});
  for (std::size_t n = 1; n <= o.split_n; ++n) {
    const auto r = path_split_check(small, n, phi);
    sc.row({static_cast<long long>(n), r.residual, r.c_integral, r.c_bound});
  }
  ctx.write("split.csv", sc);

  auto& g = ctx.diag("operators");
  g["cells"] = ch.cells();
  g["split_cells"] = small.cells();
  g["renewal_recursion_vs_direct"] = recursion_gap;
  g["spectral_gap"] = sp.gap;
  g["lambda_truncation"] = sp.truncation;
}

inline void stage_mixing(RunContext& ctx) {
  const auto& m = ctx.config().mixing;
  const ZLadder& lad = ctx.ladder(m.depth + 2);
  const UlamChain ch = build_ulam_chain(ctx.map(), lad, m.depth, m.q, m.y_cells);
  const auto family = alpha_test_family(ch, lad);
  std::vector<std::size_t> ns;
  for (long n : stats::geometric_grid(static_cast<long>(m.n_lo), static_cast<long>(m.n_hi), static_cast<int>(m.points)))
    ns.push_back(static_cast<std::size_t>(n));
  const auto prof = alpha_coefficient(ch, family, ns);
  io::Csv csv({"n", "alpha"});
  for (std::size_t i = 0; i < prof.n.size(); ++i) csv.row({static_cast<long long>(prof.n[i]), prof.alpha[i]});
  ctx.write("alpha.csv", csv);
  ctx.diag("mixing")["family_size"] = family.size();
}

inline void stage_tower(RunContext& ctx) {
  const auto& t = ctx.config().tower;
  const double p = ctx.map().p();
  const ZLadder lad = z_ladder(ctx.map(), t.ladder_N);
  const BlockHeightLaw law(t.xi, LetterLaw::from_ladder(lad, p),
                           t.reading == "height" ? WordReading::GeometricHeight : WordReading::GeometricLength);
  const auto run = simulate_tower(law, t.samples, stage_seed(ctx.config().run.seed, "tower"), ctx.threads(),
                                  static_cast<long>(t.cap));
  const auto lo = static_cast<long>(t.n_lo), hi = static_cast<long>(t.n_hi);
  const int pts = static_cast<int>(t.points);
  const auto th = tail_report(run.heights, p, lo, hi, pts, &lad);
  const auto tT = tail_report(run.meetings, p - 1.0, lo, hi, pts, &lad, true);

  const std::size_t D = std::max<std::size_t>(t.exact_D, t.n_hi + 1);
  const auto pmf = block_height_pmf(law, D);
  const auto S = survival_from_pmf(pmf);
  const double mu = law.mean();
  const auto cov = renewal_autocovariance(pmf, mu, t.n_hi);

  io::Csv csv({"n", "survival_h", "count_h", "survival_T", "count_T", "u_n", "survival_h_exact"});
  for (std::size_t i = 0; i < th.grid.size(); ++i) {
    const auto n = static_cast<std::size_t>(th.grid[i]);
    csv.row({static_cast<long long>(n), th.survival[i], static_cast<long long>(th.counts[i]), tT.survival[i],
             static_cast<long long>(tT.counts[i]), cov[n] * mu + 1.0 / mu, S[n]});
  }
  ctx.write("tower_tails.csv", csv);
  io::Csv fit({"kind", "slope", "band_lo", "band_hi", "c1", "c2", "widened"});
  fit.row({std::string("h"), th.slope, th.band_lo, th.band_hi, th.c1, th.c2, static_cast<long long>(th.widened)});
  fit.row({std::string("T"), tT.slope, tT.band_lo, tT.band_hi, tT.c1, tT.c2, static_cast<long long>(tT.widened)});
  ctx.write("tower_fit.csv", fit);

  double mh = 0;
  for (long v : run.heights) mh += static_cast<double>(v);
  auto& g = ctx.diag("tower");
  g["xi"] = t.xi;
  g["samples"] = t.samples;
  g["mean_h"] = mh / static_cast<double>(t.samples);
  g["wald_mean"] = mu;
  g["censored"] = run.censored;
  g["letter_truncation"] = law.letters.surv.back();
}

inline void stage_hip(RunContext& ctx) {
  const auto& h = ctx.config().hip;
  const MapSpec& map = ctx.map();
  const Observable obs = ctx.centered_observable(h.observable, h.alpha, h.interval_lo, h.interval_hi);
  const NuSampler nu(ctx.pullback());
  const std::uint64_t seed = stage_seed(ctx.config().run.seed, "hip");
  const ZLadder& lad = ctx.ladder(std::max(ctx.density_ladder_size(), h.sigma_depth + 2));
  const UlamChain ch = build_ulam_chain(map, lad, h.sigma_depth, h.sigma_q, h.sigma_y_cells);
  const auto su = sigma_squared_ulam(ch, obs, h.k_max);
  const auto sm = sigma_squared_mc(map, obs, nu, h.mc_block, h.mc_blocks, splitmix64(seed ^ 0x5157u), ctx.threads());
  io::Csv sc({"method", "sigma2", "std_error", "variance", "tail_oscillation"});
  sc.row({to_tag(su.method), su.sigma2, su.std_error, su.variance, su.tail_oscillation});
  sc.row({to_tag(sm.method), sm.sigma2, sm.std_error, sm.variance, 0.0});
  ctx.write("sigma.csv", sc);
  io::Csv ps({"k", "partial_sum"});
  for (std::size_t k = 0; k < su.partial_sums.size(); ++k) ps.row({static_cast<long long>(k), su.partial_sums[k]});
  ctx.write("sigma_series.csv", ps);

  HipConfig hc;
  hc.n_list = h.n_list;
  hc.paths = h.paths;
  hc.eta = h.eta;
  hc.sigma = su.sigma2;
  hc.ref_grid = h.ref_grid;
  hc.ref_count = h.ref_count;
  hc.seed = seed;
  hc.threads = ctx.threads();
  hc.exhaustive = h.exact_holder;
  const auto rows = hip_experiment(map, obs, nu, hc);
  io::Csv csv({"n", "functional", "ks", "p_value", "paths", "reference", "sample_variance"});
  for (const auto& r : rows)
    csv.row({static_cast<long long>(r.n), r.functional, r.ks, r.p_value, static_cast<long long>(r.paths),
             static_cast<long long>(r.reference), r.sample_variance});
  ctx.write("hip.csv", csv);

  auto& g = ctx.diag("hip");
  g["observable"] = h.observable;
  g["regularity"] = obs.regularity() == Regularity::Holder ? "holder" : "bv";
  g["mean"] = obs.mean;
  g["centering_check_grid"] = integrate(obs, ctx.pullback());
  g["sigma2_ulam"] = su.sigma2;
  g["sigma2_mc"] = sm.sigma2;
  g["sigma2_mc_se"] = sm.std_error;
}

inline void stage_baumkatz(RunContext& ctx) {
  const auto& b = ctx.config().baumkatz;
  const Observable obs = ctx.centered_observable(b.observable, b.alpha, b.interval_lo, b.interval_hi);
  const NuSampler nu(ctx.pullback());
  BaumKatzConfig bc;
  bc.a = b.a;
  bc.x = b.x;
  bc.p = b.p;
  bc.order = b.order;
  bc.N = b.N;
  bc.mc = b.mc;
  bc.windows = b.windows;
  bc.seed = stage_seed(ctx.config().run.seed, "baumkatz");
  bc.threads = ctx.threads();
  const auto r = baum_katz_partial(ctx.map(), obs, nu, bc);
  io::Csv csv({"n", "probability", "term", "partial", "censored"});
  for (std::size_t n = 1; n <= b.N; ++n)
    csv.row({static_cast<long long>(n), r.probability[n - 1], r.term[n - 1], r.partial[n - 1],
             static_cast<long long>(r.censored[n - 1])});
  ctx.write("baumkatz.csv", csv);
  io::Csv win({"start", "window_max"});
  for (std::size_t w = 0; w < r.window_start.size(); ++w)
    win.row({static_cast<long long>(r.window_start[w]), r.window_max[w]});
  ctx.write("windows.csv", win);
  auto& g = ctx.diag("baumkatz");
  g["tail_ratio"] = r.tail_ratio;
  g["censored_cells"] = r.censored_count;
}

inline const std::map<std::string, std::function<void(RunContext&)>>& stage_table() {
  static const std::map<std::string, std::function<void(RunContext&)>> t{
      {"ladder", stage_ladder},     {"tails", stage_tails}, {"density", stage_density},
      {"operators", stage_operators}, {"mixing", stage_mixing}, {"tower", stage_tower},
      {"hip", stage_hip},           {"baumkatz", stage_baumkatz}};
  return t;
}

struct RunOutcome {
  bool complete = false;
  fs::path dir;
  json manifest;
};

/// Runs the configured stages in dependency order and writes manifest.json.
/// A failing stage marks the run partial and skips every later stage.
inline RunOutcome run_experiments(const ExperimentConfig& cfg, std::ostream* log = nullptr) {
  validate(cfg);
  RunOutcome outcome;
  outcome.dir = cfg.run.out;
  RunContext ctx(cfg, cfg.run.out, log);
  io::write_file(ctx.out() / "config.ini", serialize_config(cfg));
  json stages = json::array();
  bool failed = false;
  for (const auto& name : all_stages()) {
    if (!cfg.has_stage(name)) continue;
    json rec;
    rec["name"] = name;
    if (failed) {
      rec["status"] = "skipped";
      stages.push_back(rec);
      continue;
    }
    ctx.say("stage " + name + " ...");
    const auto t0 = std::chrono::steady_clock::now();
    try {
      stage_table().at(name)(ctx);
      rec["status"] = "ok";
    } catch (const std::exception& e) {
      rec["status"] = "failed";
      rec["error"] = e.what();
      failed = true;
      ctx.say("stage " + name + " failed: " + e.what());
    }
    rec["seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    stages.push_back(rec);
  }
  json m;
  m["version"] = kVersion;
  m["config_text"] = serialize_config(cfg);
  json cj = json::object();
  visit_fields(cfg, [&](const char* sec, const char* key, const auto& v) { cj[sec][key] = v; });
  m["config"] = cj;
  m["stages"] = stages;
  m["complete"] = !failed;
  m["diagnostics"] = ctx.diagnostics();
  json cache = json::object();
  for (const auto& [k, v] : ctx.cache_status()) cache[k] = v;
  m["cache"] = cache;
  json files = json::array();
  for (const auto& [name, info] : ctx.files())
    files.push_back({{"name", name}, {"fnv1a64", io::hex64(info.first)}, {"bytes", info.second}});
  m["files"] = files;
  io::write_file(ctx.out() / "manifest.json", m.dump(2) + "\n");
  outcome.complete = !failed;
  outcome.manifest = std::move(m);
  return outcome;
}

// ---------------------------------------------------------------------------
// Report

struct CriterionRow {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;
};

struct Report {
  std::vector<CriterionRow> rows;
  std::vector<std::string> problems;  // missing or corrupt files
};

namespace detail {

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

inline double fit_slope(const std::vector<double>& n, const std::vector<double>& v) {
  std::vector<double> x, y;
  for (std::size_t i = 0; i < n.size(); ++i)
    if (v[i] > 0 && n[i] > 0) {
      x.push_back(n[i]);
      y.push_back(v[i]);
    }
  if (x.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  return stats::loglog_fit(x, y).slope;
}

inline bool strictly_decreasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (!(v[i] < v[i - 1])) return false;
  return v.size() >= 2;
}

}  // namespace detail

/// Criterion checks computed from stored CSVs only.
class CriterionEvaluator {
 public:
  CriterionEvaluator(fs::path dir, ExperimentConfig cfg) : dir_(std::move(dir)), cfg_(std::move(cfg)) {}

  bool has(const std::string& f) const { return fs::exists(dir_ / f); }
  io::Table table(const std::string& f) const { return io::Table::load(dir_ / f); }
  double p() const { return 1.0 / cfg_.map.gamma; }

  CriterionRow ladder() const {
    const auto t = table("ladder.csv");
    const std::size_t n = std::min<std::size_t>(cfg_.tolerances.ladder_n, t.rows());
    const double r = t.num(n - 1, "ratio");
    const double tol = cfg_.tolerances.ladder_ratio;
    return {1, "ladder asymptotics", std::abs(r - 1.0) <= tol,
            "gamma=" + detail::fmt(cfg_.map.gamma) + " ratio(n=" + std::to_string(n) + ")=" + detail::fmt(r) +
                " target 1+/-" + detail::fmt(tol)};
  }

  CriterionRow tails() const {
    const auto t = table("tails.csv");
    const double s = detail::fit_slope(t.column_values("n"), t.column_values("z"));
    const double target = -p();
    return {2, "return-tail slope", std::abs(s - target) <= cfg_.tolerances.tail_slope,
            "rho=" + cfg_.map.rho + " slope=" + detail::fmt(s) + " target " + detail::fmt(target) + "+/-" +
                detail::fmt(cfg_.tolerances.tail_slope)};
  }

  CriterionRow density() const {
    const auto t = table("density.csv");
    const double lo = cfg_.density.l1_from;
    const char* names[3] = {"ulam", "pullback", "empirical"};
    double worst = 0;
    for (int a = 0; a < 3; ++a)
      for (int b = a + 1; b < 3; ++b) {
        double s = 0;
        for (std::size_t r = 0; r < t.rows(); ++r) {
          const double left = std::max(lo, t.num(r, "left")), right = t.num(r, "right");
          if (right > left) s += std::abs(t.num(r, names[a]) - t.num(r, names[b])) * (right - left);
        }
        worst = std::max(worst, s);
      }
    const auto k = table("kac.csv");
    const double kac_u = k.num(k.rows() - 1, "ulam"), kac_p = k.num(k.rows() - 1, "pullback");
    const double kac_dev = std::max(std::abs(kac_u - 1.0), std::abs(kac_p - 1.0));
    const auto h = table("hratio.csv");
    const auto hv = h.column_values("pullback");
    const auto [mn, mx] = std::minmax_element(hv.begin(), hv.end());
    const double spread = *mx / *mn - 1.0;
    const auto& tol = cfg_.tolerances;
    const bool pass = worst < tol.density_l1 && kac_dev <= tol.kac && spread <= tol.h_ratio;
    return {3, "density consistency", pass,
            "max L1=" + detail::fmt(worst) + " (<" + detail::fmt(tol.density_l1) + ") kac dev=" + detail::fmt(kac_dev) +
                " (<=" + detail::fmt(tol.kac) + ") h/n spread=" + detail::fmt(spread) + " (<=" + detail::fmt(tol.h_ratio) +
                ")"};
  }

  CriterionRow operators() const {
    const auto b = table("bvnorm.csv");
    const double s = detail::fit_slope(b.column_values("n"), b.column_values("bv_norm"));
    const double target = -(p() + 1.0);
    const auto l = table("lambda_sum.csv");
    const double dev = l.num(0, "sup_deviation");
    const auto& tol = cfg_.tolerances;
    return {4, "excursion-operator decay", std::abs(s - target) <= tol.bv_slope && dev < tol.lambda_sum,
            "bv slope=" + detail::fmt(s) + " target " + detail::fmt(target) + "+/-" + detail::fmt(tol.bv_slope) +
                " sum dev=" + detail::fmt(dev) + " (<" + detail::fmt(tol.lambda_sum) + ")"};
  }

  CriterionRow renewal() const {
    const auto t = table("renewal.csv");
    const double s = detail::fit_slope(t.column_values("n"), t.column_values("deviation"));
    const double target = -(p() - 1.0);
    return {5, "renewal decomposition", std::abs(s - target) <= cfg_.tolerances.renewal_slope,
            "gamma=" + detail::fmt(cfg_.map.gamma) + " slope=" + detail::fmt(s) + " target " + detail::fmt(target) +
                "+/-" + detail::fmt(cfg_.tolerances.renewal_slope)};
  }

  CriterionRow split() const {
    const auto t = table("split.csv");
    double worst = 0;
    for (std::size_t r = 0; r < t.rows(); ++r)
      if (t.num(r, "n") <= static_cast<double>(cfg_.tolerances.split_n)) worst = std::max(worst, t.num(r, "residual"));
    return {6, "K^n split identity", worst <= cfg_.tolerances.split,
            "max residual(n<=" + std::to_string(cfg_.tolerances.split_n) + ")=" + detail::fmt(worst) + " (<=" +
                detail::fmt(cfg_.tolerances.split) + ")"};
  }

  CriterionRow mixing() const {
    const auto t = table("alpha.csv");
    const double s = detail::fit_slope(t.column_values("n"), t.column_values("alpha"));
    const double target = -(p() - 1.0);
    return {7, "alpha-mixing rate", std::abs(s - target) <= cfg_.tolerances.alpha_slope,
            "slope=" + detail::fmt(s) + " target " + detail::fmt(target) + "+/-" + detail::fmt(cfg_.tolerances.alpha_slope)};
  }

  CriterionRow tower() const {
    const auto t = table("tower_tails.csv");
    std::vector<double> hn, hs, tn, ts;
    for (std::size_t r = 0; r < t.rows(); ++r) {
      if (t.num(r, "count_h") >= 10) {
        hn.push_back(t.num(r, "n"));
        hs.push_back(t.num(r, "survival_h"));
      }
      if (t.num(r, "count_T") >= 10) {
        tn.push_back(t.num(r, "n"));
        ts.push_back(t.num(r, "survival_T"));
      }
    }
    const double sh = detail::fit_slope(hn, hs), sT = detail::fit_slope(tn, ts);
    const auto& tol = cfg_.tolerances;
    const bool pass = std::abs(sh + p()) <= tol.h_slope && std::abs(sT - (1.0 - p())) <= tol.T_slope;
    return {8, "tower tails", pass,
            "h slope=" + detail::fmt(sh) + " target " + detail::fmt(-p()) + "+/-" + detail::fmt(tol.h_slope) +
                " T slope=" + detail::fmt(sT) + " target " + detail::fmt(1.0 - p()) + "+/-" + detail::fmt(tol.T_slope)};
  }

  CriterionRow hip() const {
    const auto t = table("hip.csv");
    const auto sg = table("sigma.csv");
    double sigma2 = 0;
    for (std::size_t r = 0; r < sg.rows(); ++r)
      if (sg.text(r, "method") == "ulam") sigma2 = sg.num(r, "sigma2");
    const bool holder = cfg_.hip.observable == "identity" || cfg_.hip.observable == "power";
    std::vector<std::string> fns{"endpoint", "sup"};
    if (holder) fns.push_back("holder_norm");
    bool pass = true;
    std::string detail;
    for (const auto& f : fns) {
      std::vector<double> ks;
      for (std::size_t r = 0; r < t.rows(); ++r)
        if (t.text(r, "functional") == f) ks.push_back(t.num(r, "ks"));
      const bool dec = detail::strictly_decreasing(ks);
      pass &= dec;
      detail += f + " KS";
      for (double k : ks) detail += " " + detail::fmt(k);
      detail += dec ? " (decreasing) " : " (not decreasing) ";
    }
    double var = 0, nmax = 0;
    for (std::size_t r = 0; r < t.rows(); ++r)
      if (t.text(r, "functional") == "endpoint" && t.num(r, "n") > nmax) {
        nmax = t.num(r, "n");
        var = t.num(r, "sample_variance");
      }
    const double rel = std::abs(var - sigma2) / sigma2;
    pass &= rel <= cfg_.tolerances.sigma_rel;
    detail += "endpoint var=" + detail::fmt(var) + " sigma2=" + detail::fmt(sigma2) + " rel=" + detail::fmt(rel);
    return {holder ? 9 : 10, holder ? "invariance principle" : "BV observables", pass, detail};
  }

  CriterionRow baumkatz() const {
    const auto t = table("baumkatz.csv");
    const auto partial = t.column_values("partial");
    const std::size_t N = partial.size();
    const auto half = static_cast<std::size_t>(std::floor(static_cast<double>(N) / std::sqrt(10.0)));
    const double total = partial.back();
    const double ratio = total > 0 ? (total - partial[half - 1]) / total : 0.0;
    std::size_t censored = 0;
    for (std::size_t r = 0; r < t.rows(); ++r) censored += t.num(r, "censored") > 0;
    const auto w = table("windows.csv");
    const auto wm = w.column_values("window_max");
    const bool dec = detail::strictly_decreasing(wm) && wm.size() >= cfg_.baumkatz.windows;
    std::string d = "tail ratio=" + detail::fmt(ratio) + " (<" + detail::fmt(cfg_.tolerances.bk_tail) + ", " +
                    std::to_string(censored) + " censored cells) windows";
    for (double v : wm) d += " " + detail::fmt(v);
    return {11, "Baum-Katz", ratio < cfg_.tolerances.bk_tail && dec, d};
  }

  /// Every criterion whose inputs are present.
  std::vector<CriterionRow> all(std::vector<std::string>& problems) const {
    std::vector<CriterionRow> rows;
    auto attempt = [&](std::initializer_list<const char*> files, auto fn) {
      for (const char* f : files)
        if (!has(f)) return;
      try {
        rows.push_back((this->*fn)());
      } catch (const std::exception& e) {
        problems.push_back(std::string("unreadable input for ") + *files.begin() + ": " + e.what());
      }
    };
    attempt({"ladder.csv"}, &CriterionEvaluator::ladder);
    attempt({"tails.csv"}, &CriterionEvaluator::tails);
    attempt({"density.csv", "kac.csv", "hratio.csv"}, &CriterionEvaluator::density);
    attempt({"bvnorm.csv", "lambda_sum.csv"}, &CriterionEvaluator::operators);
    attempt({"renewal.csv"}, &CriterionEvaluator::renewal);
    attempt({"split.csv"}, &CriterionEvaluator::split);
    attempt({"alpha.csv"}, &CriterionEvaluator::mixing);
    attempt({"tower_tails.csv"}, &CriterionEvaluator::tower);
    attempt({"hip.csv", "sigma.csv"}, &CriterionEvaluator::hip);
    attempt({"baumkatz.csv", "windows.csv"}, &CriterionEvaluator::baumkatz);
    return rows;
  }

 private:
  fs::path dir_;
  ExperimentConfig cfg_;
};

/// Verifies checksums against the manifest and re-evaluates the criteria.
inline Report build_report(const fs::path& dir) {
  Report rep;
  const fs::path mpath = dir / "manifest.json";
  if (!fs::exists(mpath)) {
    rep.problems.push_back("missing manifest.json");
    return rep;
  }
  json m;
  try {
    m = json::parse(io::read_file(mpath));
  } catch (const std::exception& e) {
    rep.problems.push_back(std::string("corrupt manifest.json: ") + e.what());
    return rep;
  }
  for (const auto& f : m.value("files", json::array())) {
    const std::string name = f.at("name").get<std::string>();
    if (!fs::exists(dir / name)) {
      rep.problems.push_back("missing file " + name);
      continue;
    }
    if (io::hex64(io::fnv1a64(io::read_file(dir / name))) != f.at("fnv1a64").get<std::string>())
      rep.problems.push_back("checksum mismatch " + name);
  }
  if (!m.value("complete", false)) rep.problems.push_back("run incomplete");
  ExperimentConfig cfg;
  try {
    cfg = parse_config(m.at("config_text").get<std::string>());
  } catch (const std::exception& e) {
    rep.problems.push_back(std::string("config unreadable: ") + e.what());
    return rep;
  }
  rep.rows = CriterionEvaluator(dir, cfg).all(rep.problems);
  io::Csv csv({"criterion", "name", "status", "detail"});
  for (const auto& r : rep.rows)
    csv.row({static_cast<long long>(r.id), r.name, std::string(r.pass ? "PASS" : "FAIL"), "\"" + r.detail + "\""});
  io::write_file(dir / "report.csv", csv.str());
  return rep;
}

}  // namespace intermittent
