// Acceptance driver: `acceptance --criterion k` prints one PASS/FAIL line and
// exits nonzero on FAIL. Without --criterion every criterion is evaluated.

#include <cmath>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "intermittent/harness.hpp"
#include "intermittent/holder.hpp"
#include "intermittent/slowvary.hpp"

namespace im = intermittent;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

fs::path g_root;
int g_threads = 0;

im::ExperimentConfig base(double gamma, std::initializer_list<const char*> stages, const std::string& dir) {
  im::ExperimentConfig c;
  c.map.gamma = gamma;
  c.run.stages.assign(stages.begin(), stages.end());
  c.run.threads = g_threads;
  c.run.out = (g_root / dir).string();
  return c;
}

/// Runs cfg unless its directory already holds a complete, intact run of the same config.
fs::path run_or_reuse(const im::ExperimentConfig& cfg) {
  const fs::path dir = cfg.run.out;
  const fs::path m = dir / "manifest.json";
  if (fs::exists(m)) {
    try {
      const auto j = im::json::parse(im::io::read_file(m));
      if (j.value("complete", false) && j.value("config_text", "") == im::serialize_config(cfg) &&
          im::build_report(dir).problems.empty())
        return dir;
    } catch (const std::exception&) {
    }
  }
  const auto outcome = im::run_experiments(cfg, &std::cerr);
  if (!outcome.complete) throw std::runtime_error("run in " + dir.string() + " did not complete");
  return dir;
}

Outcome from_row(const im::CriterionRow& r) { return {r.pass, r.detail}; }

im::CriterionEvaluator evaluator(const im::ExperimentConfig& cfg) {
  return im::CriterionEvaluator(run_or_reuse(cfg), cfg);
}

Outcome criterion_1() {
  struct Case {
    double gamma;
    bool check;
    const char* dir;
  };
  Outcome o{true, ""};
  for (const Case& c : {Case{0.25, false, "c1_g025"}, Case{0.5, false, "c1_g05"}, Case{1.0, true, "c1_g1_check"}}) {
    auto cfg = base(c.gamma, {"ladder"}, c.dir);
    cfg.map.check_mode = c.check;
    const auto r = evaluator(cfg).ladder();
    o.pass &= r.pass;
    o.detail += (o.detail.empty() ? "" : "; ") + r.detail;
  }
  return o;
}

Outcome criterion_2() {
  auto cfg = base(0.25, {"tails"}, "c2_invlog");
  cfg.map.rho = "invlog";
  return from_row(evaluator(cfg).tails());
}

Outcome criterion_3() { return from_row(evaluator(base(0.25, {"density"}, "density_g025")).density()); }

Outcome criterion_4() { return from_row(evaluator(base(0.25, {"operators"}, "operators_g025")).operators()); }

Outcome criterion_5() { return from_row(evaluator(base(0.3, {"operators"}, "operators_g03")).renewal()); }

Outcome criterion_6() { return from_row(evaluator(base(0.25, {"operators"}, "operators_g025")).split()); }

Outcome criterion_7() { return from_row(evaluator(base(0.25, {"mixing"}, "mixing_g025")).mixing()); }

Outcome criterion_8() { return from_row(evaluator(base(0.25, {"tower"}, "tower_g025")).tower()); }

Outcome criterion_9() { return from_row(evaluator(base(0.25, {"hip"}, "hip_identity")).hip()); }

Outcome criterion_10() {
  auto cfg = base(0.25, {"hip"}, "hip_indicator");
  cfg.hip.observable = "indicator";
  return from_row(evaluator(cfg).hip());
}

Outcome criterion_11() { return from_row(evaluator(base(0.25, {"baumkatz"}, "baumkatz_g025")).baumkatz()); }

// Oracle equivalences.

Outcome holder_oracle() {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> step(0.0, 1.0);
  double worst = 0;
  for (int trial = 0; trial < 200; ++trial) {
    im::PathSample p{64, std::vector<double>(65, 0.0)};
    for (std::size_t k = 1; k <= 64; ++k) p.values[k] = p.values[k - 1] + step(rng) / 8.0;
    if (trial % 4 == 1) p.values[static_cast<std::size_t>(trial) % 65] += 3.0;  // isolated spike
    for (double eta : {0.05, 0.2, 0.45})
      for (double delta : {1.0 / 64, 0.1, 0.37, 1.0}) {
        const double a = im::holder_modulus(p, eta, delta), b = im::holder_modulus_exhaustive(p, eta, delta);
        worst = std::max(worst, std::abs(a - b) / std::max(1.0, std::abs(b)));
      }
  }
  std::ostringstream s;
  s << "holder fast vs exhaustive max rel diff " << worst;
  return {worst <= 1e-6, s.str()};
}

std::vector<im::MapSpec> oracle_maps() {
  using im::SlowVaryFn;
  std::vector<im::MapSpec> maps;
  for (double g : {0.1, 0.25, 0.5, 0.9}) {
    maps.push_back(im::MapSpec::make(g, SlowVaryFn::constant(1.0)));
    maps.push_back(im::MapSpec::make(g, SlowVaryFn::inverse_log(1.0)));
    maps.push_back(im::MapSpec::make(g, SlowVaryFn::log_power(1.0, 2.0)));
  }
  maps.push_back(im::MapSpec::unnormalized(1.0, SlowVaryFn::constant(1.0)));
  return maps;
}

std::vector<double> oracle_points() {
  std::vector<double> xs;
  for (int e = -300; e <= -1; e += 7) xs.push_back(std::pow(10.0, e / 10.0));
  for (int k = 1; k < 50; ++k) xs.push_back(0.5 * k / 50.0);
  return xs;
}

Outcome inverse_oracle() {
  const double tol = 1e-13;
  double worst = 0;
  for (const auto& map : oracle_maps()) {
    const double top = im::evaluate(map, 0.5).f;
    for (double x : oracle_points()) {
      // v0(f(x)) = x and f(v0(y)) = y
      const double y = im::evaluate(map, x).f;
      if (y < 1.0) worst = std::max(worst, std::abs(im::inverse_branch(map, im::Branch::Left, y, tol) - x) / x);
      const double target = std::min(x, top);
      const double back = im::evaluate(map, im::inverse_branch(map, im::Branch::Left, target, tol)).f;
      worst = std::max(worst, std::abs(back - target) / target);
      const double xr = 1.0 - x;  // right branch, x in (1/2, 1)
      if (xr > 0.5 && xr < 1.0) {
        const double back_r = im::inverse_branch(map, im::Branch::Right, im::evaluate(map, xr).f, tol);
        worst = std::max(worst, std::abs(back_r - xr) / xr);
      }
    }
  }
  std::ostringstream s;
  s << "inverse round trip max rel err " << worst << " (<= " << 10 * tol << ")";
  return {worst <= 10 * tol, s.str()};
}

Outcome derivative_oracle() {
  double worst = 0;
  for (const auto& map : oracle_maps())
    for (double x : oracle_points()) {
      if (x >= 0.5 || x < 1e-12) continue;
      const double h = 1e-4 * x;
      const double fd = (im::evaluate(map, x + h).f - im::evaluate(map, x - h).f) / (2 * h);
      worst = std::max(worst, std::abs(fd - im::evaluate(map, x).df) / im::evaluate(map, x).df);
      // slowly varying factor and its first derivative
      const auto sv = im::eval(map.rho, x);
      const auto svp = im::eval(map.rho, x + h), svm = im::eval(map.rho, x - h);
      const double scale = std::abs(sv.value) / x;
      worst = std::max(worst, std::abs((svp.value - svm.value) / (2 * h) - sv.d1) / scale);
      worst = std::max(worst, std::abs((svp.d1 - svm.d1) / (2 * h) - sv.d2) / (scale / x));
    }
  std::ostringstream s;
  s << "finite-difference derivative max rel err " << worst;
  return {worst <= 1e-6, s.str()};
}

Outcome convolution_oracle() {
  const std::size_t n_max = 10000;
  const std::vector<double> ones(n_max + 1, 1.0);
  const auto flat = im::convolution_bound_check(ones, ones, 2.0, 2.0, n_max);
  // split the sum at n/2: the ratio never exceeds 4 zeta(2)
  const double bound = 4.0 * std::numbers::pi * std::numbers::pi / 6.0;
  const auto logs = im::slowvary_sequence(im::SlowVaryFn::inverse_log(1.0, im::SvOrientation::AtInfinity), n_max);
  const auto lp = im::slowvary_sequence(im::SlowVaryFn::log_power(1.0, 2.0, im::SvOrientation::AtInfinity), n_max);
  const auto mixed = im::convolution_bound_check(logs, lp, 1.5, 2.5, n_max);
  auto late_growth = [&](const im::ConvolutionReport& r) {
    const double early = *std::max_element(r.ratios.begin(), r.ratios.begin() + n_max / 2);
    const double late = *std::max_element(r.ratios.begin() + n_max / 2, r.ratios.end());
    return late / early;
  };
  const bool pass = std::isfinite(flat.c_hat) && flat.c_hat <= bound && std::isfinite(mixed.c_hat) &&
                    late_growth(flat) <= 1.05 && late_growth(mixed) <= 1.05;
  std::ostringstream s;
  s << "convolution C_hat " << flat.c_hat << " (<= " << bound << "), slowly varying C_hat " << mixed.c_hat
    << ", late growth " << late_growth(flat) << "/" << late_growth(mixed);
  return {pass, s.str()};
}

Outcome rerun_oracle() {
  auto small = [&](const std::string& dir, int threads) {
    auto c = base(0.25, {"ladder", "tails", "density", "operators", "mixing", "tower", "hip", "baumkatz"}, dir);
    c.run.threads = threads;
    c.run.seed = 7;
    c.ladder.N = 2000;
    c.tails.samples = 100000;
    c.tails.n_hi = 2000;
    c.density.depth = 500;
    c.density.y_cells = 64;
    c.density.max_R = 2000;
    c.density.kac_N = 2000;
    c.density.empirical_iter = 200000;
    c.density.smooth_max_R = 500;
    c.density.smooth_nodes = 20;
    c.operators.depth = 500;
    c.operators.y_cells = 64;
    c.operators.bv_hi = 128;
    c.operators.sum_N = 500;
    c.operators.renewal_N = 64;
    c.operators.split_depth = 63;
    c.operators.split_y_cells = 64;
    c.mixing.depth = 500;
    c.mixing.y_cells = 64;
    c.mixing.n_hi = 64;
    c.mixing.points = 5;
    c.tower.samples = 100000;
    c.tower.ladder_N = 20000;
    c.tower.n_hi = 256;
    c.tower.points = 6;
    c.tower.exact_D = 1024;
    c.hip.n_list = {256, 1024};
    c.hip.paths = 100;
    c.hip.ref_grid = 1024;
    c.hip.ref_count = 500;
    c.hip.sigma_depth = 300;
    c.hip.sigma_q = 4;
    c.hip.sigma_y_cells = 32;
    c.hip.k_max = 128;
    c.hip.mc_block = 1024;
    c.hip.mc_blocks = 50;
    c.baumkatz.N = 4096;
    c.baumkatz.mc = 100;
    return c;
  };
  std::vector<im::json> manifests;
  const std::vector<std::pair<std::string, int>> runs{{"rerun_a", 1}, {"rerun_b", 1}, {"rerun_c", 2}};
  for (const auto& [dir, threads] : runs) {
    fs::remove_all(g_root / dir);
    const auto out = im::run_experiments(small(dir, threads), &std::cerr);
    if (!out.complete) return {false, "rerun " + dir + " did not complete"};
    manifests.push_back(out.manifest.at("files"));
  }
  std::size_t files = manifests[0].size();
  bool same = files > 0;
  std::string first_diff;
  for (std::size_t r = 1; r < manifests.size(); ++r)
    if (manifests[r] != manifests[0]) {
      same = false;
      for (std::size_t i = 0; i < std::min(files, manifests[r].size()); ++i)
        if (manifests[r][i] != manifests[0][i] && first_diff.empty())
          first_diff = manifests[r][i].at("name").get<std::string>();
    }
  return {same, "reruns of " + std::to_string(files) + " CSVs byte-identical across seeds-fixed reruns and 1 vs 2 threads" +
                    (same ? "" : " FAILED at " + first_diff)};
}

Outcome criterion_12() {
  Outcome o{true, ""};
  for (auto fn : {holder_oracle, inverse_oracle, derivative_oracle, convolution_oracle, rerun_oracle}) {
    const Outcome r = fn();
    o.pass &= r.pass;
    o.detail += (o.detail.empty() ? "" : "; ") + r.detail + (r.pass ? "" : " [FAIL]");
  }
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  int which = 0;
  std::string root = "acceptance_runs";
  app.add_option("--criterion", which, "criterion number 1-12 (0 = all)")->check(CLI::Range(0, 12));
  app.add_option("--work", root, "directory for run outputs");
  app.add_option("--threads", g_threads, "worker threads");
  CLI11_PARSE(app, argc, argv);
  g_root = fs::absolute(root);
  fs::create_directories(g_root);

  const std::vector<Outcome (*)()> table{criterion_1, criterion_2, criterion_3, criterion_4,  criterion_5,  criterion_6,
                                         criterion_7, criterion_8, criterion_9, criterion_10, criterion_11, criterion_12};
  bool all = true;
  for (int k = 1; k <= 12; ++k) {
    if (which != 0 && which != k) continue;
    Outcome o;
    try {
      o = table[static_cast<std::size_t>(k - 1)]();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    std::cout << "criterion " << k << ": " << (o.pass ? "PASS" : "FAIL") << " (" << o.detail << ")" << std::endl;
    all &= o.pass;
  }
  return all ? 0 : 1;
}
