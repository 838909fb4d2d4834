#include <cstdlib>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "intermittent/harness.hpp"

namespace im = intermittent;

namespace {

struct Overrides {
  std::string config;
  std::uint64_t seed = 0;
  std::string out;
  int threads = 0;
  bool exact_holder = false;
};

void add_common(CLI::App* app, Overrides& o) {
  app->add_option("--config", o.config, "INI configuration file")->check(CLI::ExistingFile);
  app->add_option("--seed", o.seed, "master seed");
  app->add_option("--out", o.out, "output directory");
  app->add_option("--threads", o.threads, "worker threads (overrides INTERMITTENT_THREADS)")->check(CLI::PositiveNumber);
  app->add_flag("--exact-holder", o.exact_holder, "use the exhaustive O(n^2) Holder modulus");
}

im::ExperimentConfig resolve(const CLI::App* app, const Overrides& o) {
  im::ExperimentConfig cfg = o.config.empty() ? im::ExperimentConfig{} : im::load_config(o.config);
  if (app->count("--seed")) cfg.run.seed = o.seed;
  if (app->count("--out")) cfg.run.out = o.out;
  if (app->count("--threads")) {
    cfg.run.threads = o.threads;
  } else if (const char* env = std::getenv("INTERMITTENT_THREADS"); env && std::atoi(env) > 0) {
    cfg.run.threads = std::atoi(env);
  }
  if (o.exact_holder) cfg.hip.exact_holder = true;
  im::validate(cfg);
  return cfg;
}

int print_report(const std::string& dir) {
  const auto rep = im::build_report(dir);
  for (const auto& p : rep.problems) std::cout << "problem: " << p << "\n";
  for (const auto& r : rep.rows)
    std::cout << "criterion " << r.id << " [" << (r.pass ? "PASS" : "FAIL") << "] " << r.name << ": " << r.detail
              << "\n";
  return rep.problems.empty() ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Intermittent map experiments"};
  app.require_subcommand(1);

  Overrides run_opts;
  auto* run = app.add_subcommand("run", "run the stages listed in the config");
  add_common(run, run_opts);

  std::string report_dir;
  auto* report = app.add_subcommand("report", "re-evaluate criteria from a run directory");
  report->add_option("run_dir", report_dir, "run directory")->required();

  std::map<std::string, Overrides> stage_opts;
  std::map<std::string, CLI::App*> stage_cmds;
  for (const auto& s : im::all_stages()) {
    stage_cmds[s] = app.add_subcommand(s, "run only the " + s + " stage");
    add_common(stage_cmds[s], stage_opts[s]);
  }

  CLI11_PARSE(app, argc, argv);

  try {
    if (*report) return print_report(report_dir);
    im::ExperimentConfig cfg;
    if (*run) {
      cfg = resolve(run, run_opts);
    } else {
      for (const auto& [name, cmd] : stage_cmds)
        if (*cmd) {
          cfg = resolve(cmd, stage_opts[name]);
          cfg.run.stages = {name};
        }
    }
    const auto outcome = im::run_experiments(cfg, &std::cerr);
    std::cout << "wrote " << (outcome.dir / "manifest.json").string() << (outcome.complete ? "" : " (partial)")
              << "\n";
    return outcome.complete ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
