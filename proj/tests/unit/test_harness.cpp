#include <gtest/gtest.h>

#include <filesystem>

#include "intermittent/harness.hpp"

using namespace intermittent;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("intermittent_unit_" + name);
  fs::remove_all(p);
  return p;
}

ExperimentConfig ladder_only(const fs::path& out, std::size_t N = 1000) {
  ExperimentConfig c;
  c.run.stages = {"ladder"};
  c.ladder.N = N;
  c.run.out = out.string();
  return c;
}

ExperimentConfig small_density(const fs::path& out) {
  ExperimentConfig c;
  c.run.stages = {"density"};
  c.run.out = out.string();
  c.density.depth = 300;
  c.density.y_cells = 64;
  c.density.max_R = 2000;
  c.density.kac_N = 2000;
  c.density.empirical_iter = 200000;
  c.density.smooth_max_R = 300;
  return c;
}

}  // namespace

TEST(Config, RoundTrip) {
  ExperimentConfig c;
  c.map.gamma = 0.3;
  c.map.rho = "invlog";
  c.run.stages = {"ladder", "hip"};
  c.run.seed = 123456789012345ULL;
  c.hip.n_list = {1024, 4096};
  c.density.x0 = 0.1;  // not exactly representable
  c.hip.exact_holder = true;
  EXPECT_EQ(parse_config(serialize_config(c)), c);
  EXPECT_EQ(serialize_config(parse_config(serialize_config(c))), serialize_config(c));
}

TEST(Config, DefaultsFillMissingKeys) {
  const auto c = parse_config("[map]\ngamma = 0.4\n");
  EXPECT_EQ(c.map.gamma, 0.4);
  EXPECT_EQ(c.ladder.N, ExperimentConfig{}.ladder.N);
  EXPECT_EQ(c.run.stages, all_stages());
}

TEST(Config, RejectsUnknownKeysAndSections) {
  EXPECT_THROW(parse_config("[map]\ngama = 0.25\n"), InvalidInput);
  EXPECT_THROW(parse_config("[maps]\ngamma = 0.25\n"), InvalidInput);
  EXPECT_THROW(parse_config("[map]\ngamma = fast\n"), InvalidInput);
  EXPECT_THROW(parse_config("[ladder]\nN = 2.5\n"), InvalidInput);
  EXPECT_THROW(parse_config("[map]\ngamma = 1.0\n"), InvalidInput);
  EXPECT_THROW(parse_config("[run]\nstages = ladder, dance\n"), InvalidInput);
}

TEST(Config, AcceptsScientificIntegersAndCheckMode) {
  const auto c = parse_config("[tails]\nsamples = 1e6\n[map]\ngamma = 1\ncheck_mode = true\n");
  EXPECT_EQ(c.tails.samples, 1000000u);
  EXPECT_TRUE(c.map.check_mode);
}

TEST(Csv, NumbersRoundTripExactly) {
  io::Csv csv({"a", "b", "c"});
  csv.row({0.1, 42LL, std::string("x")});
  csv.row({1.0 / 3.0, -7LL, std::string("y")});
  const auto t = io::Table::parse(csv.str());
  EXPECT_EQ(t.rows(), 2u);
  EXPECT_EQ(t.num(0, "a"), 0.1);
  EXPECT_EQ(t.num(1, "a"), 1.0 / 3.0);
  EXPECT_EQ(t.text(1, "c"), "y");
  EXPECT_THROW(t.num(0, "missing"), InvalidInput);
  EXPECT_THROW(csv.row({1.0}), InvalidInput);
}

TEST(Checksum, Fnv1aReferenceValues) {
  EXPECT_EQ(io::fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(io::fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
}

TEST(Run, MinimalLadderRun) {
  const auto dir = scratch("min");
  const auto out = run_experiments(ladder_only(dir));
  EXPECT_TRUE(out.complete);
  const auto t = io::Table::load(dir / "ladder.csv");
  EXPECT_EQ(t.rows(), 1000u);
  const auto m = json::parse(io::read_file(dir / "manifest.json"));
  EXPECT_TRUE(m.at("complete").get<bool>());
  EXPECT_EQ(m.at("config_text").get<std::string>(), serialize_config(ladder_only(dir)));
  EXPECT_EQ(m.at("files").size(), 1u);
  EXPECT_EQ(m.at("stages")[0].at("status"), "ok");
}

TEST(Run, IdenticalConfigGivesIdenticalBytes) {
  const auto a = scratch("det_a"), b = scratch("det_b");
  auto ca = small_density(a), cb = small_density(b);
  ca.run.stages = cb.run.stages = {"ladder", "tails", "density"};
  ca.tails.samples = cb.tails.samples = 100000;
  ca.tails.n_hi = cb.tails.n_hi = 1000;
  ca.ladder.N = cb.ladder.N = 1000;
  cb.run.threads = 2;
  const auto ra = run_experiments(ca), rb = run_experiments(cb);
  ASSERT_TRUE(ra.complete && rb.complete);
  EXPECT_EQ(ra.manifest.at("files"), rb.manifest.at("files"));
  for (const auto* f : {"ladder.csv", "tails.csv", "density.csv", "kac.csv"})
    EXPECT_EQ(io::read_file(a / f), io::read_file(b / f)) << f;
}

TEST(Run, CachedInducedDensityReproducesRecomputation) {
  const auto dir = scratch("cache");
  const auto cfg = small_density(dir);
  const auto first = run_experiments(cfg);
  ASSERT_TRUE(first.complete);
  EXPECT_EQ(first.manifest.at("cache").at("induced"), "miss");
  const auto second = run_experiments(cfg);
  EXPECT_EQ(second.manifest.at("cache").at("induced"), "hit");
  EXPECT_EQ(first.manifest.at("files"), second.manifest.at("files"));
}

TEST(Run, StageFailureSkipsDownstreamStages) {
  const auto dir = scratch("fail");
  auto cfg = ladder_only(dir);
  cfg.run.stages = {"ladder", "tails", "tower"};
  fs::create_directories(dir / "ladder.csv");  // the ladder stage cannot write its output
  const auto out = run_experiments(cfg);
  EXPECT_FALSE(out.complete);
  const auto& st = out.manifest.at("stages");
  EXPECT_EQ(st[0].at("status"), "failed");
  EXPECT_FALSE(st[0].at("error").get<std::string>().empty());
  EXPECT_EQ(st[1].at("status"), "skipped");
  EXPECT_EQ(st[2].at("status"), "skipped");
}

TEST(Report, LadderOnlyRunHasOnlyLadderRow) {
  const auto dir = scratch("rep");
  ASSERT_TRUE(run_experiments(ladder_only(dir, 10000)).complete);
  const auto rep = build_report(dir);
  EXPECT_TRUE(rep.problems.empty());
  ASSERT_EQ(rep.rows.size(), 1u);
  EXPECT_EQ(rep.rows[0].id, 1);
  EXPECT_TRUE(rep.rows[0].pass);
  EXPECT_TRUE(fs::exists(dir / "report.csv"));
}

TEST(Report, TamperedCsvIsFlagged) {
  const auto dir = scratch("tamper");
  ASSERT_TRUE(run_experiments(ladder_only(dir)).complete);
  auto text = io::read_file(dir / "ladder.csv");
  const auto pos = text.find('\n', text.find('\n') + 1) - 1;  // last digit of the first data row
  text[pos] = text[pos] == '1' ? '2' : '1';
  io::write_file(dir / "ladder.csv", text);
  const auto rep = build_report(dir);
  ASSERT_EQ(rep.problems.size(), 1u);
  EXPECT_NE(rep.problems[0].find("checksum mismatch ladder.csv"), std::string::npos);
  EXPECT_EQ(rep.rows.size(), 1u);  // partial report still emitted
}

TEST(Report, MissingManifestAndFiles) {
  const auto dir = scratch("missing");
  fs::create_directories(dir);
  EXPECT_FALSE(build_report(dir).problems.empty());
  ASSERT_TRUE(run_experiments(ladder_only(dir)).complete);
  fs::remove(dir / "ladder.csv");
  const auto rep = build_report(dir);
  EXPECT_EQ(rep.problems.at(0), "missing file ladder.csv");
  EXPECT_TRUE(rep.rows.empty());
}
