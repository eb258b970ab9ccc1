#include <gtest/gtest.h>

#include <filesystem>
#include <string>

#include "mcf/config.hpp"
#include "mcf/pipeline.hpp"

using namespace mcf;
namespace fs = std::filesystem;

namespace {

std::string config_error(const std::string& text) {
  try {
    parse_config_text(text);
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ConfigError);
    return e.what();
  }
  ADD_FAILURE() << "no error for " << text;
  return {};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("mcflab_test_" + name);
  fs::remove_all(p);
  return p;
}

PipelineOptions quick_options(const fs::path& out) {
  PipelineOptions o;
  o.out = out;
  o.stages = stages_through("checks");
  o.stages.push_back("report");
  o.quiet = true;
  return o;
}

}  // namespace

TEST(Config, MinimalFillsDefaults) {
  const RunConfig c = parse_config_text(R"({"model": {"k": 4}})");
  EXPECT_EQ(c, RunConfig{});
  EXPECT_FALSE(c.barriers.constants.has_value());
  EXPECT_EQ(c.time.n_runs, 4);
  EXPECT_EQ(c.time.control.tol, 1e-4);
  const json echo = config_to_json(c);
  EXPECT_EQ(echo["barriers"]["constants"], "search");
  EXPECT_EQ(echo["model"]["p"], 2.5);
  EXPECT_TRUE(echo["monitors"].contains("inner_max"));
}

TEST(Config, ParameterOutOfRangeNamesField) {
  const std::string msg = config_error(R"({"model": {"p": 3.5}})");
  EXPECT_NE(msg.find("model.p"), std::string::npos);
  EXPECT_NE(msg.find("(2,3)"), std::string::npos);
}

TEST(Config, UnknownKeysAndTypes) {
  EXPECT_NE(config_error(R"({"model": {"kk": 4}})").find("model.kk"), std::string::npos);
  EXPECT_NE(config_error(R"({"modle": {}})").find("modle"), std::string::npos);
  EXPECT_NE(config_error(R"({"model": {"k": 4.5}})").find("model.k"), std::string::npos);
  EXPECT_NE(config_error(R"({"model": {"k": 16}})").find("model.k"), std::string::npos);
  EXPECT_NE(config_error(R"({"barriers": {"constants": "guess"}})").find("barriers.constants"), std::string::npos);
  EXPECT_NE(config_error(R"({"barriers": {"constants": {"M": 64}}})").find("barriers.constants.B"),
            std::string::npos);
  EXPECT_NE(config_error("{not json").find("not valid JSON"), std::string::npos);
}

TEST(Config, EveryViolationListed) {
  const std::string msg = config_error(R"({"model": {"p": 3.5, "m": 1.0}, "time": {"n_runs": 0}})");
  EXPECT_NE(msg.find("3 violation(s)"), std::string::npos);
  EXPECT_NE(msg.find("model.m"), std::string::npos);
  EXPECT_NE(msg.find("time.n_runs"), std::string::npos);
}

TEST(Config, RoundTripWithOverrides) {
  RunConfig c;
  c.model.K0 = 0.5;
  c.barriers.constants = BarrierOverrides{};
  c.barriers.constants->tau_delta = -38.5;
  c.barriers.delta0 = 0.125;
  c.barriers.grid.n1 = 17;
  c.mesh.spec.eta = 0.03;
  c.mesh.nodes = 90000;
  c.time.n_runs = 2;
  c.monitors.Z = 7.0;
  const RunConfig back = config_from_json(json::parse(dump17(config_to_json(c))));
  EXPECT_EQ(back, c);
  EXPECT_TRUE(back.barriers.constants->tau_delta.has_value());
  EXPECT_FALSE(back.barriers.constants->tau_delta_half.has_value());
}

TEST(Config, ReadFailureIsIoError) {
  try {
    parse_config("/nonexistent/config.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::IoError);
  }
}

TEST(Config, ContinuationSettings) {
  RunConfig c;
  c.monitors.cadence = 0.5;
  c.time.n_runs = 3;
  c.barriers.epsilon = 0.05;
  const auto cc = c.continuation();
  EXPECT_EQ(cc.record_dtau, 0.5);
  EXPECT_EQ(cc.n_runs, 3);
  EXPECT_EQ(cc.epsilon, 0.05);
  EXPECT_EQ(cc.control, c.time.control);
}

TEST(Stages, Ordering) {
  EXPECT_EQ(stage_names().front(), "constants");
  EXPECT_EQ(stage_names().back(), "report");
  const auto s = stages_through("barriers");
  EXPECT_EQ(s.back(), "barriers");
  EXPECT_EQ(s.size(), 6u);
  EXPECT_THROW(stages_through("nonsense"), Error);
  EXPECT_EQ(stage_dependencies("evolve"), std::vector<std::string>{"barriers"});
  EXPECT_TRUE(stage_dependencies("constants").empty());
}

TEST(Stages, LogLogSlope) {
  std::vector<double> t, v;
  for (int i = 0; i < 10; ++i) {
    t.push_back(std::exp(-i * 0.3));
    v.push_back(3.0 * std::pow(t.back(), -4.0 / 3.0));
  }
  EXPECT_NEAR(loglog_slope(t, v), -4.0 / 3.0, 1e-12);
}

TEST(Pipeline, EarlyStagesWriteOutputsAndReport) {
  const fs::path out = scratch("early");
  Pipeline pipe(RunConfig{}, quick_options(out));
  const Report rep = pipe.run();
  for (const char* f : {"constants.json", "meta.json", "alencar.csv", "alencar.json", "eigen.csv", "g.csv",
                        "g.json", "checks.json", "report.json", "timings.txt", "stages/checks.json"})
    EXPECT_TRUE(fs::exists(out / f)) << f;
  const CsvTable eigen = read_csv(out / "eigen.csv");
  EXPECT_EQ(eigen.header, (std::vector<std::string>{"y", "phi", "phi1", "phi2"}));
  EXPECT_EQ(eigen.rows.size(), 401u);
  EXPECT_EQ(read_csv(out / "g.csv").header, (std::vector<std::string>{"y", "g", "residual"}));
  EXPECT_EQ(config_from_json(read_json(out / "meta.json")["config"]), RunConfig{});
  ASSERT_EQ(rep.criteria.size(), 9u);
  for (int id : {1, 2, 3, 4, 5, 7}) EXPECT_EQ(rep.criteria[id - 1].status, Status::Pass) << id;
  for (int id : {6, 8, 9}) EXPECT_EQ(rep.criteria[id - 1].status, Status::Blocked) << id;
  EXPECT_EQ(rep.exit_code, 0);
  fs::remove_all(out);
}

TEST(Pipeline, ResumeSkipsIntactStagesAndRedoesTampered) {
  const fs::path out = scratch("resume");
  Pipeline(RunConfig{}, quick_options(out)).run();
  const std::string checks_rec = read_text(out / "stages/checks.json");
  const std::string eigen_rec = read_text(out / "stages/eigen.json");
  const std::string eigen_csv = read_text(out / "eigen.csv");
  write_text(out / "eigen.csv", "y,phi,phi1,phi2\n");
  PipelineOptions o = quick_options(out);
  o.resume = true;
  const Report rep = Pipeline(RunConfig{}, o).run();
  EXPECT_EQ(read_text(out / "stages/checks.json"), checks_rec);
  EXPECT_NE(read_text(out / "stages/eigen.json"), eigen_rec);
  EXPECT_EQ(read_text(out / "eigen.csv"), eigen_csv);
  EXPECT_EQ(rep.exit_code, 0);
  fs::remove_all(out);
}

TEST(Pipeline, ChangedConfigInvalidatesResume) {
  const fs::path out = scratch("reconfig");
  Pipeline(RunConfig{}, quick_options(out)).run();
  const std::string rec = read_text(out / "stages/constants.json");
  RunConfig c;
  c.model.K0 = 2.0;
  PipelineOptions o = quick_options(out);
  o.resume = true;
  Pipeline(c, o).run();
  EXPECT_NE(read_text(out / "stages/constants.json"), rec);
  EXPECT_EQ(read_json(out / "constants.json")["K1"], 1890.0);
  fs::remove_all(out);
}

TEST(Pipeline, DeterminismComparison) {
  const fs::path a = scratch("det_a"), b = scratch("det_b");
  Pipeline(RunConfig{}, quick_options(a)).run();
  Pipeline(RunConfig{}, quick_options(b)).run();
  EXPECT_EQ(compare_outputs(a, b).status, Status::Pass);
  write_text(b / "g.csv", read_text(b / "g.csv") + "1,2,3\n");
  const auto bad = compare_outputs(a, b);
  EXPECT_EQ(bad.status, Status::Fail);
  EXPECT_NE(bad.note.find("g.csv"), std::string::npos);
  fs::remove(b / "eigen.csv");
  EXPECT_NE(compare_outputs(a, b).note.find("unpaired eigen.csv"), std::string::npos);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Io, CsvRoundTrip) {
  CsvWriter w({"a", "b"});
  w.row({0.1, 1e-300});
  w.row({-2.5, 3.0});
  const CsvTable t = parse_csv(w.str());
  EXPECT_EQ(t.header, (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(t.col("a")[0], 0.1);
  EXPECT_EQ(t.col("b")[0], 1e-300);
  EXPECT_THROW(t.col("c"), Error);
  EXPECT_THROW(w.row({1.0}), Error);
  EXPECT_EQ(fmt17(0.1), "0.10000000000000001");
}
