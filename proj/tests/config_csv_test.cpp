#include "generators.hpp"
#include "sflc/csv.hpp"
#include "sflc/scenario_config.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

using namespace sflc;
using namespace sflc::config;

namespace {

const std::filesystem::path kScenarios = SFLC_SCENARIO_DIR;

std::string config_error(const std::string& text) {
  try {
    (void)to_scenario(parse(text));
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

bool contains(const std::string& haystack, const std::string& needle) {
  return haystack.find(needle) != std::string::npos;
}

}  // namespace

TEST(ScenarioConfig, EmptyDocumentGivesDefaults) {
  const ScenarioConfig c = parse("{}");
  EXPECT_EQ(c, ScenarioConfig{});
  EXPECT_EQ(c.reference.type, "circle");
  EXPECT_EQ(c.reference.r, 8.0);
  EXPECT_EQ(c.reference.omega, 0.15);
  EXPECT_EQ(c.noise.k, 0.1);
  EXPECT_EQ(c.noise.q, 0.4);
  const Scenario sc = to_scenario(c);
  EXPECT_EQ(sc.step_count(), 42000);
}

TEST(ScenarioConfig, SerializeParseIsIdempotent) {
  for (const char* name : {"sim1_circle.json", "sim2_line.json", "naive_switch_demo.json"}) {
    const ScenarioConfig c = load((kScenarios / name).string());
    const std::string once = serialize(c);
    EXPECT_EQ(parse(once), c) << name;
    EXPECT_EQ(serialize(parse(once)), once) << name;
  }
}

TEST(ScenarioConfig, RandomizedRoundTrip) {
  sflc::testing::Gen g(3);
  for (int i = 0; i < 200; ++i) {
    ScenarioConfig c;
    c.name = "case" + std::to_string(i);
    c.controller = g.integer(0, 1) ? ControllerKind::Unified : ControllerKind::NaivePair;
    c.reference.r = g.uniform(0.5, 20);
    c.reference.omega = g.uniform(0.01, 1);
    c.reference.heading_offset = g.uniform(-3, 3);
    c.gains[1] = {MatrixRows{{g.uniform(0.1, 3)}}};
    c.singularity_tol = g.uniform(1e-9, 1e-3);
    c.schedule = {{0.0, g.integer(0, 1)}, {g.uniform(1, 5), g.integer(0, 1)}};
    c.noise = {g.integer(0, 1) == 1, g.uniform(0.01, 1), g.uniform(0, 1), static_cast<std::uint64_t>(g.integer(0, 1 << 30))};
    c.s0 = g.state();
    c.dt = g.uniform(1e-4, 1e-2);
    c.duration = g.uniform(1, 100);
    EXPECT_EQ(parse(serialize(c)), c);
  }
}

TEST(ScenarioConfig, BundledScenariosValidate) {
  for (const char* name : {"sim1_circle.json", "sim2_line.json", "naive_switch_demo.json"}) {
    EXPECT_NO_THROW((void)to_scenario(load((kScenarios / name).string()))) << name;
  }
  const auto sim2 = load((kScenarios / "sim2_line.json").string());
  EXPECT_EQ(sim2.reference.type, "line");
  EXPECT_EQ(sim2.s0, (mecanum::ExtendedState{3, 6, 0, 0.5, 0}));
}

TEST(ScenarioConfig, ParseErrorsCarryLineAndColumn) {
  const std::string msg = config_error("{\n  \"dt\": 0.001,\n  \"duration\": ,\n}");
  EXPECT_TRUE(contains(msg, "line 3")) << msg;
}

TEST(ScenarioConfig, FieldDiagnostics) {
  EXPECT_TRUE(contains(config_error(R"({"reference": {"radius": 3}})"), "reference.radius: unknown field"));
  EXPECT_TRUE(contains(config_error(R"({"bogus": 1})"), "bogus: unknown field"));
  EXPECT_TRUE(contains(config_error(R"({"dt": "fast"})"), "dt: expected a number"));
  EXPECT_TRUE(contains(config_error(R"({"dt": 0})"), "dt: must be positive"));
  EXPECT_TRUE(contains(config_error(R"({"duration": -3})"), "duration"));
  EXPECT_TRUE(contains(config_error(R"({"plant": "unicycle"})"), "plant"));
  EXPECT_TRUE(contains(config_error(R"({"controller": "pid"})"), "controller"));
  EXPECT_TRUE(contains(config_error(R"({"schedule": [{"t": 0, "sigma": 2}]})"), "schedule[0].sigma"));
  EXPECT_TRUE(contains(config_error(R"({"schedule": [{"t": 1, "sigma": 1}]})"), "schedule"));
  EXPECT_TRUE(contains(config_error(R"({"schedule": [{"t": 0, "sigma": 1}, {"t": 0.0005, "sigma": 0}]})"), "dt"));
  EXPECT_TRUE(contains(config_error(R"({"gains": {"auxiliary": [[[0]]]}})"), "gains"));
  EXPECT_TRUE(contains(config_error(R"({"gains": {"main": [[[1, 0], [0, 1]]]}})"), "gains"));
  EXPECT_TRUE(contains(config_error(R"({"gains": {"main": [[[1, 0]]]}})"), "square"));
  EXPECT_TRUE(contains(config_error(R"({"noise": {"enabled": true, "k": 0}})"), "noise"));
  EXPECT_TRUE(contains(config_error(R"({"singularity_tol": 0})"), "singularity_tol"));
  EXPECT_TRUE(contains(config_error(R"({"reference": {"type": "spiral"}})"), "reference.type"));
  EXPECT_TRUE(contains(config_error(R"({"baseline_gains": {"kp": [1, 1]}})"), "baseline_gains.kp"));
}

TEST(ScenarioConfig, SingularityGuardAtStart) {
  const std::string msg = config_error(R"({"s0": {"v1": 0}})");
  EXPECT_TRUE(contains(msg, "s0.v1")) << msg;
  // dexterous-only schedules may start at rest
  EXPECT_EQ(config_error(R"({"s0": {"v1": 0}, "schedule": [{"t": 0, "sigma": 1}]})"), "");
}

TEST(ScenarioConfig, UncheckedGainsForDiagnostics) {
  const ScenarioConfig c = parse(R"({"gains": {"auxiliary": [[[0]]]}})");
  EXPECT_THROW(build_gains(c), UnstableGains);
  EXPECT_NO_THROW(build_gains(c, false));
  EXPECT_NO_THROW(to_scenario(c, false));
}

TEST(ScenarioConfig, MissingFileIsConfigError) {
  EXPECT_THROW(load("/nonexistent/config.json"), ConfigError);
}

// ---- CSV ------------------------------------------------------------------

TEST(Csv, HeaderOrderIsFixed) {
  SimLog log;
  std::istringstream in(csv::to_string(log));
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "t,x,y,theta,v1,v2,u1,u2,u3,sigma,e1x,e1y,e2,e3,n1,n2,n3,power,energy,detA");
}

TEST(Csv, RoundTripIsExact) {
  Scenario sc;
  sc.schedule = SwitchSchedule::square_wave(SwitchSignal::energy_saving(), 0.5, 3);
  sc.noise = NoiseParams{0.1, 0.4, 9};
  sc.duration = 3.0;
  sc.s0 = {0.1, -4.2, 7.0, 0.5, 0.3};  // heading outside (-pi, pi] to exercise wrapping
  const SimLog log = run_scenario(sc);
  const std::string text = csv::to_string(log);
  std::istringstream in(text);
  const auto rows = csv::parse(in);
  ASSERT_EQ(rows.size(), log.rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const csv::Row expected = csv::to_row(log.rows[k]);
    for (std::size_t c = 0; c < expected.size(); ++c) ASSERT_EQ(rows[k][c], expected[c]) << "row " << k << " col " << c;
    EXPECT_EQ(rows[k][0], static_cast<double>(k) * sc.dt);
    EXPECT_GT(rows[k][3], -std::numbers::pi);
    EXPECT_LE(rows[k][3], std::numbers::pi);
  }
}

TEST(Csv, SigmaColumnIsInteger) {
  Scenario sc;
  sc.schedule = SwitchSchedule({{0.0, SwitchSignal::energy_saving()}, {0.01, SwitchSignal::dexterous()}});
  sc.duration = 0.02;
  const std::string text = csv::to_string(run_scenario(sc));
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  std::getline(in, line);
  std::vector<std::string> fields;
  std::stringstream ls(line);
  for (std::string f; std::getline(ls, f, ',');) fields.push_back(f);
  ASSERT_EQ(fields.size(), 20u);
  EXPECT_EQ(fields[9], "0");
}

TEST(Csv, ShortestRoundTripFormatting) {
  EXPECT_EQ(csv::format_double(0.1), "0.1");
  EXPECT_EQ(csv::format_double(1e-3 * 3), "0.003");
  sflc::testing::Gen g(4);
  for (int i = 0; i < 10000; ++i) {
    const double v = g.uniform(-1e3, 1e3) * std::pow(10.0, g.integer(-20, 20));
    EXPECT_EQ(std::stod(csv::format_double(v)), v);
  }
}

TEST(Csv, RejectsMalformedInput) {
  std::istringstream bad_header("t,x\n1,2\n");
  EXPECT_THROW(csv::parse(bad_header), csv::CsvError);
  SimLog empty;
  std::istringstream short_row(csv::to_string(empty) + "1,2,3\n");
  EXPECT_THROW(csv::parse(short_row), csv::CsvError);
}
