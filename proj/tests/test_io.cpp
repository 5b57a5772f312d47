#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "rsma_iov/config.hpp"
#include "rsma_iov/csv.hpp"
#include "rsma_iov/errors.hpp"

using namespace rsma_iov;
using nlohmann::json;

namespace {

template <typename F>
void expect_kind(F&& f, ErrorKind kind) {
  try {
    f();
    FAIL("no error thrown");
  } catch (const Error& e) {
    CHECK(e.kind() == kind);
  }
}

CsvTable reparse(const CsvTable& t) {
  std::ostringstream out;
  write_csv(out, t);
  std::istringstream in(out.str());
  return read_csv(in);
}

}  // namespace

TEST_CASE("csv quoting follows RFC 4180") {
  CHECK(csv_field("plain") == "plain");
  CHECK(csv_field("a,b") == "\"a,b\"");
  CHECK(csv_field("say \"hi\"") == "\"say \"\"hi\"\"\"");
  CHECK(csv_field("two\nlines") == "\"two\nlines\"");

  CsvTable t{{"name", "value"}, {{"a,b", "1"}, {"q\"uote", ""}, {"line\r\nbreak", "x"}}};
  std::ostringstream out;
  write_csv(out, t);
  CHECK(out.str().substr(0, 12) == "name,value\r\n");
  const auto back = reparse(t);
  CHECK(back.header == t.header);
  CHECK(back.rows == t.rows);
}

TEST_CASE("csv numbers round-trip exactly") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  CsvTable t{{"v"}, {}};
  std::vector<double> values{0.0, -0.0, 1e-300, 1.0 / 3.0, 0.1, 6.02214076e23,
                             std::numeric_limits<double>::max(),
                             std::numeric_limits<double>::denorm_min()};
  for (int i = 0; i < 200; ++i) values.push_back(u(rng) * std::pow(10.0, 20 * u(rng)));
  for (double v : values) t.rows.push_back({csv_number(v)});
  const auto back = reparse(t);
  for (std::size_t i = 0; i < values.size(); ++i) CHECK(back.number(i, "v") == values[i]);
}

TEST_CASE("csv reader rejects malformed input") {
  auto parse = [](const std::string& s) {
    std::istringstream in(s);
    return read_csv(in);
  };
  CHECK(parse("a,b\n1,2\n").rows.size() == 1);
  CHECK(parse("a,b\r\n1,2").rows[0][1] == "2");
  expect_kind([&] { parse(""); }, ErrorKind::kIo);
  expect_kind([&] { parse("a,b\n1\n"); }, ErrorKind::kIo);
  expect_kind([&] { parse("a\n\"open\n"); }, ErrorKind::kIo);
  expect_kind([&] { parse("a\nx\"y\n"); }, ErrorKind::kIo);
  const auto t = parse("a,b\nfoo,2\n");
  expect_kind([&] { t.number(0, "a"); }, ErrorKind::kIo);
  expect_kind([&] { t.column("c"); }, ErrorKind::kIo);
  expect_kind([&] { read_csv_file("/nonexistent/file.csv"); }, ErrorKind::kIo);
}

TEST_CASE("run config defaults and round trip") {
  RunConfig c;
  CHECK(c.feel.payload_bits() == 1e7);
  CHECK(c.radio.power_dbm == 25.0);
  CHECK(c.radio.bandwidth_hz == 5e6);
  CHECK(c.radio.noise_dbm_per_hz == -174.0);
  CHECK(c.radio.path_loss_exponent == 2.0);
  CHECK(c.scenario_params.steps == 100);
  CHECK(c.scenario_params.dt == 0.05);
  CHECK(c.scenario_params.lane_width == 3.7);
  CHECK(c.mpc.q_z == Eigen::Vector4d(1, 100, 1, 0.1));
  CHECK(c.mpc.q_u == Eigen::Vector2d(1, 1));
  CHECK(c.q_t == 1.0);
  CHECK(c.q_h == 100.0);
  const auto m = c.resolved_mpc();
  CHECK(m.du_max[1] == doctest::Approx(0.01));
  CHECK(m.du_max[0] == 1.0);
  CHECK(m.u_max == Eigen::Vector2d(4.0, 0.3));

  c.scheme = Scheme::kNoma;
  c.followers = 5;
  c.radio.power_dbm = 17.5;
  c.mpc.q_du << 2.0, 3.0;
  c.feel.training.loss = Loss::kLogistic;
  c.seed = 123456789012345ULL;
  const json j = config_to_json(c);
  const RunConfig back = config_from_json(j);
  CHECK(config_to_json(back) == j);
  CHECK(back.radio.followers == 5);
  CHECK(back.feel.training.workers == 5);

  c.bcd.stop_tol = std::numeric_limits<double>::infinity();
  CHECK(std::isinf(config_from_json(config_to_json(c)).bcd.stop_tol));
}

TEST_CASE("shipped default config matches the built-in defaults") {
  const auto path = std::filesystem::path(RSMA_IOV_SOURCE_DIR) / "config" / "default.json";
  CHECK(read_json_file(path.string()) == config_to_json(RunConfig{}));
}

TEST_CASE("config overlay and errors") {
  const RunConfig c = config_from_json(json::parse(R"({"radio": {"power_dbm": 15}, "scheme": "mulp"})"));
  CHECK(c.radio.power_dbm == 15.0);
  CHECK(c.scheme == Scheme::kMulp);
  CHECK(c.radio.antennas == 4);
  expect_kind([] { config_from_json(json::parse(R"({"radio": {"powr": 15}})")); },
              ErrorKind::kInvalidConfig);
  expect_kind([] { config_from_json(json::parse(R"({"scheme": "tdma"})")); },
              ErrorKind::kInvalidConfig);
  expect_kind([] { config_from_json(json::parse(R"({"mpc": {"horizon": 2.5}})")); },
              ErrorKind::kInvalidConfig);
  expect_kind([] { config_from_json(json::parse(R"({"mpc": {"q_z": [1, 2]}})")); },
              ErrorKind::kInvalidConfig);
  expect_kind([] { config_from_json(json::parse(R"({"seed": -1})")); }, ErrorKind::kInvalidConfig);
  RunConfig bad;
  bad.followers = 10;
  expect_kind([&] { bad.validate(); }, ErrorKind::kInvalidConfig);
  bad = RunConfig{};
  bad.weather_kappa = -1;
  expect_kind([&] { bad.validate(); }, ErrorKind::kInvalidConfig);
}

TEST_CASE("scenario files round trip") {
  RunConfig c;
  c.scenario = "s2";
  c.weather_kappa = 60.0;
  const Scenario s = c.build_scenario();
  const json j = scenario_to_json(s);
  const Scenario back = scenario_from_json(json::parse(j.dump()));
  CHECK(scenario_to_json(back) == j);
  REQUIRE(back.no_change_zone.has_value());
  CHECK(back.no_change_zone->first == s.no_change_zone->first);
  CHECK(back.accel_limit == s.accel_limit);
  CHECK(back.references[2][57].y == s.references[2][57].y);

  const Scenario s1 = make_scenario("s1", 3);
  const Scenario s1b = scenario_from_json(scenario_to_json(s1));
  REQUIRE(s1b.obstacles.size() == s1.obstacles.size());
  CHECK(s1b.obstacles[0].A == s1.obstacles[0].A);
  CHECK(s1b.obstacles[0].b == s1.obstacles[0].b);
  CHECK(!s1b.no_change_zone.has_value());

  json broken = j;
  broken["initial_states"][0] = json::array({1, 2, 3});
  expect_kind([&] { scenario_from_json(broken); }, ErrorKind::kInvalidConfig);
  broken = j;
  broken.erase("dt");
  expect_kind([&] { scenario_from_json(broken); }, ErrorKind::kInvalidConfig);
  broken = j;
  broken["extra"] = 1;
  expect_kind([&] { scenario_from_json(broken); }, ErrorKind::kInvalidConfig);
}
