// Copyright 2026 The vpriv Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#include <string>
#include <thread>
#include <vector>

#include "test_util.hpp"
#include "vpriv/databus.hpp"

namespace vpriv {
namespace {

DataItem Speed(std::int64_t t, double v) { return {"vehicle.speed", t, v, "sim"}; }

TEST(DataBusTest, PublishThenLatest) {
  DataBus bus;
  bus.CreateTopic("vehicle.speed");
  EXPECT_FALSE(bus.Latest("vehicle.speed").has_value());
  bus.Publish("vehicle.speed", Speed(1, 50.0));
  EXPECT_EQ(*bus.Latest("vehicle.speed"), Speed(1, 50.0));
  EXPECT_TRUE(bus.HasTopic("vehicle.speed"));
  EXPECT_EQ(bus.Topics(), std::vector<std::string>{"vehicle.speed"});
}

TEST(DataBusTest, RejectsWrongTypeInvalidItemsAndReordering) {
  DataBus bus;
  bus.CreateTopic("vehicle.speed");
  EXPECT_VPRIV_ERROR(bus.Publish("vehicle.speed", DataItem{"engine.rpm", 1, 1.0, "s"}),
                     ErrorCode::kTypeMismatch);
  EXPECT_VPRIV_ERROR(bus.Publish("vehicle.speed", Speed(1, NAN)), ErrorCode::kTypeMismatch);
  bus.Publish("vehicle.speed", Speed(10, 1.0));
  EXPECT_VPRIV_ERROR(bus.Publish("vehicle.speed", Speed(5, 1.0)), ErrorCode::kOrderViolation);
  EXPECT_VPRIV_ERROR(bus.Publish("vehicle.speed", Speed(10, 2.0)), ErrorCode::kOrderViolation);
  EXPECT_VPRIV_ERROR(bus.Publish("engine.rpm", DataItem{"engine.rpm", 1, 1.0, "s"}),
                     ErrorCode::kUnknownTopic);
  EXPECT_VPRIV_ERROR(bus.CreateTopic("Bad Topic"), ErrorCode::kInvalidParam);
  EXPECT_VPRIV_ERROR(bus.CreateTopic("a.b", 0), ErrorCode::kInvalidParam);
}

TEST(DataBusTest, SubscribersSeeBacklogThenFifo) {
  DataBus bus;
  bus.CreateTopic("vehicle.speed");
  for (int i = 1; i <= 3; ++i) bus.Publish("vehicle.speed", Speed(i, i));
  auto a = bus.Subscribe("vehicle.speed", "a");
  auto b = bus.Subscribe("vehicle.speed", "b");
  EXPECT_EQ(a->pending(), 3u);
  bus.Publish("vehicle.speed", Speed(4, 4));
  bus.Publish("vehicle.speed", Speed(5, 5));
  const auto sa = a->Drain();
  const auto sb = b->Drain();
  ASSERT_EQ(sa.size(), 5u);
  EXPECT_EQ(sa, sb);
  for (int i = 0; i < 5; ++i) EXPECT_EQ(sa[i].timestamp_ms, i + 1);
  EXPECT_FALSE(a->TryNext().has_value());
  EXPECT_VPRIV_ERROR(bus.Subscribe("vehicle.speed", "a"), ErrorCode::kInvalidParam);
  EXPECT_VPRIV_ERROR(bus.Subscribe("nope.topic", "a"), ErrorCode::kUnknownTopic);
  bus.Unsubscribe("vehicle.speed", "a");
  bus.Publish("vehicle.speed", Speed(6, 6));
  EXPECT_EQ(a->pending(), 0u);
  EXPECT_EQ(b->pending(), 1u);
}

TEST(DataBusTest, RetentionKeepsNewestItems) {
  DataBus bus;
  bus.CreateTopic("vehicle.speed", 4);
  for (int i = 1; i <= 10; ++i) bus.Publish("vehicle.speed", Speed(i, i));
  const auto recent = bus.Recent("vehicle.speed");
  ASSERT_EQ(recent.size(), 4u);
  EXPECT_EQ(recent.front().timestamp_ms, 7);
  EXPECT_EQ(recent.back().timestamp_ms, 10);
  EXPECT_EQ(bus.Subscribe("vehicle.speed", "late")->pending(), 4u);
}

TEST(DataBusTest, ConcurrentConsumerSeesEveryItemOnceInOrder) {
  DataBus bus;
  bus.CreateTopic("vehicle.speed");
  auto sub = bus.Subscribe("vehicle.speed", "c");
  const int n = 5000;
  std::vector<std::int64_t> seen;
  std::thread consumer([&] {
    while (static_cast<int>(seen.size()) < n) {
      if (auto it = sub->Next(std::chrono::milliseconds(2000))) {
        seen.push_back(it->timestamp_ms);
      } else {
        break;
      }
    }
  });
  for (int i = 1; i <= n; ++i) bus.Publish("vehicle.speed", Speed(i, i));
  consumer.join();
  ASSERT_EQ(seen.size(), static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) EXPECT_EQ(seen[i], i + 1);
}

TEST(TrajectoryTest, TwoWaypointsAreValid) {
  const auto src = ParseTrajectoryCsv("t_ms,lat,lon\n0,48.0,11.0\n1000,48.1,11.1\n");
  EXPECT_EQ(src.waypoints().size(), 2u);
  EXPECT_EQ(src.duration_ms(), 1000);
}

TEST(TrajectoryTest, ValidationErrors) {
  EXPECT_VPRIV_ERROR(ParseTrajectoryCsv("t_ms,lat,lon\n0,48,11\n0,48.1,11\n"),
                     ErrorCode::kMonotonicityError);
  EXPECT_VPRIV_ERROR(ParseTrajectoryCsv("t_ms,lat,lon\n10,48,11\n5,48.1,11\n"),
                     ErrorCode::kMonotonicityError);
  EXPECT_VPRIV_ERROR(ParseTrajectoryCsv("t_ms,lat,lon\n0,48,11\n"), ErrorCode::kParseError);
  EXPECT_VPRIV_ERROR(ParseTrajectoryCsv("time,lat,lon\n0,48,11\n1,48,11\n"),
                     ErrorCode::kParseError);
  EXPECT_VPRIV_ERROR(ParseTrajectoryCsv("t_ms,lat,lon\n0,48,11\n1,abc,11\n"),
                     ErrorCode::kParseError);
  EXPECT_VPRIV_ERROR(ParseTrajectoryCsv("t_ms,lat,lon\n0,48,11\n1,95,11\n"),
                     ErrorCode::kParseError);
  EXPECT_VPRIV_ERROR(ParseTrajectoryCsv("t_ms,lat,lon\n0,48,11,5\n1,48,11\n"),
                     ErrorCode::kParseError);
  EXPECT_VPRIV_ERROR(ParseTrajectoryCsv(""), ErrorCode::kParseError);
  EXPECT_VPRIV_ERROR(ParseTrajectoryCsv("t_ms,lat,lon\n0,48,11\n1,48,11\n", 0.0),
                     ErrorCode::kInvalidParam);
}

TEST(TrajectoryTest, CsvRoundTrip) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Waypoint> wps;
    std::int64_t t = static_cast<std::int64_t>(rng.NextU64() % 1000);
    const int n = 2 + static_cast<int>(rng.NextU64() % 30);
    for (int i = 0; i < n; ++i) {
      t += 1 + static_cast<std::int64_t>(rng.NextU64() % 5000);
      wps.push_back({t, {rng.Uniform01() * 180 - 90, rng.Uniform01() * 360 - 180}});
    }
    const auto back = ParseTrajectoryCsv(TrajectoryToCsv(wps));
    ASSERT_EQ(back.waypoints().size(), wps.size());
    for (std::size_t i = 0; i < wps.size(); ++i) {
      EXPECT_EQ(back.waypoints()[i].t_ms, wps[i].t_ms);
      EXPECT_EQ(back.waypoints()[i].loc, wps[i].loc);
    }
  }
}

TEST(TrajectoryTest, FileRoundTrip) {
  testing::TempDir dir;
  const std::vector<Waypoint> wps = {{0, {48.0, 11.0}}, {5000, {48.01, 11.02}}};
  WriteTrajectory(dir.path() / "t.csv", wps);
  const auto src = LoadTrajectory(dir.path() / "t.csv");
  EXPECT_EQ(src.waypoints()[1].loc, wps[1].loc);
  EXPECT_VPRIV_ERROR(LoadTrajectory(dir.path() / "missing.csv"), ErrorCode::kIoError);
}

TEST(TrajectoryTest, MidpointIsLinearInterpolation) {
  const TrajectorySource src({{0, {48.0, 11.0}}, {10000, {48.2, 11.4}}});
  const GeoPoint mid = src.PositionAt(5000);
  EXPECT_NEAR(mid.lat, 48.1, 1e-12);
  EXPECT_NEAR(mid.lon, 11.2, 1e-12);
  EXPECT_EQ(src.PositionAt(-5), src.waypoints().front().loc);
  EXPECT_EQ(src.PositionAt(20000), src.waypoints().back().loc);
  const TrajectorySource fast({{0, {48.0, 11.0}}, {10000, {48.2, 11.4}}}, 2.0);
  EXPECT_NEAR(fast.PositionAt(2500).lat, 48.1, 1e-12);
  const TrajectorySource loop({{0, {48.0, 11.0}}, {10000, {48.2, 11.4}}}, 1.0, true);
  EXPECT_NEAR(loop.PositionAt(12500).lat, 48.05, 1e-12);
}

TEST(TrajectoryTest, InterpolatedPointsLieOnBracketingSegment) {
  Rng rng(4);
  std::vector<Waypoint> wps;
  std::int64_t t = 0;
  for (int i = 0; i < 20; ++i) {
    wps.push_back({t, {48.0 + rng.Uniform01() * 0.1, 11.0 + rng.Uniform01() * 0.1}});
    t += 1 + static_cast<std::int64_t>(rng.NextU64() % 10000);
  }
  const TrajectorySource src(wps);
  for (int i = 0; i < 5000; ++i) {
    const auto q = static_cast<std::int64_t>(rng.NextU64() % static_cast<std::uint64_t>(t));
    const GeoPoint p = src.PositionAt(q);
    std::size_t k = 0;
    while (k + 1 < wps.size() && wps[k + 1].t_ms <= q) ++k;
    if (k + 1 == wps.size()) continue;
    const Waypoint& a = wps[k];
    const Waypoint& b = wps[k + 1];
    const double f = static_cast<double>(q - a.t_ms) / static_cast<double>(b.t_ms - a.t_ms);
    EXPECT_NEAR(p.lat, a.loc.lat + f * (b.loc.lat - a.loc.lat), 1e-9);
    EXPECT_NEAR(p.lon, a.loc.lon + f * (b.loc.lon - a.loc.lon), 1e-9);
    EXPECT_GE(p.lat, std::min(a.loc.lat, b.loc.lat) - 1e-9);
    EXPECT_LE(p.lat, std::max(a.loc.lat, b.loc.lat) + 1e-9);
  }
}

SensorConfig SpeedAt(double hz) {
  return SensorConfigFromJson(Json::parse(
      R"({"sensors": [{"type_id": "vehicle.speed", "rate_hz": )" + std::to_string(hz) +
      R"(, "waveform": "sine", "mean": 50, "amplitude": 10, "period_s": 30, "noise_std": 1.5}]})"));
}

TEST(SimulatorTest, OneHertzOverTenSecondsGivesTenItems) {
  DataBus bus;
  Simulator sim(bus, std::nullopt, SpeedAt(1.0), 1);
  const auto items = sim.StepClock(10000);
  ASSERT_EQ(items.size(), 10u);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(items[i].timestamp_ms, 1000 * (i + 1));
  EXPECT_EQ(bus.Recent("vehicle.speed").size(), 10u);
}

TEST(SimulatorTest, SteppingIsAdditiveInTime) {
  const TrajectorySource traj({{0, {48.0, 11.0}}, {60000, {48.05, 11.05}}});
  DataBus bus1, bus2;
  Simulator once(bus1, traj, SpeedAt(2.0), 77);
  Simulator twice(bus2, traj, SpeedAt(2.0), 77);
  const auto a = once.StepClock(20000);
  auto b = twice.StepClock(7300);
  const auto rest = twice.StepClock(12700);
  b.insert(b.end(), rest.begin(), rest.end());
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.size(), 20u + 40u);
  // GPS comes first at equal timestamps.
  EXPECT_EQ(a[0].timestamp_ms, 500);
  EXPECT_EQ(a[1].type_id, "location.gps");
  EXPECT_EQ(a[2].type_id, "vehicle.speed");
  EXPECT_EQ(a[1].timestamp_ms, a[2].timestamp_ms);
}

TEST(SimulatorTest, SameSeedSameEmissionsDifferentSeedDiffers) {
  DataBus b1, b2, b3;
  Simulator s1(b1, std::nullopt, SpeedAt(5.0), 9);
  Simulator s2(b2, std::nullopt, SpeedAt(5.0), 9);
  Simulator s3(b3, std::nullopt, SpeedAt(5.0), 10);
  const auto x = s1.StepClock(5000);
  EXPECT_EQ(x, s2.StepClock(5000));
  EXPECT_NE(x, s3.StepClock(5000));
}

TEST(SimulatorTest, GpsTracksTrajectory) {
  const TrajectorySource traj({{0, {48.0, 11.0}}, {10000, {48.01, 11.0}}});
  DataBus bus;
  Simulator sim(bus, traj, SensorConfig{}, 1);
  const auto items = sim.StepClock(5000);
  ASSERT_EQ(items.size(), 5u);
  EXPECT_NEAR(items.back().geo().lat, 48.005, 1e-12);
  EXPECT_EQ(*sim.TruePosition(), items.back().geo());
  EXPECT_VPRIV_ERROR(sim.StepClock(-1), ErrorCode::kInvalidParam);
}

TEST(SensorConfigTest, WaveformsAndErrors) {
  testing::TempDir dir;
  WriteFile(dir.path() / "rpm.csv", "t_ms,value\n0,800\n10000,1800\n");
  const auto cfg = SensorConfigFromJson(Json::parse(R"({
    "gps": {"rate_hz": 0.5},
    "sensors": [{"type_id": "engine.rpm", "rate_hz": 1, "waveform": "csv", "file": "rpm.csv"},
                {"type_id": "vehicle.fuel_level", "value": 0.75}]})"),
                                        dir.path());
  ASSERT_TRUE(cfg.gps.has_value());
  EXPECT_DOUBLE_EQ(cfg.gps->rate_hz, 0.5);
  ASSERT_EQ(cfg.sensors.size(), 2u);
  EXPECT_DOUBLE_EQ(cfg.sensors[0].SignalAt(5000), 1300.0);
  EXPECT_DOUBLE_EQ(cfg.sensors[0].SignalAt(20000), 1800.0);
  EXPECT_DOUBLE_EQ(cfg.sensors[1].SignalAt(123), 0.75);

  EXPECT_VPRIV_ERROR(
      SensorConfigFromJson(Json::parse(R"({"sensors": [{"type_id": "a.b", "rate_hz": 0, "value": 1}]})")),
      ErrorCode::kSchemaError);
  EXPECT_VPRIV_ERROR(
      SensorConfigFromJson(Json::parse(R"({"sensors": [{"type_id": "a.b", "waveform": "square"}]})")),
      ErrorCode::kSchemaError);
  EXPECT_VPRIV_ERROR(SensorConfigFromJson(Json::parse(R"({"sensors": [{"type_id": "a.b"}]})")),
                     ErrorCode::kSchemaError);
  DataBus bus;
  SensorConfig gps_only;
  gps_only.gps = GpsSpec{};
  EXPECT_VPRIV_ERROR(Simulator(bus, std::nullopt, gps_only, 1), ErrorCode::kInvalidParam);
}

}  // namespace
}  // namespace vpriv
