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

// In-vehicle publish-subscribe bus over simulated sources: trajectory
// playback for GPS and waveform-driven scalar sensors, advanced by a
// simulated clock.

#pragma once

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdint>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "vpriv/common/enum_names.hpp"
#include "vpriv/common/error.hpp"
#include "vpriv/common/geo.hpp"
#include "vpriv/common/json_io.hpp"
#include "vpriv/common/rng.hpp"
#include "vpriv/datamodel.hpp"

namespace vpriv {

inline constexpr std::size_t kDefaultRetention = 64;

// Ordered delivery queue of one subscriber.
class Subscription {
 public:
  const std::string& id() const { return id_; }
  const std::string& topic() const { return topic_; }

  std::optional<DataItem> TryNext() {
    std::lock_guard lock(mu_);
    if (queue_.empty()) return std::nullopt;
    DataItem item = std::move(queue_.front());
    queue_.pop_front();
    return item;
  }

  // Blocks up to `timeout` for the next item.
  std::optional<DataItem> Next(std::chrono::milliseconds timeout) {
    std::unique_lock lock(mu_);
    if (!cv_.wait_for(lock, timeout, [&] { return !queue_.empty(); })) {
      return std::nullopt;
    }
    DataItem item = std::move(queue_.front());
    queue_.pop_front();
    return item;
  }

  std::vector<DataItem> Drain() {
    std::lock_guard lock(mu_);
    std::vector<DataItem> out(std::make_move_iterator(queue_.begin()),
                              std::make_move_iterator(queue_.end()));
    queue_.clear();
    return out;
  }

  std::size_t pending() const {
    std::lock_guard lock(mu_);
    return queue_.size();
  }

 private:
  friend class DataBus;

  Subscription(std::string id, std::string topic, std::deque<DataItem> backlog)
      : id_(std::move(id)), topic_(std::move(topic)), queue_(std::move(backlog)) {}

  void Push(const DataItem& item) {
    {
      std::lock_guard lock(mu_);
      queue_.push_back(item);
    }
    cv_.notify_all();
  }

  std::string id_;
  std::string topic_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<DataItem> queue_;
};

// Topics are named by their type id. Each topic keeps the last `retention`
// items, strictly ordered by timestamp.
class DataBus {
 public:
  void CreateTopic(const std::string& type_id, std::size_t retention = kDefaultRetention) {
    if (!IsValidTypeId(type_id)) {
      throw Error(ErrorCode::kInvalidParam, "malformed topic '" + type_id + "'");
    }
    if (retention == 0) throw Error(ErrorCode::kInvalidParam, "retention must be >= 1");
    std::lock_guard lock(mu_);
    auto& t = topics_[type_id];
    if (!t) t = std::make_shared<Topic>(retention);
  }

  bool HasTopic(const std::string& type_id) const {
    std::lock_guard lock(mu_);
    return topics_.count(type_id) > 0;
  }

  std::vector<std::string> Topics() const {
    std::lock_guard lock(mu_);
    std::vector<std::string> out;
    for (const auto& [name, t] : topics_) out.push_back(name);
    return out;
  }

  void Publish(const std::string& topic, const DataItem& item) {
    auto t = Find(topic);
    if (item.type_id != topic) {
      throw Error(ErrorCode::kTypeMismatch,
                  "item of type '" + item.type_id + "' on topic '" + topic + "'");
    }
    if (auto bad = ItemViolations(item); !bad.empty()) {
      throw Error(ErrorCode::kTypeMismatch, "invalid item: " + bad.front());
    }
    std::lock_guard lock(t->mu);
    if (!t->ring.empty() && item.timestamp_ms <= t->ring.back().timestamp_ms) {
      throw Error(ErrorCode::kOrderViolation,
                  "timestamp " + std::to_string(item.timestamp_ms) +
                      " not after " + std::to_string(t->ring.back().timestamp_ms));
    }
    t->ring.push_back(item);
    if (t->ring.size() > t->retention) t->ring.pop_front();
    for (auto& [id, sub] : t->subscribers) sub->Push(item);
  }

  // The retained backlog is queued ahead of any later publish.
  std::shared_ptr<Subscription> Subscribe(const std::string& topic,
                                          const std::string& subscriber_id) {
    auto t = Find(topic);
    std::lock_guard lock(t->mu);
    if (t->subscribers.count(subscriber_id)) {
      throw Error(ErrorCode::kInvalidParam,
                  "'" + subscriber_id + "' already subscribed to '" + topic + "'");
    }
    std::shared_ptr<Subscription> sub(new Subscription(subscriber_id, topic, t->ring));
    t->subscribers[subscriber_id] = sub;
    return sub;
  }

  void Unsubscribe(const std::string& topic, const std::string& subscriber_id) {
    auto t = Find(topic);
    std::lock_guard lock(t->mu);
    t->subscribers.erase(subscriber_id);
  }

  std::optional<DataItem> Latest(const std::string& topic) const {
    auto t = Find(topic);
    std::lock_guard lock(t->mu);
    if (t->ring.empty()) return std::nullopt;
    return t->ring.back();
  }

  // Retained items, oldest first.
  std::vector<DataItem> Recent(const std::string& topic) const {
    auto t = Find(topic);
    std::lock_guard lock(t->mu);
    return {t->ring.begin(), t->ring.end()};
  }

 private:
  struct Topic {
    explicit Topic(std::size_t r) : retention(r) {}
    std::size_t retention;
    std::mutex mu;
    std::deque<DataItem> ring;
    std::map<std::string, std::shared_ptr<Subscription>> subscribers;
  };

  std::shared_ptr<Topic> Find(const std::string& topic) const {
    std::lock_guard lock(mu_);
    auto it = topics_.find(topic);
    if (it == topics_.end()) {
      throw Error(ErrorCode::kUnknownTopic, "unknown topic '" + topic + "'");
    }
    return it->second;
  }

  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<Topic>> topics_;
};

// ---- Trajectories ---------------------------------------------------------

struct Waypoint {
  std::int64_t t_ms = 0;
  GeoPoint loc;

  friend bool operator==(const Waypoint&, const Waypoint&) = default;
};

namespace detail {

inline std::vector<std::string_view> SplitCsvLine(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    std::size_t comma = line.find(',', start);
    std::string_view field = line.substr(start, comma - start);
    while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) {
      field.remove_prefix(1);
    }
    while (!field.empty() && (field.back() == ' ' || field.back() == '\t' ||
                              field.back() == '\r')) {
      field.remove_suffix(1);
    }
    out.push_back(field);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

template <typename T>
T ParseNumber(std::string_view field, const std::string& where) {
  T value{};
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw Error(ErrorCode::kParseError,
                where + ": bad number '" + std::string(field) + "'");
  }
  return value;
}

// Non-empty lines after the header, with their 1-based line numbers.
inline std::vector<std::pair<int, std::string>> CsvBody(const std::string& text,
                                                        std::string_view header) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  bool seen_header = false;
  std::vector<std::pair<int, std::string>> out;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!seen_header) {
      if (line != header) {
        throw Error(ErrorCode::kParseError,
                    "expected header '" + std::string(header) + "', got '" + line + "'");
      }
      seen_header = true;
      continue;
    }
    out.emplace_back(lineno, line);
  }
  if (!seen_header) throw Error(ErrorCode::kParseError, "empty CSV");
  return out;
}

inline std::string FormatDouble(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

// Waypoints strictly increasing in time; at least two.
class TrajectorySource {
 public:
  explicit TrajectorySource(std::vector<Waypoint> waypoints, double speed = 1.0,
                            bool loop = false)
      : waypoints_(std::move(waypoints)), speed_(speed), loop_(loop) {
    if (waypoints_.size() < 2) {
      throw Error(ErrorCode::kParseError, "trajectory needs at least 2 waypoints");
    }
    for (std::size_t i = 0; i < waypoints_.size(); ++i) {
      if (!ValidLatLon(waypoints_[i].loc)) {
        throw Error(ErrorCode::kParseError,
                    "waypoint " + std::to_string(i) + " has invalid coordinates");
      }
      if (i > 0 && waypoints_[i].t_ms <= waypoints_[i - 1].t_ms) {
        throw Error(ErrorCode::kMonotonicityError,
                    "waypoint " + std::to_string(i) + " at t_ms " +
                        std::to_string(waypoints_[i].t_ms) + " is not after " +
                        std::to_string(waypoints_[i - 1].t_ms));
      }
    }
    if (!(speed_ > 0.0) || !std::isfinite(speed_)) {
      throw Error(ErrorCode::kInvalidParam, "playback speed must be > 0");
    }
  }

  const std::vector<Waypoint>& waypoints() const { return waypoints_; }
  double speed() const { return speed_; }
  bool loop() const { return loop_; }
  std::int64_t duration_ms() const {
    return waypoints_.back().t_ms - waypoints_.front().t_ms;
  }

  // Position after `sim_ms` of playback. Past the end the vehicle stays at
  // the last waypoint unless looping.
  GeoPoint PositionAt(std::int64_t sim_ms) const {
    double t = static_cast<double>(waypoints_.front().t_ms) +
               static_cast<double>(sim_ms) * speed_;
    const double t0 = static_cast<double>(waypoints_.front().t_ms);
    const double t1 = static_cast<double>(waypoints_.back().t_ms);
    if (loop_ && t > t1) t = t0 + std::fmod(t - t0, t1 - t0);
    if (t <= t0) return waypoints_.front().loc;
    if (t >= t1) return waypoints_.back().loc;
    auto it = std::upper_bound(
        waypoints_.begin(), waypoints_.end(), t,
        [](double v, const Waypoint& w) { return v < static_cast<double>(w.t_ms); });
    const Waypoint& b = *it;
    const Waypoint& a = *(it - 1);
    const double f = (t - static_cast<double>(a.t_ms)) /
                     static_cast<double>(b.t_ms - a.t_ms);
    return {a.loc.lat + f * (b.loc.lat - a.loc.lat),
            a.loc.lon + f * (b.loc.lon - a.loc.lon)};
  }

 private:
  std::vector<Waypoint> waypoints_;
  double speed_;
  bool loop_;
};

inline constexpr std::string_view kTrajectoryHeader = "t_ms,lat,lon";

inline TrajectorySource ParseTrajectoryCsv(const std::string& text, double speed = 1.0,
                                           bool loop = false) {
  std::vector<Waypoint> wps;
  for (const auto& [lineno, line] : detail::CsvBody(text, kTrajectoryHeader)) {
    const std::string where = "line " + std::to_string(lineno);
    auto f = detail::SplitCsvLine(line);
    if (f.size() != 3) throw Error(ErrorCode::kParseError, where + ": expected 3 fields");
    wps.push_back({detail::ParseNumber<std::int64_t>(f[0], where),
                   {detail::ParseNumber<double>(f[1], where),
                    detail::ParseNumber<double>(f[2], where)}});
  }
  return TrajectorySource(std::move(wps), speed, loop);
}

inline TrajectorySource LoadTrajectory(const std::filesystem::path& path,
                                       double speed = 1.0, bool loop = false) {
  return ParseTrajectoryCsv(ReadFile(path), speed, loop);
}

inline std::string TrajectoryToCsv(const std::vector<Waypoint>& waypoints) {
  std::string out = std::string(kTrajectoryHeader) + "\n";
  for (const auto& w : waypoints) {
    out += std::to_string(w.t_ms) + "," + detail::FormatDouble(w.loc.lat) + "," +
           detail::FormatDouble(w.loc.lon) + "\n";
  }
  return out;
}

inline void WriteTrajectory(const std::filesystem::path& path,
                            const std::vector<Waypoint>& waypoints) {
  WriteFile(path, TrajectoryToCsv(waypoints));
}

// ---- Scalar sensors -------------------------------------------------------

enum class Waveform { kConstant, kSine, kCsv };

inline constexpr EnumNames<Waveform, 3> kWaveformNames{{
    {Waveform::kConstant, "constant"},
    {Waveform::kSine, "sine"},
    {Waveform::kCsv, "csv"},
}};

struct SensorSpec {
  std::string type_id;
  double rate_hz = 1.0;
  Waveform waveform = Waveform::kConstant;
  double value = 0.0;      // constant; mean of sine
  double amplitude = 0.0;  // sine
  double period_s = 60.0;  // sine
  std::vector<std::pair<std::int64_t, double>> samples;  // csv: (t_ms, value)
  double noise_std = 0.0;

  // Noise-free signal at simulated time t_ms. CSV samples are linearly
  // interpolated and held constant beyond their ends.
  double SignalAt(std::int64_t t_ms) const {
    switch (waveform) {
      case Waveform::kConstant:
        return value;
      case Waveform::kSine:
        return value + amplitude * std::sin(2.0 * std::numbers::pi *
                                            static_cast<double>(t_ms) /
                                            (period_s * 1000.0));
      case Waveform::kCsv: {
        if (t_ms <= samples.front().first) return samples.front().second;
        if (t_ms >= samples.back().first) return samples.back().second;
        auto it = std::upper_bound(
            samples.begin(), samples.end(), t_ms,
            [](std::int64_t v, const auto& s) { return v < s.first; });
        const auto& b = *it;
        const auto& a = *(it - 1);
        const double f = static_cast<double>(t_ms - a.first) /
                         static_cast<double>(b.first - a.first);
        return a.second + f * (b.second - a.second);
      }
    }
    return value;
  }
};

struct GpsSpec {
  std::string type_id = "location.gps";
  double rate_hz = 1.0;
};

struct SensorConfig {
  std::optional<GpsSpec> gps;
  std::vector<SensorSpec> sensors;
};

namespace detail {

inline double PositiveRate(const Json& j, const std::string& what) {
  double r = j.value("rate_hz", 1.0);
  if (!(r > 0.0) || !std::isfinite(r)) {
    throw Error(ErrorCode::kSchemaError, what + ": rate_hz must be > 0");
  }
  return r;
}

}  // namespace detail

// {"gps": {"type_id", "rate_hz"}, "sensors": [{"type_id", "rate_hz",
// "waveform", "value" | "mean","amplitude","period_s" | "file",
// "noise_std"}]}. CSV files are relative to `base_dir`.
inline SensorConfig SensorConfigFromJson(const Json& doc,
                                         const std::filesystem::path& base_dir = {}) {
  SensorConfig cfg;
  try {
    if (doc.contains("gps")) {
      GpsSpec g;
      g.type_id = doc["gps"].value("type_id", g.type_id);
      g.rate_hz = detail::PositiveRate(doc["gps"], "gps");
      cfg.gps = g;
    }
    for (const auto& s : doc.value("sensors", Json::array())) {
      SensorSpec spec;
      spec.type_id = s.at("type_id").get<std::string>();
      if (!IsValidTypeId(spec.type_id)) {
        throw Error(ErrorCode::kSchemaError, "malformed type id '" + spec.type_id + "'");
      }
      spec.rate_hz = detail::PositiveRate(s, spec.type_id);
      spec.waveform = ParseEnum(kWaveformNames, s.value("waveform", "constant"),
                                ErrorCode::kSchemaError, "waveform");
      spec.noise_std = s.value("noise_std", 0.0);
      if (!(spec.noise_std >= 0.0)) {
        throw Error(ErrorCode::kSchemaError, spec.type_id + ": noise_std must be >= 0");
      }
      switch (spec.waveform) {
        case Waveform::kConstant:
          spec.value = s.at("value").get<double>();
          break;
        case Waveform::kSine:
          spec.value = s.at("mean").get<double>();
          spec.amplitude = s.at("amplitude").get<double>();
          spec.period_s = s.at("period_s").get<double>();
          if (!(spec.period_s > 0.0)) {
            throw Error(ErrorCode::kSchemaError, spec.type_id + ": period_s must be > 0");
          }
          break;
        case Waveform::kCsv: {
          const std::string text = ReadFile(base_dir / s.at("file").get<std::string>());
          for (const auto& [lineno, line] : detail::CsvBody(text, "t_ms,value")) {
            const std::string where = "line " + std::to_string(lineno);
            auto f = detail::SplitCsvLine(line);
            if (f.size() != 2) {
              throw Error(ErrorCode::kParseError, where + ": expected 2 fields");
            }
            spec.samples.emplace_back(detail::ParseNumber<std::int64_t>(f[0], where),
                                      detail::ParseNumber<double>(f[1], where));
            if (spec.samples.size() > 1 &&
                spec.samples.back().first <= spec.samples[spec.samples.size() - 2].first) {
              throw Error(ErrorCode::kMonotonicityError, where + ": t_ms not increasing");
            }
          }
          if (spec.samples.empty()) {
            throw Error(ErrorCode::kParseError, spec.type_id + ": empty sample file");
          }
          break;
        }
      }
      cfg.sensors.push_back(std::move(spec));
    }
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kSchemaError, std::string("sensor config: ") + e.what());
  }
  return cfg;
}

inline SensorConfig LoadSensorConfig(const std::filesystem::path& path) {
  return SensorConfigFromJson(LoadJsonFile(path, ErrorCode::kSchemaError),
                              path.parent_path());
}

// ---- Simulator ------------------------------------------------------------

// Drives all sources from a simulated clock starting at 0. A source with
// period p emits at p, 2p, 3p, ... so stepping is additive in time.
// Emissions with equal timestamps are ordered GPS first, then sensors in
// configuration order.
class Simulator {
 public:
  Simulator(DataBus& bus, std::optional<TrajectorySource> trajectory,
            SensorConfig sensors, std::uint64_t seed)
      : bus_(bus), trajectory_(std::move(trajectory)), config_(std::move(sensors)) {
    if (trajectory_ && !config_.gps) config_.gps = GpsSpec{};
    if (config_.gps && !trajectory_) {
      throw Error(ErrorCode::kInvalidParam, "gps source without a trajectory");
    }
    std::size_t n = 0;
    if (config_.gps) {
      sources_.push_back({config_.gps->type_id, PeriodMs(config_.gps->rate_hz),
                          Rng::Derive(seed, n++), nullptr});
    }
    for (const auto& s : config_.sensors) {
      sources_.push_back({s.type_id, PeriodMs(s.rate_hz), Rng::Derive(seed, n++), &s});
    }
    for (const auto& src : sources_) {
      if (!bus_.HasTopic(src.type_id)) bus_.CreateTopic(src.type_id);
    }
  }

  Simulator(const Simulator&) = delete;
  Simulator& operator=(const Simulator&) = delete;

  std::int64_t now_ms() const { return now_ms_; }
  const std::optional<TrajectorySource>& trajectory() const { return trajectory_; }

  // Ground-truth position at the current simulated time.
  std::optional<GeoPoint> TruePosition() const {
    if (!trajectory_) return std::nullopt;
    return trajectory_->PositionAt(now_ms_);
  }

  std::vector<DataItem> StepClock(std::int64_t delta_ms) {
    if (delta_ms < 0) throw Error(ErrorCode::kInvalidParam, "cannot step backwards");
    const std::int64_t end = now_ms_ + delta_ms;
    struct Due {
      std::int64_t t;
      std::size_t src;
    };
    std::vector<Due> due;
    for (std::size_t i = 0; i < sources_.size(); ++i) {
      const std::int64_t p = sources_[i].period_ms;
      for (std::int64_t k = now_ms_ / p + 1; k * p <= end; ++k) due.push_back({k * p, i});
    }
    std::stable_sort(due.begin(), due.end(),
                     [](const Due& a, const Due& b) { return a.t < b.t; });
    std::vector<DataItem> out;
    out.reserve(due.size());
    for (const Due& d : due) {
      DataItem item = Emit(sources_[d.src], d.t);
      bus_.Publish(item.type_id, item);
      out.push_back(std::move(item));
    }
    now_ms_ = end;
    return out;
  }

 private:
  struct Source {
    std::string type_id;
    std::int64_t period_ms;
    Rng rng;
    const SensorSpec* sensor;  // nullptr for GPS
  };

  static std::int64_t PeriodMs(double rate_hz) {
    return std::max<std::int64_t>(1, std::llround(1000.0 / rate_hz));
  }

  static double Gaussian(Rng& rng) {
    const double u1 = rng.UniformOpen();
    const double u2 = rng.Uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  DataItem Emit(Source& src, std::int64_t t) {
    DataItem item;
    item.type_id = src.type_id;
    item.timestamp_ms = t;
    if (!src.sensor) {
      item.payload = trajectory_->PositionAt(t);
      item.source = "sim:gps";
    } else {
      double v = src.sensor->SignalAt(t);
      if (src.sensor->noise_std > 0.0) v += src.sensor->noise_std * Gaussian(src.rng);
      item.payload = v;
      item.source = "sim:" + src.type_id;
    }
    return item;
  }

  DataBus& bus_;
  std::optional<TrajectorySource> trajectory_;
  SensorConfig config_;
  std::vector<Source> sources_;
  std::int64_t now_ms_ = 0;
};

}  // namespace vpriv
