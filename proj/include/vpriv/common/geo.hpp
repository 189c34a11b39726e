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

#pragma once

#include <cmath>
#include <numbers>

namespace vpriv {

inline constexpr double kEarthRadiusM = 6371008.8;

// WGS84 degrees.
struct GeoPoint {
  double lat = 0.0;
  double lon = 0.0;

  friend bool operator==(const GeoPoint&, const GeoPoint&) = default;
};

// Planar offset in meters: x east, y north.
struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Vec2&, const Vec2&) = default;
  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  double Norm() const { return std::hypot(x, y); }
};

// Equirectangular projection around a fixed origin. Adequate at city scale.
class LocalFrame {
 public:
  LocalFrame() = default;
  explicit LocalFrame(GeoPoint origin)
      : origin_(origin),
        meters_per_deg_lat_(kEarthRadiusM * std::numbers::pi / 180.0),
        meters_per_deg_lon_(meters_per_deg_lat_ *
                            std::cos(origin.lat * std::numbers::pi / 180.0)) {}

  const GeoPoint& origin() const { return origin_; }

  Vec2 ToMeters(GeoPoint p) const {
    return {(p.lon - origin_.lon) * meters_per_deg_lon_,
            (p.lat - origin_.lat) * meters_per_deg_lat_};
  }

  GeoPoint ToGeo(Vec2 v) const {
    return {origin_.lat + v.y / meters_per_deg_lat_,
            origin_.lon + v.x / meters_per_deg_lon_};
  }

 private:
  GeoPoint origin_{};
  double meters_per_deg_lat_ = kEarthRadiusM * std::numbers::pi / 180.0;
  double meters_per_deg_lon_ = kEarthRadiusM * std::numbers::pi / 180.0;
};

// Distance in meters in the frame centered at `a`.
inline double DistanceM(GeoPoint a, GeoPoint b) {
  return LocalFrame(a).ToMeters(b).Norm();
}

inline bool ValidLatLon(GeoPoint p) {
  return std::isfinite(p.lat) && std::isfinite(p.lon) && p.lat >= -90.0 &&
         p.lat <= 90.0 && p.lon >= -180.0 && p.lon <= 180.0;
}

}  // namespace vpriv
