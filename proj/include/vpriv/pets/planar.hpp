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

// Planar location mechanisms: the polar Laplace mechanism and the 2-D K-norm
// ("planar isotropic") mechanism over a convex hull.

#pragma once

#include <boost/math/special_functions/lambert_w.hpp>

#include <algorithm>

#include <cmath>
#include <numbers>
#include <vector>

#include "vpriv/common/error.hpp"
#include "vpriv/common/geo.hpp"
#include "vpriv/common/rng.hpp"

namespace vpriv::pets {

inline void RequirePositiveEpsilon(double epsilon) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    throw Error(ErrorCode::kInvalidParam, "epsilon must be > 0");
  }
}

// Convex polygon in meters, counterclockwise, origin strictly inside.
class ConvexHull {
 public:
  ConvexHull() = default;

  explicit ConvexHull(std::vector<Vec2> vertices)
      : vertices_(std::move(vertices)) {
    const std::size_t n = vertices_.size();
    if (n < 3) throw Error(ErrorCode::kInvalidParam, "hull needs >= 3 vertices");
    for (std::size_t i = 0; i < n; ++i) {
      const Vec2 a = vertices_[i];
      const Vec2 b = vertices_[(i + 1) % n];
      const Vec2 c = vertices_[(i + 2) % n];
      if (Cross(b - a, c - b) <= 0.0) {
        throw Error(ErrorCode::kInvalidParam,
                    "hull must be strictly convex and counterclockwise");
      }
      // Edge a->b with the origin on its left: a x b > 0.
      if (Cross(a, b) <= 0.0) {
        throw Error(ErrorCode::kInvalidParam,
                    "origin must lie strictly inside the hull");
      }
    }
    double total = 0.0;
    cumulative_area_.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      total += 0.5 * Cross(vertices_[i], vertices_[(i + 1) % n]);
      cumulative_area_.push_back(total);
    }
    area_ = total;
  }

  // Regular n-gon inscribed in the circle of the given radius.
  static ConvexHull Regular(int sides, double radius) {
    if (sides < 3 || !(radius > 0.0)) {
      throw Error(ErrorCode::kInvalidParam, "bad regular polygon");
    }
    std::vector<Vec2> v;
    for (int i = 0; i < sides; ++i) {
      double a = 2.0 * std::numbers::pi * i / sides;
      v.push_back({radius * std::cos(a), radius * std::sin(a)});
    }
    return ConvexHull(std::move(v));
  }

  // Axis-aligned square [-h, h]^2.
  static ConvexHull Square(double half_width) {
    return ConvexHull({{-half_width, -half_width},
                       {half_width, -half_width},
                       {half_width, half_width},
                       {-half_width, half_width}});
  }

  ConvexHull Scaled(double s) const {
    std::vector<Vec2> v;
    for (const Vec2& p : vertices_) v.push_back(p * s);
    return ConvexHull(std::move(v));
  }

  const std::vector<Vec2>& vertices() const { return vertices_; }
  double area() const { return area_; }

  // Minkowski gauge: inf { t >= 0 : z in tK }.
  double Gauge(Vec2 z) const {
    double g = 0.0;
    const std::size_t n = vertices_.size();
    for (std::size_t i = 0; i < n; ++i) {
      const Vec2 a = vertices_[i];
      const Vec2 b = vertices_[(i + 1) % n];
      // Outward normal of edge a->b and its offset from the origin.
      const Vec2 normal{b.y - a.y, a.x - b.x};
      const double offset = normal.x * a.x + normal.y * a.y;
      g = std::max(g, (normal.x * z.x + normal.y * z.y) / offset);
    }
    return g;
  }

  // Uniform point in the hull body, via the fan of triangles at the origin.
  Vec2 SampleUniform(Rng& rng) const {
    const double target = rng.Uniform01() * area_;
    std::size_t i = 0;
    while (i + 1 < cumulative_area_.size() && cumulative_area_[i] <= target) ++i;
    const Vec2 a = vertices_[i];
    const Vec2 b = vertices_[(i + 1) % vertices_.size()];
    double u = rng.Uniform01();
    double v = rng.Uniform01();
    if (u + v > 1.0) {
      u = 1.0 - u;
      v = 1.0 - v;
    }
    return a * u + b * v;
  }

 private:
  static double Cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }

  std::vector<Vec2> vertices_;
  std::vector<double> cumulative_area_;
  double area_ = 0.0;
};

// Radius of the polar Laplace law with density eps^2 r exp(-eps r), via the
// inverse CDF  r = -(W_{-1}((p - 1) / e) + 1) / eps.
inline double PolarLaplaceRadius(double epsilon, double p) {
  const double w = boost::math::lambert_wm1((p - 1.0) / std::numbers::e);
  return -(w + 1.0) / epsilon;
}

inline Vec2 PlanarLaplaceNoise(double epsilon, Rng& rng) {
  RequirePositiveEpsilon(epsilon);
  const double theta = 2.0 * std::numbers::pi * rng.Uniform01();
  const double r = PolarLaplaceRadius(epsilon, rng.UniformOpen());
  return {r * std::cos(theta), r * std::sin(theta)};
}

// K-norm noise: a uniform point of the hull scaled by a Gamma(3, 1/eps)
// radius, giving density proportional to exp(-eps * gauge(z)).
inline Vec2 PlanarIsotropicNoise(double epsilon, const ConvexHull& hull,
                                 Rng& rng) {
  RequirePositiveEpsilon(epsilon);
  if (hull.vertices().size() < 3) {
    throw Error(ErrorCode::kInvalidParam, "degenerate hull");
  }
  const Vec2 u = hull.SampleUniform(rng);
  const double r = -(std::log(rng.UniformOpen()) + std::log(rng.UniformOpen()) +
                     std::log(rng.UniformOpen())) /
                   epsilon;
  return u * r;
}

inline double PlanarLaplaceLogDensity(double epsilon, Vec2 z) {
  return 2.0 * std::log(epsilon) - std::log(2.0 * std::numbers::pi) -
         epsilon * z.Norm();
}

inline double PlanarIsotropicLogDensity(double epsilon, const ConvexHull& hull,
                                        Vec2 z) {
  return 2.0 * std::log(epsilon) - std::log(2.0 * hull.area()) -
         epsilon * hull.Gauge(z);
}

namespace detail {
inline GeoPoint ClampGeo(GeoPoint p) {
  p.lat = std::clamp(p.lat, -90.0, 90.0);
  if (p.lon > 180.0) p.lon -= 360.0;
  if (p.lon < -180.0) p.lon += 360.0;
  return p;
}
}  // namespace detail

inline GeoPoint PlanarLaplace(GeoPoint loc, double epsilon, Rng& rng) {
  return detail::ClampGeo(LocalFrame(loc).ToGeo(PlanarLaplaceNoise(epsilon, rng)));
}

inline GeoPoint PlanarIsotropic(GeoPoint loc, double epsilon,
                                const ConvexHull& hull, Rng& rng) {
  return detail::ClampGeo(
      LocalFrame(loc).ToGeo(PlanarIsotropicNoise(epsilon, hull, rng)));
}

// The hull used when a rule supplies none: regular 16-gon in the unit disc.
inline const ConvexHull& DefaultHull() {
  static const ConvexHull hull = ConvexHull::Regular(16, 1.0);
  return hull;
}

}  // namespace vpriv::pets
