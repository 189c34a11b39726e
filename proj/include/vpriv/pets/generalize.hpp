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

#include "vpriv/common/error.hpp"
#include "vpriv/common/geo.hpp"

namespace vpriv::pets {

// Snaps a location to the center of its grid_m x grid_m cell. The grid is
// anchored at the origin of `frame`, so repeated snapping is a no-op.
inline GeoPoint RoundLocation(GeoPoint loc, double grid_m,
                              const LocalFrame& frame) {
  if (!(grid_m > 0.0) || !std::isfinite(grid_m)) {
    throw Error(ErrorCode::kInvalidParam, "grid_m must be > 0");
  }
  const Vec2 m = frame.ToMeters(loc);
  const double cx = (std::floor(m.x / grid_m) + 0.5) * grid_m;
  const double cy = (std::floor(m.y / grid_m) + 0.5) * grid_m;
  return frame.ToGeo({cx, cy});
}

}  // namespace vpriv::pets
