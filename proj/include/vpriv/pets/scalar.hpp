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
#include "vpriv/common/rng.hpp"

namespace vpriv::pets {

// value + Laplace(sensitivity / epsilon).
inline double LaplaceScalar(double value, double sensitivity, double epsilon,
                            Rng& rng) {
  if (!(sensitivity >= 0.0) || !std::isfinite(sensitivity)) {
    throw Error(ErrorCode::kInvalidParam, "sensitivity must be >= 0");
  }
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    throw Error(ErrorCode::kInvalidParam, "epsilon must be > 0");
  }
  const double u = rng.UniformOpen() - 0.5;
  if (sensitivity == 0.0) return value;
  const double scale = sensitivity / epsilon;
  const double noise = -scale * std::copysign(1.0, u) * std::log(1.0 - 2.0 * std::abs(u));
  return value + noise;
}

}  // namespace vpriv::pets
