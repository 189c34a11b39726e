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

// One uniform transformation contract over all data PETs: a PetStep names
// the PET and carries its parameters; ApplyPet maps an item to an item.

#pragma once

#include <cstdio>
#include <string>
#include <vector>

#include "vpriv/common/bytes.hpp"
#include "vpriv/common/crypto.hpp"
#include "vpriv/common/json_io.hpp"
#include "vpriv/datamodel.hpp"
#include "vpriv/pets/generalize.hpp"
#include "vpriv/pets/planar.hpp"
#include "vpriv/pets/pseudonym.hpp"
#include "vpriv/pets/registry.hpp"
#include "vpriv/pets/scalar.hpp"

namespace vpriv::pets {

struct PetStep {
  std::string pet_id;
  double epsilon = 0.0;      // planar_laplace, planar_isotropic, laplace_scalar
  double sensitivity = 0.0;  // laplace_scalar
  std::vector<Vec2> hull{};  // planar_isotropic; empty selects DefaultHull()
  double grid_m = 0.0;       // round_location
  GeoPoint grid_origin{};    // round_location
  std::string purpose{};     // pseudonymize
  std::string policy{};      // pbe

  friend bool operator==(const PetStep&, const PetStep&) = default;

  bool IsDifferentiallyPrivate() const {
    return pet_id == kPlanarLaplace || pet_id == kPlanarIsotropic ||
           pet_id == kLaplaceScalar;
  }

  ConvexHull Hull() const { return hull.empty() ? DefaultHull() : ConvexHull(hull); }

  // Fixed-format parameter string; equal parameters give equal strings.
  std::string CanonicalParams() const {
    auto num = [](double v) {
      char buf[40];
      std::snprintf(buf, sizeof buf, "%.17g", v);
      return std::string(buf);
    };
    std::string out = pet_id;
    if (pet_id == kPlanarLaplace || pet_id == kLaplaceScalar ||
        pet_id == kPlanarIsotropic) {
      out += ";epsilon=" + num(epsilon);
    }
    if (pet_id == kLaplaceScalar) out += ";sensitivity=" + num(sensitivity);
    if (pet_id == kPlanarIsotropic) {
      out += ";hull=";
      if (hull.empty()) {
        out += "default16";
      } else {
        for (const Vec2& v : hull) out += "(" + num(v.x) + "," + num(v.y) + ")";
      }
    }
    if (pet_id == kRoundLocation) {
      out += ";grid_m=" + num(grid_m) + ";origin=" + num(grid_origin.lat) + "," +
             num(grid_origin.lon);
    }
    if (pet_id == kPseudonymize) out += ";purpose=" + purpose;
    if (pet_id == kPbe) out += ";policy=" + policy;
    return out;
  }

  OrderedJson ToJson() const {
    OrderedJson j;
    j["pet_id"] = pet_id;
    if (IsDifferentiallyPrivate()) j["epsilon"] = epsilon;
    if (pet_id == kLaplaceScalar) j["sensitivity"] = sensitivity;
    if (pet_id == kPlanarIsotropic) {
      if (hull.empty()) {
        j["hull"] = "default";
      } else {
        j["hull"] = OrderedJson::array();
        for (const Vec2& v : hull) j["hull"].push_back({v.x, v.y});
      }
    }
    if (pet_id == kRoundLocation) j["grid_m"] = grid_m;
    if (pet_id == kPseudonymize) j["purpose"] = purpose;
    if (pet_id == kPbe) j["policy"] = policy;
    return j;
  }
};

// Secrets some PETs need; held by the privacy manager only.
struct PetContext {
  Bytes pseudonym_secret;
};

inline DataItem ApplyPet(const PetStep& step, const DataItem& item, Rng& rng,
                         const PetContext& ctx = {}) {
  DataItem out = item;
  auto require_geo = [&]() -> const GeoPoint& {
    if (KindOf(item.payload) != PayloadKind::kGeoPoint) {
      throw Error(ErrorCode::kPipelineError, step.pet_id + " needs a geo payload");
    }
    return item.geo();
  };
  if (step.pet_id == kPlanarLaplace) {
    out.payload = PlanarLaplace(require_geo(), step.epsilon, rng);
  } else if (step.pet_id == kPlanarIsotropic) {
    const GeoPoint& loc = require_geo();
    out.payload = PlanarIsotropic(loc, step.epsilon, step.Hull(), rng);
  } else if (step.pet_id == kRoundLocation) {
    out.payload = RoundLocation(require_geo(), step.grid_m, LocalFrame(step.grid_origin));
  } else if (step.pet_id == kLaplaceScalar) {
    if (KindOf(item.payload) != PayloadKind::kScalar) {
      throw Error(ErrorCode::kPipelineError, "laplace_scalar needs a scalar payload");
    }
    out.payload = LaplaceScalar(item.scalar(), step.sensitivity, step.epsilon, rng);
  } else if (step.pet_id == kPseudonymize) {
    out.source = Pseudonymize(item.source, step.purpose, ctx.pseudonym_secret);
  } else {
    throw Error(ErrorCode::kPipelineError, "'" + step.pet_id + "' is not a data PET");
  }
  return out;
}

}  // namespace vpriv::pets
