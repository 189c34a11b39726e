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

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "vpriv/common/json_io.hpp"
#include "vpriv/datamodel.hpp"
#include "vpriv/selection/reference_table.hpp"

namespace vpriv::pets {

// Identifiers of the PETs this library implements.
inline constexpr std::string_view kPlanarLaplace = "planar_laplace";
inline constexpr std::string_view kPlanarIsotropic = "planar_isotropic";
inline constexpr std::string_view kLaplaceScalar = "laplace_scalar";
inline constexpr std::string_view kRoundLocation = "round_location";
inline constexpr std::string_view kPseudonymize = "pseudonymize";
inline constexpr std::string_view kPbe = "pbe";

struct ParamSpec {
  std::string name;
  std::string kind;  // "decimal", "polygon", "string"
  double min = 0.0;
  double max = 0.0;
};

struct PetDescriptor {
  std::string pet_id;
  PetFamily family = PetFamily::kAnonymityBased;
  std::set<Layer> applicable_layers;
  std::set<PayloadKind> payload_kinds;
  std::vector<ParamSpec> param_schema;
  bool deterministic = false;
  std::string description;
};

class PetRegistry {
 public:
  static PetRegistry FromJson(const Json& doc) {
    PetRegistry reg;
    try {
      for (const auto& rec : doc.at("pets")) {
        PetDescriptor d;
        d.pet_id = rec.at("pet_id").get<std::string>();
        d.family = ParseEnum(kPetFamilyNames, rec.at("family").get<std::string>(),
                             ErrorCode::kSchemaError, "PET family");
        for (const auto& l : rec.at("layers")) {
          d.applicable_layers.insert(ParseEnum(kLayerNames, l.get<std::string>(),
                                               ErrorCode::kSchemaError, "layer"));
        }
        for (const auto& k : rec.at("payload_kinds")) {
          d.payload_kinds.insert(ParseEnum(kPayloadKindNames, k.get<std::string>(),
                                           ErrorCode::kSchemaError,
                                           "payload kind"));
        }
        for (const auto& p : rec.value("params", Json::array())) {
          d.param_schema.push_back({p.at("name").get<std::string>(),
                                    p.at("kind").get<std::string>(),
                                    p.value("min", 0.0), p.value("max", 0.0)});
        }
        d.deterministic = rec.at("deterministic").get<bool>();
        d.description = rec.value("description", "");
        reg.Add(std::move(d));
      }
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::kSchemaError, e.what());
    }
    return reg;
  }

  static PetRegistry Load(const std::filesystem::path& path) {
    return FromJson(LoadJsonFile(path));
  }

  void Add(PetDescriptor d) {
    if (pets_.count(d.pet_id)) {
      throw Error(ErrorCode::kSchemaError, "duplicate pet_id " + d.pet_id);
    }
    for (Layer l : d.applicable_layers) {
      if (!TableHasRow(l, d.family)) {
        throw Error(ErrorCode::kSchemaError,
                    d.pet_id + ": no mapping row for " + std::string(ToString(l)) +
                        "/" + std::string(ToString(d.family)));
      }
    }
    std::string id = d.pet_id;
    pets_.emplace(std::move(id), std::move(d));
  }

  const PetDescriptor* Find(const std::string& id) const {
    auto it = pets_.find(id);
    return it == pets_.end() ? nullptr : &it->second;
  }
  bool Contains(const std::string& id) const { return Find(id) != nullptr; }

  const std::map<std::string, PetDescriptor>& pets() const { return pets_; }

  Json ToJson() const {
    Json arr = Json::array();
    for (const auto& [id, d] : pets_) {
      Json layers = Json::array();
      for (Layer l : d.applicable_layers) layers.push_back(ToString(l));
      Json kinds = Json::array();
      for (PayloadKind k : d.payload_kinds) kinds.push_back(ToString(k));
      arr.push_back({{"pet_id", id},
                     {"family", ToString(d.family)},
                     {"layers", layers},
                     {"payload_kinds", kinds},
                     {"deterministic", d.deterministic},
                     {"description", d.description}});
    }
    return {{"pets", arr}};
  }

 private:
  std::map<std::string, PetDescriptor> pets_;
};

}  // namespace vpriv::pets
