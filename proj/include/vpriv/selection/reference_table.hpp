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

// Embedded reference copy of the GDPR-principle to PET-family mapping. The
// shipped data file (data/pet_mapping.json) is checked against this copy.

#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "vpriv/common/enum_names.hpp"
#include "vpriv/datamodel.hpp"

namespace vpriv {

enum class PetFamily {
  kAnonymityBased,
  kCryptographyBased,
  kAuthenticationBased,
  kTraceability,
  kImmutability,
};
inline constexpr EnumNames<PetFamily, 5> kPetFamilyNames{{
    {PetFamily::kAnonymityBased, "AnonymityBased"},
    {PetFamily::kCryptographyBased, "CryptographyBased"},
    {PetFamily::kAuthenticationBased, "AuthenticationBased"},
    {PetFamily::kTraceability, "Traceability"},
    {PetFamily::kImmutability, "Immutability"},
}};
inline std::string_view ToString(PetFamily v) { return NameOf(kPetFamilyNames, v); }

// Strong = green check, ContextDependent = yellow check, None = blank.
enum class Strength { kNone, kContextDependent, kStrong };
inline constexpr EnumNames<Strength, 3> kStrengthNames{{
    {Strength::kNone, "None"},
    {Strength::kContextDependent, "ContextDependent"},
    {Strength::kStrong, "Strong"},
}};
inline std::string_view ToString(Strength v) { return NameOf(kStrengthNames, v); }

struct MappingRow {
  Layer layer;
  PetFamily family;
  // Indexed in GdprPrinciple order: LFT, PL, DM, A, SL, IC, Acc.
  std::array<Strength, 7> cells;

  Strength Cell(GdprPrinciple p) const { return cells[static_cast<int>(p)]; }
};

namespace reference_table {
inline constexpr Strength N = Strength::kNone;
inline constexpr Strength Y = Strength::kContextDependent;
inline constexpr Strength G = Strength::kStrong;
}  // namespace reference_table

//                                        LFT PL DM A  SL IC Acc
inline const std::vector<MappingRow>& EmbeddedMappingTable() {
  using namespace reference_table;
  static const std::vector<MappingRow> rows = {
      {Layer::kPhysical, PetFamily::kAnonymityBased,          {N, N, G, N, N, N, N}},
      {Layer::kPhysical, PetFamily::kCryptographyBased,       {N, G, G, N, N, G, N}},
      {Layer::kCommunication, PetFamily::kAnonymityBased,     {N, N, G, N, N, N, N}},
      {Layer::kCommunication, PetFamily::kAuthenticationBased,{N, N, N, N, N, G, G}},
      {Layer::kCommunication, PetFamily::kCryptographyBased,  {N, N, N, N, N, G, N}},
      {Layer::kProcessing, PetFamily::kAnonymityBased,        {N, N, G, N, N, N, N}},
      {Layer::kProcessing, PetFamily::kCryptographyBased,     {Y, G, G, N, N, G, N}},
      {Layer::kProcessing, PetFamily::kTraceability,          {Y, Y, G, N, N, N, Y}},
      {Layer::kStorage, PetFamily::kCryptographyBased,        {N, G, G, N, Y, G, N}},
      {Layer::kStorage, PetFamily::kImmutability,             {G, N, N, N, N, G, G}},
  };
  return rows;
}

inline bool TableHasRow(Layer layer, PetFamily family) {
  for (const auto& r : EmbeddedMappingTable()) {
    if (r.layer == layer && r.family == family) return true;
  }
  return false;
}

}  // namespace vpriv
