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

// PET selection: trust model -> relevant GDPR principles -> candidate PET
// families from the mapping table -> concrete PETs ranked by maturity. The
// engine stops at the ranked shortlist; use-case trade-offs are left to the
// caller.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "vpriv/common/json_io.hpp"
#include "vpriv/datamodel.hpp"
#include "vpriv/pets/registry.hpp"
#include "vpriv/selection/reference_table.hpp"

namespace vpriv::selection {

// ---- Mapping table --------------------------------------------------------

class MappingTable {
 public:
  MappingTable() = default;
  explicit MappingTable(std::vector<MappingRow> rows) : rows_(std::move(rows)) {}

  static MappingTable Embedded() { return MappingTable(EmbeddedMappingTable()); }

  static MappingTable FromJson(const Json& doc) {
    std::vector<MappingRow> rows;
    try {
      for (const auto& r : doc.at("rows")) {
        MappingRow row{};
        row.layer = ParseEnum(kLayerNames, r.at("layer").get<std::string>(),
                              ErrorCode::kSchemaError, "layer");
        row.family = ParseEnum(kPetFamilyNames, r.at("family").get<std::string>(),
                               ErrorCode::kSchemaError, "PET family");
        const Json& cells = r.at("cells");
        if (cells.size() != kAllPrinciples.size()) {
          throw Error(ErrorCode::kSchemaError, "each row needs exactly 7 cells");
        }
        for (GdprPrinciple p : kAllPrinciples) {
          row.cells[static_cast<int>(p)] =
              ParseEnum(kStrengthNames,
                        cells.at(std::string(ToString(p))).get<std::string>(),
                        ErrorCode::kSchemaError, "strength");
        }
        rows.push_back(row);
      }
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::kSchemaError, e.what());
    }
    return MappingTable(std::move(rows));
  }

  static MappingTable Load(const std::filesystem::path& path) {
    return FromJson(LoadJsonFile(path));
  }

  Json ToJson() const {
    Json rows = Json::array();
    for (const auto& r : rows_) {
      Json cells = Json::object();
      for (GdprPrinciple p : kAllPrinciples) {
        cells[std::string(ToString(p))] = ToString(r.Cell(p));
      }
      rows.push_back({{"layer", ToString(r.layer)},
                      {"family", ToString(r.family)},
                      {"cells", cells}});
    }
    return {{"rows", rows}};
  }

  const std::vector<MappingRow>& rows() const { return rows_; }

  const MappingRow* Find(Layer layer, PetFamily family) const {
    for (const auto& r : rows_) {
      if (r.layer == layer && r.family == family) return &r;
    }
    return nullptr;
  }

 private:
  std::vector<MappingRow> rows_;
};

struct FamilyCandidate {
  PetFamily family;
  Strength strength;

  friend bool operator==(const FamilyCandidate&, const FamilyCandidate&) = default;
};

// Families of `layer` with a non-blank cell for any requested principle, in
// table row order. A family matched by several principles reports its
// strongest cell.
inline std::vector<FamilyCandidate> CandidatePetFamilies(
    const MappingTable& table, const std::set<GdprPrinciple>& principles,
    Layer layer) {
  std::vector<FamilyCandidate> out;
  for (const auto& row : table.rows()) {
    if (row.layer != layer) continue;
    Strength best = Strength::kNone;
    for (GdprPrinciple p : principles) best = std::max(best, row.Cell(p));
    if (best != Strength::kNone) out.push_back({row.family, best});
  }
  return out;
}

// Differences between a mapping table and the embedded reference copy, one
// human-readable line per mismatching cell or row.
inline std::vector<std::string> DiffAgainstEmbedded(const MappingTable& table) {
  std::vector<std::string> diffs;
  const auto& reference = EmbeddedMappingTable();
  for (const auto& ref : reference) {
    const MappingRow* row = table.Find(ref.layer, ref.family);
    const std::string name =
        std::string(ToString(ref.layer)) + "/" + std::string(ToString(ref.family));
    if (!row) {
      diffs.push_back(name + ": row missing");
      continue;
    }
    for (GdprPrinciple p : kAllPrinciples) {
      if (row->Cell(p) != ref.Cell(p)) {
        diffs.push_back(name + "/" + std::string(ToString(p)) + ": expected " +
                        std::string(ToString(ref.Cell(p))) + ", found " +
                        std::string(ToString(row->Cell(p))));
      }
    }
  }
  for (const auto& row : table.rows()) {
    bool known = false;
    for (const auto& ref : reference) {
      known |= ref.layer == row.layer && ref.family == row.family;
    }
    if (!known) {
      diffs.push_back(std::string(ToString(row.layer)) + "/" +
                      std::string(ToString(row.family)) + ": unexpected row");
    }
  }
  if (table.rows().size() > reference.size() && diffs.empty()) {
    diffs.push_back("duplicate rows present");
  }
  return diffs;
}

// ---- Relevance ------------------------------------------------------------

enum class Relevance { kPrimary, kSecondary };
inline constexpr EnumNames<Relevance, 2> kRelevanceNames{{
    {Relevance::kPrimary, "Primary"},
    {Relevance::kSecondary, "Secondary"},
}};
inline std::string_view ToString(Relevance v) { return NameOf(kRelevanceNames, v); }

struct PrincipleAssessment {
  GdprPrinciple principle;
  Relevance relevance = Relevance::kSecondary;
  bool accountability_required = false;

  friend bool operator==(const PrincipleAssessment&,
                         const PrincipleAssessment&) = default;
};

struct RelevanceRule {
  std::string name;
  std::set<Role> roles;
  std::set<Trust> trust;
  std::set<GdprPrinciple> primary;
  std::set<GdprPrinciple> accountability;
};

struct RelevanceRules {
  std::vector<RelevanceRule> rules;

  static RelevanceRules Parse(const std::string& text) {
    if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
      throw Error(ErrorCode::kRuleFileError, "relevance rule file is empty");
    }
    Json doc = ParseJson(text, ErrorCode::kRuleFileError);
    RelevanceRules out;
    try {
      for (const auto& r : doc.at("rules")) {
        RelevanceRule rule;
        rule.name = r.value("name", "");
        for (const auto& v : r.at("roles")) {
          rule.roles.insert(ParseEnum(kRoleNames, v.get<std::string>(),
                                      ErrorCode::kRuleFileError, "role"));
        }
        for (const auto& v : r.at("trust")) {
          rule.trust.insert(ParseEnum(kTrustNames, v.get<std::string>(),
                                      ErrorCode::kRuleFileError, "trust level"));
        }
        for (const auto& v : r.value("primary", Json::array())) {
          rule.primary.insert(ParseEnum(kPrincipleNames, v.get<std::string>(),
                                        ErrorCode::kRuleFileError, "principle"));
        }
        for (const auto& v : r.value("accountability", Json::array())) {
          rule.accountability.insert(
              ParseEnum(kPrincipleNames, v.get<std::string>(),
                        ErrorCode::kRuleFileError, "principle"));
        }
        out.rules.push_back(std::move(rule));
      }
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::kRuleFileError, e.what());
    }
    return out;
  }

  static RelevanceRules Load(const std::filesystem::path& path) {
    return Parse(ReadFile(path));
  }
};

// One assessment per principle, in principle order. Principles no rule
// elevates stay Secondary; none is ever dropped.
inline std::vector<PrincipleAssessment> RelevantPrinciples(
    const TrustModel& model, const RelevanceRules& rules) {
  if (auto v = model.Violations(); !v.empty()) {
    throw Error(ErrorCode::kSchemaError, v.front());
  }
  std::vector<PrincipleAssessment> out;
  for (GdprPrinciple p : kAllPrinciples) out.push_back({p});
  for (const auto& entity : model.entities) {
    for (const auto& rule : rules.rules) {
      if (!rule.roles.count(entity.role) || !rule.trust.count(entity.trust)) continue;
      for (GdprPrinciple p : rule.primary) {
        out[static_cast<int>(p)].relevance = Relevance::kPrimary;
      }
      for (GdprPrinciple p : rule.accountability) {
        out[static_cast<int>(p)].accountability_required = true;
      }
    }
  }
  return out;
}

// ---- Maturity ranking -----------------------------------------------------

struct MaturityRecord {
  std::string pet_id;
  int utility = 1;
  int scalability = 1;
  int robustness = 1;
  int low_power_suitability = 1;
  std::string notes;
};

class MaturityRegistry {
 public:
  static MaturityRegistry FromJson(const Json& doc) {
    MaturityRegistry reg;
    try {
      for (const auto& r : doc.at("records")) {
        MaturityRecord rec;
        rec.pet_id = r.at("pet_id").get<std::string>();
        rec.utility = r.at("utility").get<int>();
        rec.scalability = r.at("scalability").get<int>();
        rec.robustness = r.at("robustness").get<int>();
        rec.low_power_suitability = r.at("low_power_suitability").get<int>();
        rec.notes = r.value("notes", "");
        reg.Add(std::move(rec));
      }
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::kSchemaError, e.what());
    }
    return reg;
  }

  static MaturityRegistry Load(const std::filesystem::path& path) {
    return FromJson(LoadJsonFile(path));
  }

  void Add(MaturityRecord rec) {
    for (int s : {rec.utility, rec.scalability, rec.robustness,
                  rec.low_power_suitability}) {
      if (s < 1 || s > 5) {
        throw Error(ErrorCode::kSchemaError, rec.pet_id + ": score outside 1..5");
      }
    }
    std::string id = rec.pet_id;
    records_[id] = std::move(rec);
  }

  const MaturityRecord* Find(const std::string& id) const {
    auto it = records_.find(id);
    return it == records_.end() ? nullptr : &it->second;
  }

  // PET ids of the registry that have no maturity record.
  std::vector<std::string> MissingFrom(const pets::PetRegistry& pets) const {
    std::vector<std::string> out;
    for (const auto& [id, d] : pets.pets()) {
      if (!records_.count(id)) out.push_back(id);
    }
    return out;
  }

  const std::map<std::string, MaturityRecord>& records() const { return records_; }

 private:
  std::map<std::string, MaturityRecord> records_;
};

// Weights for (utility, scalability, robustness, low-power suitability).
struct Weights {
  double utility = 0.25;
  double scalability = 0.25;
  double robustness = 0.25;
  double low_power = 0.25;

  void Validate() const {
    const double sum = utility + scalability + robustness + low_power;
    for (double w : {utility, scalability, robustness, low_power}) {
      if (!(w >= 0.0)) throw Error(ErrorCode::kInvalidParam, "negative weight");
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw Error(ErrorCode::kInvalidParam, "weights must sum to 1");
    }
  }
};

struct RankedPet {
  std::string pet_id;
  double score = 0.0;

  friend bool operator==(const RankedPet&, const RankedPet&) = default;
};

// Descending weighted score; equal scores ordered by pet_id.
inline std::vector<RankedPet> RankCandidates(
    const std::vector<std::string>& candidates, const MaturityRegistry& registry,
    const Weights& weights) {
  weights.Validate();
  std::vector<RankedPet> out;
  for (const auto& id : candidates) {
    const MaturityRecord* r = registry.Find(id);
    if (!r) throw Error(ErrorCode::kUnknownPet, "no maturity record for " + id);
    out.push_back({id, weights.utility * r->utility +
                           weights.scalability * r->scalability +
                           weights.robustness * r->robustness +
                           weights.low_power * r->low_power_suitability});
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const RankedPet& a, const RankedPet& b) {
                     if (a.score != b.score) return a.score > b.score;
                     return a.pet_id < b.pet_id;
                   });
  return out;
}

// Concrete PETs tagged with one of the families and applicable at the layer.
inline std::vector<std::string> ExpandFamilies(
    const pets::PetRegistry& pets, const std::vector<FamilyCandidate>& families,
    Layer layer) {
  std::vector<std::string> out;
  for (const auto& [id, d] : pets.pets()) {
    if (!d.applicable_layers.count(layer)) continue;
    for (const auto& f : families) {
      if (f.family == d.family) {
        out.push_back(id);
        break;
      }
    }
  }
  return out;
}

// ---- End to end -----------------------------------------------------------

struct SelectionData {
  MappingTable mapping;
  RelevanceRules relevance;
  MaturityRegistry maturity;
  pets::PetRegistry pets;
};

struct SelectionReport {
  Layer layer;
  std::vector<PrincipleAssessment> assessments;
  std::set<GdprPrinciple> principles_used;
  std::vector<FamilyCandidate> families;
  std::vector<RankedPet> ranked;
};

// Candidates come from the Primary principles; when the trust model elevates
// none, every principle is used.
inline SelectionReport SelectPets(const TrustModel& model, Layer layer,
                                  const SelectionData& data,
                                  const Weights& weights = {}) {
  SelectionReport report{layer, RelevantPrinciples(model, data.relevance), {}, {}, {}};
  for (const auto& a : report.assessments) {
    if (a.relevance == Relevance::kPrimary) report.principles_used.insert(a.principle);
  }
  if (report.principles_used.empty()) {
    report.principles_used.insert(kAllPrinciples.begin(), kAllPrinciples.end());
  }
  report.families = CandidatePetFamilies(data.mapping, report.principles_used, layer);
  report.ranked = RankCandidates(ExpandFamilies(data.pets, report.families, layer),
                                 data.maturity, weights);
  return report;
}

inline OrderedJson ToJson(const SelectionReport& r) {
  OrderedJson j;
  j["layer"] = ToString(r.layer);
  j["assessments"] = OrderedJson::array();
  for (const auto& a : r.assessments) {
    j["assessments"].push_back({{"principle", ToString(a.principle)},
                                {"relevance", ToString(a.relevance)},
                                {"accountability_required", a.accountability_required}});
  }
  j["principles_used"] = OrderedJson::array();
  for (auto p : r.principles_used) j["principles_used"].push_back(ToString(p));
  j["families"] = OrderedJson::array();
  for (const auto& f : r.families) {
    j["families"].push_back({{"family", ToString(f.family)},
                             {"strength", ToString(f.strength)}});
  }
  j["ranked"] = OrderedJson::array();
  for (const auto& p : r.ranked) {
    j["ranked"].push_back({{"pet_id", p.pet_id}, {"score", p.score}});
  }
  return j;
}

}  // namespace vpriv::selection
