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

// Application manifests (closed JSON schema) and the install-time threat
// summary derived from them.

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <vector>

#include "vpriv/common/json_io.hpp"
#include "vpriv/datamodel.hpp"
#include "vpriv/pets/registry.hpp"

namespace vpriv {

enum class AccessMode { kDirect, kPetMediated, kComputed, kCombined };
inline constexpr EnumNames<AccessMode, 4> kAccessModeNames{{
    {AccessMode::kDirect, "Direct"},
    {AccessMode::kPetMediated, "PetMediated"},
    {AccessMode::kComputed, "Computed"},
    {AccessMode::kCombined, "Combined"},
}};
inline std::string_view ToString(AccessMode v) { return NameOf(kAccessModeNames, v); }

enum class Aggregate { kMean, kMin, kMax, kCount };
inline constexpr EnumNames<Aggregate, 4> kAggregateNames{{
    {Aggregate::kMean, "mean"},
    {Aggregate::kMin, "min"},
    {Aggregate::kMax, "max"},
    {Aggregate::kCount, "count"},
}};
inline std::string_view ToString(Aggregate v) { return NameOf(kAggregateNames, v); }

struct Computation {
  Aggregate aggregate = Aggregate::kMean;
  double window_s = 0.0;

  friend bool operator==(const Computation&, const Computation&) = default;
};

struct Constraints {
  double max_staleness_s = 0.0;
  double min_precision = 0.0;  // meters for geo types, payload unit otherwise
  double rate_hz = 0.0;        // 0 = unconstrained

  friend bool operator==(const Constraints&, const Constraints&) = default;
};

struct DataRequirement {
  std::string type_id;
  AccessMode access_mode = AccessMode::kDirect;
  std::vector<std::string> supported_pets;
  Constraints constraints;
  std::optional<Computation> computation;

  friend bool operator==(const DataRequirement&, const DataRequirement&) = default;
};

struct AppManifest {
  std::string app_id;
  std::string version;
  std::string provider_id;
  std::vector<std::string> purposes;
  std::vector<DataRequirement> data_requirements;

  friend bool operator==(const AppManifest&, const AppManifest&) = default;

  const DataRequirement* Requirement(const std::string& type_id) const {
    for (const auto& r : data_requirements) {
      if (r.type_id == type_id) return &r;
    }
    return nullptr;
  }
};

namespace detail {

inline void ExpectKeys(const Json& obj, const std::set<std::string>& required,
                       const std::set<std::string>& optional,
                       const std::string& where) {
  if (!obj.is_object()) {
    throw Error(ErrorCode::kSchemaError, where + " must be an object");
  }
  for (const auto& key : required) {
    if (!obj.contains(key)) {
      throw Error(ErrorCode::kSchemaError, where + ": missing field '" + key + "'");
    }
  }
  for (const auto& [key, value] : obj.items()) {
    if (!required.count(key) && !optional.count(key)) {
      throw Error(ErrorCode::kSchemaError, where + ": unknown field '" + key + "'");
    }
  }
}

inline std::string GetString(const Json& obj, const std::string& key,
                             const std::string& where) {
  const Json& v = obj.at(key);
  if (!v.is_string()) {
    throw Error(ErrorCode::kSchemaError, where + "." + key + " must be a string");
  }
  return v.get<std::string>();
}

inline double GetNumber(const Json& obj, const std::string& key,
                        const std::string& where) {
  const Json& v = obj.at(key);
  if (!v.is_number()) {
    throw Error(ErrorCode::kSchemaError, where + "." + key + " must be a number");
  }
  return v.get<double>();
}

inline std::vector<std::string> GetStringList(const Json& obj,
                                              const std::string& key,
                                              const std::string& where) {
  const Json& v = obj.at(key);
  if (!v.is_array()) {
    throw Error(ErrorCode::kSchemaError, where + "." + key + " must be an array");
  }
  std::vector<std::string> out;
  for (const auto& e : v) {
    if (!e.is_string()) {
      throw Error(ErrorCode::kSchemaError, where + "." + key + " must hold strings");
    }
    out.push_back(e.get<std::string>());
  }
  return out;
}

}  // namespace detail

// Parses and validates a manifest. Errors: SyntaxError for malformed JSON,
// SchemaError for structural or invariant violations, CatalogError for
// unknown data types or PETs.
inline AppManifest ParseManifest(const std::string& text,
                                 const DataCatalog& catalog,
                                 const pets::PetRegistry& pets) {
  using detail::GetNumber;
  using detail::GetString;
  const Json doc = ParseJson(text, ErrorCode::kSyntaxError);
  detail::ExpectKeys(doc,
                     {"app_id", "version", "provider_id", "purposes",
                      "data_requirements"},
                     {}, "manifest");
  AppManifest m;
  m.app_id = GetString(doc, "app_id", "manifest");
  m.version = GetString(doc, "version", "manifest");
  m.provider_id = GetString(doc, "provider_id", "manifest");
  m.purposes = detail::GetStringList(doc, "purposes", "manifest");

  static const std::regex kReverseDns(
      "[a-z][a-z0-9_-]*(\\.[a-z0-9][a-z0-9_-]*)+");
  static const std::regex kSemver(
      "(0|[1-9][0-9]*)\\.(0|[1-9][0-9]*)\\.(0|[1-9][0-9]*)"
      "(-[0-9A-Za-z.-]+)?(\\+[0-9A-Za-z.-]+)?");
  if (!std::regex_match(m.app_id, kReverseDns)) {
    throw Error(ErrorCode::kSchemaError, "app_id must be a reverse-DNS name");
  }
  if (!std::regex_match(m.version, kSemver)) {
    throw Error(ErrorCode::kSchemaError, "version must be semver");
  }
  if (m.provider_id.empty()) {
    throw Error(ErrorCode::kSchemaError, "provider_id must be non-empty");
  }
  if (m.purposes.empty()) {
    throw Error(ErrorCode::kSchemaError, "purposes must be non-empty");
  }
  for (const auto& p : m.purposes) {
    if (p.empty() || p.find_first_of(" \t()") != std::string::npos) {
      throw Error(ErrorCode::kSchemaError, "purpose '" + p + "' is not a token");
    }
  }

  const Json& reqs = doc.at("data_requirements");
  if (!reqs.is_array()) {
    throw Error(ErrorCode::kSchemaError, "data_requirements must be an array");
  }
  std::set<std::string> seen;
  for (std::size_t i = 0; i < reqs.size(); ++i) {
    const std::string where = "data_requirements[" + std::to_string(i) + "]";
    const Json& r = reqs[i];
    detail::ExpectKeys(r, {"type_id", "access_mode", "supported_pets", "constraints"},
                       {"computation"}, where);
    DataRequirement req;
    req.type_id = GetString(r, "type_id", where);
    req.access_mode = ParseEnum(kAccessModeNames, GetString(r, "access_mode", where),
                                ErrorCode::kSchemaError, "access mode");
    req.supported_pets = detail::GetStringList(r, "supported_pets", where);

    const Json& c = r.at("constraints");
    detail::ExpectKeys(c, {"max_staleness_s", "min_precision", "rate_hz"}, {},
                       where + ".constraints");
    req.constraints.max_staleness_s = GetNumber(c, "max_staleness_s", where);
    req.constraints.min_precision = GetNumber(c, "min_precision", where);
    req.constraints.rate_hz = GetNumber(c, "rate_hz", where);
    if (!(req.constraints.max_staleness_s > 0.0)) {
      throw Error(ErrorCode::kSchemaError, where + ": max_staleness_s must be > 0");
    }
    if (!(req.constraints.min_precision > 0.0)) {
      throw Error(ErrorCode::kSchemaError, where + ": min_precision must be > 0");
    }
    if (!(req.constraints.rate_hz >= 0.0)) {
      throw Error(ErrorCode::kSchemaError, where + ": rate_hz must be >= 0");
    }

    if (r.contains("computation")) {
      const Json& comp = r.at("computation");
      detail::ExpectKeys(comp, {"aggregate", "window_s"}, {}, where + ".computation");
      Computation computation;
      computation.aggregate =
          ParseEnum(kAggregateNames, GetString(comp, "aggregate", where),
                    ErrorCode::kSchemaError, "aggregate");
      computation.window_s = GetNumber(comp, "window_s", where);
      if (!(computation.window_s > 0.0)) {
        throw Error(ErrorCode::kSchemaError, where + ": window_s must be > 0");
      }
      req.computation = computation;
    }

    const bool needs_pets = req.access_mode == AccessMode::kPetMediated ||
                            req.access_mode == AccessMode::kCombined;
    const bool needs_computation = req.access_mode == AccessMode::kComputed ||
                                   req.access_mode == AccessMode::kCombined;
    if (needs_pets && req.supported_pets.empty()) {
      throw Error(ErrorCode::kSchemaError,
                  where + ": " + std::string(ToString(req.access_mode)) +
                      " access requires supported_pets");
    }
    if (needs_computation != req.computation.has_value()) {
      throw Error(ErrorCode::kSchemaError,
                  where + ": computation is required exactly for Computed and "
                          "Combined access");
    }
    if (!seen.insert(req.type_id).second) {
      throw Error(ErrorCode::kSchemaError, where + ": duplicate type_id");
    }
    if (!catalog.Find(req.type_id)) {
      throw Error(ErrorCode::kCatalogError, "unknown data type '" + req.type_id + "'");
    }
    for (const auto& pet : req.supported_pets) {
      if (!pets.Contains(pet)) {
        throw Error(ErrorCode::kCatalogError, "unknown PET '" + pet + "'");
      }
    }
    m.data_requirements.push_back(std::move(req));
  }
  return m;
}

inline OrderedJson ManifestToJson(const AppManifest& m) {
  OrderedJson doc;
  doc["app_id"] = m.app_id;
  doc["version"] = m.version;
  doc["provider_id"] = m.provider_id;
  doc["purposes"] = m.purposes;
  doc["data_requirements"] = OrderedJson::array();
  for (const auto& r : m.data_requirements) {
    OrderedJson e;
    e["type_id"] = r.type_id;
    e["access_mode"] = ToString(r.access_mode);
    e["supported_pets"] = r.supported_pets;
    e["constraints"] = {{"max_staleness_s", r.constraints.max_staleness_s},
                        {"min_precision", r.constraints.min_precision},
                        {"rate_hz", r.constraints.rate_hz}};
    if (r.computation) {
      e["computation"] = {{"aggregate", ToString(r.computation->aggregate)},
                          {"window_s", r.computation->window_s}};
    }
    doc["data_requirements"].push_back(std::move(e));
  }
  return doc;
}

inline std::string SerializeManifest(const AppManifest& m) {
  return ManifestToJson(m).dump(2) + "\n";
}

// ---- Threats --------------------------------------------------------------

enum class Severity { kLow, kMedium, kHigh };
inline constexpr EnumNames<Severity, 3> kSeverityNames{{
    {Severity::kLow, "Low"},
    {Severity::kMedium, "Medium"},
    {Severity::kHigh, "High"},
}};
inline std::string_view ToString(Severity v) { return NameOf(kSeverityNames, v); }

struct ThreatEntry {
  std::string type_id;
  Classification classification;
  AccessMode access_mode;
  std::vector<std::string> threat_texts;
  Severity severity;
};

struct ThreatReport {
  std::string app_id;
  std::vector<ThreatEntry> entries;
};

class ThreatRules {
 public:
  static ThreatRules FromJson(const Json& doc) {
    ThreatRules t;
    try {
      for (const auto& r : doc.at("rules")) {
        const auto cls = ParseEnum(kClassificationNames,
                                   r.at("classification").get<std::string>(),
                                   ErrorCode::kSchemaError, "classification");
        const auto mode = ParseEnum(kAccessModeNames,
                                    r.at("access_mode").get<std::string>(),
                                    ErrorCode::kSchemaError, "access mode");
        Cell cell;
        cell.severity = ParseEnum(kSeverityNames, r.at("severity").get<std::string>(),
                                  ErrorCode::kSchemaError, "severity");
        cell.texts = r.at("threats").get<std::vector<std::string>>();
        t.cells_[{cls, mode}] = std::move(cell);
      }
      for (const auto& r : doc.value("type_threats", Json::array())) {
        TypeThreat tt;
        tt.prefix = r.at("prefix").get<std::string>();
        for (const auto& m : r.at("access_modes")) {
          tt.modes.insert(ParseEnum(kAccessModeNames, m.get<std::string>(),
                                    ErrorCode::kSchemaError, "access mode"));
        }
        tt.text = r.at("threat").get<std::string>();
        t.type_threats_.push_back(std::move(tt));
      }
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::kSchemaError, e.what());
    }
    for (const auto& [cls, cname] : kClassificationNames) {
      for (const auto& [mode, mname] : kAccessModeNames) {
        if (!t.cells_.count({cls, mode})) {
          throw Error(ErrorCode::kSchemaError, "threat rules miss " +
                                                   std::string(cname) + "/" +
                                                   std::string(mname));
        }
      }
    }
    if (t.cells_.at({Classification::kSensitivePersonal, AccessMode::kDirect})
            .severity != Severity::kHigh) {
      throw Error(ErrorCode::kSchemaError,
                  "direct access to sensitive data must be rated High");
    }
    return t;
  }

  static ThreatRules Load(const std::filesystem::path& path) {
    return FromJson(LoadJsonFile(path));
  }

  ThreatEntry Evaluate(const DataTypeDescriptor& type, AccessMode mode) const {
    const Cell& cell = cells_.at({type.classification, mode});
    ThreatEntry e{type.id, type.classification, mode, cell.texts, cell.severity};
    for (const auto& tt : type_threats_) {
      if (type.id.rfind(tt.prefix, 0) == 0 && tt.modes.count(mode)) {
        e.threat_texts.push_back(tt.text);
      }
    }
    return e;
  }

 private:
  struct Cell {
    Severity severity = Severity::kLow;
    std::vector<std::string> texts;
  };
  struct TypeThreat {
    std::string prefix;
    std::set<AccessMode> modes;
    std::string text;
  };

  std::map<std::pair<Classification, AccessMode>, Cell> cells_;
  std::vector<TypeThreat> type_threats_;
};

inline ThreatReport DeriveThreats(const AppManifest& manifest,
                                  const DataCatalog& catalog,
                                  const ThreatRules& rules) {
  ThreatReport report{manifest.app_id, {}};
  for (const auto& req : manifest.data_requirements) {
    report.entries.push_back(rules.Evaluate(catalog.Get(req.type_id), req.access_mode));
  }
  return report;
}

inline OrderedJson ToJson(const ThreatReport& r) {
  OrderedJson j;
  j["app_id"] = r.app_id;
  j["entries"] = OrderedJson::array();
  for (const auto& e : r.entries) {
    j["entries"].push_back({{"type_id", e.type_id},
                            {"classification", ToString(e.classification)},
                            {"access_mode", ToString(e.access_mode)},
                            {"severity", ToString(e.severity)},
                            {"threats", e.threat_texts}});
  }
  return j;
}

}  // namespace vpriv
