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

// Shared vocabulary: data types and items, the four architecture layers,
// GDPR principles, trust model, and the canonical binary item encoding.

#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <regex>
#include <string>
#include <variant>
#include <vector>

#include "vpriv/common/bytes.hpp"
#include "vpriv/common/enum_names.hpp"
#include "vpriv/common/error.hpp"
#include "vpriv/common/geo.hpp"
#include "vpriv/common/json_io.hpp"

namespace vpriv {

enum class Layer { kPhysical, kCommunication, kProcessing, kStorage };
inline constexpr EnumNames<Layer, 4> kLayerNames{{
    {Layer::kPhysical, "Physical"},
    {Layer::kCommunication, "Communication"},
    {Layer::kProcessing, "Processing"},
    {Layer::kStorage, "Storage"},
}};

enum class Classification { kTechnical, kPersonal, kSensitivePersonal };
inline constexpr EnumNames<Classification, 3> kClassificationNames{{
    {Classification::kTechnical, "Technical"},
    {Classification::kPersonal, "Personal"},
    {Classification::kSensitivePersonal, "SensitivePersonal"},
}};

enum class PayloadKind { kScalar, kGeoPoint, kOpaque };
inline constexpr EnumNames<PayloadKind, 3> kPayloadKindNames{{
    {PayloadKind::kScalar, "Scalar"},
    {PayloadKind::kGeoPoint, "GeoPoint"},
    {PayloadKind::kOpaque, "Opaque"},
}};

// GDPR Article 5 principles, in the column order of the PET mapping table.
enum class GdprPrinciple { kLFT, kPL, kDM, kA, kSL, kIC, kAcc };
inline constexpr EnumNames<GdprPrinciple, 7> kPrincipleNames{{
    {GdprPrinciple::kLFT, "LFT"},
    {GdprPrinciple::kPL, "PL"},
    {GdprPrinciple::kDM, "DM"},
    {GdprPrinciple::kA, "A"},
    {GdprPrinciple::kSL, "SL"},
    {GdprPrinciple::kIC, "IC"},
    {GdprPrinciple::kAcc, "Acc"},
}};
inline constexpr std::array<GdprPrinciple, 7> kAllPrinciples{
    GdprPrinciple::kLFT, GdprPrinciple::kPL, GdprPrinciple::kDM,
    GdprPrinciple::kA,   GdprPrinciple::kSL, GdprPrinciple::kIC,
    GdprPrinciple::kAcc};

inline std::string_view ToString(Layer v) { return NameOf(kLayerNames, v); }
inline std::string_view ToString(Classification v) {
  return NameOf(kClassificationNames, v);
}
inline std::string_view ToString(PayloadKind v) {
  return NameOf(kPayloadKindNames, v);
}
inline std::string_view ToString(GdprPrinciple v) {
  return NameOf(kPrincipleNames, v);
}

inline bool IsValidTypeId(const std::string& id) {
  static const std::regex kPattern("[a-z0-9_.]+");
  return !id.empty() && std::regex_match(id, kPattern);
}

struct DataTypeDescriptor {
  std::string id;
  Layer layer = Layer::kPhysical;
  Classification classification = Classification::kTechnical;
  PayloadKind payload_kind = PayloadKind::kScalar;
  std::string unit;  // Scalar only.
  std::string description;

  // Empty when the descriptor satisfies its invariants.
  std::vector<std::string> Violations() const {
    std::vector<std::string> out;
    if (!IsValidTypeId(id)) out.push_back("type id malformed");
    if (id.rfind("location.", 0) == 0 &&
        classification == Classification::kTechnical) {
      out.push_back("location types must be Personal or SensitivePersonal");
    }
    if (payload_kind == PayloadKind::kScalar && unit.empty()) {
      out.push_back("scalar type needs a unit");
    }
    return out;
  }
};

using Payload = std::variant<double, GeoPoint, Bytes>;

inline PayloadKind KindOf(const Payload& p) {
  switch (p.index()) {
    case 0: return PayloadKind::kScalar;
    case 1: return PayloadKind::kGeoPoint;
    default: return PayloadKind::kOpaque;
  }
}

struct DataItem {
  std::string type_id;
  std::int64_t timestamp_ms = 0;
  Payload payload;
  std::string source;

  friend bool operator==(const DataItem&, const DataItem&) = default;

  const GeoPoint& geo() const { return std::get<GeoPoint>(payload); }
  double scalar() const { return std::get<double>(payload); }
};

// Scalars beyond this magnitude do not fit the fixed-point encoding.
inline constexpr double kMaxScalarMagnitude = 9.0e12;
inline constexpr double kGeoScale = 1e7;     // 1e-7 degrees
inline constexpr double kScalarScale = 1e6;  // 1e-6 units

// Item-level invariants that need no descriptor.
inline std::vector<std::string> ItemViolations(const DataItem& item) {
  std::vector<std::string> out;
  if (!IsValidTypeId(item.type_id)) out.push_back("type id malformed");
  if (item.timestamp_ms <= 0) out.push_back("timestamp must be positive");
  if (const auto* g = std::get_if<GeoPoint>(&item.payload)) {
    if (!(std::isfinite(g->lat) && g->lat >= -90.0 && g->lat <= 90.0)) {
      out.push_back("lat out of range");
    }
    if (!(std::isfinite(g->lon) && g->lon >= -180.0 && g->lon <= 180.0)) {
      out.push_back("lon out of range");
    }
  } else if (const auto* s = std::get_if<double>(&item.payload)) {
    if (!std::isfinite(*s) || std::abs(*s) > kMaxScalarMagnitude) {
      out.push_back("scalar out of range");
    }
  }
  return out;
}

struct ValidationResult {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

inline ValidationResult ValidateItem(const DataItem& item,
                                     const DataTypeDescriptor& descriptor) {
  ValidationResult result{ItemViolations(item)};
  if (item.type_id != descriptor.id) {
    result.violations.push_back("type id mismatch");
  }
  if (KindOf(item.payload) != descriptor.payload_kind) {
    result.violations.push_back("payload kind mismatch");
  }
  return result;
}

namespace detail {
enum PayloadTag : std::uint8_t { kTagScalar = 1, kTagGeo = 2, kTagOpaque = 3 };

inline std::int64_t Fixed(double v, double scale) {
  return static_cast<std::int64_t>(std::llround(v * scale));
}
}  // namespace detail

// Snaps numeric payloads to the encoding precision; decode(encode(x)) equals
// Quantize(x) for every valid item.
inline DataItem Quantize(DataItem item) {
  if (auto* g = std::get_if<GeoPoint>(&item.payload)) {
    g->lat = static_cast<double>(detail::Fixed(g->lat, kGeoScale)) / kGeoScale;
    g->lon = static_cast<double>(detail::Fixed(g->lon, kGeoScale)) / kGeoScale;
  } else if (auto* s = std::get_if<double>(&item.payload)) {
    *s = static_cast<double>(detail::Fixed(*s, kScalarScale)) / kScalarScale;
  }
  return item;
}

// Layout (big-endian): u32-prefixed type_id, i64 timestamp_ms, u8 payload
// tag, payload fields, u32-prefixed source. Geo coordinates are i64 counts of
// 1e-7 degrees, scalars i64 counts of 1e-6 units, opaque payloads u32-prefixed.
inline Bytes CanonicalEncode(const DataItem& item) {
  if (auto v = ItemViolations(item); !v.empty()) {
    throw Error(ErrorCode::kInvalidItem, v.front());
  }
  ByteWriter w;
  w.Str(item.type_id);
  w.I64(item.timestamp_ms);
  std::visit(
      [&w](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, double>) {
          w.U8(detail::kTagScalar);
          w.I64(detail::Fixed(p, kScalarScale));
        } else if constexpr (std::is_same_v<T, GeoPoint>) {
          w.U8(detail::kTagGeo);
          w.I64(detail::Fixed(p.lat, kGeoScale));
          w.I64(detail::Fixed(p.lon, kGeoScale));
        } else {
          w.U8(detail::kTagOpaque);
          w.Blob(p);
        }
      },
      item.payload);
  w.Str(item.source);
  return std::move(w).bytes();
}

inline DataItem CanonicalDecode(std::span<const std::uint8_t> data) {
  ByteReader r(data, ErrorCode::kInvalidItem);
  DataItem item;
  item.type_id = r.Str();
  item.timestamp_ms = r.I64();
  switch (r.U8()) {
    case detail::kTagScalar:
      item.payload = static_cast<double>(r.I64()) / kScalarScale;
      break;
    case detail::kTagGeo: {
      GeoPoint g;
      g.lat = static_cast<double>(r.I64()) / kGeoScale;
      g.lon = static_cast<double>(r.I64()) / kGeoScale;
      item.payload = g;
      break;
    }
    case detail::kTagOpaque:
      item.payload = r.Blob();
      break;
    default:
      throw Error(ErrorCode::kInvalidItem, "unknown payload tag");
  }
  item.source = r.Str();
  r.ExpectEnd();
  if (auto v = ItemViolations(item); !v.empty()) {
    throw Error(ErrorCode::kInvalidItem, v.front());
  }
  return item;
}

// Data-type catalog, loaded from a JSON array of descriptor records.
class DataCatalog {
 public:
  DataCatalog() = default;

  static DataCatalog FromJson(const Json& doc) {
    if (!doc.is_array()) {
      throw Error(ErrorCode::kSchemaError, "catalog must be a JSON array");
    }
    DataCatalog catalog;
    for (const auto& rec : doc) {
      DataTypeDescriptor d;
      try {
        d.id = rec.at("id").get<std::string>();
        d.layer = ParseEnum(kLayerNames, rec.at("layer").get<std::string>(),
                            ErrorCode::kSchemaError, "layer");
        d.classification = ParseEnum(
            kClassificationNames, rec.at("classification").get<std::string>(),
            ErrorCode::kSchemaError, "classification");
        d.payload_kind = ParseEnum(kPayloadKindNames,
                                   rec.at("payload_kind").get<std::string>(),
                                   ErrorCode::kSchemaError, "payload kind");
        d.unit = rec.value("unit", "");
        d.description = rec.value("description", "");
      } catch (const Json::exception& e) {
        throw Error(ErrorCode::kSchemaError, e.what());
      }
      catalog.Add(std::move(d));
    }
    return catalog;
  }

  static DataCatalog Load(const std::filesystem::path& path) {
    return FromJson(LoadJsonFile(path));
  }

  void Add(DataTypeDescriptor d) {
    if (auto v = d.Violations(); !v.empty()) {
      throw Error(ErrorCode::kSchemaError, d.id + ": " + v.front());
    }
    if (types_.count(d.id)) {
      throw Error(ErrorCode::kSchemaError, "duplicate type id " + d.id);
    }
    std::string id = d.id;
    types_.emplace(std::move(id), std::move(d));
  }

  const DataTypeDescriptor* Find(const std::string& id) const {
    auto it = types_.find(id);
    return it == types_.end() ? nullptr : &it->second;
  }

  const DataTypeDescriptor& Get(const std::string& id) const {
    if (const auto* d = Find(id)) return *d;
    throw Error(ErrorCode::kCatalogError, "unknown data type '" + id + "'");
  }

  const std::map<std::string, DataTypeDescriptor>& types() const {
    return types_;
  }

 private:
  std::map<std::string, DataTypeDescriptor> types_;
};

// ---- Trust model ----------------------------------------------------------

enum class Role { kVehicleUser, kIntermediateServer, kServiceProvider, kKeyAuthority };
inline constexpr EnumNames<Role, 4> kRoleNames{{
    {Role::kVehicleUser, "VehicleUser"},
    {Role::kIntermediateServer, "IntermediateServer"},
    {Role::kServiceProvider, "ServiceProvider"},
    {Role::kKeyAuthority, "KeyAuthority"},
}};

enum class Trust { kTrusted, kHonestButCurious, kUntrusted };
inline constexpr EnumNames<Trust, 3> kTrustNames{{
    {Trust::kTrusted, "Trusted"},
    {Trust::kHonestButCurious, "HonestButCurious"},
    {Trust::kUntrusted, "Untrusted"},
}};

struct TrustEntity {
  std::string id;
  Role role = Role::kVehicleUser;
  Trust trust = Trust::kTrusted;
};

struct TrustModel {
  std::vector<TrustEntity> entities;
  std::vector<std::pair<std::string, std::string>> non_collusion;

  std::vector<std::string> Violations() const {
    std::vector<std::string> out;
    bool user = false, provider = false;
    for (const auto& e : entities) {
      user |= e.role == Role::kVehicleUser;
      provider |= e.role == Role::kServiceProvider;
    }
    if (!user) out.push_back("trust model needs a VehicleUser");
    if (!provider) out.push_back("trust model needs a ServiceProvider");
    auto known = [this](const std::string& id) {
      for (const auto& e : entities) {
        if (e.id == id) return true;
      }
      return false;
    };
    for (const auto& [a, b] : non_collusion) {
      if (!known(a) || !known(b)) {
        out.push_back("non-collusion pair names unknown entity");
      }
    }
    return out;
  }

  // Intermediate servers without an explicit trust level default to
  // honest-but-curious.
  static TrustModel FromJson(const Json& doc) {
    TrustModel model;
    try {
      for (const auto& e : doc.at("entities")) {
        TrustEntity entity;
        entity.id = e.at("id").get<std::string>();
        entity.role = ParseEnum(kRoleNames, e.at("role").get<std::string>(),
                                ErrorCode::kSchemaError, "role");
        if (e.contains("trust")) {
          entity.trust = ParseEnum(kTrustNames, e.at("trust").get<std::string>(),
                                   ErrorCode::kSchemaError, "trust level");
        } else {
          entity.trust = entity.role == Role::kIntermediateServer
                             ? Trust::kHonestButCurious
                             : Trust::kTrusted;
        }
        model.entities.push_back(std::move(entity));
      }
      if (doc.contains("non_collusion")) {
        for (const auto& pair : doc.at("non_collusion")) {
          model.non_collusion.emplace_back(pair.at(0).get<std::string>(),
                                           pair.at(1).get<std::string>());
        }
      }
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::kSchemaError, e.what());
    }
    if (auto v = model.Violations(); !v.empty()) {
      throw Error(ErrorCode::kSchemaError, v.front());
    }
    return model;
  }

  static TrustModel Load(const std::filesystem::path& path) {
    return FromJson(LoadJsonFile(path));
  }
};

}  // namespace vpriv
