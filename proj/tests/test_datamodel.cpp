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

#include <cmath>

#include "test_util.hpp"
#include "vpriv/common/rng.hpp"
#include "vpriv/datamodel.hpp"

namespace vpriv {
namespace {

using testing::Catalog;

TEST(CatalogTest, ShippedCatalogLoads) {
  const auto& c = Catalog();
  EXPECT_EQ(c.types().size(), 7u);
  const auto& gps = c.Get("location.gps");
  EXPECT_EQ(gps.classification, Classification::kSensitivePersonal);
  EXPECT_EQ(gps.payload_kind, PayloadKind::kGeoPoint);
  EXPECT_EQ(c.Get("vehicle.speed").unit, "km/h");
  EXPECT_EQ(c.Find("nope"), nullptr);
  EXPECT_VPRIV_ERROR(c.Get("nope"), ErrorCode::kCatalogError);
}

TEST(CatalogTest, RejectsInvalidDescriptors) {
  DataCatalog c;
  EXPECT_VPRIV_ERROR(c.Add({"Bad-Id", Layer::kPhysical, Classification::kTechnical,
                            PayloadKind::kScalar, "x", ""}),
                     ErrorCode::kSchemaError);
  EXPECT_VPRIV_ERROR(c.Add({"location.x", Layer::kPhysical, Classification::kTechnical,
                            PayloadKind::kGeoPoint, "", ""}),
                     ErrorCode::kSchemaError);
  EXPECT_VPRIV_ERROR(c.Add({"a.scalar", Layer::kPhysical, Classification::kTechnical,
                            PayloadKind::kScalar, "", ""}),
                     ErrorCode::kSchemaError);
  c.Add({"a.b", Layer::kPhysical, Classification::kTechnical, PayloadKind::kOpaque, "", ""});
  EXPECT_VPRIV_ERROR(c.Add({"a.b", Layer::kPhysical, Classification::kTechnical,
                            PayloadKind::kOpaque, "", ""}),
                     ErrorCode::kSchemaError);
  EXPECT_VPRIV_ERROR(DataCatalog::FromJson(Json::object()), ErrorCode::kSchemaError);
  EXPECT_VPRIV_ERROR(DataCatalog::FromJson(Json::parse(R"([{"id": "a.b", "layer": "Moon",
      "classification": "Technical", "payload_kind": "Opaque"}])")),
                     ErrorCode::kSchemaError);
}

TEST(ItemTest, ValidateItemReportsEveryViolation) {
  const auto& gps = Catalog().Get("location.gps");
  DataItem ok{"location.gps", 10, GeoPoint{48.0, 11.0}, "sim"};
  EXPECT_TRUE(ValidateItem(ok, gps).ok());

  DataItem bad{"location.gps", 0, GeoPoint{91.0, 200.0}, "sim"};
  const auto r = ValidateItem(bad, gps);
  EXPECT_EQ(r.violations.size(), 3u);

  DataItem wrong_kind{"location.gps", 5, 3.0, "sim"};
  EXPECT_FALSE(ValidateItem(wrong_kind, gps).ok());
  DataItem huge{"vehicle.speed", 5, 1e13, "sim"};
  EXPECT_FALSE(ValidateItem(huge, Catalog().Get("vehicle.speed")).ok());
  DataItem nan{"vehicle.speed", 5, std::nan(""), "sim"};
  EXPECT_FALSE(ValidateItem(nan, Catalog().Get("vehicle.speed")).ok());
}

TEST(EncodingTest, GoldenLayout) {
  // Independent byte-level construction of the documented layout.
  const DataItem item{"a.b", 258, GeoPoint{1.5, -2.25}, "s"};
  Bytes expected{0, 0, 0, 3, 'a', '.', 'b'};
  for (int i = 7; i >= 0; --i) expected.push_back(static_cast<std::uint8_t>(258ULL >> (8 * i)));
  expected.push_back(2);
  auto push_i64 = [&](std::int64_t v) {
    for (int i = 7; i >= 0; --i) {
      expected.push_back(static_cast<std::uint8_t>(static_cast<std::uint64_t>(v) >> (8 * i)));
    }
  };
  push_i64(15000000);
  push_i64(-22500000);
  for (std::uint8_t b : {0, 0, 0, 1}) expected.push_back(b);
  expected.push_back('s');
  EXPECT_EQ(CanonicalEncode(item), expected);

  const DataItem scalar{"x.y", 1, 0.5, ""};
  EXPECT_EQ(ToHex(CanonicalEncode(scalar)),
            "00000003782e79" "0000000000000001" "01" "000000000007a120" "00000000");
  const DataItem opaque{"x.y", 1, Bytes{0xab}, ""};
  EXPECT_EQ(ToHex(CanonicalEncode(opaque)),
            "00000003782e79" "0000000000000001" "03" "00000001ab" "00000000");
}

TEST(EncodingTest, DecodeInvertsEncodeUpToQuantization) {
  Rng rng(2024);
  for (int i = 0; i < 5000; ++i) {
    DataItem item;
    item.type_id = "t.x";
    item.timestamp_ms = 1 + static_cast<std::int64_t>(rng.NextU64() % 4000000000000ULL);
    item.source = "src" + std::to_string(i % 7);
    switch (i % 3) {
      case 0:
        item.payload = GeoPoint{rng.Uniform01() * 180.0 - 90.0, rng.Uniform01() * 360.0 - 180.0};
        break;
      case 1:
        item.payload = (rng.Uniform01() - 0.5) * 2e9;
        break;
      default: {
        Bytes b(rng.NextU64() % 40);
        rng.Fill(b);
        item.payload = b;
      }
    }
    const Bytes enc = CanonicalEncode(item);
    const DataItem back = CanonicalDecode(enc);
    ASSERT_EQ(back, Quantize(item));
    ASSERT_EQ(CanonicalEncode(back), enc);
  }
}

TEST(EncodingTest, RejectsInvalidInput) {
  EXPECT_VPRIV_ERROR(CanonicalEncode(DataItem{"t.x", 0, 1.0, ""}), ErrorCode::kInvalidItem);
  const Bytes enc = CanonicalEncode(DataItem{"t.x", 1, 1.0, ""});
  Bytes truncated(enc.begin(), enc.end() - 1);
  EXPECT_VPRIV_ERROR(CanonicalDecode(truncated), ErrorCode::kInvalidItem);
  Bytes trailing = enc;
  trailing.push_back(0);
  EXPECT_VPRIV_ERROR(CanonicalDecode(trailing), ErrorCode::kInvalidItem);
  Bytes bad_tag = enc;
  bad_tag[4 + 3 + 8] = 9;
  EXPECT_VPRIV_ERROR(CanonicalDecode(bad_tag), ErrorCode::kInvalidItem);
}

TEST(TrustModelTest, LoadsShippedModelsWithDefaults) {
  const auto m = TrustModel::Load(testing::DataDir() / "trust/three_party.json");
  ASSERT_EQ(m.entities.size(), 5u);
  EXPECT_EQ(m.entities[2].role, Role::kIntermediateServer);
  EXPECT_EQ(m.entities[2].trust, Trust::kHonestButCurious);
  EXPECT_EQ(m.non_collusion.size(), 3u);
  EXPECT_TRUE(m.Violations().empty());
  EXPECT_NO_THROW(TrustModel::Load(testing::DataDir() / "trust/all_trusted.json"));
}

TEST(TrustModelTest, RejectsIncompleteModels) {
  EXPECT_VPRIV_ERROR(TrustModel::FromJson(Json::parse(
                         R"({"entities": [{"id": "v", "role": "VehicleUser"}]})")),
                     ErrorCode::kSchemaError);
  EXPECT_VPRIV_ERROR(
      TrustModel::FromJson(Json::parse(R"({"entities": [
        {"id": "v", "role": "VehicleUser"}, {"id": "p", "role": "ServiceProvider"}],
        "non_collusion": [["v", "ghost"]]})")),
      ErrorCode::kSchemaError);
  EXPECT_VPRIV_ERROR(TrustModel::FromJson(Json::parse(
                         R"({"entities": [{"id": "v", "role": "Pilot"}]})")),
                     ErrorCode::kSchemaError);
}

TEST(EnumTest, NamesRoundTrip) {
  for (const auto& [v, name] : kLayerNames) EXPECT_EQ(ParseEnum(kLayerNames, name, ErrorCode::kSchemaError, "layer"), v);
  for (const auto& [v, name] : kPrincipleNames) EXPECT_EQ(ToString(v), name);
  EXPECT_FALSE(TryParseEnum(kLayerNames, "physical"));
}

}  // namespace
}  // namespace vpriv
