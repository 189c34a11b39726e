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
#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <tuple>

#include "test_util.hpp"
#include "vpriv/cli.hpp"
#include "vpriv/selection/selection.hpp"

namespace vpriv::selection {
namespace {

using testing::DataDir;

// Reference PET mapping transcribed by hand: one row per (layer, family), cells in the
// order LFT PL DM A SL IC Acc; G = strong, Y = context dependent, . = blank.
const std::vector<std::tuple<std::string, std::string, std::string>> kReferenceTable = {
    {"Physical", "AnonymityBased", "..G...."},
    {"Physical", "CryptographyBased", ".GG..G."},
    {"Communication", "AnonymityBased", "..G...."},
    {"Communication", "AuthenticationBased", ".....GG"},
    {"Communication", "CryptographyBased", ".....G."},
    {"Processing", "AnonymityBased", "..G...."},
    {"Processing", "CryptographyBased", "YGG..G."},
    {"Processing", "Traceability", "YYG...Y"},
    {"Storage", "CryptographyBased", ".GG.YG."},
    {"Storage", "Immutability", "G....GG"},
};

Strength FromChar(char c) {
  return c == 'G' ? Strength::kStrong
                  : c == 'Y' ? Strength::kContextDependent : Strength::kNone;
}

void ExpectMatchesReference(const MappingTable& table) {
  ASSERT_EQ(table.rows().size(), kReferenceTable.size());
  int cells = 0;
  for (const auto& [layer, family, pattern] : kReferenceTable) {
    const MappingRow* row =
        table.Find(ParseEnum(kLayerNames, layer, ErrorCode::kSchemaError, "layer"),
                   ParseEnum(kPetFamilyNames, family, ErrorCode::kSchemaError, "family"));
    ASSERT_NE(row, nullptr) << layer << "/" << family;
    for (int p = 0; p < 7; ++p) {
      EXPECT_EQ(row->cells[p], FromChar(pattern[p]))
          << layer << "/" << family << "/" << ToString(kAllPrinciples[p]);
      ++cells;
    }
  }
  EXPECT_EQ(cells, 70);
}

TrustModel Model(const std::string& name) {
  return TrustModel::Load(DataDir() / "trust" / (name + ".json"));
}

const SelectionData& Data() {
  static const SelectionData d = cli::LoadSelectionData(DataDir());
  return d;
}

TEST(MappingTableTest, ShippedFileReproducesReference) {
  ExpectMatchesReference(MappingTable::Load(DataDir() / "pet_mapping.json"));
}

TEST(MappingTableTest, EmbeddedCopyReproducesReference) {
  ExpectMatchesReference(MappingTable::Embedded());
  EXPECT_TRUE(DiffAgainstEmbedded(MappingTable::Embedded()).empty());
  EXPECT_TRUE(DiffAgainstEmbedded(MappingTable::FromJson(MappingTable::Embedded().ToJson()))
                  .empty());
}

TEST(MappingTableTest, DiffNamesMutatedCell) {
  Json doc = LoadJsonFile(DataDir() / "pet_mapping.json");
  doc["rows"][6]["cells"]["LFT"] = "Strong";
  const auto diffs = DiffAgainstEmbedded(MappingTable::FromJson(doc));
  ASSERT_EQ(diffs.size(), 1u);
  EXPECT_NE(diffs[0].find("Processing"), std::string::npos) << diffs[0];
  EXPECT_NE(diffs[0].find("CryptographyBased"), std::string::npos) << diffs[0];
  EXPECT_NE(diffs[0].find("LFT"), std::string::npos) << diffs[0];

  Json dropped = LoadJsonFile(DataDir() / "pet_mapping.json");
  dropped["rows"].erase(dropped["rows"].begin() + 9);
  EXPECT_FALSE(DiffAgainstEmbedded(MappingTable::FromJson(dropped)).empty());

  Json bad = LoadJsonFile(DataDir() / "pet_mapping.json");
  bad["rows"][0]["cells"]["DM"] = "Maybe";
  EXPECT_VPRIV_ERROR(MappingTable::FromJson(bad), ErrorCode::kSchemaError);
  bad = LoadJsonFile(DataDir() / "pet_mapping.json");
  bad["rows"][0]["cells"].erase("Acc");
  EXPECT_VPRIV_ERROR(MappingTable::FromJson(bad), ErrorCode::kSchemaError);
}

std::vector<FamilyCandidate> Families(Layer layer, std::set<GdprPrinciple> ps) {
  return CandidatePetFamilies(MappingTable::Embedded(), ps, layer);
}

TEST(CandidateFamiliesTest, ReferenceLookups) {
  using P = GdprPrinciple;
  EXPECT_EQ(Families(Layer::kStorage, {P::kPL}),
            (std::vector<FamilyCandidate>{{PetFamily::kCryptographyBased, Strength::kStrong}}));
  EXPECT_EQ(Families(Layer::kCommunication, {P::kAcc}),
            (std::vector<FamilyCandidate>{
                {PetFamily::kAuthenticationBased, Strength::kStrong}}));
  EXPECT_EQ(Families(Layer::kProcessing, {P::kDM}),
            (std::vector<FamilyCandidate>{{PetFamily::kAnonymityBased, Strength::kStrong},
                                          {PetFamily::kCryptographyBased, Strength::kStrong},
                                          {PetFamily::kTraceability, Strength::kStrong}}));
  EXPECT_TRUE(Families(Layer::kPhysical, {P::kSL}).empty());
  EXPECT_EQ(Families(Layer::kProcessing, {P::kLFT}),
            (std::vector<FamilyCandidate>{
                {PetFamily::kCryptographyBased, Strength::kContextDependent},
                {PetFamily::kTraceability, Strength::kContextDependent}}));
  EXPECT_TRUE(Families(Layer::kProcessing, {}).empty());
  // The strongest matching cell wins.
  EXPECT_EQ(Families(Layer::kProcessing, {P::kLFT, P::kDM})[2].strength, Strength::kStrong);
}

TEST(CandidateFamiliesTest, MonotoneInPrincipleSet) {
  Rng rng(8);
  for (int trial = 0; trial < 2000; ++trial) {
    std::set<GdprPrinciple> small, large;
    for (GdprPrinciple p : kAllPrinciples) {
      const double u = rng.Uniform01();
      if (u < 0.3) small.insert(p);
      if (u < 0.6) large.insert(p);
    }
    const Layer layer = kLayerNames[rng.NextU64() % 4].first;
    const auto a = Families(layer, small);
    const auto b = Families(layer, large);
    for (const auto& f : a) {
      auto it = std::find_if(b.begin(), b.end(),
                             [&](const FamilyCandidate& g) { return g.family == f.family; });
      ASSERT_NE(it, b.end());
      EXPECT_GE(it->strength, f.strength);
    }
  }
}

TEST(RelevanceTest, ThreePartyElevatesConfidentialityPrinciples) {
  const auto rules = RelevanceRules::Load(DataDir() / "relevance_rules.json");
  const auto a = RelevantPrinciples(Model("three_party"), rules);
  ASSERT_EQ(a.size(), 7u);
  std::set<GdprPrinciple> primary;
  for (const auto& x : a) {
    if (x.relevance == Relevance::kPrimary) primary.insert(x.principle);
  }
  EXPECT_EQ(primary, (std::set<GdprPrinciple>{GdprPrinciple::kPL, GdprPrinciple::kDM,
                                              GdprPrinciple::kIC}));
  EXPECT_TRUE(a[static_cast<int>(GdprPrinciple::kAcc)].accountability_required);
  EXPECT_FALSE(a[static_cast<int>(GdprPrinciple::kPL)].accountability_required);
}

TEST(RelevanceTest, AllTrustedKeepsEverythingSecondary) {
  const auto rules = RelevanceRules::Load(DataDir() / "relevance_rules.json");
  for (const auto& x : RelevantPrinciples(Model("all_trusted"), rules)) {
    EXPECT_EQ(x.relevance, Relevance::kSecondary);
    EXPECT_FALSE(x.accountability_required);
  }
}

TEST(RelevanceTest, RuleFileErrors) {
  EXPECT_VPRIV_ERROR(RelevanceRules::Parse(""), ErrorCode::kRuleFileError);
  EXPECT_VPRIV_ERROR(RelevanceRules::Parse("  \n"), ErrorCode::kRuleFileError);
  EXPECT_VPRIV_ERROR(RelevanceRules::Parse("{"), ErrorCode::kRuleFileError);
  EXPECT_VPRIV_ERROR(RelevanceRules::Parse("{\"rules\": [{\"roles\": [\"Boss\"], \"trust\": []}]}"),
                     ErrorCode::kRuleFileError);
  EXPECT_VPRIV_ERROR(RelevanceRules::Parse("{}"), ErrorCode::kRuleFileError);
  EXPECT_TRUE(RelevanceRules::Parse("{\"rules\": []}").rules.empty());
}

double OracleScore(const std::string& id, const Weights& w) {
  const auto& r = *Data().maturity.Find(id);
  return w.utility * r.utility + w.scalability * r.scalability +
         w.robustness * r.robustness + w.low_power * r.low_power_suitability;
}

TEST(RankingTest, EqualWeightsPutLocalDpFirst) {
  const auto ranked = RankCandidates(
      {"pbe", "round_location", "planar_laplace", "planar_isotropic", "laplace_scalar",
       "pseudonymize"},
      Data().maturity, Weights{});
  ASSERT_EQ(ranked.size(), 6u);
  // laplace_scalar and planar_isotropic tie at 4.5 and order by id.
  EXPECT_EQ(ranked[0].pet_id, "laplace_scalar");
  EXPECT_EQ(ranked[1].pet_id, "planar_isotropic");
  EXPECT_EQ(ranked[2].pet_id, "planar_laplace");
  EXPECT_EQ(ranked.back().pet_id, "pbe");
  for (const auto& r : ranked) EXPECT_DOUBLE_EQ(r.score, OracleScore(r.pet_id, Weights{}));
}

TEST(RankingTest, SingleCandidateAndErrors) {
  const auto one = RankCandidates({"pbe"}, Data().maturity, Weights{});
  ASSERT_EQ(one.size(), 1u);
  EXPECT_DOUBLE_EQ(one[0].score, 3.25);
  EXPECT_TRUE(RankCandidates({}, Data().maturity, Weights{}).empty());
  EXPECT_VPRIV_ERROR(RankCandidates({"nope"}, Data().maturity, Weights{}),
                     ErrorCode::kUnknownPet);
  EXPECT_VPRIV_ERROR(RankCandidates({"pbe"}, Data().maturity, Weights{0.5, 0.5, 0.5, 0}),
                     ErrorCode::kInvalidParam);
  EXPECT_VPRIV_ERROR(RankCandidates({"pbe"}, Data().maturity, Weights{1.5, -0.5, 0, 0}),
                     ErrorCode::kInvalidParam);
}

TEST(RankingTest, OutputIsSortedPermutation) {
  Rng rng(12);
  std::vector<std::string> ids;
  for (const auto& [id, rec] : Data().maturity.records()) ids.push_back(id);
  for (int trial = 0; trial < 500; ++trial) {
    double raw[4];
    double sum = 0;
    for (double& x : raw) sum += (x = rng.Uniform01());
    Weights w{raw[0] / sum, raw[1] / sum, raw[2] / sum, 0.0};
    w.low_power = 1.0 - w.utility - w.scalability - w.robustness;
    std::vector<std::string> subset;
    for (const auto& id : ids) {
      if (rng.Uniform01() < 0.6) subset.push_back(id);
    }
    const auto ranked = RankCandidates(subset, Data().maturity, w);
    std::vector<std::string> got;
    for (const auto& r : ranked) got.push_back(r.pet_id);
    std::vector<std::string> sorted_in = subset, sorted_out = got;
    std::sort(sorted_in.begin(), sorted_in.end());
    std::sort(sorted_out.begin(), sorted_out.end());
    ASSERT_EQ(sorted_in, sorted_out);
    for (std::size_t i = 1; i < ranked.size(); ++i) {
      ASSERT_TRUE(ranked[i - 1].score > ranked[i].score ||
                  (ranked[i - 1].score == ranked[i].score &&
                   ranked[i - 1].pet_id < ranked[i].pet_id));
    }
  }
}

TEST(MaturityTest, RegistryCoversEveryPetAndValidatesScores) {
  EXPECT_TRUE(Data().maturity.MissingFrom(Data().pets).empty());
  MaturityRegistry reg;
  EXPECT_VPRIV_ERROR(reg.Add({"x", 0, 1, 1, 1, ""}), ErrorCode::kSchemaError);
  EXPECT_VPRIV_ERROR(reg.Add({"x", 1, 6, 1, 1, ""}), ErrorCode::kSchemaError);
}

TEST(SelectPetsTest, ThreePartyProcessing) {
  const auto report = SelectPets(Model("three_party"), Layer::kProcessing, Data());
  EXPECT_EQ(report.principles_used.size(), 3u);
  ASSERT_EQ(report.families.size(), 3u);
  EXPECT_EQ(report.families[0].family, PetFamily::kAnonymityBased);
  std::vector<std::string> ids;
  for (const auto& r : report.ranked) ids.push_back(r.pet_id);
  EXPECT_EQ(ids, (std::vector<std::string>{"laplace_scalar", "planar_isotropic",
                                           "planar_laplace", "pseudonymize",
                                           "round_location", "pbe"}));
  const auto j = ToJson(report);
  EXPECT_EQ(j["layer"], "Processing");
  EXPECT_EQ(j["ranked"].size(), 6u);
}

TEST(SelectPetsTest, StorageLayerYieldsOnlyEncryption) {
  const auto report = SelectPets(Model("three_party"), Layer::kStorage, Data());
  ASSERT_EQ(report.ranked.size(), 1u);
  EXPECT_EQ(report.ranked[0].pet_id, "pbe");
}

TEST(SelectPetsTest, AllTrustedFallsBackToEveryPrinciple) {
  const auto report = SelectPets(Model("all_trusted"), Layer::kCommunication, Data());
  EXPECT_EQ(report.principles_used.size(), 7u);
  EXPECT_EQ(report.families.size(), 3u);
}

TEST(SelectPetsTest, WeightsChangeOrder) {
  // Robustness-only weighting promotes pbe (robustness 5).
  const auto report =
      SelectPets(Model("three_party"), Layer::kProcessing, Data(), Weights{0, 0, 1, 0});
  EXPECT_EQ(report.ranked[0].pet_id, "pbe");
}

}  // namespace
}  // namespace vpriv::selection
