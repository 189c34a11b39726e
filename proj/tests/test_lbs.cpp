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
#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "test_util.hpp"
#include "vpriv/lbs.hpp"

namespace vpriv::lbs {
namespace {

constexpr GeoPoint kCenter{48.137, 11.575};

const PoiStore& City() {
  static const PoiStore store = LoadPois(testing::DataDir() / "scenarios/city/pois.csv");
  return store;
}

pets::PetStep Laplace(double epsilon) {
  pets::PetStep s;
  s.pet_id = pets::kPlanarLaplace;
  s.epsilon = epsilon;
  return s;
}

// Mean distance from the center of a 2a x 2b rectangle to a uniform point.
double RectangleMeanDistance(double a, double b) {
  const double d = std::hypot(a, b);
  const double quarter =
      (2.0 * a * b * d + a * a * a * std::log((b + d) / a) + b * b * b * std::log((a + d) / b)) /
      6.0;
  return quarter / (a * b);
}

TEST(PoiStoreTest, LoadsCityFixture) {
  EXPECT_EQ(City().pois().size(), 620u);
  EXPECT_EQ(City().CountOf("fuel"), 60u);
  EXPECT_EQ(City().Categories(),
            (std::vector<std::string>{"cafe", "fuel", "parking", "pharmacy", "restaurant"}));
}

TEST(PoiStoreTest, SingleMatchAndEmptyRadius) {
  const PoiStore store({{"a", "fuel", {48.0, 11.0}, "A"}, {"b", "cafe", {48.001, 11.0}, "B"}});
  const auto got = store.NearestPois({48.0005, 11.0}, "fuel", 1);
  ASSERT_EQ(got.size(), 1u);
  EXPECT_EQ(got[0].id, "a");
  EXPECT_TRUE(store.NearestPois({48.01, 11.0}, "fuel", 3, 100.0).empty());
  EXPECT_VPRIV_ERROR(store.NearestPois(kCenter, "bakery", 1), ErrorCode::kUnknownCategory);
  EXPECT_VPRIV_ERROR(store.NearestPois(kCenter, "fuel", 0), ErrorCode::kInvalidParam);
  EXPECT_VPRIV_ERROR(store.NearestPois({91.0, 0.0}, "fuel", 1), ErrorCode::kInvalidParam);
}

TEST(PoiStoreTest, MatchesLinearScanOnRandomCorpora) {
  std::mt19937_64 gen(2024);
  std::uniform_real_distribution<double> dlat(-0.03, 0.03), dlon(-0.05, 0.05);
  std::uniform_int_distribution<int> cat(0, 2);
  const std::vector<std::string> cats{"cafe", "fuel", "parking"};
  for (int corpus = 0; corpus < 20; ++corpus) {
    std::vector<Poi> pois;
    const int n = 50 + corpus * 40;
    for (int i = 0; i < n; ++i) {
      GeoPoint g{kCenter.lat + dlat(gen), kCenter.lon + dlon(gen)};
      // Some exact duplicates exercise the id tie break.
      if (i % 17 == 5) g = pois.back().location;
      char id[16];
      std::snprintf(id, sizeof id, "q%05d", (i * 7919) % 100000);
      pois.push_back({id, cats[static_cast<std::size_t>(cat(gen))], g, "x"});
    }
    const double bucket = 50.0 + 100.0 * (corpus % 5);
    const PoiStore store(pois, bucket);
    for (int q = 0; q < 30; ++q) {
      const GeoPoint loc{kCenter.lat + 1.5 * dlat(gen), kCenter.lon + 1.5 * dlon(gen)};
      const std::string& c = cats[static_cast<std::size_t>(cat(gen))];
      const std::size_t k = 1 + static_cast<std::size_t>(q % 12);
      const double radius = (q % 3 == 0) ? std::numeric_limits<double>::infinity()
                                         : 300.0 + 200.0 * (q % 7);
      std::vector<std::pair<double, std::string>> scan;
      const Vec2 qm = store.frame().ToMeters(loc);
      for (const auto& p : pois) {
        if (p.category != c) continue;
        const double d = (store.frame().ToMeters(p.location) - qm).Norm();
        if (d <= radius) scan.emplace_back(d, p.id);
      }
      std::sort(scan.begin(), scan.end());
      if (scan.size() > k) scan.resize(k);
      std::vector<std::string> want, got;
      for (const auto& s : scan) want.push_back(s.second);
      for (const auto& p : store.NearestPois(loc, c, k, radius)) got.push_back(p.id);
      ASSERT_EQ(got, want) << "corpus " << corpus << " query " << q;
    }
  }
}

TEST(PoiStoreTest, RejectsInvalidPois) {
  EXPECT_VPRIV_ERROR(PoiStore({{"a", "Fuel", kCenter, ""}}), ErrorCode::kParseError);
  EXPECT_VPRIV_ERROR(PoiStore({{"a", "", kCenter, ""}}), ErrorCode::kParseError);
  EXPECT_VPRIV_ERROR(PoiStore({{"a", "fuel", {95.0, 0.0}, ""}}), ErrorCode::kParseError);
  EXPECT_VPRIV_ERROR(PoiStore({{"a", "fuel", kCenter, ""}, {"a", "cafe", kCenter, ""}}),
                     ErrorCode::kParseError);
  EXPECT_VPRIV_ERROR(PoiStore({}, 0.0), ErrorCode::kInvalidParam);
}

TEST(PoiCsvTest, ParsesNamesWithCommasAndRejectsMalformedRows) {
  const std::string text =
      "id,category,lat,lon,name\n"
      "p1,fuel,48.1,11.5,Shell, Leopoldstr.\n"
      "p2,cafe,48.2,11.6,Cafe\n";
  const PoiStore store = ParsePoiCsv(text);
  ASSERT_EQ(store.pois().size(), 2u);
  EXPECT_EQ(store.pois()[0].name, "Shell, Leopoldstr.");
  EXPECT_DOUBLE_EQ(store.pois()[1].location.lon, 11.6);
  EXPECT_VPRIV_ERROR(ParsePoiCsv("id,category,lat,lon,name\np1,fuel,48.1\n"),
                     ErrorCode::kParseError);
  EXPECT_VPRIV_ERROR(ParsePoiCsv("id,category,lat,lon,name\np1,fuel,abc,11.5,x\n"),
                     ErrorCode::kParseError);
  EXPECT_VPRIV_ERROR(ParsePoiCsv("wrong header\n"), ErrorCode::kParseError);
  EXPECT_VPRIV_ERROR(LoadPois("/nonexistent/pois.csv"), ErrorCode::kIoError);
}

TEST(RecallTest, IdentityAndClamping) {
  for (const auto& c : City().Categories()) {
    EXPECT_DOUBLE_EQ(RecallAtK(City(), kCenter, kCenter, c, 5), 1.0);
  }
  const PoiStore small({{"a", "fuel", {48.0, 11.0}, ""}, {"b", "fuel", {48.01, 11.0}, ""}});
  EXPECT_DOUBLE_EQ(RecallAtK(small, {48.0, 11.0}, {48.3, 11.0}, "fuel", 10), 1.0);
  const double r = RecallAtK(City(), kCenter, {kCenter.lat + 0.02, kCenter.lon}, "cafe", 5);
  EXPECT_GE(r, 0.0);
  EXPECT_LE(r, 1.0);
}

TEST(RecallTest, MeanRecallGrowsWithEpsilon) {
  Rng rng(99);
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> dlat(-0.02, 0.02), dlon(-0.03, 0.03);
  std::vector<double> means;
  for (double eps : {0.002, 0.004, 0.01}) {
    double sum = 0.0;
    const int n = 300;
    for (int i = 0; i < n; ++i) {
      const GeoPoint t{kCenter.lat + dlat(gen), kCenter.lon + dlon(gen)};
      sum += RecallAtK(City(), t, pets::PlanarLaplace(t, eps, rng), "restaurant", 5);
    }
    means.push_back(sum / n);
  }
  EXPECT_LT(means[0], means[1]);
  EXPECT_LT(means[1], means[2]);
}

TEST(AdversaryTest, GridGeometry) {
  const AdversaryState s(kCenter, 2000.0, 1000.0);
  EXPECT_EQ(s.nx(), 20u);
  EXPECT_EQ(s.ny(), 10u);
  EXPECT_EQ(s.size(), 200u);
  double total = 0.0;
  for (double p : s.posterior()) total += p;
  EXPECT_NEAR(total, 1.0, 1e-12);
  EXPECT_VPRIV_ERROR(AdversaryState(kCenter, 0.0, 10.0), ErrorCode::kInvalidParam);
  EXPECT_VPRIV_ERROR(AdversaryState(kCenter, 10.0, 10.0, -1.0), ErrorCode::kInvalidParam);
  const auto cov = AdversaryState::Covering({kCenter}, 1000.0);
  EXPECT_EQ(cov.nx(), 20u);
  EXPECT_EQ(cov.ny(), 20u);
  EXPECT_VPRIV_ERROR(AdversaryState::Covering({}, 1.0), ErrorCode::kInvalidParam);
}

TEST(AdversaryTest, TinyEpsilonKeepsPosteriorUniform) {
  AdversaryState s(kCenter, 3000.0, 3000.0);
  s.Update({kCenter.lat + 0.01, kCenter.lon + 0.01}, Laplace(1e-12));
  const double u = 1.0 / static_cast<double>(s.size());
  double tv = 0.0;
  for (double p : s.posterior()) tv += 0.5 * std::abs(p - u);
  EXPECT_LT(tv, 1e-6);
  EXPECT_EQ(s.history().size(), 1u);
}

TEST(AdversaryTest, MatchesFullGridRecomputation) {
  Rng rng(3);
  AdversaryState s = AdversaryState::Covering({kCenter}, 1500.0);
  std::vector<GeoPoint> disclosed;
  const double eps = 0.01;
  for (int i = 0; i < 8; ++i) {
    disclosed.push_back(pets::PlanarLaplace(kCenter, eps, rng));
    PosteriorUpdate(s, disclosed.back(), Laplace(eps));
    double sum = 0.0;
    for (double p : s.posterior()) {
      ASSERT_GE(p, 0.0);
      sum += p;
    }
    ASSERT_NEAR(sum, 1.0, 1e-9);
  }
  // Oracle: product of all likelihoods in one pass, normalized once.
  std::vector<double> w(s.size());
  double total = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    double log_w = 0.0;
    for (const auto& z : disclosed) {
      const double d = LocalFrame(s.centers_geo()[i]).ToMeters(z).Norm();
      log_w += -eps * d;
    }
    w[i] = log_w;
  }
  const double top = *std::max_element(w.begin(), w.end());
  for (double& v : w) total += (v = std::exp(v - top));
  double tv = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) tv += 0.5 * std::abs(w[i] / total - s.posterior()[i]);
  EXPECT_LT(tv, 1e-9);
}

TEST(AdversaryTest, IsotropicUpdateUsesGaugeDensity) {
  pets::PetStep iso;
  iso.pet_id = pets::kPlanarIsotropic;
  iso.epsilon = 0.01;
  iso.hull = {{-1.0, -1.0}, {1.0, -1.0}, {1.0, 1.0}, {-1.0, 1.0}};
  AdversaryState s(kCenter, 1000.0, 1000.0);
  const GeoPoint z = s.frame().ToGeo({500.0, 500.0});
  s.Update(z, iso);
  // Square hull: weight depends on the max-norm offset of each center.
  const auto& c = s.centers_m();
  std::vector<double> w(s.size());
  double total = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const Vec2 off = LocalFrame(s.centers_geo()[i]).ToMeters(z);
    total += (w[i] = std::exp(-0.01 * std::max(std::abs(off.x), std::abs(off.y))));
  }
  for (std::size_t i = 0; i < w.size(); ++i) {
    EXPECT_NEAR(s.posterior()[i], w[i] / total, 1e-12) << c[i].x << "," << c[i].y;
  }
}

TEST(AdversaryTest, UnsupportedMechanismsAndDegenerateLikelihood) {
  AdversaryState s(kCenter, 1000.0, 1000.0);
  pets::PetStep round;
  round.pet_id = pets::kRoundLocation;
  round.grid_m = 500.0;
  EXPECT_VPRIV_ERROR(s.Update(kCenter, round), ErrorCode::kInvalidParam);
  EXPECT_VPRIV_ERROR(s.Update(kCenter, Laplace(0.0)), ErrorCode::kInvalidParam);
  // Likelihood underflows to zero on every cell.
  EXPECT_VPRIV_ERROR(s.Update({kCenter.lat + 0.3, kCenter.lon}, Laplace(1e308)),
                     ErrorCode::kDegeneratePosterior);
  EXPECT_TRUE(s.history().empty());
  std::vector<double> bad(s.size(), 0.0);
  EXPECT_VPRIV_ERROR(s.SetPosterior(bad), ErrorCode::kInvalidParam);
  EXPECT_VPRIV_ERROR(s.SetPosterior({1.0}), ErrorCode::kInvalidParam);
}

TEST(InferenceErrorTest, PointMassAtTrueCell) {
  AdversaryState s(kCenter, 1000.0, 1000.0);
  std::vector<double> p(s.size(), 0.0);
  p[37] = 1.0;
  s.SetPosterior(p);
  const Vec2 c = s.centers_m()[37];
  for (Vec2 off : {Vec2{0, 0}, Vec2{49, 49}, Vec2{-50, 50}, Vec2{12, -33}}) {
    const GeoPoint t = s.frame().ToGeo(c + off);
    EXPECT_LE(ExpectedInferenceError(s, t), std::sqrt(2.0) * 50.0 + 1e-9);
  }
  EXPECT_EQ(s.MapEstimate(), s.centers_geo()[37]);
}

TEST(InferenceErrorTest, UniformRectangleMatchesClosedForm) {
  const double want = RectangleMeanDistance(1000.0, 500.0);
  for (double cell : {100.0, 50.0, 20.0}) {
    const AdversaryState s(kCenter, 2000.0, 1000.0, cell);
    const GeoPoint mid = s.frame().ToGeo({1000.0, 500.0});
    EXPECT_NEAR(s.ExpectedInferenceError(mid), want, 0.01 * want) << cell;
  }
  EXPECT_NEAR(RectangleMeanDistance(1.0, 1.0) * 4.0 / 4.0,
              (std::sqrt(2.0) + std::log(1.0 + std::sqrt(2.0))) / 3.0, 1e-12);
}

TEST(InferenceErrorTest, InvariantUnderReflection) {
  AdversaryState s(kCenter, 1000.0, 1000.0);
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const std::size_t n = s.nx();
  std::vector<double> p(s.size());
  // Symmetric under x -> -x and y -> -y about the box center.
  for (std::size_t j = 0; j < n / 2; ++j) {
    for (std::size_t i = 0; i < n / 2; ++i) {
      const double v = u(gen);
      p[j * n + i] = p[j * n + (n - 1 - i)] = p[(n - 1 - j) * n + i] =
          p[(n - 1 - j) * n + (n - 1 - i)] = v;
    }
  }
  double sum = 0.0;
  for (double v : p) sum += v;
  for (double& v : p) v /= sum;
  s.SetPosterior(p);
  const GeoPoint mid = s.frame().ToGeo({500.0, 500.0});
  const double e0 = s.ExpectedInferenceError(mid);
  std::vector<double> flipped(p.size());
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < n; ++i) flipped[j * n + (n - 1 - i)] = p[j * n + i];
  }
  s.SetPosterior(flipped);
  EXPECT_NEAR(s.ExpectedInferenceError(mid), e0, 1e-9);
}

TEST(InferenceErrorTest, RepeatedDisclosuresDoNotIncreaseError) {
  constexpr int kTrials = 100;
  constexpr int kSteps = 8;
  const double eps = 0.01;
  Rng rng(17);
  std::vector<std::vector<double>> err(kSteps + 1, std::vector<double>(kTrials));
  for (int t = 0; t < kTrials; ++t) {
    AdversaryState s = AdversaryState::Covering({kCenter}, 2000.0);
    err[0][static_cast<std::size_t>(t)] = s.ExpectedInferenceError(kCenter);
    for (int k = 1; k <= kSteps; ++k) {
      s.Update(pets::PlanarLaplace(kCenter, eps, rng), Laplace(eps));
      err[static_cast<std::size_t>(k)][static_cast<std::size_t>(t)] =
          s.ExpectedInferenceError(kCenter);
    }
  }
  // One-sided paired z-test per step: reject when the mean rise is
  // significant at alpha = 0.05.
  for (std::size_t k = 1; k <= kSteps; ++k) {
    double mean = 0.0, sq = 0.0;
    for (int t = 0; t < kTrials; ++t) {
      const double d = err[k][static_cast<std::size_t>(t)] - err[k - 1][static_cast<std::size_t>(t)];
      mean += d;
      sq += d * d;
    }
    mean /= kTrials;
    const double var = (sq - kTrials * mean * mean) / (kTrials - 1);
    const double z = mean / std::sqrt(var / kTrials);
    EXPECT_LT(z, 1.645) << "step " << k << " mean rise " << mean;
  }
  double first = 0.0, last = 0.0;
  for (int t = 0; t < kTrials; ++t) {
    first += err[0][static_cast<std::size_t>(t)];
    last += err[kSteps][static_cast<std::size_t>(t)];
  }
  EXPECT_LT(last, 0.5 * first);
}

}  // namespace
}  // namespace vpriv::lbs
