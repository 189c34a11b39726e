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

// Location-based service provider and trajectory-privacy quantifier: a POI
// store with a grid bucket index, recall@k utility, and a Bayesian adversary
// over a cell lattice.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "vpriv/common/error.hpp"
#include "vpriv/common/geo.hpp"
#include "vpriv/common/json_io.hpp"
#include "vpriv/databus.hpp"
#include "vpriv/pets/pipeline.hpp"
#include "vpriv/pets/planar.hpp"

namespace vpriv::lbs {

struct Poi {
  std::string id;
  std::string category;  // lowercase
  GeoPoint location;
  std::string name;

  friend bool operator==(const Poi&, const Poi&) = default;
};

inline constexpr std::string_view kPoiHeader = "id,category,lat,lon,name";
inline constexpr double kDefaultBucketM = 250.0;

// Immutable after construction. Distances are Euclidean in one local frame
// anchored at the center of the POI bounding box.
class PoiStore {
 public:
  explicit PoiStore(std::vector<Poi> pois, double bucket_m = kDefaultBucketM)
      : pois_(std::move(pois)), bucket_m_(bucket_m) {
    if (!(bucket_m_ > 0.0)) throw Error(ErrorCode::kInvalidParam, "bucket size must be > 0");
    std::set<std::string> ids;
    double lat0 = 90.0, lat1 = -90.0, lon0 = 180.0, lon1 = -180.0;
    for (const auto& p : pois_) {
      if (!ValidLatLon(p.location)) {
        throw Error(ErrorCode::kParseError, "POI '" + p.id + "' has invalid coordinates");
      }
      if (p.category.empty() ||
          std::any_of(p.category.begin(), p.category.end(),
                      [](char c) { return c >= 'A' && c <= 'Z'; })) {
        throw Error(ErrorCode::kParseError, "POI '" + p.id + "' category must be lowercase");
      }
      if (!ids.insert(p.id).second) {
        throw Error(ErrorCode::kParseError, "duplicate POI id '" + p.id + "'");
      }
      lat0 = std::min(lat0, p.location.lat);
      lat1 = std::max(lat1, p.location.lat);
      lon0 = std::min(lon0, p.location.lon);
      lon1 = std::max(lon1, p.location.lon);
    }
    if (!pois_.empty()) frame_ = LocalFrame({(lat0 + lat1) / 2.0, (lon0 + lon1) / 2.0});
    for (std::size_t i = 0; i < pois_.size(); ++i) {
      const Vec2 m = frame_.ToMeters(pois_[i].location);
      meters_.push_back(m);
      auto& cat = categories_[pois_[i].category];
      const Cell c = CellOf(m);
      cat.buckets[c].push_back(i);
      cat.count += 1;
      if (cat.count == 1) {
        cat.lo = cat.hi = c;
      } else {
        cat.lo = {std::min(cat.lo.x, c.x), std::min(cat.lo.y, c.y)};
        cat.hi = {std::max(cat.hi.x, c.x), std::max(cat.hi.y, c.y)};
      }
    }
  }

  const std::vector<Poi>& pois() const { return pois_; }
  const LocalFrame& frame() const { return frame_; }

  std::vector<std::string> Categories() const {
    std::vector<std::string> out;
    for (const auto& [c, v] : categories_) out.push_back(c);
    return out;
  }

  std::size_t CountOf(const std::string& category) const {
    return Category(category).count;
  }

  double Distance(GeoPoint a, GeoPoint b) const {
    return (frame_.ToMeters(a) - frame_.ToMeters(b)).Norm();
  }

  // Up to k POIs of the category within radius_m, ascending distance, ties
  // by id.
  std::vector<Poi> NearestPois(GeoPoint loc, const std::string& category, std::size_t k,
                               double radius_m = std::numeric_limits<double>::infinity()) const {
    if (k < 1) throw Error(ErrorCode::kInvalidParam, "k must be >= 1");
    if (!ValidLatLon(loc)) throw Error(ErrorCode::kInvalidParam, "invalid query location");
    const CategoryIndex& cat = Category(category);
    const Vec2 q = frame_.ToMeters(loc);
    const Cell qc = CellOf(q);
    const std::int64_t max_ring =
        std::max({std::abs(qc.x - cat.lo.x), std::abs(qc.x - cat.hi.x),
                  std::abs(qc.y - cat.lo.y), std::abs(qc.y - cat.hi.y)});
    std::vector<std::pair<double, std::size_t>> found;
    auto better = [&](const auto& a, const auto& b) {
      return a.first != b.first ? a.first < b.first : pois_[a.second].id < pois_[b.second].id;
    };
    for (std::int64_t ring = 0; ring <= max_ring; ++ring) {
      // Unvisited points lie at least `ring - 1` whole cells away.
      const double reach = static_cast<double>(ring - 1) * bucket_m_;
      if (ring > 0 && reach > radius_m) break;
      if (found.size() >= k) {
        std::nth_element(found.begin(), found.begin() + static_cast<std::ptrdiff_t>(k - 1),
                         found.end(), better);
        if (found[k - 1].first < reach) break;
      }
      VisitRing(cat, qc, ring, [&](std::size_t i) {
        const double d = (meters_[i] - q).Norm();
        if (d <= radius_m) found.emplace_back(d, i);
      });
    }
    std::sort(found.begin(), found.end(), better);
    if (found.size() > k) found.resize(k);
    std::vector<Poi> out;
    for (const auto& [d, i] : found) out.push_back(pois_[i]);
    return out;
  }

 private:
  struct Cell {
    std::int64_t x = 0;
    std::int64_t y = 0;
    bool operator==(const Cell&) const = default;
  };
  struct CellHash {
    std::size_t operator()(const Cell& c) const {
      return std::hash<std::int64_t>()(c.x * 1000003 + c.y);
    }
  };
  struct CategoryIndex {
    std::unordered_map<Cell, std::vector<std::size_t>, CellHash> buckets;
    Cell lo, hi;
    std::size_t count = 0;
  };

  Cell CellOf(Vec2 m) const {
    return {static_cast<std::int64_t>(std::floor(m.x / bucket_m_)),
            static_cast<std::int64_t>(std::floor(m.y / bucket_m_))};
  }

  const CategoryIndex& Category(const std::string& category) const {
    auto it = categories_.find(category);
    if (it == categories_.end()) {
      throw Error(ErrorCode::kUnknownCategory, "unknown category '" + category + "'");
    }
    return it->second;
  }

  template <typename F>
  static void VisitRing(const CategoryIndex& cat, Cell c, std::int64_t ring, F&& visit) {
    auto cell = [&](std::int64_t x, std::int64_t y) {
      auto it = cat.buckets.find({x, y});
      if (it == cat.buckets.end()) return;
      for (std::size_t i : it->second) visit(i);
    };
    if (ring == 0) {
      cell(c.x, c.y);
      return;
    }
    for (std::int64_t x = c.x - ring; x <= c.x + ring; ++x) {
      cell(x, c.y - ring);
      cell(x, c.y + ring);
    }
    for (std::int64_t y = c.y - ring + 1; y <= c.y + ring - 1; ++y) {
      cell(c.x - ring, y);
      cell(c.x + ring, y);
    }
  }

  std::vector<Poi> pois_;
  double bucket_m_;
  LocalFrame frame_;
  std::vector<Vec2> meters_;
  std::map<std::string, CategoryIndex> categories_;
};

// Name may contain commas; it takes the rest of the line.
inline PoiStore ParsePoiCsv(const std::string& text, double bucket_m = kDefaultBucketM) {
  std::vector<Poi> pois;
  for (const auto& [lineno, line] : detail::CsvBody(text, kPoiHeader)) {
    const std::string where = "line " + std::to_string(lineno);
    auto f = detail::SplitCsvLine(line);
    if (f.size() < 5) throw Error(ErrorCode::kParseError, where + ": expected 5 fields");
    Poi p;
    p.id = std::string(f[0]);
    p.category = std::string(f[1]);
    p.location = {detail::ParseNumber<double>(f[2], where),
                  detail::ParseNumber<double>(f[3], where)};
    const std::size_t name_at = static_cast<std::size_t>(f[4].data() - line.data());
    p.name = line.substr(name_at);
    if (p.id.empty()) throw Error(ErrorCode::kParseError, where + ": empty id");
    pois.push_back(std::move(p));
  }
  return PoiStore(std::move(pois), bucket_m);
}

inline PoiStore LoadPois(const std::filesystem::path& path, double bucket_m = kDefaultBucketM) {
  return ParsePoiCsv(ReadFile(path), bucket_m);
}

// |topk(true) ∩ topk(disclosed)| / min(k, number of POIs in the category).
inline double RecallAtK(const PoiStore& store, GeoPoint true_loc, GeoPoint disclosed,
                        const std::string& category, std::size_t k) {
  const auto a = store.NearestPois(true_loc, category, k);
  const auto b = store.NearestPois(disclosed, category, k);
  std::set<std::string> ids;
  for (const auto& p : a) ids.insert(p.id);
  std::size_t hit = 0;
  for (const auto& p : b) hit += ids.count(p.id);
  return static_cast<double>(hit) / static_cast<double>(a.size());
}

// ---- Bayesian adversary ---------------------------------------------------

inline constexpr double kDefaultAdversaryCellM = 100.0;

// Cell lattice over a box whose south-west corner is the frame origin.
// Cell (i, j) has center ((i + 0.5) c, (j + 0.5) c) in that frame.
class AdversaryState {
 public:
  AdversaryState(GeoPoint south_west, double width_m, double height_m,
                 double cell_m = kDefaultAdversaryCellM)
      : frame_(south_west), cell_m_(cell_m) {
    if (!(cell_m > 0.0) || !(width_m > 0.0) || !(height_m > 0.0)) {
      throw Error(ErrorCode::kInvalidParam, "adversary grid dimensions must be > 0");
    }
    nx_ = static_cast<std::size_t>(std::ceil(width_m / cell_m - 1e-9));
    ny_ = static_cast<std::size_t>(std::ceil(height_m / cell_m - 1e-9));
    for (std::size_t j = 0; j < ny_; ++j) {
      for (std::size_t i = 0; i < nx_; ++i) {
        const Vec2 c{(static_cast<double>(i) + 0.5) * cell_m,
                     (static_cast<double>(j) + 0.5) * cell_m};
        centers_m_.push_back(c);
        centers_geo_.push_back(frame_.ToGeo(c));
      }
    }
    posterior_.assign(centers_m_.size(), 1.0 / static_cast<double>(centers_m_.size()));
  }

  // Lattice over the bounding box of `points` grown by margin_m.
  static AdversaryState Covering(const std::vector<GeoPoint>& points, double margin_m,
                                 double cell_m = kDefaultAdversaryCellM) {
    if (points.empty()) throw Error(ErrorCode::kInvalidParam, "no points to cover");
    double lat0 = 90.0, lon0 = 180.0, lat1 = -90.0, lon1 = -180.0;
    for (const auto& p : points) {
      lat0 = std::min(lat0, p.lat);
      lon0 = std::min(lon0, p.lon);
      lat1 = std::max(lat1, p.lat);
      lon1 = std::max(lon1, p.lon);
    }
    const LocalFrame f({lat0, lon0});
    const Vec2 ne = f.ToMeters({lat1, lon1});
    const GeoPoint sw = f.ToGeo({-margin_m, -margin_m});
    return AdversaryState(sw, ne.x + 2.0 * margin_m, ne.y + 2.0 * margin_m, cell_m);
  }

  std::size_t nx() const { return nx_; }
  std::size_t ny() const { return ny_; }
  std::size_t size() const { return posterior_.size(); }
  double cell_m() const { return cell_m_; }
  const LocalFrame& frame() const { return frame_; }
  const std::vector<double>& posterior() const { return posterior_; }
  const std::vector<Vec2>& centers_m() const { return centers_m_; }
  const std::vector<GeoPoint>& centers_geo() const { return centers_geo_; }
  const std::vector<GeoPoint>& history() const { return history_; }

  void SetPosterior(std::vector<double> p) {
    if (p.size() != posterior_.size()) {
      throw Error(ErrorCode::kInvalidParam, "posterior size mismatch");
    }
    double sum = 0.0;
    for (double v : p) {
      if (!(v >= 0.0) || !std::isfinite(v)) {
        throw Error(ErrorCode::kInvalidParam, "posterior entries must be finite and >= 0");
      }
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw Error(ErrorCode::kInvalidParam, "posterior must sum to 1");
    }
    posterior_ = std::move(p);
  }

  // Bayes update in log space: posterior(cell) ∝ prior(cell) ·
  // density(disclosed | cell center), with the mechanism's noise measured
  // in the frame of the cell center.
  void Update(GeoPoint disclosed, const pets::PetStep& mechanism) {
    std::vector<double> loglik(posterior_.size());
    if (mechanism.pet_id == pets::kPlanarLaplace) {
      pets::RequirePositiveEpsilon(mechanism.epsilon);
      for (std::size_t i = 0; i < loglik.size(); ++i) {
        loglik[i] = pets::PlanarLaplaceLogDensity(
            mechanism.epsilon, LocalFrame(centers_geo_[i]).ToMeters(disclosed));
      }
    } else if (mechanism.pet_id == pets::kPlanarIsotropic) {
      pets::RequirePositiveEpsilon(mechanism.epsilon);
      const pets::ConvexHull hull = mechanism.Hull();
      for (std::size_t i = 0; i < loglik.size(); ++i) {
        loglik[i] = pets::PlanarIsotropicLogDensity(
            mechanism.epsilon, hull, LocalFrame(centers_geo_[i]).ToMeters(disclosed));
      }
    } else {
      throw Error(ErrorCode::kInvalidParam,
                  "no density known for mechanism '" + mechanism.pet_id + "'");
    }
    double top = -std::numeric_limits<double>::infinity();
    std::vector<double> logpost(posterior_.size());
    for (std::size_t i = 0; i < logpost.size(); ++i) {
      logpost[i] = posterior_[i] > 0.0 ? std::log(posterior_[i]) + loglik[i]
                                       : -std::numeric_limits<double>::infinity();
      top = std::max(top, logpost[i]);
    }
    if (!std::isfinite(top)) {
      throw Error(ErrorCode::kDegeneratePosterior, "likelihood is zero on every cell");
    }
    double sum = 0.0;
    for (double& v : logpost) {
      v = std::exp(v - top);
      sum += v;
    }
    for (std::size_t i = 0; i < logpost.size(); ++i) posterior_[i] = logpost[i] / sum;
    history_.push_back(disclosed);
  }

  // Σ posterior(cell) · distance(cell center, true_loc), in this frame.
  double ExpectedInferenceError(GeoPoint true_loc) const {
    const Vec2 t = frame_.ToMeters(true_loc);
    double e = 0.0;
    for (std::size_t i = 0; i < posterior_.size(); ++i) {
      e += posterior_[i] * (centers_m_[i] - t).Norm();
    }
    return e;
  }

  // Most probable cell center; lowest index on ties.
  GeoPoint MapEstimate() const {
    const auto it = std::max_element(posterior_.begin(), posterior_.end());
    return centers_geo_[static_cast<std::size_t>(it - posterior_.begin())];
  }

 private:
  LocalFrame frame_;
  double cell_m_;
  std::size_t nx_ = 0;
  std::size_t ny_ = 0;
  std::vector<Vec2> centers_m_;
  std::vector<GeoPoint> centers_geo_;
  std::vector<double> posterior_;
  std::vector<GeoPoint> history_;
};

inline void PosteriorUpdate(AdversaryState& state, GeoPoint disclosed,
                            const pets::PetStep& mechanism) {
  state.Update(disclosed, mechanism);
}

inline double ExpectedInferenceError(const AdversaryState& state, GeoPoint true_loc) {
  return state.ExpectedInferenceError(true_loc);
}

}  // namespace vpriv::lbs
