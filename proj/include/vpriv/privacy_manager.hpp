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

// The privacy manager: derives privacy rules from manifests and the selection
// shortlist, mediates every data access through one of the four access
// modes, composes stored items as pbe(PET(item)), and keeps the disclosure
// ledger.

#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vpriv/common/crypto.hpp"
#include "vpriv/common/json_io.hpp"
#include "vpriv/datamodel.hpp"
#include "vpriv/manifest.hpp"
#include "vpriv/pets/pbe.hpp"
#include "vpriv/pets/pipeline.hpp"
#include "vpriv/pets/registry.hpp"
#include "vpriv/selection/selection.hpp"
#include "vpriv/stored_item.hpp"

namespace vpriv {

// epsilon such that the planar Laplace mean error 2/epsilon equals the
// tolerated precision.
inline double EpsilonFromPrecision(double min_precision_m) {
  if (!(min_precision_m > 0.0) || !std::isfinite(min_precision_m)) {
    throw Error(ErrorCode::kInvalidParam, "min_precision must be > 0");
  }
  return 2.0 / min_precision_m;
}

// Noise-level presets as multipliers of the rule-derived epsilon.
class NoisePresets {
 public:
  NoisePresets() : table_{{"low", 2.0}, {"medium", 1.0}, {"high", 0.5}} {}

  static NoisePresets FromJson(const Json& doc) {
    NoisePresets p;
    p.table_.clear();
    for (const auto& [name, v] : doc.items()) {
      if (!v.is_number() || !(v.get<double>() > 0.0)) {
        throw Error(ErrorCode::kSchemaError, "preset '" + name + "' must be > 0");
      }
      p.table_[name] = v.get<double>();
    }
    return p;
  }
  static NoisePresets Load(const std::filesystem::path& path) {
    return FromJson(LoadJsonFile(path));
  }

  double Multiplier(const std::string& name) const {
    auto it = table_.find(name);
    if (it == table_.end()) {
      throw Error(ErrorCode::kInvalidParam, "unknown noise preset '" + name + "'");
    }
    return it->second;
  }

 private:
  std::map<std::string, double> table_;
};

struct PmConfig {
  // (app_id, type_id) pairs the user explicitly consented to direct access.
  std::set<std::pair<std::string, std::string>> consent_overrides;
  double epsilon_multiplier = 1.0;
  // Anchor of the generalisation grid.
  GeoPoint grid_origin{};
};

struct PrivacyRule {
  std::string app_id;
  std::string type_id;
  AccessMode access_mode = AccessMode::kDirect;
  // Applied left to right. Every rule whose data may be stored or uplinked
  // ends with a pbe step; Direct and Computed rules have an empty pipeline
  // and are served only inside the vehicle.
  std::vector<pets::PetStep> pipeline;
  pets::PurposePolicy policy;
  double max_rate_hz = 0.0;
  double max_staleness_s = 0.0;
  double epsilon_per_disclosure = 0.0;
  std::optional<Computation> computation;
  std::string selection_note;

  bool Storable() const {
    return !pipeline.empty() && pipeline.back().pet_id == pets::kPbe;
  }

  // The data PET of a storable rule, or nullptr for a bare [pbe] pipeline.
  const pets::PetStep* DataPet() const {
    for (const auto& s : pipeline) {
      if (s.pet_id != pets::kPbe) return &s;
    }
    return nullptr;
  }
};

inline OrderedJson ToJson(const PrivacyRule& r) {
  OrderedJson j;
  j["app_id"] = r.app_id;
  j["type_id"] = r.type_id;
  j["access_mode"] = ToString(r.access_mode);
  j["pipeline"] = OrderedJson::array();
  for (const auto& s : r.pipeline) j["pipeline"].push_back(s.ToJson());
  j["policy"] = r.policy.text();
  j["max_rate_hz"] = r.max_rate_hz;
  j["max_staleness_s"] = r.max_staleness_s;
  j["epsilon_per_disclosure"] = r.epsilon_per_disclosure;
  if (r.computation) {
    j["computation"] = {{"aggregate", ToString(r.computation->aggregate)},
                        {"window_s", r.computation->window_s}};
  }
  j["selection_note"] = r.selection_note;
  return j;
}

// Ranked shortlist per data type, as produced by the selection engine.
using TypeSelection = std::map<std::string, std::vector<selection::RankedPet>>;

namespace detail {

inline PayloadKind AggregatedKind(PayloadKind input, Aggregate agg) {
  if (agg == Aggregate::kCount) return PayloadKind::kScalar;
  return input;
}

inline pets::PetStep MakeStep(const std::string& pet_id, const DataRequirement& req,
                              const AppManifest& manifest, const PmConfig& config) {
  pets::PetStep step;
  step.pet_id = pet_id;
  const double precision = req.constraints.min_precision;
  if (pet_id == pets::kPlanarLaplace || pet_id == pets::kPlanarIsotropic) {
    step.epsilon = EpsilonFromPrecision(precision) * config.epsilon_multiplier;
  } else if (pet_id == pets::kLaplaceScalar) {
    step.sensitivity = 1.0;
    step.epsilon = step.sensitivity / precision * config.epsilon_multiplier;
  } else if (pet_id == pets::kRoundLocation) {
    step.grid_m = precision;
    step.grid_origin = config.grid_origin;
  } else if (pet_id == pets::kPseudonymize) {
    step.purpose = manifest.purposes.front();
  }
  return step;
}

}  // namespace detail

inline pets::PurposePolicy PolicyForPurposes(const std::vector<std::string>& purposes) {
  std::vector<std::string> attrs;
  for (const auto& p : purposes) attrs.push_back("purpose:" + p);
  return pets::PurposePolicy::AllOf(attrs);
}

// One rule per data requirement. The chosen PET is the highest-ranked
// shortlist entry the app supports that fits the payload.
inline std::vector<PrivacyRule> GenerateRules(const AppManifest& manifest,
                                              const TypeSelection& selection,
                                              const PmConfig& config,
                                              const DataCatalog& catalog,
                                              const pets::PetRegistry& registry) {
  std::vector<PrivacyRule> rules;
  const pets::PurposePolicy policy = PolicyForPurposes(manifest.purposes);
  for (const auto& req : manifest.data_requirements) {
    const DataTypeDescriptor& type = catalog.Get(req.type_id);
    PrivacyRule rule;
    rule.app_id = manifest.app_id;
    rule.type_id = req.type_id;
    rule.access_mode = req.access_mode;
    rule.policy = policy;
    rule.max_rate_hz = req.constraints.rate_hz;
    rule.max_staleness_s = req.constraints.max_staleness_s;
    rule.computation = req.computation;

    switch (req.access_mode) {
      case AccessMode::kDirect: {
        const bool consented =
            config.consent_overrides.count({manifest.app_id, req.type_id}) > 0;
        if (type.classification != Classification::kTechnical && !consented) {
          throw Error(ErrorCode::kDeniedByPolicy,
                      "direct access to " + std::string(ToString(type.classification)) +
                          " data '" + req.type_id + "' needs explicit consent");
        }
        rule.selection_note = consented ? "direct access by consent override"
                                        : "direct access to technical data";
        break;
      }
      case AccessMode::kComputed:
        rule.selection_note = "aggregate only; raw values stay in the vehicle";
        break;
      case AccessMode::kPetMediated:
      case AccessMode::kCombined: {
        const PayloadKind kind =
            req.computation
                ? detail::AggregatedKind(type.payload_kind, req.computation->aggregate)
                : type.payload_kind;
        auto it = selection.find(req.type_id);
        if (it == selection.end()) {
          throw Error(ErrorCode::kNoViablePet, "no selection for " + req.type_id);
        }
        const std::vector<selection::RankedPet>& ranked = it->second;
        const selection::RankedPet* chosen = nullptr;
        std::size_t rank = 0;
        for (std::size_t i = 0; i < ranked.size(); ++i) {
          const auto& cand = ranked[i];
          if (cand.pet_id == pets::kPbe) continue;
          if (std::find(req.supported_pets.begin(), req.supported_pets.end(),
                        cand.pet_id) == req.supported_pets.end()) {
            continue;
          }
          const pets::PetDescriptor* d = registry.Find(cand.pet_id);
          if (!d || !d->payload_kinds.count(kind)) continue;
          chosen = &cand;
          rank = i + 1;
          break;
        }
        if (!chosen) {
          throw Error(ErrorCode::kNoViablePet,
                      manifest.app_id + " supports no shortlisted PET for " + req.type_id);
        }
        pets::PetStep step = detail::MakeStep(chosen->pet_id, req, manifest, config);
        if (step.IsDifferentiallyPrivate()) rule.epsilon_per_disclosure = step.epsilon;
        rule.selection_note = "maturity-rank-first: " + chosen->pet_id + " (rank " +
                              std::to_string(rank) + " of " +
                              std::to_string(ranked.size()) + ")";
        if (chosen->pet_id == pets::kPlanarIsotropic) {
          rule.selection_note +=
              "; epsilon from the planar-Laplace mean-error identity (approximate "
              "for the isotropic hull)";
        }
        rule.pipeline.push_back(std::move(step));
        pets::PetStep seal;
        seal.pet_id = std::string(pets::kPbe);
        seal.policy = policy.text();
        rule.pipeline.push_back(std::move(seal));
        break;
      }
    }
    rules.push_back(std::move(rule));
  }
  return rules;
}

// ---- Ledger ---------------------------------------------------------------

struct Disclosure {
  std::int64_t timestamp_ms = 0;
  std::string app_id;
  std::string type_id;
  double epsilon = 0.0;
  double cumulative_epsilon = 0.0;  // For (app_id, type_id) after this entry.
};

// Sequential composition: cumulative epsilon is the running sum of
// per-disclosure epsilons for each (app, type).
class PrivacyLedger {
 public:
  const Disclosure& Record(std::int64_t timestamp_ms, const std::string& app_id,
                           const std::string& type_id, double epsilon) {
    if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) {
      throw Error(ErrorCode::kInvalidParam, "disclosure epsilon must be >= 0");
    }
    double& total = cumulative_[{app_id, type_id}];
    total += epsilon;
    entries_.push_back({timestamp_ms, app_id, type_id, epsilon, total});
    return entries_.back();
  }

  double CumulativeEpsilon(const std::string& app_id,
                           const std::string& type_id) const {
    auto it = cumulative_.find({app_id, type_id});
    return it == cumulative_.end() ? 0.0 : it->second;
  }

  const std::vector<Disclosure>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

 private:
  std::vector<Disclosure> entries_;
  std::map<std::pair<std::string, std::string>, double> cumulative_;
};

// ---- Mediation ------------------------------------------------------------

struct MediatedResponse {
  AccessMode mode = AccessMode::kDirect;
  // Direct: the raw item. PetMediated / Combined: the transformed item.
  std::optional<DataItem> item;
  // Computed: the aggregate value only.
  std::optional<Payload> aggregate;
  // The raw item a PetMediated response was derived from; never exposed to
  // the app, kept for the vehicle-side trusted view.
  std::optional<DataItem> source_item;
  double epsilon_charged = 0.0;
};

namespace detail {

inline Payload ComputeAggregate(const Computation& comp,
                                std::span<const DataItem> items) {
  if (items.empty()) throw Error(ErrorCode::kStaleData, "no items in window");
  if (comp.aggregate == Aggregate::kCount) {
    return static_cast<double>(items.size());
  }
  const PayloadKind kind = KindOf(items.front().payload);
  if (kind == PayloadKind::kScalar) {
    double acc = comp.aggregate == Aggregate::kMean ? 0.0 : items.front().scalar();
    for (const auto& it : items) {
      const double v = it.scalar();
      switch (comp.aggregate) {
        case Aggregate::kMean: acc += v; break;
        case Aggregate::kMin: acc = std::min(acc, v); break;
        case Aggregate::kMax: acc = std::max(acc, v); break;
        case Aggregate::kCount: break;
      }
    }
    if (comp.aggregate == Aggregate::kMean) acc /= static_cast<double>(items.size());
    return acc;
  }
  if (kind == PayloadKind::kGeoPoint && comp.aggregate == Aggregate::kMean) {
    GeoPoint c{0.0, 0.0};
    for (const auto& it : items) {
      c.lat += it.geo().lat;
      c.lon += it.geo().lon;
    }
    c.lat /= static_cast<double>(items.size());
    c.lon /= static_cast<double>(items.size());
    return c;
  }
  throw Error(ErrorCode::kPipelineError,
              std::string(ToString(comp.aggregate)) + " is undefined for " +
                  std::string(ToString(kind)) + " payloads");
}

}  // namespace detail

// Applies the rule's pipeline up to (not including) the pbe terminator.
inline DataItem ApplyDataPets(const PrivacyRule& rule, const DataItem& item, Rng& rng,
                              const pets::PetContext& ctx) {
  DataItem out = item;
  for (const auto& step : rule.pipeline) {
    if (step.pet_id == pets::kPbe) break;
    out = pets::ApplyPet(step, out, rng, ctx);
  }
  return out;
}

// body = pbe_encrypt(policy, canonical_encode(PET(item))). The PET draws from
// `rng` before the encryption does.
inline StoredItem ComposeStoredItem(const PrivacyRule& rule, const DataItem& item,
                                    const pets::AuthorityPublic& authority, Rng& rng,
                                    const pets::PetContext& ctx = {}) {
  if (!rule.Storable()) {
    throw Error(ErrorCode::kPipelineError,
                "pipeline of " + rule.app_id + "/" + rule.type_id +
                    " does not end in pbe");
  }
  const DataItem transformed = ApplyDataPets(rule, item, rng, ctx);
  const Bytes encoded = CanonicalEncode(transformed);
  const pets::PurposePolicy policy =
      pets::PurposePolicy::Parse(rule.pipeline.back().policy);
  StoredItem stored;
  stored.ciphertext = pets::SerializeCiphertext(
      pets::PbeEncrypt(authority, policy, encoded, rng));
  const pets::PetStep* pet = rule.DataPet();
  stored.pet_id = pet ? pet->pet_id : "none";
  std::string params;
  for (const auto& s : rule.pipeline) params += s.CanonicalParams() + "|";
  stored.params_digest = crypto::Sha256(ToBytes(params));
  stored.timestamp_ms = transformed.timestamp_ms;
  return stored;
}

// Rule table, ledger, and per-(app, type) rate limiter. All methods are
// serialized by one mutex, so requests for one (app, type) are totally
// ordered.
class PrivacyManager {
 public:
  explicit PrivacyManager(pets::PetContext ctx = {}) : ctx_(std::move(ctx)) {}

  void InstallRules(const std::vector<PrivacyRule>& rules) {
    std::lock_guard lock(mu_);
    for (const auto& r : rules) rules_[{r.app_id, r.type_id}] = r;
  }

  void RemoveApp(const std::string& app_id) {
    std::lock_guard lock(mu_);
    for (auto it = rules_.begin(); it != rules_.end();) {
      if (it->first.first == app_id) {
        last_served_.erase(it->first);
        it = rules_.erase(it);
      } else {
        ++it;
      }
    }
  }

  std::optional<PrivacyRule> Rule(const std::string& app_id,
                                  const std::string& type_id) const {
    std::lock_guard lock(mu_);
    auto it = rules_.find({app_id, type_id});
    if (it == rules_.end()) return std::nullopt;
    return it->second;
  }

  std::vector<PrivacyRule> Rules() const {
    std::lock_guard lock(mu_);
    std::vector<PrivacyRule> out;
    for (const auto& [k, r] : rules_) out.push_back(r);
    return out;
  }

  // `items` are the latest items of the rule's type in timestamp order.
  // Only successful mediations consume the rate token and charge the ledger.
  MediatedResponse Mediate(const std::string& app_id, const std::string& type_id,
                           std::span<const DataItem> items, std::int64_t now_ms,
                           Rng& rng) {
    std::lock_guard lock(mu_);
    auto rit = rules_.find({app_id, type_id});
    if (rit == rules_.end()) {
      throw Error(ErrorCode::kNotFound, "no rule for " + app_id + "/" + type_id);
    }
    const PrivacyRule& rule = rit->second;
    const auto key = rit->first;

    if (rule.max_rate_hz > 0.0) {
      auto last = last_served_.find(key);
      const double min_gap_ms = 1000.0 / rule.max_rate_hz;
      if (last != last_served_.end() &&
          static_cast<double>(now_ms - last->second) < min_gap_ms) {
        throw Error(ErrorCode::kRateLimited,
                    app_id + "/" + type_id + " exceeds " +
                        std::to_string(rule.max_rate_hz) + " Hz");
      }
    }

    const std::int64_t fresh_after =
        now_ms - static_cast<std::int64_t>(std::llround(rule.max_staleness_s * 1000.0));
    if (items.empty() || items.back().timestamp_ms < fresh_after ||
        items.back().timestamp_ms > now_ms) {
      throw Error(ErrorCode::kStaleData, "no fresh " + type_id + " item");
    }
    for (const auto& it : items) {
      if (it.type_id != type_id) {
        throw Error(ErrorCode::kPipelineError, "item of wrong type in request");
      }
    }

    MediatedResponse resp;
    resp.mode = rule.access_mode;
    switch (rule.access_mode) {
      case AccessMode::kDirect:
        resp.item = items.back();
        break;
      case AccessMode::kPetMediated:
        resp.source_item = items.back();
        resp.item = ApplyDataPets(rule, items.back(), rng, ctx_);
        break;
      case AccessMode::kComputed:
        resp.aggregate = detail::ComputeAggregate(*rule.computation,
                                                  WindowOf(rule, items, now_ms));
        break;
      case AccessMode::kCombined: {
        DataItem agg;
        agg.type_id = type_id;
        agg.timestamp_ms = now_ms;
        agg.source = "privacy-manager";
        agg.payload = detail::ComputeAggregate(*rule.computation,
                                               WindowOf(rule, items, now_ms));
        resp.item = ApplyDataPets(rule, agg, rng, ctx_);
        break;
      }
    }
    if (rule.epsilon_per_disclosure > 0.0) {
      ledger_.Record(now_ms, app_id, type_id, rule.epsilon_per_disclosure);
      resp.epsilon_charged = rule.epsilon_per_disclosure;
    }
    last_served_[key] = now_ms;
    return resp;
  }

  PrivacyLedger Ledger() const {
    std::lock_guard lock(mu_);
    return ledger_;
  }

  double CumulativeEpsilon(const std::string& app_id, const std::string& type_id) const {
    std::lock_guard lock(mu_);
    return ledger_.CumulativeEpsilon(app_id, type_id);
  }

  const pets::PetContext& context() const { return ctx_; }

 private:
  static std::span<const DataItem> WindowOf(const PrivacyRule& rule,
                                            std::span<const DataItem> items,
                                            std::int64_t now_ms) {
    const auto window_ms =
        static_cast<std::int64_t>(std::llround(rule.computation->window_s * 1000.0));
    std::size_t first = items.size();
    while (first > 0 && items[first - 1].timestamp_ms > now_ms - window_ms) --first;
    return items.subspan(first);
  }

  mutable std::mutex mu_;
  pets::PetContext ctx_;
  std::map<std::pair<std::string, std::string>, PrivacyRule> rules_;
  std::map<std::pair<std::string, std::string>, std::int64_t> last_served_;
  PrivacyLedger ledger_;
};

}  // namespace vpriv
