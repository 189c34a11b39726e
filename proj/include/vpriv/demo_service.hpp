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

// Three-party demonstrator core: one vehicle (bus, simulator, privacy
// manager, uplink) plus the LBS provider and its adversary model, driven by
// a simulated clock. The HTTP surface lives in vpriv/net/http.hpp.

#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "vpriv/common/crypto.hpp"
#include "vpriv/common/error.hpp"
#include "vpriv/common/json_io.hpp"
#include "vpriv/common/rng.hpp"
#include "vpriv/databus.hpp"
#include "vpriv/datamodel.hpp"
#include "vpriv/lbs.hpp"
#include "vpriv/manifest.hpp"
#include "vpriv/pets/pbe.hpp"
#include "vpriv/pets/pseudonym.hpp"
#include "vpriv/pets/registry.hpp"
#include "vpriv/privacy_manager.hpp"
#include "vpriv/selection/selection.hpp"
#include "vpriv/storage_server.hpp"
#include "vpriv/uplink.hpp"

namespace vpriv::demo {

// A query the headless driver issues every period_ms of simulated time.
struct ScriptedQuery {
  std::string app_id;
  std::string category;
  std::size_t k = 5;
  std::int64_t period_ms = 5000;
};

struct ScenarioConfig {
  std::filesystem::path trajectory;
  std::filesystem::path sensors;
  std::filesystem::path manifests_dir;
  std::filesystem::path pois;
  std::filesystem::path data_dir;
  std::filesystem::path trust_model;
  std::filesystem::path storage_config;  // Optional; in-process defaults otherwise.
  std::string storage_endpoint = "inproc";
  std::string epsilon_preset = "medium";
  std::uint64_t seed = 1;
  double playback_speed = 1.0;
  bool loop = false;
  double bundle_interval_s = kDefaultBundleIntervalS;
  std::int64_t step_ms = 1000;
  std::vector<std::string> apps;  // Manifest files installed on load.
  std::vector<ScriptedQuery> queries;
  std::set<std::pair<std::string, std::string>> consent_overrides;
  double adversary_cell_m = lbs::kDefaultAdversaryCellM;
  double adversary_margin_m = 2000.0;
  std::string vehicle_id = "VIN-DEMO-0001";
};

namespace detail {

inline std::filesystem::path Resolve(const std::filesystem::path& base,
                                     const std::filesystem::path& p) {
  return p.is_absolute() ? p : (base / p).lexically_normal();
}

inline void RequireFile(const std::filesystem::path& p, const std::string& what) {
  if (!std::filesystem::exists(p)) {
    throw Error(ErrorCode::kNotFound, what + " not found: " + p.string());
  }
}

}  // namespace detail

// Paths are relative to the scenario file. Data files default to the
// directory given by "data_dir".
inline ScenarioConfig ScenarioConfigFromJson(const Json& doc,
                                             const std::filesystem::path& base_dir) {
  ScenarioConfig c;
  try {
    auto path = [&](const char* key) {
      return detail::Resolve(base_dir, doc.at(key).get<std::string>());
    };
    c.trajectory = path("trajectory");
    c.sensors = path("sensors");
    c.manifests_dir = path("manifests_dir");
    c.pois = path("pois");
    c.data_dir = path("data_dir");
    c.trust_model = doc.contains("trust_model") ? path("trust_model")
                                                : c.data_dir / "trust/three_party.json";
    if (doc.contains("storage_config")) c.storage_config = path("storage_config");
    c.storage_endpoint = doc.value("storage_endpoint", c.storage_endpoint);
    c.epsilon_preset = doc.value("epsilon_preset", c.epsilon_preset);
    c.seed = doc.value("seed", c.seed);
    c.playback_speed = doc.value("playback_speed", c.playback_speed);
    c.loop = doc.value("loop", c.loop);
    c.bundle_interval_s = doc.value("bundle_interval_s", c.bundle_interval_s);
    c.step_ms = doc.value("step_ms", c.step_ms);
    c.apps = doc.value("apps", c.apps);
    for (const auto& q : doc.value("queries", Json::array())) {
      ScriptedQuery sq;
      sq.app_id = q.at("app_id").get<std::string>();
      sq.category = q.at("category").get<std::string>();
      sq.k = q.value("k", sq.k);
      sq.period_ms = q.value("period_ms", sq.period_ms);
      if (sq.period_ms <= 0 || sq.k == 0) {
        throw Error(ErrorCode::kSchemaError, "query period_ms and k must be > 0");
      }
      c.queries.push_back(sq);
    }
    for (const auto& o : doc.value("consent_overrides", Json::array())) {
      c.consent_overrides.insert(
          {o.at("app_id").get<std::string>(), o.at("type_id").get<std::string>()});
    }
    c.adversary_cell_m = doc.value("adversary_cell_m", c.adversary_cell_m);
    c.adversary_margin_m = doc.value("adversary_margin_m", c.adversary_margin_m);
    c.vehicle_id = doc.value("vehicle_id", c.vehicle_id);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kSchemaError, std::string("scenario: ") + e.what());
  }
  if (!(c.bundle_interval_s > 0.0) || c.step_ms <= 0) {
    throw Error(ErrorCode::kSchemaError, "bundle_interval_s and step_ms must be > 0");
  }
  detail::RequireFile(c.trajectory, "trajectory");
  detail::RequireFile(c.sensors, "sensor config");
  detail::RequireFile(c.manifests_dir, "manifests directory");
  detail::RequireFile(c.pois, "POI file");
  detail::RequireFile(c.data_dir, "data directory");
  detail::RequireFile(c.trust_model, "trust model");
  for (const auto& a : c.apps) detail::RequireFile(c.manifests_dir / a, "manifest");
  return c;
}

inline ScenarioConfig LoadScenarioConfig(const std::filesystem::path& path) {
  detail::RequireFile(path, "scenario");
  return ScenarioConfigFromJson(LoadJsonFile(path, ErrorCode::kSchemaError),
                                path.parent_path());
}

struct InstallResult {
  ThreatReport threats;
  std::vector<PrivacyRule> rules;
  selection::SelectionReport selection;
};

inline OrderedJson ToJson(const InstallResult& r) {
  OrderedJson j;
  j["threats"] = ToJson(r.threats);
  j["rules"] = OrderedJson::array();
  for (const auto& rule : r.rules) j["rules"].push_back(ToJson(rule));
  j["selection"] = selection::ToJson(r.selection);
  return j;
}

struct SeriesPoint {
  std::int64_t t_ms = 0;
  double cumulative_epsilon = 0.0;
  double inference_error_m = 0.0;
  double recall = 0.0;  // Trusted-side utility; not sent to the app.
};

struct QueryResult {
  GeoPoint disclosed;
  std::vector<lbs::Poi> pois;
  SeriesPoint point;
};

inline OrderedJson ToJson(const QueryResult& q) {
  OrderedJson j;
  j["disclosed"] = {{"lat", q.disclosed.lat}, {"lon", q.disclosed.lon}};
  j["pois"] = OrderedJson::array();
  for (const auto& p : q.pois) {
    j["pois"].push_back({{"id", p.id},
                         {"category", p.category},
                         {"lat", p.location.lat},
                         {"lon", p.location.lon},
                         {"name", p.name}});
  }
  j["series_point"] = {{"t_ms", q.point.t_ms},
                       {"cumulative_epsilon", q.point.cumulative_epsilon},
                       {"inference_error_m", q.point.inference_error_m}};
  return j;
}

// One disclosure seen from the trusted side.
struct DisclosureRecord {
  std::string app_id;
  std::int64_t t_ms = 0;
  GeoPoint raw_sample;  // Newest raw GPS item used by the mediation.
  GeoPoint true_position;  // Trajectory position at query time.
  GeoPoint disclosed;
};

// Expected plaintext of one stored item, kept on the vehicle side so runs
// can verify the composition order.
struct CompositionAudit {
  crypto::Digest item_key{};
  std::int64_t epoch = 0;
  std::string app_id;  // First subscriber; its purposes satisfy the policy.
  Bytes expected_plaintext;  // canonical_encode(PET(item)) replayed with a copied rng.
  Bytes raw_encoding;        // canonical_encode(item)
};

struct UplinkCounters {
  std::size_t bundles = 0;
  std::size_t dedup_entries = 0;
  std::size_t naive_entries = 0;
  std::size_t bytes = 0;
  std::size_t stored = 0;
  std::size_t duplicates = 0;
  std::size_t skipped_no_data = 0;
};

class Scenario {
 public:
  // `transport` overrides the in-process storage server, e.g. with an HTTP
  // client. It must outlive the scenario.
  explicit Scenario(ScenarioConfig config, BundleTransport* transport = nullptr)
      : config_(std::move(config)),
        catalog_(DataCatalog::Load(config_.data_dir / "catalog.json")),
        registry_(pets::PetRegistry::Load(config_.data_dir / "pet_registry.json")),
        selection_data_{selection::MappingTable::Load(config_.data_dir / "pet_mapping.json"),
                        selection::RelevanceRules::Load(config_.data_dir /
                                                        "relevance_rules.json"),
                        selection::MaturityRegistry::Load(config_.data_dir / "maturity.json"),
                        registry_},
        threat_rules_(ThreatRules::Load(config_.data_dir / "threat_rules.json")),
        trust_(TrustModel::Load(config_.trust_model)),
        presets_(NoisePresets::Load(config_.data_dir / "noise_presets.json")),
        pois_(lbs::LoadPois(config_.pois)),
        mediation_rng_(Rng::Derive(config_.seed, 1)),
        uplink_rng_(Rng::Derive(config_.seed, 2)) {
    Rng setup = Rng::Derive(config_.seed, 3);
    authority_ = pets::PbeSetup(setup);
    pets::PetContext ctx;
    ctx.pseudonym_secret.resize(32);
    setup.Fill(ctx.pseudonym_secret);
    pm_ = std::make_unique<PrivacyManager>(ctx);
    pseudonym_ = pets::Pseudonymize(config_.vehicle_id, "uplink", ctx.pseudonym_secret);

    pm_config_.consent_overrides = config_.consent_overrides;
    pm_config_.epsilon_multiplier = presets_.Multiplier(config_.epsilon_preset);

    auto trajectory =
        LoadTrajectory(config_.trajectory, config_.playback_speed, config_.loop);
    pm_config_.grid_origin = trajectory.waypoints().front().loc;
    std::vector<GeoPoint> cover;
    for (const auto& w : trajectory.waypoints()) cover.push_back(w.loc);
    adversary_template_ = std::make_unique<lbs::AdversaryState>(lbs::AdversaryState::Covering(
        cover, config_.adversary_margin_m, config_.adversary_cell_m));
    simulator_ = std::make_unique<Simulator>(
        bus_, std::move(trajectory), LoadSensorConfig(config_.sensors),
        Rng::Derive(config_.seed, 4).NextU64());

    if (transport) {
      transport_ = transport;
    } else {
      StorageConfig sc;
      if (!config_.storage_config.empty()) {
        sc = LoadStorageConfig(config_.storage_config);
      } else {
        sc.providers["lbs-provider"] = {"lbs-provider", {}};
      }
      storage_ = std::make_unique<StorageServer>(sc);
      inproc_ = std::make_unique<InProcessTransport>(*storage_);
      transport_ = inproc_.get();
    }
    tap_ = std::make_unique<TapTransport>(*transport_);
    sender_ = std::make_unique<UplinkSender>(*tap_);

    for (const auto& file : config_.apps) {
      InstallAppLocked(ReadFile(config_.manifests_dir / file));
    }
  }

  Scenario(const Scenario&) = delete;
  Scenario& operator=(const Scenario&) = delete;

  const ScenarioConfig& config() const { return config_; }

  InstallResult InstallApp(const std::string& manifest_text) {
    std::lock_guard lock(mu_);
    InstallResult r = InstallAppLocked(manifest_text);
    Bump();
    return r;
  }

  void UninstallApp(const std::string& app_id) {
    std::lock_guard lock(mu_);
    if (!apps_.erase(app_id)) throw Error(ErrorCode::kNotFound, "app '" + app_id + "' not installed");
    pm_->RemoveApp(app_id);
    Replan();
    Bump();
  }

  void Start() {
    std::lock_guard lock(mu_);
    running_ = true;
    Bump();
  }

  void Pause() {
    std::lock_guard lock(mu_);
    running_ = false;
    Bump();
  }

  bool running() const {
    std::lock_guard lock(mu_);
    return running_;
  }

  // Advances n playback steps of config().step_ms each.
  void Step(std::int64_t n) {
    if (n < 0) throw Error(ErrorCode::kInvalidParam, "step count must be >= 0");
    std::lock_guard lock(mu_);
    if (n == 0) return;
    AdvanceLocked(n * config_.step_ms);
    Bump();
  }

  // Advances simulated time by delta_ms, sealing every bundle whose epoch
  // ends on the way.
  void Advance(std::int64_t delta_ms) {
    std::lock_guard lock(mu_);
    AdvanceLocked(delta_ms);
    Bump();
  }

  // Wall-clock driver hook: advances only while playing.
  void Tick(std::int64_t wall_ms) {
    std::lock_guard lock(mu_);
    if (!running_) return;
    AdvanceLocked(wall_ms);
    Bump();
  }

  std::int64_t now_ms() const {
    std::lock_guard lock(mu_);
    return simulator_->now_ms();
  }

  QueryResult QueryPois(const std::string& app_id, const std::string& category,
                        std::size_t k) {
    std::lock_guard lock(mu_);
    QueryResult r = QueryLocked(app_id, category, k);
    Bump();
    return r;
  }

  OrderedJson State() const {
    std::lock_guard lock(mu_);
    return StateLocked();
  }

  // Blocks until the state version differs from `seen` or the timeout
  // passes; returns the current version.
  std::uint64_t WaitForChange(std::uint64_t seen, std::chrono::milliseconds timeout) const {
    std::unique_lock lock(mu_);
    cv_.wait_for(lock, timeout, [&] { return version_ != seen; });
    return version_;
  }

  std::uint64_t version() const {
    std::lock_guard lock(mu_);
    return version_;
  }

  selection::SelectionReport Selection(Layer layer,
                                       const std::optional<std::set<GdprPrinciple>>& principles,
                                       const selection::Weights& weights = {}) const {
    if (!principles) return selection::SelectPets(trust_, layer, selection_data_, weights);
    selection::SelectionReport r{layer, {}, *principles, {}, {}};
    r.families = selection::CandidatePetFamilies(selection_data_.mapping, *principles, layer);
    r.ranked = selection::RankCandidates(
        selection::ExpandFamilies(registry_, r.families, layer), selection_data_.maturity,
        weights);
    return r;
  }

  const pets::PetRegistry& registry() const { return registry_; }
  const DataCatalog& catalog() const { return catalog_; }
  const std::string& pseudonym() const { return pseudonym_; }
  const pets::AuthorityPublic& authority_public() const { return authority_.pub; }

  // Key the authority would issue to the service provider of `app_id`.
  pets::AttributeKey ProviderKey(const std::string& app_id) const {
    std::lock_guard lock(mu_);
    auto it = apps_.find(app_id);
    if (it == apps_.end()) throw Error(ErrorCode::kNotFound, "app '" + app_id + "' not installed");
    std::set<std::string> attrs;
    for (const auto& p : it->second.manifest.purposes) attrs.insert("purpose:" + p);
    return pets::PbeKeygen(authority_.master, attrs);
  }

  // Snapshots for audits and reports.
  std::vector<PrivacyRule> Rules() const { return pm_->Rules(); }
  std::vector<StreamSpec> Plan() const {
    std::lock_guard lock(mu_);
    return plan_;
  }
  PrivacyLedger Ledger() const { return pm_->Ledger(); }
  UplinkCounters Counters() const {
    std::lock_guard lock(mu_);
    return counters_;
  }
  std::vector<Bytes> CapturedWire() const { return tap_->captured(); }
  std::vector<Bytes> RawEncodings() const {
    std::lock_guard lock(mu_);
    return raw_encodings_;
  }
  std::vector<CompositionAudit> Audit() const {
    std::lock_guard lock(mu_);
    return audit_;
  }
  std::vector<DisclosureRecord> Disclosures() const {
    std::lock_guard lock(mu_);
    return disclosures_;
  }
  // Every location the LBS provider has received, in order.
  std::vector<GeoPoint> LbsReceived() const {
    std::lock_guard lock(mu_);
    return lbs_received_;
  }
  std::map<std::string, std::vector<SeriesPoint>> Series() const {
    std::lock_guard lock(mu_);
    return series_;
  }
  // Bundle seal times per stream, in milliseconds.
  std::map<crypto::Digest, std::vector<std::int64_t>> Deliveries() const {
    std::lock_guard lock(mu_);
    return deliveries_;
  }
  std::int64_t epochs_sealed() const {
    std::lock_guard lock(mu_);
    return next_epoch_;
  }
  std::size_t sender_dropped() const { return sender_->dropped(); }
  std::size_t sender_pending() const { return sender_->pending(); }
  // Null when an external transport was supplied.
  StorageServer* storage() { return storage_.get(); }
  const lbs::PoiStore& pois() const { return pois_; }

 private:
  struct InstalledApp {
    AppManifest manifest;
    ThreatReport threats;
    std::vector<PrivacyRule> rules;
  };

  InstallResult InstallAppLocked(const std::string& manifest_text) {
    AppManifest m = ParseManifest(manifest_text, catalog_, registry_);
    if (apps_.count(m.app_id)) {
      throw Error(ErrorCode::kAlreadyInstalled, "app '" + m.app_id + "' already installed");
    }
    InstallResult r;
    r.threats = DeriveThreats(m, catalog_, threat_rules_);
    r.selection = selection::SelectPets(trust_, Layer::kPhysical, selection_data_);
    TypeSelection per_type;
    for (const auto& req : m.data_requirements) per_type[req.type_id] = r.selection.ranked;
    r.rules = GenerateRules(m, per_type, pm_config_, catalog_, registry_);
    pm_->InstallRules(r.rules);
    apps_[m.app_id] = {m, r.threats, r.rules};
    Replan();
    return r;
  }

  void Replan() {
    std::vector<PrivacyRule> all;
    for (const auto& [id, app] : apps_) all.insert(all.end(), app.rules.begin(), app.rules.end());
    plan_ = PlanStreams(all);
  }

  std::int64_t IntervalMs() const {
    return static_cast<std::int64_t>(std::llround(config_.bundle_interval_s * 1000.0));
  }

  void AdvanceLocked(std::int64_t delta_ms) {
    if (delta_ms < 0) throw Error(ErrorCode::kInvalidParam, "cannot step backwards");
    const std::int64_t target = simulator_->now_ms() + delta_ms;
    while (true) {
      const std::int64_t boundary = (next_epoch_ + 1) * IntervalMs();
      const std::int64_t stop = std::min(boundary, target);
      for (const auto& item : simulator_->StepClock(stop - simulator_->now_ms())) {
        raw_encodings_.push_back(CanonicalEncode(item));
      }
      if (stop < boundary) break;
      SealEpoch(next_epoch_++);
      if (stop == target) break;
    }
  }

  std::optional<DataItem> LatestOf(const std::string& type_id) const {
    if (!bus_.HasTopic(type_id)) return std::nullopt;
    return bus_.Latest(type_id);
  }

  void SealEpoch(std::int64_t epoch) {
    const std::int64_t now = simulator_->now_ms();
    std::vector<StreamSpec> ready;
    std::map<crypto::Digest, StoredItem> fresh;
    for (const StreamSpec* s : DueStreams(plan_, epoch, config_.bundle_interval_s)) {
      const auto item = LatestOf(s->parts.type_id);
      if (!item) {
        ++counters_.skipped_no_data;
        continue;
      }
      Rng replay = uplink_rng_;
      const DataItem expected = ApplyDataPets(s->rule, *item, replay, pm_->context());
      fresh[s->item_key] =
          ComposeStoredItem(s->rule, *item, authority_.pub, uplink_rng_, pm_->context());
      audit_.push_back({s->item_key, epoch, s->subscribers.begin()->first,
                        CanonicalEncode(expected), CanonicalEncode(*item)});
      deliveries_[s->item_key].push_back(now);
      ready.push_back(*s);
    }
    for (const auto& [id, app] : apps_) {
      for (const auto& rule : app.rules) {
        if (!rule.Storable()) continue;
        const auto single = PlanStreams({rule});
        if (single.front().DueAt(epoch, config_.bundle_interval_s) && LatestOf(rule.type_id)) {
          ++counters_.naive_entries;
        }
      }
    }
    if (ready.empty()) return;
    const Bundle bundle = BundleEpoch(ready, epoch, fresh, pseudonym_, now,
                                      config_.bundle_interval_s);
    counters_.dedup_entries += bundle.entries.size();
    counters_.bundles += 1;
    counters_.bytes += SerializeBundle(bundle).size();
    sender_->Enqueue(bundle);
    for (const Ack& a : sender_->Flush()) {
      counters_.stored += a.stored;
      counters_.duplicates += a.duplicates;
    }
  }

  const PrivacyRule& LocationRule(const std::string& app_id) const {
    auto it = apps_.find(app_id);
    if (it == apps_.end()) throw Error(ErrorCode::kNotFound, "app '" + app_id + "' not installed");
    for (const auto& r : it->second.rules) {
      if (catalog_.Get(r.type_id).payload_kind == PayloadKind::kGeoPoint) return r;
    }
    throw Error(ErrorCode::kInvalidParam, "app '" + app_id + "' requests no location data");
  }

  QueryResult QueryLocked(const std::string& app_id, const std::string& category,
                          std::size_t k) {
    const PrivacyRule& rule = LocationRule(app_id);
    // Validate the request before mediation so a bad query spends no budget.
    pois_.CountOf(category);
    if (k < 1) throw Error(ErrorCode::kInvalidParam, "k must be >= 1");
    const std::int64_t now = simulator_->now_ms();
    std::vector<DataItem> items;
    if (bus_.HasTopic(rule.type_id)) items = bus_.Recent(rule.type_id);
    const MediatedResponse resp = pm_->Mediate(app_id, rule.type_id, items, now, mediation_rng_);

    GeoPoint disclosed;
    if (resp.item) {
      disclosed = resp.item->geo();
    } else {
      disclosed = std::get<GeoPoint>(*resp.aggregate);
    }
    const GeoPoint raw = items.back().geo();

    // Provider side: sees only `disclosed`.
    lbs_received_.push_back(disclosed);
    QueryResult out;
    out.disclosed = disclosed;
    out.pois = pois_.NearestPois(disclosed, category, k);

    auto [adv, fresh] = adversaries_.try_emplace(app_id, *adversary_template_);
    const pets::PetStep* pet = rule.DataPet();
    if (pet && (pet->pet_id == pets::kPlanarLaplace || pet->pet_id == pets::kPlanarIsotropic)) {
      adv->second.Update(disclosed, *pet);
    }
    out.point.t_ms = now;
    out.point.cumulative_epsilon = pm_->CumulativeEpsilon(app_id, rule.type_id);
    out.point.inference_error_m = adv->second.ExpectedInferenceError(raw);
    out.point.recall = lbs::RecallAtK(pois_, raw, disclosed, category, k);
    series_[app_id].push_back(out.point);
    disclosures_.push_back({app_id, now, raw, *simulator_->TruePosition(), disclosed});
    last_disclosed_ = disclosed;
    return out;
  }

  OrderedJson StateLocked() const {
    OrderedJson j;
    j["t_ms"] = simulator_->now_ms();
    j["running"] = running_;
    j["epochs_sealed"] = next_epoch_;
    if (auto p = simulator_->TruePosition(); p && simulator_->now_ms() > 0) {
      j["true_location"] = {{"lat", p->lat}, {"lon", p->lon}};
    } else {
      j["true_location"] = nullptr;
    }
    if (last_disclosed_) {
      j["last_disclosed"] = {{"lat", last_disclosed_->lat}, {"lon", last_disclosed_->lon}};
    } else {
      j["last_disclosed"] = nullptr;
    }
    j["apps"] = OrderedJson::array();
    for (const auto& [id, app] : apps_) {
      OrderedJson a;
      a["app_id"] = id;
      a["version"] = app.manifest.version;
      a["provider_id"] = app.manifest.provider_id;
      a["purposes"] = app.manifest.purposes;
      a["threats"] = ToJson(app.threats);
      a["rules"] = OrderedJson::array();
      for (const auto& r : app.rules) a["rules"].push_back(ToJson(r));
      j["apps"].push_back(std::move(a));
    }
    j["series"] = OrderedJson::object();
    for (const auto& [id, pts] : series_) {
      OrderedJson s = OrderedJson::array();
      for (const auto& p : pts) {
        s.push_back({{"t_ms", p.t_ms},
                     {"cumulative_epsilon", p.cumulative_epsilon},
                     {"inference_error_m", p.inference_error_m}});
      }
      j["series"][id] = std::move(s);
    }
    j["ledger_length"] = pm_->Ledger().size();
    j["stream_plan"] = OrderedJson::array();
    for (const auto& s : plan_) {
      OrderedJson sj;
      sj["item_key"] = ToHex(s.item_key);
      sj["type_id"] = s.parts.type_id;
      sj["pet_id"] = s.parts.pet_id;
      sj["period_s"] = s.period_s;
      sj["stride_s"] = static_cast<double>(s.FiringStride(config_.bundle_interval_s)) *
                       config_.bundle_interval_s;
      sj["subscribers"] = OrderedJson::array();
      for (const auto& [app, need] : s.subscribers) sj["subscribers"].push_back(app);
      j["stream_plan"].push_back(std::move(sj));
    }
    j["bandwidth"] = {{"bundles", counters_.bundles},
                      {"dedup_entries", counters_.dedup_entries},
                      {"naive_entries", counters_.naive_entries},
                      {"bytes", counters_.bytes},
                      {"stored", counters_.stored},
                      {"duplicates", counters_.duplicates},
                      {"dropped", sender_->dropped()}};
    return j;
  }

  void Bump() {
    ++version_;
    cv_.notify_all();
  }

  ScenarioConfig config_;
  DataCatalog catalog_;
  pets::PetRegistry registry_;
  selection::SelectionData selection_data_;
  ThreatRules threat_rules_;
  TrustModel trust_;
  NoisePresets presets_;
  lbs::PoiStore pois_;
  Rng mediation_rng_;
  Rng uplink_rng_;
  pets::AuthorityState authority_;
  std::unique_ptr<PrivacyManager> pm_;
  PmConfig pm_config_;
  std::string pseudonym_;

  DataBus bus_;
  std::unique_ptr<Simulator> simulator_;
  std::unique_ptr<lbs::AdversaryState> adversary_template_;

  std::unique_ptr<StorageServer> storage_;
  std::unique_ptr<InProcessTransport> inproc_;
  BundleTransport* transport_ = nullptr;
  std::unique_ptr<TapTransport> tap_;
  std::unique_ptr<UplinkSender> sender_;

  std::map<std::string, InstalledApp> apps_;
  std::vector<StreamSpec> plan_;
  std::int64_t next_epoch_ = 0;
  UplinkCounters counters_;
  std::map<crypto::Digest, std::vector<std::int64_t>> deliveries_;
  std::vector<Bytes> raw_encodings_;
  std::vector<CompositionAudit> audit_;

  std::map<std::string, lbs::AdversaryState> adversaries_;
  std::map<std::string, std::vector<SeriesPoint>> series_;
  std::vector<GeoPoint> lbs_received_;
  std::vector<DisclosureRecord> disclosures_;
  std::optional<GeoPoint> last_disclosed_;

  bool running_ = false;
  std::uint64_t version_ = 0;
  mutable std::mutex mu_;
  mutable std::condition_variable cv_;
};

}  // namespace vpriv::demo
