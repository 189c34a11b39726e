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

// Headless entry points behind tools/vpriv_cli: scenario runs with
// invariant checks and reports, the PET selection advisor, and the mapping
// table check.

#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <functional>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "vpriv/common/bytes.hpp"
#include "vpriv/common/error.hpp"
#include "vpriv/common/json_io.hpp"
#include "vpriv/demo_service.hpp"
#include "vpriv/lbs.hpp"
#include "vpriv/pets/pbe.hpp"
#include "vpriv/pets/pipeline.hpp"
#include "vpriv/selection/selection.hpp"
#include "vpriv/storage_server.hpp"
#include "vpriv/uplink.hpp"

namespace vpriv::cli {

inline constexpr double kSweepEpsilons[] = {0.002, 0.004, 0.01};
inline constexpr int kSweepQueries = 1000;

struct Check {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct RunOutcome {
  OrderedJson report;
  std::vector<Check> checks;
  bool passed = true;
};

// Retrieves stored items the way a service provider would.
using ItemFetcher = std::function<std::vector<StoredItem>(
    const std::string& pseudonym, const crypto::Digest& key)>;

namespace detail {

inline OrderedJson Geo(GeoPoint p) { return {{"lat", p.lat}, {"lon", p.lon}}; }

inline Check CheckNoPlaintext(const std::string& name, const std::vector<Bytes>& raw,
                              const std::vector<Bytes>& haystacks) {
  std::set<Bytes> unique(raw.begin(), raw.end());
  std::size_t hits = 0;
  std::size_t scanned = 0;
  for (const auto& h : haystacks) {
    scanned += h.size();
    for (const auto& r : unique) hits += ContainsSubsequence(h, r) ? 1 : 0;
  }
  return {name, hits == 0,
          std::to_string(unique.size()) + " raw encodings vs " + std::to_string(scanned) +
              " bytes, " + std::to_string(hits) + " matches"};
}

// Mean recall@k of the mechanism at each sweep epsilon, at positions spread
// evenly over the trajectory.
inline OrderedJson EpsilonSweep(const demo::Scenario& sc, const demo::ScriptedQuery& q,
                                const pets::PetStep& mechanism, std::uint64_t seed) {
  OrderedJson out = OrderedJson::array();
  const auto trajectory = LoadTrajectory(sc.config().trajectory);
  const std::int64_t span = trajectory.duration_ms();
  int index = 0;
  for (double eps : kSweepEpsilons) {
    Rng rng = Rng::Derive(seed, 100 + static_cast<std::uint64_t>(index++));
    pets::PetStep step = mechanism;
    step.epsilon = eps;
    double sum = 0.0;
    for (int i = 0; i < kSweepQueries; ++i) {
      const GeoPoint truth = trajectory.PositionAt(span * i / kSweepQueries);
      DataItem item{"location.gps", 1, truth, "sweep"};
      const GeoPoint disclosed = pets::ApplyPet(step, item, rng).geo();
      sum += lbs::RecallAtK(sc.pois(), truth, disclosed, q.category, q.k);
    }
    OrderedJson row;
    row["epsilon"] = eps;
    row["mean_recall"] = sum / kSweepQueries;
    row["queries"] = kSweepQueries;
    out.push_back(std::move(row));
  }
  return out;
}

}  // namespace detail

// Runs a scenario for duration_s of simulated time, then audits it.
// `fetch` defaults to the scenario's in-process storage server.
inline RunOutcome RunScenario(const demo::ScenarioConfig& config, std::int64_t duration_s,
                              BundleTransport* transport = nullptr,
                              ItemFetcher fetch = nullptr) {
  if (duration_s < 0) throw Error(ErrorCode::kInvalidParam, "duration must be >= 0");
  demo::Scenario sc(config, transport);
  const std::int64_t end_ms = duration_s * 1000;

  // Scripted queries in time order; ties keep configuration order.
  std::map<std::int64_t, std::vector<std::size_t>> events;
  for (std::size_t i = 0; i < config.queries.size(); ++i) {
    for (std::int64_t t = config.queries[i].period_ms; t <= end_ms; t += config.queries[i].period_ms) {
      events[t].push_back(i);
    }
  }
  struct QueryStats {
    std::size_t issued = 0, served = 0, rate_limited = 0, stale = 0;
  };
  std::map<std::string, QueryStats> stats;
  for (const auto& [t, idx] : events) {
    sc.Advance(t - sc.now_ms());
    for (std::size_t i : idx) {
      const auto& q = config.queries[i];
      auto& st = stats[q.app_id];
      ++st.issued;
      try {
        sc.QueryPois(q.app_id, q.category, q.k);
        ++st.served;
      } catch (const Error& e) {
        if (e.code() == ErrorCode::kRateLimited) {
          ++st.rate_limited;
        } else if (e.code() == ErrorCode::kStaleData) {
          ++st.stale;
        } else {
          throw;
        }
      }
    }
  }
  sc.Advance(end_ms - sc.now_ms());

  if (!fetch) {
    StorageServer* storage = sc.storage();
    if (!storage) throw Error(ErrorCode::kInvalidParam, "external transport needs a fetcher");
    fetch = [storage](const std::string& pseudonym, const crypto::Digest& key) {
      return storage->QueryItems(storage->config().providers.begin()->first, pseudonym, key,
                                 INT64_MIN, INT64_MAX);
    };
  }

  RunOutcome out;
  const auto rules = sc.Rules();
  const auto plan = sc.Plan();
  const auto counters = sc.Counters();
  const std::int64_t epochs = sc.epochs_sealed();
  const auto raw = sc.RawEncodings();
  const auto deliveries = sc.Deliveries();

  // Zero plaintext on the wire and at rest.
  out.checks.push_back(detail::CheckNoPlaintext("no_plaintext_on_wire", raw, sc.CapturedWire()));
  if (StorageServer* storage = sc.storage()) {
    std::vector<Bytes> at_rest{storage->DumpState()};
    if (!storage->config().log_dir.empty()) {
      for (const auto& e : std::filesystem::directory_iterator(storage->config().log_dir)) {
        const std::string text = ReadFile(e.path());
        at_rest.emplace_back(text.begin(), text.end());
      }
    }
    out.checks.push_back(detail::CheckNoPlaintext("no_plaintext_at_rest", raw, at_rest));
  }

  // Composition order: stored items decrypt to the replayed PET output.
  {
    std::map<crypto::Digest, std::vector<demo::CompositionAudit>> by_key;
    for (auto& a : sc.Audit()) by_key[a.item_key].push_back(std::move(a));
    std::size_t checked = 0, bad = 0;
    for (const auto& [key, audits] : by_key) {
      const auto stored = fetch(sc.pseudonym(), key);
      if (stored.size() != audits.size()) {
        bad += 1;
        continue;
      }
      for (std::size_t i = 0; i < stored.size(); ++i) {
        const auto pt = pets::PbeDecrypt(sc.ProviderKey(audits[i].app_id),
                                         pets::ParseCiphertext(stored[i].ciphertext));
        ++checked;
        if (pt != audits[i].expected_plaintext || pt == audits[i].raw_encoding) ++bad;
      }
    }
    out.checks.push_back({"composition_order", bad == 0,
                          std::to_string(checked) + " stored items decrypted, " +
                              std::to_string(bad) + " mismatches"});
  }

  // The LBS provider never receives a raw location.
  {
    std::set<std::string> direct;
    for (const auto& r : rules) {
      if (r.access_mode == AccessMode::kDirect) direct.insert(r.app_id);
    }
    std::size_t equal = 0, n = 0;
    for (const auto& d : sc.Disclosures()) {
      if (direct.count(d.app_id)) continue;
      ++n;
      if (d.disclosed == d.raw_sample || d.disclosed == d.true_position) ++equal;
    }
    out.checks.push_back({"lbs_sees_no_raw_location", equal == 0,
                          std::to_string(n) + " disclosures, " + std::to_string(equal) +
                              " equal to the true location"});
  }

  // Ledger: prefix sums, non-decreasing.
  {
    const auto ledger = sc.Ledger();
    std::map<std::pair<std::string, std::string>, double> sum;
    bool ok = true;
    for (const auto& d : ledger.entries()) {
      double& s = sum[{d.app_id, d.type_id}];
      const double before = s;
      s += d.epsilon;
      ok = ok && d.cumulative_epsilon == s && d.cumulative_epsilon >= before;
    }
    out.checks.push_back({"ledger_monotone", ok,
                          std::to_string(ledger.size()) + " disclosures"});
  }

  // Bandwidth against the schedule oracle.
  const BandwidthCounts oracle = SimulateBandwidth(rules, epochs, config.bundle_interval_s);
  {
    const bool ok = counters.skipped_no_data == 0 &&
                    counters.dedup_entries == oracle.dedup_entries &&
                    counters.naive_entries == oracle.naive_entries &&
                    counters.bundles == oracle.bundles &&
                    counters.dedup_entries <= counters.naive_entries;
    out.checks.push_back({"bandwidth_matches_oracle", ok,
                          "dedup " + std::to_string(counters.dedup_entries) + "/" +
                              std::to_string(oracle.dedup_entries) + ", naive " +
                              std::to_string(counters.naive_entries) + "/" +
                              std::to_string(oracle.naive_entries)});
  }

  // Staleness: oracle replay and observed delivery gaps.
  OrderedJson constraints = OrderedJson::array();
  {
    const auto oracle_checks = SimulateStaleness(rules, epochs, config.bundle_interval_s);
    bool ok = true;
    for (const auto& c : oracle_checks) {
      double observed = 0.0;
      const PrivacyRule* rule = nullptr;
      for (const auto& r : rules) {
        if (r.app_id == c.app_id && r.type_id == c.type_id) rule = &r;
      }
      auto it = deliveries.find(ItemKeyOf(*rule));
      if (it != deliveries.end()) {
        for (std::size_t i = 1; i < it->second.size(); ++i) {
          observed = std::max(observed,
                              static_cast<double>(it->second[i] - it->second[i - 1]) / 1000.0);
        }
        observed = std::max(observed,
                            static_cast<double>(sc.now_ms() - it->second.back()) / 1000.0);
      }
      const bool sat = c.satisfied && it != deliveries.end() &&
                       observed <= c.max_staleness_s + 1e-9;
      ok = ok && sat;
      OrderedJson row;
      row["app_id"] = c.app_id;
      row["type_id"] = c.type_id;
      row["max_staleness_s"] = c.max_staleness_s;
      row["required_period_s"] = c.required_period_s;
      row["oracle_max_gap_s"] = c.max_observed_gap_s;
      row["observed_max_gap_s"] = observed;
      row["satisfied"] = sat;
      constraints.push_back(std::move(row));
    }
    if (epochs > 0) {
      out.checks.push_back({"staleness_constraints", ok,
                            std::to_string(oracle_checks.size()) + " app streams"});
    }
  }

  out.checks.push_back({"sender_queue_drained",
                        sc.sender_dropped() == 0 && sc.sender_pending() == 0,
                        std::to_string(sc.sender_dropped()) + " dropped, " +
                            std::to_string(sc.sender_pending()) + " pending"});

  for (const auto& c : out.checks) out.passed = out.passed && c.passed;

  OrderedJson& j = out.report;
  j["scenario"] = {{"seed", config.seed},
                   {"duration_s", duration_s},
                   {"epsilon_preset", config.epsilon_preset},
                   {"bundle_interval_s", config.bundle_interval_s},
                   {"apps", config.apps}};
  j["bandwidth"] = {
      {"bundles", counters.bundles},
      {"dedup_entries", counters.dedup_entries},
      {"naive_entries", counters.naive_entries},
      {"dedup_ratio", counters.naive_entries == 0
                          ? 1.0
                          : static_cast<double>(counters.dedup_entries) /
                                static_cast<double>(counters.naive_entries)},
      {"bytes", counters.bytes},
      {"stored", counters.stored},
      {"duplicates", counters.duplicates},
      {"oracle",
       {{"bundles", oracle.bundles},
        {"dedup_entries", oracle.dedup_entries},
        {"naive_entries", oracle.naive_entries}}}};
  j["streams"] = OrderedJson::array();
  for (const auto& s : plan) {
    OrderedJson sj;
    sj["item_key"] = ToHex(s.item_key);
    sj["type_id"] = s.parts.type_id;
    sj["pet_id"] = s.parts.pet_id;
    sj["period_s"] = s.period_s;
    sj["stride_s"] = static_cast<double>(s.FiringStride(config.bundle_interval_s)) *
                     config.bundle_interval_s;
    sj["subscribers"] = OrderedJson::array();
    for (const auto& [app, need] : s.subscribers) sj["subscribers"].push_back(app);
    auto it = deliveries.find(s.item_key);
    sj["deliveries"] = it == deliveries.end() ? 0 : it->second.size();
    j["streams"].push_back(std::move(sj));
  }
  j["constraints"] = constraints;

  j["privacy_series"] = OrderedJson::object();
  j["recall_at_k"] = {{"per_app", OrderedJson::object()}, {"epsilon_sweep", OrderedJson::array()}};
  for (const auto& [app, pts] : sc.Series()) {
    OrderedJson s = OrderedJson::array();
    double recall = 0.0;
    for (const auto& p : pts) {
      s.push_back({{"t_ms", p.t_ms},
                   {"cumulative_epsilon", p.cumulative_epsilon},
                   {"inference_error_m", p.inference_error_m}});
      recall += p.recall;
    }
    j["privacy_series"][app] = std::move(s);
    j["recall_at_k"]["per_app"][app] = pts.empty() ? 0.0 : recall / static_cast<double>(pts.size());
  }
  j["queries"] = OrderedJson::object();
  for (const auto& [app, st] : stats) {
    j["queries"][app] = {{"issued", st.issued},
                         {"served", st.served},
                         {"rate_limited", st.rate_limited},
                         {"stale", st.stale}};
  }
  if (!config.queries.empty() && duration_s > 0) {
    const auto& q = config.queries.front();
    for (const auto& r : rules) {
      const pets::PetStep* pet = r.DataPet();
      if (r.app_id == q.app_id && pet && pet->IsDifferentiallyPrivate() &&
          sc.catalog().Get(r.type_id).payload_kind == PayloadKind::kGeoPoint) {
        j["recall_at_k"]["epsilon_sweep"] =
            detail::EpsilonSweep(sc, q, *pet, config.seed);
        j["recall_at_k"]["sweep_category"] = q.category;
        j["recall_at_k"]["sweep_k"] = q.k;
        j["recall_at_k"]["sweep_mechanism"] = pet->pet_id;
        break;
      }
    }
  }
  j["checks"] = OrderedJson::array();
  for (const auto& c : out.checks) {
    j["checks"].push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
  }
  j["passed"] = out.passed;
  return out;
}

inline std::string UtcTimestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

// Line-oriented summary. Only the first line varies between identical runs.
inline std::string FormatRunReport(const OrderedJson& r, const std::string& timestamp) {
  std::ostringstream o;
  o << "# vpriv run report generated " << timestamp << "\n";
  o << "seed " << r["scenario"]["seed"] << " duration_s " << r["scenario"]["duration_s"]
    << " preset " << r["scenario"]["epsilon_preset"].get<std::string>() << "\n";
  const auto& b = r["bandwidth"];
  o << "bandwidth bundles=" << b["bundles"] << " dedup_entries=" << b["dedup_entries"]
    << " naive_entries=" << b["naive_entries"] << " ratio=" << b["dedup_ratio"]
    << " bytes=" << b["bytes"] << "\n";
  for (const auto& s : r["streams"]) {
    o << "stream " << s["type_id"].get<std::string>() << " " << s["pet_id"].get<std::string>()
      << " period_s=" << s["period_s"] << " stride_s=" << s["stride_s"]
      << " subscribers=" << s["subscribers"].size() << " deliveries=" << s["deliveries"]
      << "\n";
  }
  for (const auto& c : r["constraints"]) {
    o << "constraint " << c["app_id"].get<std::string>() << " " << c["type_id"].get<std::string>()
      << " max_staleness_s=" << c["max_staleness_s"]
      << " observed_gap_s=" << c["observed_max_gap_s"]
      << (c["satisfied"].get<bool>() ? " ok" : " VIOLATED") << "\n";
  }
  for (const auto& [app, pts] : r["privacy_series"].items()) {
    o << "series " << app << " disclosures=" << pts.size();
    if (!pts.empty()) {
      o << " final_epsilon=" << pts.back()["cumulative_epsilon"]
        << " final_inference_error_m=" << pts.back()["inference_error_m"];
    }
    o << "\n";
  }
  for (const auto& [app, rec] : r["recall_at_k"]["per_app"].items()) {
    o << "recall " << app << " mean=" << rec << "\n";
  }
  for (const auto& row : r["recall_at_k"]["epsilon_sweep"]) {
    o << "recall_sweep epsilon=" << row["epsilon"] << " mean=" << row["mean_recall"] << "\n";
  }
  for (const auto& c : r["checks"]) {
    o << (c["passed"].get<bool>() ? "PASS " : "FAIL ") << c["name"].get<std::string>() << ": "
      << c["detail"].get<std::string>() << "\n";
  }
  o << (r["passed"].get<bool>() ? "RESULT PASS" : "RESULT FAIL") << "\n";
  return o.str();
}

// Writes report.json and report.txt; exit code 0 iff every check passed.
inline int CmdRun(const std::filesystem::path& scenario_file, std::int64_t duration_s,
                  std::optional<std::uint64_t> seed, const std::filesystem::path& out_dir,
                  std::ostream& log, BundleTransport* transport = nullptr,
                  ItemFetcher fetch = nullptr) {
  demo::ScenarioConfig cfg = demo::LoadScenarioConfig(scenario_file);
  if (seed) cfg.seed = *seed;
  const RunOutcome r = RunScenario(cfg, duration_s, transport, std::move(fetch));
  std::filesystem::create_directories(out_dir);
  WriteFile(out_dir / "report.json", r.report.dump(2) + "\n");
  const std::string text = FormatRunReport(r.report, UtcTimestamp());
  WriteFile(out_dir / "report.txt", text);
  log << text;
  return r.passed ? 0 : 1;
}

inline selection::Weights ParseWeights(const std::string& text) {
  selection::Weights w;
  if (text.empty()) return w;
  const auto f = vpriv::detail::SplitCsvLine(text);
  if (f.size() != 4) throw Error(ErrorCode::kInvalidParam, "weights need 4 values u,s,r,p");
  double v[4];
  for (int i = 0; i < 4; ++i) {
    try {
      v[i] = std::stod(std::string(f[static_cast<std::size_t>(i)]));
    } catch (const std::exception&) {
      throw Error(ErrorCode::kInvalidParam, "bad weight '" + std::string(f[static_cast<std::size_t>(i)]) + "'");
    }
  }
  w = {v[0], v[1], v[2], v[3]};
  w.Validate();
  return w;
}

inline selection::SelectionData LoadSelectionData(const std::filesystem::path& data_dir) {
  auto pets = pets::PetRegistry::Load(data_dir / "pet_registry.json");
  return {selection::MappingTable::Load(data_dir / "pet_mapping.json"),
          selection::RelevanceRules::Load(data_dir / "relevance_rules.json"),
          selection::MaturityRegistry::Load(data_dir / "maturity.json"), pets};
}

inline int CmdSelect(const std::filesystem::path& trust_file, const std::string& layer_name,
                     const std::string& weights, const std::filesystem::path& data_dir,
                     bool as_json, std::ostream& out) {
  const Layer layer =
      ParseEnum(kLayerNames, layer_name, ErrorCode::kInvalidParam, "layer");
  const TrustModel model = TrustModel::Load(trust_file);
  const auto report =
      selection::SelectPets(model, layer, LoadSelectionData(data_dir), ParseWeights(weights));
  if (as_json) {
    out << selection::ToJson(report).dump(2) << "\n";
    return 0;
  }
  out << "layer " << ToString(report.layer) << "\n";
  for (const auto& a : report.assessments) {
    out << "principle " << ToString(a.principle) << " " << selection::ToString(a.relevance)
        << (a.accountability_required ? " accountability" : "") << "\n";
  }
  for (const auto& f : report.families) {
    out << "family " << ToString(f.family) << " " << ToString(f.strength) << "\n";
  }
  int rank = 1;
  for (const auto& p : report.ranked) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", p.score);
    out << "rank " << rank++ << " " << p.pet_id << " " << buf << "\n";
  }
  return 0;
}

// 0 when the mapping file equals the embedded table, 1 otherwise.
inline int CmdTableCheck(const std::filesystem::path& mapping_file, std::ostream& out) {
  const auto table = selection::MappingTable::Load(mapping_file);
  const auto diffs = selection::DiffAgainstEmbedded(table);
  for (const auto& d : diffs) out << "diff " << d << "\n";
  const std::size_t cells = EmbeddedMappingTable().size() * kAllPrinciples.size();
  if (diffs.empty()) {
    out << "table-check PASS: " << cells << " cells match\n";
    return 0;
  }
  out << "table-check FAIL: " << diffs.size() << " differences\n";
  return 1;
}

}  // namespace vpriv::cli
