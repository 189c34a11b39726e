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

// Vehicle-to-storage uplink: deduplicated stream planning, per-epoch
// bundling, the binary bundle wire format, and an ordered offline-tolerant
// sender.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <vector>

#include "vpriv/common/bytes.hpp"
#include "vpriv/common/crypto.hpp"
#include "vpriv/common/error.hpp"
#include "vpriv/common/json_io.hpp"
#include "vpriv/privacy_manager.hpp"
#include "vpriv/stored_item.hpp"

namespace vpriv {

inline constexpr double kDefaultBundleIntervalS = 1.0;

// Identity of a shared data item. Rules whose keys are equal produce
// interchangeable stored items.
struct ItemKeyParts {
  std::string type_id;
  std::string pet_id;
  std::string params;
  std::string policy;
};

inline crypto::Digest ItemKey(const ItemKeyParts& p) {
  ByteWriter w;
  w.Str(p.type_id);
  w.Str(p.pet_id);
  w.Str(p.params);
  w.Str(p.policy);
  return crypto::Sha256(w.bytes());
}

inline ItemKeyParts KeyPartsOf(const PrivacyRule& rule) {
  ItemKeyParts p;
  p.type_id = rule.type_id;
  const pets::PetStep* pet = rule.DataPet();
  p.pet_id = pet ? pet->pet_id : "none";
  for (const auto& s : rule.pipeline) {
    if (s.pet_id != pets::kPbe) p.params += s.CanonicalParams() + "|";
  }
  p.policy = rule.policy.text();
  return p;
}

inline crypto::Digest ItemKeyOf(const PrivacyRule& rule) { return ItemKey(KeyPartsOf(rule)); }

// Period an app needs for one rule: often enough for its query rate and its
// staleness bound. rate_hz = 0 places no bound.
inline double RequiredPeriodS(const PrivacyRule& rule) {
  double p = rule.max_staleness_s;
  if (rule.max_rate_hz > 0.0) p = std::min(p, 1.0 / rule.max_rate_hz);
  return p;
}

struct StreamSpec {
  crypto::Digest item_key{};
  ItemKeyParts parts;
  double period_s = 0.0;  // Minimum of the subscribers' required periods.
  std::map<std::string, double> subscribers;  // app_id -> required period.
  PrivacyRule rule;  // Representative rule; every subscriber's is equivalent.

  // Bundles between firings: the largest whole number of bundle intervals
  // not exceeding period_s, at least 1.
  std::int64_t FiringStride(double bundle_interval_s) const {
    const auto k = static_cast<std::int64_t>(std::floor(period_s / bundle_interval_s + 1e-9));
    return std::max<std::int64_t>(1, k);
  }

  bool DueAt(std::int64_t epoch, double bundle_interval_s) const {
    return epoch % FiringStride(bundle_interval_s) == 0;
  }
};

// Merges storable rules by item key. Result is ordered by item key.
inline std::vector<StreamSpec> PlanStreams(const std::vector<PrivacyRule>& rules) {
  std::map<crypto::Digest, StreamSpec> by_key;
  for (const auto& rule : rules) {
    if (!rule.Storable()) continue;
    const ItemKeyParts parts = KeyPartsOf(rule);
    const crypto::Digest key = ItemKey(parts);
    auto [it, fresh] = by_key.try_emplace(key);
    StreamSpec& s = it->second;
    const double need = RequiredPeriodS(rule);
    if (fresh) {
      s.item_key = key;
      s.parts = parts;
      s.period_s = need;
      s.rule = rule;
    } else {
      s.period_s = std::min(s.period_s, need);
    }
    auto [sub, inserted] = s.subscribers.try_emplace(rule.app_id, need);
    if (!inserted) sub->second = std::min(sub->second, need);
  }
  std::vector<StreamSpec> out;
  for (auto& [k, s] : by_key) out.push_back(std::move(s));
  return out;
}

inline std::vector<const StreamSpec*> DueStreams(const std::vector<StreamSpec>& plan,
                                                 std::int64_t epoch,
                                                 double bundle_interval_s = kDefaultBundleIntervalS) {
  std::vector<const StreamSpec*> due;
  for (const auto& s : plan) {
    if (s.DueAt(epoch, bundle_interval_s)) due.push_back(&s);
  }
  return due;
}

// ---- Bundles --------------------------------------------------------------

struct BundleEntry {
  crypto::Digest item_key{};
  StoredItem item;

  friend bool operator==(const BundleEntry&, const BundleEntry&) = default;
};

struct Bundle {
  std::string vehicle_pseudonym;
  std::int64_t epoch_index = 0;
  std::vector<BundleEntry> entries;
  std::int64_t created_at_ms = 0;  // Local bookkeeping; not on the wire.
};

// Exactly the due items of `epoch`, in plan order.
inline Bundle BundleEpoch(const std::vector<StreamSpec>& plan, std::int64_t epoch,
                          const std::map<crypto::Digest, StoredItem>& fresh,
                          const std::string& pseudonym, std::int64_t created_at_ms,
                          double bundle_interval_s = kDefaultBundleIntervalS) {
  Bundle b;
  b.vehicle_pseudonym = pseudonym;
  b.epoch_index = epoch;
  b.created_at_ms = created_at_ms;
  for (const StreamSpec* s : DueStreams(plan, epoch, bundle_interval_s)) {
    auto it = fresh.find(s->item_key);
    if (it == fresh.end()) {
      throw Error(ErrorCode::kMissingItem, "no fresh item for stream " +
                                               s->parts.type_id + "/" + s->parts.pet_id +
                                               " at epoch " + std::to_string(epoch));
    }
    b.entries.push_back({s->item_key, it->second});
  }
  return b;
}

inline constexpr std::uint8_t kBundleMagic[4] = {'A', 'P', 'S', 'Y'};
inline constexpr std::uint8_t kBundleVersion = 1;

// "APSY" | u8 version | u16-prefixed pseudonym | u64 epoch | u32 count |
// count x (item_key[32] | u32-prefixed StoredItem record). Big-endian.
inline Bytes SerializeBundle(const Bundle& b) {
  std::set<crypto::Digest> seen;
  ByteWriter w;
  w.Raw(kBundleMagic);
  w.U8(kBundleVersion);
  w.Str16(b.vehicle_pseudonym);
  w.U64(static_cast<std::uint64_t>(b.epoch_index));
  w.U32(static_cast<std::uint32_t>(b.entries.size()));
  for (const auto& e : b.entries) {
    if (!seen.insert(e.item_key).second) {
      throw Error(ErrorCode::kSchemaError, "duplicate item key in bundle");
    }
    w.Raw(e.item_key);
    w.Blob(SerializeStoredItem(e.item));
  }
  return std::move(w).bytes();
}

inline Bundle ParseBundle(std::span<const std::uint8_t> data) {
  ByteReader r(data, ErrorCode::kSchemaError);
  Bytes magic = r.Raw(4);
  if (!std::equal(magic.begin(), magic.end(), std::begin(kBundleMagic))) {
    throw Error(ErrorCode::kSchemaError, "bad bundle magic");
  }
  if (std::uint8_t v = r.U8(); v != kBundleVersion) {
    throw Error(ErrorCode::kSchemaError, "unsupported bundle version " + std::to_string(v));
  }
  Bundle b;
  b.vehicle_pseudonym = r.Str16();
  if (b.vehicle_pseudonym.empty()) throw Error(ErrorCode::kSchemaError, "empty pseudonym");
  b.epoch_index = static_cast<std::int64_t>(r.U64());
  const std::uint32_t n = r.U32();
  std::set<crypto::Digest> seen;
  for (std::uint32_t i = 0; i < n; ++i) {
    BundleEntry e;
    Bytes key = r.Raw(e.item_key.size());
    std::copy(key.begin(), key.end(), e.item_key.begin());
    if (!seen.insert(e.item_key).second) {
      throw Error(ErrorCode::kSchemaError, "duplicate item key in bundle");
    }
    Bytes record = r.Blob();
    ByteReader rr(record, ErrorCode::kSchemaError);
    e.item = ParseStoredItem(rr);
    rr.ExpectEnd();
    b.entries.push_back(std::move(e));
  }
  r.ExpectEnd();
  return b;
}

struct Ack {
  std::size_t stored = 0;
  std::size_t duplicates = 0;

  friend bool operator==(const Ack&, const Ack&) = default;
};

inline std::string AckToJson(const Ack& a) {
  OrderedJson j;
  j["stored"] = a.stored;
  j["duplicates"] = a.duplicates;
  return j.dump();
}

inline Ack AckFromJson(const std::string& text) {
  Json j = ParseJson(text, ErrorCode::kTransport);
  try {
    return {j.at("stored").get<std::size_t>(), j.at("duplicates").get<std::size_t>()};
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kTransport, std::string("malformed ack: ") + e.what());
  }
}

// ---- Transport ------------------------------------------------------------

// Delivers one encoded bundle. Throws Transport when unreachable and
// ServerRejected when the server refuses the body.
class BundleTransport {
 public:
  virtual ~BundleTransport() = default;
  virtual Ack Send(const Bytes& body) = 0;
};

// Records every byte handed to the wrapped transport.
class TapTransport : public BundleTransport {
 public:
  explicit TapTransport(BundleTransport& inner) : inner_(inner) {}

  Ack Send(const Bytes& body) override {
    {
      std::lock_guard lock(mu_);
      captured_.push_back(body);
      bytes_ += body.size();
    }
    return inner_.Send(body);
  }

  std::vector<Bytes> captured() const {
    std::lock_guard lock(mu_);
    return captured_;
  }
  std::size_t bytes() const {
    std::lock_guard lock(mu_);
    return bytes_;
  }

 private:
  BundleTransport& inner_;
  mutable std::mutex mu_;
  std::vector<Bytes> captured_;
  std::size_t bytes_ = 0;
};

inline constexpr std::size_t kMaxQueuedBundles = 10000;

// Single ordered queue per endpoint. Bundles that cannot be delivered stay
// queued; past capacity the oldest is dropped and counted.
class UplinkSender {
 public:
  explicit UplinkSender(BundleTransport& transport,
                        std::size_t capacity = kMaxQueuedBundles)
      : transport_(transport), capacity_(capacity) {}

  void Enqueue(const Bundle& bundle) {
    std::lock_guard lock(mu_);
    queue_.push_back(SerializeBundle(bundle));
    if (queue_.size() > capacity_) {
      queue_.pop_front();
      ++dropped_;
    }
  }

  // Sends queued bundles in order until the queue is empty or the transport
  // fails. Server rejections drop the offending bundle and rethrow.
  std::vector<Ack> Flush() {
    std::lock_guard lock(mu_);
    std::vector<Ack> acks;
    while (!queue_.empty()) {
      try {
        acks.push_back(transport_.Send(queue_.front()));
      } catch (const Error& e) {
        if (e.code() == ErrorCode::kTransport) break;
        queue_.pop_front();
        throw;
      }
      queue_.pop_front();
      ++delivered_;
    }
    return acks;
  }

  std::size_t pending() const {
    std::lock_guard lock(mu_);
    return queue_.size();
  }
  std::size_t dropped() const {
    std::lock_guard lock(mu_);
    return dropped_;
  }
  std::size_t delivered() const {
    std::lock_guard lock(mu_);
    return delivered_;
  }

 private:
  BundleTransport& transport_;
  std::size_t capacity_;
  mutable std::mutex mu_;
  std::deque<Bytes> queue_;
  std::size_t dropped_ = 0;
  std::size_t delivered_ = 0;
};

// ---- Schedule simulation --------------------------------------------------

struct BandwidthCounts {
  std::size_t dedup_entries = 0;
  std::size_t naive_entries = 0;
  std::size_t bundles = 0;
};

// Bundle e is sealed at (e + 1) * interval; epochs with nothing due send no
// bundle. Naive transmission gives every storable rule its own stream at its
// own required period.
inline BandwidthCounts SimulateBandwidth(const std::vector<PrivacyRule>& rules,
                                         std::int64_t epochs,
                                         double bundle_interval_s = kDefaultBundleIntervalS) {
  BandwidthCounts c;
  const auto plan = PlanStreams(rules);
  std::vector<StreamSpec> naive;
  for (const auto& r : rules) {
    auto single = PlanStreams({r});
    naive.insert(naive.end(), single.begin(), single.end());
  }
  for (std::int64_t e = 0; e < epochs; ++e) {
    const std::size_t due = DueStreams(plan, e, bundle_interval_s).size();
    c.dedup_entries += due;
    c.naive_entries += DueStreams(naive, e, bundle_interval_s).size();
    if (due > 0) ++c.bundles;
  }
  return c;
}

struct StalenessCheck {
  std::string app_id;
  std::string type_id;
  double required_period_s = 0.0;
  double max_staleness_s = 0.0;
  double max_observed_gap_s = 0.0;  // Largest delivery gap seen by the app.
  bool satisfied = false;
};

// Replays the plan on a 1 ms grid and measures, for every subscribing rule,
// the largest age of the newest delivered item after the first delivery.
inline std::vector<StalenessCheck> SimulateStaleness(
    const std::vector<PrivacyRule>& rules, std::int64_t epochs,
    double bundle_interval_s = kDefaultBundleIntervalS) {
  const auto plan = PlanStreams(rules);
  const auto interval_ms = static_cast<std::int64_t>(std::llround(bundle_interval_s * 1000.0));
  std::map<crypto::Digest, std::vector<std::int64_t>> deliveries;
  for (std::int64_t e = 0; e < epochs; ++e) {
    for (const StreamSpec* s : DueStreams(plan, e, bundle_interval_s)) {
      deliveries[s->item_key].push_back((e + 1) * interval_ms);
    }
  }
  const std::int64_t end_ms = epochs * interval_ms;
  std::vector<StalenessCheck> out;
  for (const auto& r : rules) {
    if (!r.Storable()) continue;
    StalenessCheck c;
    c.app_id = r.app_id;
    c.type_id = r.type_id;
    c.required_period_s = RequiredPeriodS(r);
    c.max_staleness_s = r.max_staleness_s;
    const auto& times = deliveries[ItemKeyOf(r)];
    std::int64_t worst = 0;
    if (!times.empty()) {
      std::size_t next = 0;
      std::int64_t last = -1;
      for (std::int64_t t = times.front(); t <= end_ms; ++t) {
        while (next < times.size() && times[next] <= t) last = times[next++];
        worst = std::max(worst, t - last);
      }
    }
    c.max_observed_gap_s = static_cast<double>(worst) / 1000.0;
    c.satisfied = !times.empty() && c.max_observed_gap_s <= c.max_staleness_s + 1e-9;
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace vpriv
