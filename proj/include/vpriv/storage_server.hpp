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

// Honest-but-curious intermediate storage: an index of ciphertext items per
// (pseudonym, item key), idempotent bundle ingestion, provider queries and
// retention purging. Holds no key material.

#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <shared_mutex>
#include <string>
#include <tuple>
#include <vector>

#include "vpriv/common/bytes.hpp"
#include "vpriv/common/crypto.hpp"
#include "vpriv/common/error.hpp"
#include "vpriv/common/json_io.hpp"
#include "vpriv/stored_item.hpp"
#include "vpriv/uplink.hpp"

namespace vpriv {

struct ProviderRecord {
  std::string provider_id;
  // Declared for audit only; access control is cryptographic.
  std::vector<std::string> attributes;
};

struct StorageConfig {
  std::int64_t default_retention_s = 24 * 3600;
  std::map<crypto::Digest, std::int64_t> retention_by_key;
  std::map<std::string, ProviderRecord> providers;
  // Directory for the per-pseudonym logs; empty keeps state in memory only.
  std::filesystem::path log_dir;

  std::int64_t RetentionS(const crypto::Digest& key) const {
    auto it = retention_by_key.find(key);
    return it == retention_by_key.end() ? default_retention_s : it->second;
  }
};

// {"default_retention_s": n, "retention": {"<item key hex>": n},
//  "providers": [{"provider_id": s, "attributes": [s]}], "log_dir": s}
inline StorageConfig StorageConfigFromJson(const Json& doc) {
  StorageConfig cfg;
  try {
    cfg.default_retention_s = doc.value("default_retention_s", cfg.default_retention_s);
    if (cfg.default_retention_s <= 0) {
      throw Error(ErrorCode::kSchemaError, "default_retention_s must be > 0");
    }
    const Json retention = doc.value("retention", Json::object());
    for (const auto& [hex, secs] : retention.items()) {
      Bytes k;
      try {
        k = FromHex(hex);
      } catch (const Error&) {
        k.clear();
      }
      if (k.size() != 32) throw Error(ErrorCode::kSchemaError, "bad item key " + hex);
      crypto::Digest d;
      std::copy(k.begin(), k.end(), d.begin());
      cfg.retention_by_key[d] = secs.get<std::int64_t>();
    }
    for (const auto& p : doc.value("providers", Json::array())) {
      ProviderRecord rec;
      rec.provider_id = p.at("provider_id").get<std::string>();
      rec.attributes = p.value("attributes", std::vector<std::string>{});
      cfg.providers[rec.provider_id] = rec;
    }
    if (doc.contains("log_dir")) cfg.log_dir = doc["log_dir"].get<std::string>();
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kSchemaError, std::string("storage config: ") + e.what());
  }
  return cfg;
}

inline StorageConfig LoadStorageConfig(const std::filesystem::path& path) {
  return StorageConfigFromJson(LoadJsonFile(path, ErrorCode::kSchemaError));
}

// u32 count | count x u32-prefixed StoredItem record.
inline Bytes SerializeItemList(const std::vector<StoredItem>& items) {
  ByteWriter w;
  w.U32(static_cast<std::uint32_t>(items.size()));
  for (const auto& it : items) w.Blob(SerializeStoredItem(it));
  return std::move(w).bytes();
}

inline std::vector<StoredItem> ParseItemList(std::span<const std::uint8_t> data) {
  ByteReader r(data, ErrorCode::kParseError);
  const std::uint32_t n = r.U32();
  std::vector<StoredItem> out;
  for (std::uint32_t i = 0; i < n; ++i) {
    Bytes rec = r.Blob();
    ByteReader rr(rec, ErrorCode::kParseError);
    out.push_back(ParseStoredItem(rr));
    rr.ExpectEnd();
  }
  r.ExpectEnd();
  return out;
}

class StorageServer {
 public:
  explicit StorageServer(StorageConfig config) : config_(std::move(config)) {
    if (!config_.log_dir.empty()) {
      std::filesystem::create_directories(config_.log_dir);
      Rebuild();
    }
  }

  const StorageConfig& config() const { return config_; }

  Ack PutBundle(const Bundle& bundle) {
    if (bundle.vehicle_pseudonym.empty()) {
      throw Error(ErrorCode::kSchemaError, "empty pseudonym");
    }
    std::set<crypto::Digest> keys;
    for (const auto& e : bundle.entries) {
      if (!keys.insert(e.item_key).second) {
        throw Error(ErrorCode::kSchemaError, "duplicate item key in bundle");
      }
    }
    std::unique_lock lock(mu_);
    Ack ack;
    ByteWriter log;
    for (const auto& e : bundle.entries) {
      if (!seen_.insert({bundle.vehicle_pseudonym, bundle.epoch_index, e.item_key}).second) {
        ++ack.duplicates;
        continue;
      }
      Insert(bundle.vehicle_pseudonym, bundle.epoch_index, e);
      AppendLogRecord(log, bundle.epoch_index, e);
      ++ack.stored;
    }
    if (!log.bytes().empty()) AppendToLog(bundle.vehicle_pseudonym, log.bytes());
    return ack;
  }

  Ack PutBundleBytes(std::span<const std::uint8_t> body) { return PutBundle(ParseBundle(body)); }

  // Items with from_ms <= timestamp_ms <= to_ms, in timestamp order. No
  // policy filtering happens here.
  std::vector<StoredItem> QueryItems(const std::string& provider_id,
                                     const std::string& pseudonym,
                                     const crypto::Digest& item_key, std::int64_t from_ms,
                                     std::int64_t to_ms) const {
    if (!config_.providers.count(provider_id)) {
      throw Error(ErrorCode::kUnknownProvider, "unknown provider '" + provider_id + "'");
    }
    std::shared_lock lock(mu_);
    std::vector<StoredItem> out;
    auto it = index_.find({pseudonym, item_key});
    if (it == index_.end()) return out;
    for (const auto& rec : it->second) {
      if (rec.item.timestamp_ms >= from_ms && rec.item.timestamp_ms <= to_ms) {
        out.push_back(rec.item);
      }
    }
    return out;
  }

  // Removes items older than their key's retention and compacts the logs.
  std::size_t PurgeExpired(std::int64_t now_ms) {
    std::unique_lock lock(mu_);
    std::size_t purged = 0;
    std::set<std::string> touched;
    for (auto it = index_.begin(); it != index_.end();) {
      const std::int64_t cutoff = now_ms - config_.RetentionS(it->first.second) * 1000;
      auto& items = it->second;
      auto keep = std::stable_partition(items.begin(), items.end(), [&](const Record& r) {
        return r.item.timestamp_ms >= cutoff;
      });
      const auto n = static_cast<std::size_t>(std::distance(keep, items.end()));
      if (n > 0) {
        purged += n;
        touched.insert(it->first.first);
        items.erase(keep, items.end());
      }
      it = items.empty() ? index_.erase(it) : std::next(it);
    }
    for (const auto& pseudonym : touched) RewriteLog(pseudonym);
    return purged;
  }

  std::size_t ItemCount() const {
    std::shared_lock lock(mu_);
    std::size_t n = 0;
    for (const auto& [k, v] : index_) n += v.size();
    return n;
  }

  // Every byte the server holds about stored items, for audits.
  Bytes DumpState() const {
    std::shared_lock lock(mu_);
    ByteWriter w;
    for (const auto& [k, records] : index_) {
      w.Str16(k.first);
      w.Raw(k.second);
      for (const auto& rec : records) AppendLogRecord(w, rec.epoch, {k.second, rec.item});
    }
    return std::move(w).bytes();
  }

  std::filesystem::path LogPath(const std::string& pseudonym) const {
    return config_.log_dir / (ToHex(ToBytes(pseudonym)) + ".log");
  }

 private:
  struct Record {
    std::int64_t epoch;
    StoredItem item;
  };
  using IndexKey = std::pair<std::string, crypto::Digest>;

  void Insert(const std::string& pseudonym, std::int64_t epoch, const BundleEntry& e) {
    auto& items = index_[{pseudonym, e.item_key}];
    auto pos = std::upper_bound(items.begin(), items.end(), e.item.timestamp_ms,
                                [](std::int64_t t, const Record& r) {
                                  return t < r.item.timestamp_ms;
                                });
    items.insert(pos, Record{epoch, e.item});
  }

  // u64 epoch | item_key[32] | u32-prefixed StoredItem record.
  static void AppendLogRecord(ByteWriter& w, std::int64_t epoch, const BundleEntry& e) {
    w.U64(static_cast<std::uint64_t>(epoch));
    w.Raw(e.item_key);
    w.Blob(SerializeStoredItem(e.item));
  }

  void AppendToLog(const std::string& pseudonym, const Bytes& data) {
    if (config_.log_dir.empty()) return;
    std::ofstream out(LogPath(pseudonym), std::ios::binary | std::ios::app);
    if (!out) throw Error(ErrorCode::kIoError, "cannot append " + LogPath(pseudonym).string());
    out.write(reinterpret_cast<const char*>(data.data()),
              static_cast<std::streamsize>(data.size()));
  }

  void RewriteLog(const std::string& pseudonym) {
    if (config_.log_dir.empty()) return;
    ByteWriter w;
    for (const auto& [k, records] : index_) {
      if (k.first != pseudonym) continue;
      for (const auto& rec : records) AppendLogRecord(w, rec.epoch, {k.second, rec.item});
    }
    const auto path = LogPath(pseudonym);
    const auto tmp = path.string() + ".tmp";
    WriteFile(tmp, std::string(w.bytes().begin(), w.bytes().end()));
    std::filesystem::rename(tmp, path);
  }

  void Rebuild() {
    for (const auto& entry : std::filesystem::directory_iterator(config_.log_dir)) {
      if (entry.path().extension() != ".log") continue;
      const Bytes name = FromHex(entry.path().stem().string());
      const std::string pseudonym(name.begin(), name.end());
      const std::string text = ReadFile(entry.path());
      ByteReader r(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()),
                   ErrorCode::kIoError);
      while (!r.AtEnd()) {
        BundleEntry e;
        const auto epoch = static_cast<std::int64_t>(r.U64());
        Bytes key = r.Raw(32);
        std::copy(key.begin(), key.end(), e.item_key.begin());
        e.item = ParseStoredItem(r.Blob());
        if (seen_.insert({pseudonym, epoch, e.item_key}).second) Insert(pseudonym, epoch, e);
      }
    }
  }

  StorageConfig config_;
  mutable std::shared_mutex mu_;
  std::map<IndexKey, std::vector<Record>> index_;
  std::set<std::tuple<std::string, std::int64_t, crypto::Digest>> seen_;
};

// Delivers bundles to a server in the same process, mapping schema errors
// to the transport-level rejection.
class InProcessTransport : public BundleTransport {
 public:
  explicit InProcessTransport(StorageServer& server) : server_(server) {}

  Ack Send(const Bytes& body) override {
    try {
      return server_.PutBundleBytes(body);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kSchemaError) {
        throw Error(ErrorCode::kServerRejected, "SchemaError: " + e.detail());
      }
      throw;
    }
  }

 private:
  StorageServer& server_;
};

}  // namespace vpriv
