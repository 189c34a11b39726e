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

#pragma once

#include <cstdint>
#include <string>

#include "vpriv/common/bytes.hpp"
#include "vpriv/common/crypto.hpp"

namespace vpriv {

// A PET-transformed, purpose-bound-encrypted item as held by storage servers.
struct StoredItem {
  Bytes ciphertext;  // Serialized pets::Ciphertext.
  std::string pet_id;
  crypto::Digest params_digest{};
  std::int64_t timestamp_ms = 0;

  friend bool operator==(const StoredItem&, const StoredItem&) = default;
};

// u64 timestamp_ms | u16-prefixed pet_id | params_digest[32] |
// u32-prefixed ciphertext. Big-endian.
inline Bytes SerializeStoredItem(const StoredItem& s) {
  ByteWriter w;
  w.U64(static_cast<std::uint64_t>(s.timestamp_ms));
  w.Str16(s.pet_id);
  w.Raw(s.params_digest);
  w.Blob(s.ciphertext);
  return std::move(w).bytes();
}

inline StoredItem ParseStoredItem(ByteReader& r) {
  StoredItem s;
  s.timestamp_ms = static_cast<std::int64_t>(r.U64());
  s.pet_id = r.Str16();
  Bytes d = r.Raw(s.params_digest.size());
  std::copy(d.begin(), d.end(), s.params_digest.begin());
  s.ciphertext = r.Blob();
  return s;
}

inline StoredItem ParseStoredItem(std::span<const std::uint8_t> data) {
  ByteReader r(data);
  StoredItem s = ParseStoredItem(r);
  r.ExpectEnd();
  return s;
}

}  // namespace vpriv
