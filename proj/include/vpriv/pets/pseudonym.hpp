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

#include <span>
#include <string>
#include <string_view>

#include "vpriv/common/bytes.hpp"
#include "vpriv/common/crypto.hpp"
#include "vpriv/common/error.hpp"

namespace vpriv::pets {

inline constexpr std::size_t kMinPseudonymSecret = 32;

// Keyed hash of (entity, purpose); distinct purposes give unlinkable ids.
inline std::string Pseudonymize(std::string_view entity_id,
                                std::string_view purpose,
                                std::span<const std::uint8_t> secret) {
  if (secret.size() < kMinPseudonymSecret) {
    throw Error(ErrorCode::kWeakSecret, "pseudonym secret shorter than 32 bytes");
  }
  ByteWriter w;
  w.Str(entity_id);
  w.Str(purpose);
  return ToHex(crypto::HmacSha256(secret, w.bytes()));
}

}  // namespace vpriv::pets
