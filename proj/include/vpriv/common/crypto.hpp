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

#include <sodium.h>

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string_view>

#include "vpriv/common/bytes.hpp"

namespace vpriv::crypto {

using Digest = std::array<std::uint8_t, 32>;
using Key = std::array<std::uint8_t, 32>;
using Nonce = std::array<std::uint8_t, crypto_aead_xchacha20poly1305_ietf_NPUBBYTES>;

inline constexpr std::size_t kTagBytes = crypto_aead_xchacha20poly1305_ietf_ABYTES;

inline void EnsureInit() {
  static const int rc = sodium_init();
  if (rc < 0) throw std::runtime_error("libsodium initialisation failed");
}

inline Digest Sha256(std::span<const std::uint8_t> data) {
  EnsureInit();
  Digest out;
  crypto_hash_sha256(out.data(), data.data(), data.size());
  return out;
}

inline Digest HmacSha256(std::span<const std::uint8_t> key,
                         std::span<const std::uint8_t> message) {
  EnsureInit();
  crypto_auth_hmacsha256_state state;
  crypto_auth_hmacsha256_init(&state, key.data(), key.size());
  crypto_auth_hmacsha256_update(&state, message.data(), message.size());
  Digest out;
  crypto_auth_hmacsha256_final(&state, out.data());
  return out;
}

inline Digest HmacSha256(std::span<const std::uint8_t> key,
                         std::string_view message) {
  return HmacSha256(key, std::span<const std::uint8_t>(
                             reinterpret_cast<const std::uint8_t*>(message.data()),
                             message.size()));
}

// XChaCha20-Poly1305 with associated data.
inline Bytes Seal(const Key& key, const Nonce& nonce,
                  std::span<const std::uint8_t> plaintext,
                  std::span<const std::uint8_t> associated) {
  EnsureInit();
  Bytes out(plaintext.size() + kTagBytes);
  unsigned long long out_len = 0;
  crypto_aead_xchacha20poly1305_ietf_encrypt(
      out.data(), &out_len, plaintext.data(), plaintext.size(),
      associated.data(), associated.size(), nullptr, nonce.data(), key.data());
  out.resize(out_len);
  return out;
}

inline std::optional<Bytes> Open(const Key& key, const Nonce& nonce,
                                 std::span<const std::uint8_t> ciphertext,
                                 std::span<const std::uint8_t> associated) {
  EnsureInit();
  if (ciphertext.size() < kTagBytes) return std::nullopt;
  Bytes out(ciphertext.size() - kTagBytes);
  unsigned long long out_len = 0;
  if (crypto_aead_xchacha20poly1305_ietf_decrypt(
          out.data(), &out_len, nullptr, ciphertext.data(), ciphertext.size(),
          associated.data(), associated.size(), nonce.data(), key.data()) != 0) {
    return std::nullopt;
  }
  out.resize(out_len);
  return out;
}

}  // namespace vpriv::crypto
