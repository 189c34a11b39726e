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

// Purpose-bound encryption: policy-gated envelope encryption.
//
// A fresh data key seals the payload with XChaCha20-Poly1305. The data key is
// secret-shared down the policy tree (AND splits it by XOR, OR replicates it)
// and every leaf share is sealed under a key derived for that attribute from
// the authority's master secret. A holder recovers the data key exactly when
// its attribute set satisfies the policy. The public interface does not depend
// on this construction, so a pairing-based ABE scheme can replace it.
//
// Unlike pairing-based ABE, encrypting needs the authority's wrap root, so the
// AuthorityPublic value is confidential to the trusted vehicle domain.

#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "vpriv/common/bytes.hpp"
#include "vpriv/common/crypto.hpp"
#include "vpriv/common/error.hpp"
#include "vpriv/common/rng.hpp"

namespace vpriv::pets {

// ---- Policy ---------------------------------------------------------------

struct PolicyNode {
  enum class Kind { kAttr, kAnd, kOr };
  Kind kind = Kind::kAttr;
  std::string attr;
  std::vector<PolicyNode> children;  // Exactly two for kAnd / kOr.
};

namespace detail {

inline bool IsAttrChar(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == ':' ||
         c == '.' || c == '-';
}

// expr := term (OR term)* ; term := factor (AND factor)* ;
// factor := attr | '(' expr ')'.  AND binds tighter than OR.
class PolicyParser {
 public:
  explicit PolicyParser(std::string_view text) {
    std::size_t i = 0;
    while (i < text.size()) {
      char c = text[i];
      if (std::isspace(static_cast<unsigned char>(c))) {
        ++i;
      } else if (c == '(' || c == ')') {
        tokens_.emplace_back(1, c);
        ++i;
      } else if (IsAttrChar(c)) {
        std::size_t j = i;
        while (j < text.size() && IsAttrChar(text[j])) ++j;
        tokens_.emplace_back(text.substr(i, j - i));
        i = j;
      } else {
        throw Error(ErrorCode::kPolicyParseError,
                    std::string("unexpected character '") + c + "'");
      }
    }
  }

  PolicyNode Parse() {
    if (tokens_.empty()) {
      throw Error(ErrorCode::kPolicyParseError, "empty policy");
    }
    PolicyNode root = Expr();
    if (pos_ != tokens_.size()) {
      throw Error(ErrorCode::kPolicyParseError,
                  "unexpected token '" + tokens_[pos_] + "'");
    }
    return root;
  }

 private:
  PolicyNode Expr() {
    PolicyNode left = Term();
    while (Peek() == "OR") {
      ++pos_;
      left = Join(PolicyNode::Kind::kOr, std::move(left), Term());
    }
    return left;
  }
  PolicyNode Term() {
    PolicyNode left = Factor();
    while (Peek() == "AND") {
      ++pos_;
      left = Join(PolicyNode::Kind::kAnd, std::move(left), Factor());
    }
    return left;
  }
  PolicyNode Factor() {
    if (pos_ >= tokens_.size()) {
      throw Error(ErrorCode::kPolicyParseError, "unexpected end of policy");
    }
    const std::string& tok = tokens_[pos_++];
    if (tok == "(") {
      PolicyNode inner = Expr();
      if (Peek() != ")") {
        throw Error(ErrorCode::kPolicyParseError, "missing ')'");
      }
      ++pos_;
      return inner;
    }
    if (tok == ")" || tok == "AND" || tok == "OR") {
      throw Error(ErrorCode::kPolicyParseError, "unexpected '" + tok + "'");
    }
    if (tok == "NOT") {
      throw Error(ErrorCode::kPolicyParseError, "negation is not allowed");
    }
    return PolicyNode{PolicyNode::Kind::kAttr, tok, {}};
  }
  std::string_view Peek() const {
    return pos_ < tokens_.size() ? std::string_view(tokens_[pos_])
                                 : std::string_view();
  }
  static PolicyNode Join(PolicyNode::Kind kind, PolicyNode a, PolicyNode b) {
    PolicyNode n{kind, {}, {}};
    n.children.push_back(std::move(a));
    n.children.push_back(std::move(b));
    return n;
  }

  std::vector<std::string> tokens_;
  std::size_t pos_ = 0;
};

inline int Precedence(const PolicyNode& n) {
  switch (n.kind) {
    case PolicyNode::Kind::kOr: return 0;
    case PolicyNode::Kind::kAnd: return 1;
    default: return 2;
  }
}

inline void Render(const PolicyNode& n, std::string& out) {
  if (n.kind == PolicyNode::Kind::kAttr) {
    out += n.attr;
    return;
  }
  const int prec = Precedence(n);
  for (std::size_t i = 0; i < n.children.size(); ++i) {
    if (i) out += n.kind == PolicyNode::Kind::kAnd ? " AND " : " OR ";
    const PolicyNode& c = n.children[i];
    // Right operands of equal precedence keep their grouping explicit.
    const bool paren = Precedence(c) < prec || (i > 0 && Precedence(c) == prec);
    if (paren) out += '(';
    Render(c, out);
    if (paren) out += ')';
  }
}

}  // namespace detail

// Monotone boolean formula over attribute strings.
class PurposePolicy {
 public:
  static PurposePolicy Parse(std::string_view text) {
    PurposePolicy p;
    p.root_ = detail::PolicyParser(text).Parse();
    detail::Render(p.root_, p.text_);
    return p;
  }

  // AND of all attributes, in the given order.
  static PurposePolicy AllOf(const std::vector<std::string>& attrs) {
    std::string text;
    for (const auto& a : attrs) {
      if (!text.empty()) text += " AND ";
      text += a;
    }
    return Parse(text);
  }

  const PolicyNode& root() const { return root_; }
  // Canonical rendering; parsing it yields the same tree.
  const std::string& text() const { return text_; }

  bool SatisfiedBy(const std::set<std::string>& attrs) const {
    return Eval(root_, attrs);
  }

  std::set<std::string> Attributes() const {
    std::set<std::string> out;
    Collect(root_, out);
    return out;
  }

  friend bool operator==(const PurposePolicy& a, const PurposePolicy& b) {
    return a.text_ == b.text_;
  }

 private:
  static bool Eval(const PolicyNode& n, const std::set<std::string>& attrs) {
    switch (n.kind) {
      case PolicyNode::Kind::kAttr: return attrs.count(n.attr) > 0;
      case PolicyNode::Kind::kAnd:
        return std::all_of(n.children.begin(), n.children.end(),
                           [&](const PolicyNode& c) { return Eval(c, attrs); });
      case PolicyNode::Kind::kOr:
        return std::any_of(n.children.begin(), n.children.end(),
                           [&](const PolicyNode& c) { return Eval(c, attrs); });
    }
    return false;
  }
  static void Collect(const PolicyNode& n, std::set<std::string>& out) {
    if (n.kind == PolicyNode::Kind::kAttr) out.insert(n.attr);
    for (const auto& c : n.children) Collect(c, out);
  }

  PolicyNode root_;
  std::string text_;
};

// ---- Authority and keys ---------------------------------------------------

using AuthorityId = std::array<std::uint8_t, 16>;

struct MasterSecret {
  AuthorityId authority_id{};
  crypto::Key secret{};
};

struct AuthorityPublic {
  AuthorityId authority_id{};
  crypto::Key wrap_root{};
};

struct AttributeKey {
  std::string key_id;
  std::set<std::string> attributes;
  // One derived wrapping key per attribute.
  std::map<std::string, crypto::Key> attribute_keys;

  // Opaque secret material: per-attribute keys concatenated in attribute order.
  Bytes SecretMaterial() const {
    Bytes out;
    for (const auto& [attr, k] : attribute_keys) out.insert(out.end(), k.begin(), k.end());
    return out;
  }
};

namespace detail {

inline crypto::Key WrapRoot(const MasterSecret& master) {
  return crypto::HmacSha256(master.secret, "vpriv/pbe/wrap-root");
}

inline crypto::Key AttributeWrapKey(const crypto::Key& wrap_root,
                                    std::string_view attr) {
  return crypto::HmacSha256(wrap_root, "vpriv/pbe/attr/" + std::string(attr));
}

}  // namespace detail

struct AuthorityState {
  MasterSecret master;
  AuthorityPublic pub;
};

inline AuthorityState PbeSetup(Rng& rng) {
  AuthorityState s;
  rng.Fill(s.master.authority_id);
  rng.Fill(s.master.secret);
  s.pub.authority_id = s.master.authority_id;
  s.pub.wrap_root = detail::WrapRoot(s.master);
  return s;
}

inline AttributeKey PbeKeygen(const MasterSecret& master,
                              const std::set<std::string>& attributes) {
  if (attributes.empty()) {
    throw Error(ErrorCode::kEmptyAttributes, "key needs at least one attribute");
  }
  const crypto::Key root = detail::WrapRoot(master);
  AttributeKey key;
  key.attributes = attributes;
  ByteWriter id_input;
  id_input.Raw(master.authority_id);
  for (const auto& a : attributes) {
    key.attribute_keys[a] = detail::AttributeWrapKey(root, a);
    id_input.Str(a);
  }
  const crypto::Digest d = crypto::Sha256(id_input.bytes());
  key.key_id = ToHex(std::span<const std::uint8_t>(d.data(), 8));
  return key;
}

// ---- Ciphertext -----------------------------------------------------------

struct WrappedShare {
  crypto::Nonce nonce{};
  Bytes sealed;
};

struct Ciphertext {
  PurposePolicy policy;
  std::vector<WrappedShare> header;  // One per policy leaf, left to right.
  crypto::Nonce nonce{};
  Bytes body;
};

inline constexpr std::uint8_t kCiphertextVersion = 1;

// version u8 | policy u32-prefixed UTF-8 | u32 share count |
// per share: nonce[24] | u32-prefixed sealed share | nonce[24] |
// u32-prefixed body. All integers big-endian.
inline Bytes SerializeCiphertext(const Ciphertext& ct) {
  ByteWriter w;
  w.U8(kCiphertextVersion);
  w.Str(ct.policy.text());
  w.U32(static_cast<std::uint32_t>(ct.header.size()));
  for (const auto& s : ct.header) {
    w.Raw(s.nonce);
    w.Blob(s.sealed);
  }
  w.Raw(ct.nonce);
  w.Blob(ct.body);
  return std::move(w).bytes();
}

inline Ciphertext ParseCiphertext(std::span<const std::uint8_t> data) {
  ByteReader r(data, ErrorCode::kIntegrityError);
  if (r.U8() != kCiphertextVersion) {
    throw Error(ErrorCode::kIntegrityError, "unsupported ciphertext version");
  }
  Ciphertext ct;
  ct.policy = PurposePolicy::Parse(r.Str());
  const std::uint32_t count = r.U32();
  if (count > r.remaining()) {
    throw Error(ErrorCode::kIntegrityError, "share count exceeds input");
  }
  for (std::uint32_t i = 0; i < count; ++i) {
    WrappedShare s;
    Bytes n = r.Raw(s.nonce.size());
    std::copy(n.begin(), n.end(), s.nonce.begin());
    s.sealed = r.Blob();
    ct.header.push_back(std::move(s));
  }
  Bytes n = r.Raw(ct.nonce.size());
  std::copy(n.begin(), n.end(), ct.nonce.begin());
  ct.body = r.Blob();
  r.ExpectEnd();
  return ct;
}

namespace detail {

inline Bytes ShareAssociatedData(const std::string& policy_text,
                                 std::uint32_t leaf) {
  ByteWriter w;
  w.Raw(std::string_view("vpriv/pbe/share"));
  w.U32(leaf);
  w.Str(policy_text);
  return std::move(w).bytes();
}

inline Bytes BodyAssociatedData(const std::string& policy_text) {
  ByteWriter w;
  w.Raw(std::string_view("vpriv/pbe/body"));
  w.Str(policy_text);
  return std::move(w).bytes();
}

inline crypto::Key Xor(const crypto::Key& a, const crypto::Key& b) {
  crypto::Key out;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] ^ b[i];
  return out;
}

inline void DistributeShares(
    const PolicyNode& node, const crypto::Key& secret, Rng& rng,
    std::vector<std::pair<std::string, crypto::Key>>& leaves) {
  switch (node.kind) {
    case PolicyNode::Kind::kAttr:
      leaves.emplace_back(node.attr, secret);
      return;
    case PolicyNode::Kind::kOr:
      for (const auto& c : node.children) DistributeShares(c, secret, rng, leaves);
      return;
    case PolicyNode::Kind::kAnd: {
      crypto::Key rest = secret;
      for (std::size_t i = 0; i < node.children.size(); ++i) {
        crypto::Key share;
        if (i + 1 == node.children.size()) {
          share = rest;
        } else {
          rng.Fill(share);
          rest = Xor(rest, share);
        }
        DistributeShares(node.children[i], share, rng, leaves);
      }
      return;
    }
  }
}

// Recovers the secret of `node`, advancing `leaf` past all of its leaves.
inline std::optional<crypto::Key> RecoverShare(const PolicyNode& node,
                                               const AttributeKey& key,
                                               const Ciphertext& ct,
                                               std::uint32_t& leaf) {
  switch (node.kind) {
    case PolicyNode::Kind::kAttr: {
      const std::uint32_t index = leaf++;
      auto it = key.attribute_keys.find(node.attr);
      if (it == key.attribute_keys.end()) return std::nullopt;
      const WrappedShare& s = ct.header[index];
      auto opened = crypto::Open(it->second, s.nonce, s.sealed,
                                 ShareAssociatedData(ct.policy.text(), index));
      if (!opened || opened->size() != crypto::Key{}.size()) return std::nullopt;
      crypto::Key out;
      std::copy(opened->begin(), opened->end(), out.begin());
      return out;
    }
    case PolicyNode::Kind::kOr: {
      std::optional<crypto::Key> found;
      for (const auto& c : node.children) {
        auto r = RecoverShare(c, key, ct, leaf);
        if (!found && r) found = r;
      }
      return found;
    }
    case PolicyNode::Kind::kAnd: {
      std::optional<crypto::Key> acc = crypto::Key{};
      for (const auto& c : node.children) {
        auto r = RecoverShare(c, key, ct, leaf);
        if (acc && r) {
          acc = Xor(*acc, *r);
        } else {
          acc.reset();
        }
      }
      return acc;
    }
  }
  return std::nullopt;
}

inline std::uint32_t LeafCount(const PolicyNode& n) {
  if (n.kind == PolicyNode::Kind::kAttr) return 1;
  std::uint32_t c = 0;
  for (const auto& ch : n.children) c += LeafCount(ch);
  return c;
}

}  // namespace detail

inline Ciphertext PbeEncrypt(const AuthorityPublic& authority,
                             const PurposePolicy& policy,
                             std::span<const std::uint8_t> plaintext, Rng& rng) {
  Ciphertext ct;
  ct.policy = policy;
  crypto::Key data_key;
  rng.Fill(data_key);
  rng.Fill(ct.nonce);

  std::vector<std::pair<std::string, crypto::Key>> leaves;
  detail::DistributeShares(policy.root(), data_key, rng, leaves);
  for (std::uint32_t i = 0; i < leaves.size(); ++i) {
    WrappedShare s;
    rng.Fill(s.nonce);
    s.sealed = crypto::Seal(
        detail::AttributeWrapKey(authority.wrap_root, leaves[i].first), s.nonce,
        leaves[i].second, detail::ShareAssociatedData(policy.text(), i));
    ct.header.push_back(std::move(s));
  }
  ct.body = crypto::Seal(data_key, ct.nonce, plaintext,
                         detail::BodyAssociatedData(policy.text()));
  return ct;
}

inline Ciphertext PbeEncrypt(const AuthorityPublic& authority,
                             std::string_view policy_text,
                             std::span<const std::uint8_t> plaintext, Rng& rng) {
  return PbeEncrypt(authority, PurposePolicy::Parse(policy_text), plaintext, rng);
}

inline Bytes PbeDecrypt(const AttributeKey& key, const Ciphertext& ct) {
  if (ct.header.size() != detail::LeafCount(ct.policy.root())) {
    throw Error(ErrorCode::kIntegrityError, "share table does not match policy");
  }
  std::uint32_t leaf = 0;
  auto data_key = detail::RecoverShare(ct.policy.root(), key, ct, leaf);
  if (!data_key && ct.policy.SatisfiedBy(key.attributes)) {
    // The attributes suffice, so a share failed to open: the header was
    // altered or the key belongs to another authority.
    throw Error(ErrorCode::kIntegrityError, "policy shares rejected");
  }
  if (!data_key) {
    throw Error(ErrorCode::kPolicyNotSatisfied,
                "key attributes do not satisfy '" + ct.policy.text() + "'");
  }
  auto plain = crypto::Open(*data_key, ct.nonce, ct.body,
                            detail::BodyAssociatedData(ct.policy.text()));
  if (!plain) throw Error(ErrorCode::kIntegrityError, "ciphertext body rejected");
  return *plain;
}

}  // namespace vpriv::pets
