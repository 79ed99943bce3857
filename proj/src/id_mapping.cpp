// Copyright 2026 The pefim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "pefim/id_mapping.hpp"

#include <sodium.h>

#include "pefim/errors.hpp"

namespace pefim {

void MappingTable::record(const std::string& tid_value, MappingEntry entry) {
  // Re-derivation of an existing value stores the identical entry; keep
  // the first record so links stay put.
  entries_.emplace(tid_value, std::move(entry));
}

const MappingEntry& MappingTable::resolve(const std::string& tid_value) const {
  auto it = entries_.find(tid_value);
  if (it == entries_.end()) {
    throw Error(ErrorCode::UnknownTid, tid_value);
  }
  return it->second;
}

std::string derive_tid_value(const Bytes& secret_key, const std::string& parent,
                             const std::vector<std::string>& scope,
                             TidTier tier) {
  if (parent.empty()) {
    throw Error(ErrorCode::EmptyParent);
  }
  size_t expected = tier == TidTier::TID3 ? 2 : 1;
  if (scope.size() != expected) {
    throw Error(ErrorCode::ScopeMismatch,
                "tier " + std::to_string(static_cast<int>(tier)) + " needs " +
                    std::to_string(expected) + " scope ids, got " +
                    std::to_string(scope.size()));
  }
  for (const auto& s : scope) {
    if (s.empty()) throw Error(ErrorCode::ScopeMismatch, "empty scope id");
  }

  // Canonical encoding: tier byte, length-prefixed parent, scope count,
  // length-prefixed scope ids in given order. Length prefixes make the
  // encoding injective, so distinct inputs cannot alias.
  Bytes input;
  input.push_back(static_cast<uint8_t>(tier));
  append_length_prefixed(input, to_bytes(parent));
  uint32_t count = static_cast<uint32_t>(scope.size());
  for (int k = 0; k < 4; ++k) input.push_back(static_cast<uint8_t>(count >> (8 * k)));
  for (const auto& s : scope) append_length_prefixed(input, to_bytes(s));

  if (secret_key.size() != crypto_auth_hmacsha256_KEYBYTES) {
    throw Error(ErrorCode::ConfigError, "derivation key must be 32 bytes");
  }
  Bytes mac(crypto_auth_hmacsha256_BYTES);
  crypto_auth_hmacsha256(mac.data(), input.data(), input.size(),
                         secret_key.data());
  return hex_encode(mac);
}

TargetedId IdMapper::derive(const std::string& parent,
                            const std::vector<std::string>& scope, TidTier tier,
                            const std::string& issuer_hint) {
  TargetedId tid;
  tid.value = derive_tid_value(secret_key_, parent, scope, tier);
  tid.tier = tier;
  tid.scope = scope;
  table_.record(tid.value, MappingEntry{parent, tier, scope, issuer_hint});
  return tid;
}

std::pair<TargetedId, TargetedId> IdMapper::derive_link_pair(
    const std::string& tid1, const std::string& sp_a, const std::string& sp_b) {
  if (sp_a == sp_b) {
    throw Error(ErrorCode::SameSp, sp_a);
  }
  if (!table_.contains(tid1)) {
    throw Error(ErrorCode::UnknownTid, tid1);
  }
  TargetedId ab = derive(tid1, {sp_a, sp_b}, TidTier::TID3);
  TargetedId ba = derive(tid1, {sp_b, sp_a}, TidTier::TID3);
  return {std::move(ab), std::move(ba)};
}

}  // namespace pefim
