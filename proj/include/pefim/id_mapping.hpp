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

#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "pefim/bytes.hpp"

namespace pefim {

enum class TidTier : uint8_t { TID1 = 1, TID2 = 2, TID3 = 3 };

// Identifier the IdP holds for a principal; never leaves the IdP.
struct ReferenceId {
  std::string value;
  std::string principal_id;
};

// A scoped pseudonym. value is 32 bytes of keyed-PRF output in lowercase
// hex; scope is who the id is targeted to (one entity for TID1/TID2, an
// ordered pair for TID3).
struct TargetedId {
  std::string value;
  TidTier tier = TidTier::TID1;
  std::vector<std::string> scope;
};

struct MappingEntry {
  std::string parent;  // ReferenceId.value or the lower-tier TID value
  TidTier tier = TidTier::TID1;
  std::vector<std::string> scope;
  // Routing hint the SB keeps alongside TID1-derived entries: which IdP
  // issued the parent. Empty for IdP-owned tables.
  std::string issuer_hint;
};

// Issuer-private reverse index. Lives inside one actor's state; there is
// deliberately no cross-actor lookup path and no entry removal.
class MappingTable {
 public:
  explicit MappingTable(std::string owner) : owner_(std::move(owner)) {}

  const std::string& owner() const { return owner_; }
  bool contains(const std::string& tid_value) const {
    return entries_.count(tid_value) > 0;
  }
  size_t size() const { return entries_.size(); }

  void record(const std::string& tid_value, MappingEntry entry);

  // Errors: UnknownTid.
  const MappingEntry& resolve(const std::string& tid_value) const;

  const std::map<std::string, MappingEntry>& entries() const {
    return entries_;
  }

 private:
  std::string owner_;
  std::map<std::string, MappingEntry> entries_;
};

// Keyed one-way derivation over a canonical encoding of
// (tier, parent, scope). Pure: identical inputs give identical output.
// Errors: EmptyParent, ScopeMismatch.
std::string derive_tid_value(const Bytes& secret_key, const std::string& parent,
                             const std::vector<std::string>& scope,
                             TidTier tier);

// One issuer's derivation key plus its mapping table.
class IdMapper {
 public:
  IdMapper(std::string owner, Bytes secret_key)
      : table_(std::move(owner)), secret_key_(std::move(secret_key)) {}

  // Derives and records. issuer_hint is stored with the entry (SB use).
  TargetedId derive(const std::string& parent,
                    const std::vector<std::string>& scope, TidTier tier,
                    const std::string& issuer_hint = "");

  // Both directed TID3 values for (tid1, sp_a, sp_b). Re-invocation returns
  // the same pair; there is no way to remove the link afterwards.
  // Errors: SameSp, UnknownTid (tid1 not issued here).
  std::pair<TargetedId, TargetedId> derive_link_pair(const std::string& tid1,
                                                     const std::string& sp_a,
                                                     const std::string& sp_b);

  const MappingTable& table() const { return table_; }
  MappingTable& table() { return table_; }

 private:
  MappingTable table_;
  Bytes secret_key_;
};

}  // namespace pefim
