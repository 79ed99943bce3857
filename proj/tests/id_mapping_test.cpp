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

#include <doctest.h>

#include <set>
#include <string>

#include "pefim/errors.hpp"
#include "pefim/id_mapping.hpp"

using namespace pefim;

namespace {
Bytes key_a() { return Bytes(32, 0x11); }
Bytes key_b() { return Bytes(32, 0x22); }
}  // namespace

TEST_CASE("derivation is deterministic and key-separated") {
  std::string t1 = derive_tid_value(key_a(), "ref-1", {"sb"}, TidTier::TID1);
  CHECK(t1 == derive_tid_value(key_a(), "ref-1", {"sb"}, TidTier::TID1));
  CHECK(t1 != derive_tid_value(key_b(), "ref-1", {"sb"}, TidTier::TID1));
  CHECK(t1.size() == 64);
  CHECK(t1.find_first_not_of("0123456789abcdef") == std::string::npos);
}

TEST_CASE("scope and tier both separate the output") {
  std::string sp_a = derive_tid_value(key_a(), "tid1", {"sp-a"}, TidTier::TID2);
  std::string sp_b = derive_tid_value(key_a(), "tid1", {"sp-b"}, TidTier::TID2);
  CHECK(sp_a != sp_b);
  // Same parent and scope, different tier byte.
  CHECK(derive_tid_value(key_a(), "p", {"s"}, TidTier::TID1) !=
        derive_tid_value(key_a(), "p", {"s"}, TidTier::TID2));
}

TEST_CASE("link pseudonyms are ordered pairs") {
  std::string ab = derive_tid_value(key_a(), "t", {"sp-a", "sp-b"}, TidTier::TID3);
  std::string ba = derive_tid_value(key_a(), "t", {"sp-b", "sp-a"}, TidTier::TID3);
  CHECK(ab != ba);
  CHECK(ab == derive_tid_value(key_a(), "t", {"sp-a", "sp-b"}, TidTier::TID3));
}

TEST_CASE("derivation rejects malformed inputs") {
  CHECK_THROWS_AS(derive_tid_value(key_a(), "", {"sb"}, TidTier::TID1), Error);
  CHECK_THROWS_AS(derive_tid_value(key_a(), "p", {}, TidTier::TID1), Error);
  CHECK_THROWS_AS(derive_tid_value(key_a(), "p", {"a", "b"}, TidTier::TID1),
                  Error);
  CHECK_THROWS_AS(derive_tid_value(key_a(), "p", {"only"}, TidTier::TID3),
                  Error);
  CHECK_THROWS_AS(derive_tid_value(key_a(), "p", {""}, TidTier::TID1), Error);
  CHECK_THROWS_AS(derive_tid_value(Bytes(16, 1), "p", {"s"}, TidTier::TID1),
                  Error);
}

TEST_CASE("ten thousand bulk derivations collide nowhere") {
  std::set<std::string> seen;
  // 2000 principals at 5 services each.
  for (int p = 0; p < 2000; ++p) {
    std::string parent = "ref-" + std::to_string(p);
    for (int s = 0; s < 5; ++s) {
      seen.insert(derive_tid_value(key_a(), parent,
                                   {"sp-" + std::to_string(s)}, TidTier::TID2));
    }
  }
  CHECK(seen.size() == 10000);
}

TEST_CASE("neighbouring inputs share no output structure") {
  // A cheap one-wayness proxy: flipping one input character changes about
  // half the output bits, so outputs carry no usable input structure.
  std::string a = derive_tid_value(key_a(), "ref-1", {"sb"}, TidTier::TID1);
  std::string b = derive_tid_value(key_a(), "ref-2", {"sb"}, TidTier::TID1);
  Bytes ba = hex_decode(a), bb = hex_decode(b);
  int differing_bits = 0;
  for (size_t i = 0; i < ba.size(); ++i) {
    differing_bits += __builtin_popcount(ba[i] ^ bb[i]);
  }
  CHECK(differing_bits > 64);
  CHECK(differing_bits < 192);
}

TEST_CASE("mapper records reversal entries for the owner only") {
  IdMapper mapper("sb", key_a());
  TargetedId tid = mapper.derive("tid1-value", {"sp-a"}, TidTier::TID2, "idp-x");
  CHECK(mapper.table().contains(tid.value));

  const MappingEntry& entry = mapper.table().resolve(tid.value);
  CHECK(entry.parent == "tid1-value");
  CHECK(entry.tier == TidTier::TID2);
  CHECK(entry.scope == std::vector<std::string>{"sp-a"});
  CHECK(entry.issuer_hint == "idp-x");
  CHECK_THROWS_AS(mapper.table().resolve("unknown"), Error);
}

TEST_CASE("link pair derivation requires a known parent") {
  IdMapper mapper("sb", key_a());
  CHECK_THROWS_AS(mapper.derive_link_pair("never-seen", "sp-a", "sp-b"), Error);

  TargetedId tid1 = mapper.derive("ref", {"sb"}, TidTier::TID1, "idp-x");
  CHECK_THROWS_AS(mapper.derive_link_pair(tid1.value, "sp-a", "sp-a"), Error);

  auto [ab, ba] = mapper.derive_link_pair(tid1.value, "sp-a", "sp-b");
  CHECK(ab.value != ba.value);
  CHECK(mapper.table().resolve(ab.value).scope ==
        std::vector<std::string>{"sp-a", "sp-b"});
  // Repeat derivation returns the identical pair.
  auto [ab2, ba2] = mapper.derive_link_pair(tid1.value, "sp-a", "sp-b");
  CHECK(ab2.value == ab.value);
  CHECK(ba2.value == ba.value);
}
