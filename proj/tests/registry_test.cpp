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

#include "pefim/errors.hpp"
#include "pefim/random.hpp"
#include "pefim/registry.hpp"

using namespace pefim;

namespace {

EntityDescriptor make_sp(const std::string& id,
                         std::set<std::string> attrs = {"display_name"},
                         NameIdPolicy policy = NameIdPolicy::TARGETED) {
  EntityDescriptor e;
  e.entity_id = id;
  e.role = EntityRole::SP;
  e.static_signing_key = "aa" + id;
  e.required_attributes = std::move(attrs);
  e.nameid_policy = policy;
  e.bindings = {"redirect"};
  return e;
}

FederationRegistry two_pair_registry() {
  FederationRegistry r;
  r = register_entity(r, make_sp("sp-a"));
  r = register_entity(r, make_sp("sp-b"));
  r = register_entity(r, make_sp("sp-c", {"payment_class"}));
  r = register_entity(r, make_sp("sp-d", {"payment_class"}));
  return r;
}

}  // namespace

TEST_CASE("descriptor validation names the violated rule") {
  EntityDescriptor sp = make_sp("sp-a");
  sp.required_attributes.clear();
  CHECK_THROWS_WITH_AS(sp.validate(),
                       "InvalidDescriptor: SP 'sp-a' lacks required_attributes",
                       Error);

  EntityDescriptor nameless = make_sp("sp-a");
  nameless.nameid_policy.reset();
  CHECK_THROWS_AS(nameless.validate(), Error);

  EntityDescriptor ca;
  ca.entity_id = "ca";
  ca.role = EntityRole::CA;
  ca.static_signing_key = "aa";
  ca.endpoints["flow"] = "somewhere";
  CHECK_THROWS_AS(ca.validate(), Error);

  EntityDescriptor sp_with_box = make_sp("sp-a");
  sp_with_box.static_encryption_key = "bb";
  CHECK_THROWS_AS(sp_with_box.validate(), Error);
}

TEST_CASE("registration rejects duplicates and keeps the original") {
  FederationRegistry r = register_entity({}, make_sp("sp-a"));
  try {
    register_entity(r, make_sp("sp-a"));
    FAIL("duplicate accepted");
  } catch (const Error& err) {
    CHECK(err.code() == ErrorCode::DuplicateEntity);
  }
  CHECK(r.entities.size() == 1);
}

TEST_CASE("grouping partitions by the characteristics triple") {
  DeterministicRng rng(1);
  FederationRegistry grouped = group_sps(two_pair_registry(), rng);
  REQUIRE(grouped.groups.size() == 2);

  std::string pa = lookup_proxy(grouped, "sp-a");
  CHECK(pa == lookup_proxy(grouped, "sp-b"));
  std::string pc = lookup_proxy(grouped, "sp-c");
  CHECK(pc == lookup_proxy(grouped, "sp-d"));
  CHECK(pa != pc);

  // R10 hook: a proxy releases exactly its members' required set.
  CHECK(grouped.policy.attribute_release_policy.at(pa) ==
        std::set<std::string>{"display_name"});
  CHECK(grouped.policy.attribute_release_policy.at(pc) ==
        std::set<std::string>{"payment_class"});
}

TEST_CASE("below-floor groups fail closed") {
  FederationRegistry r = two_pair_registry();
  r = register_entity(r, make_sp("sp-solo", {"unique_attr"}));
  DeterministicRng rng(1);
  FederationRegistry grouped = group_sps(r, rng);

  try {
    lookup_proxy(grouped, "sp-solo");
    FAIL("singleton group admitted to flows");
  } catch (const Error& err) {
    CHECK(err.code() == ErrorCode::Ungrouped);
  }
  // The group still exists and is visibly flagged.
  bool found = false;
  for (const auto& [pid, group] : grouped.groups) {
    if (group.member_sp_ids.count("sp-solo")) {
      found = true;
      CHECK(group.ungrouped);
    }
  }
  CHECK(found);
  CHECK_THROWS_AS(lookup_proxy(grouped, "sp-ghost"), Error);
}

TEST_CASE("raising the floor strands pairs too") {
  FederationRegistry r = two_pair_registry();
  r.policy.min_group_size = 3;
  DeterministicRng rng(1);
  FederationRegistry grouped = group_sps(r, rng);
  CHECK_THROWS_AS(lookup_proxy(grouped, "sp-a"), Error);
}

TEST_CASE("grouping is a pure function of registry and seed") {
  DeterministicRng rng_a(9), rng_b(9), rng_c(10);
  FederationRegistry base = two_pair_registry();
  FederationRegistry a = group_sps(base, rng_a);
  FederationRegistry b = group_sps(base, rng_b);
  FederationRegistry c = group_sps(base, rng_c);
  CHECK(a.canonical_serialization() == b.canonical_serialization());
  // Different seed, different opaque proxy ids.
  CHECK(a.canonical_serialization() != c.canonical_serialization());
}

TEST_CASE("canonical serialization is insertion-order independent") {
  FederationRegistry fwd;
  fwd = register_entity(fwd, make_sp("sp-a"));
  fwd = register_entity(fwd, make_sp("sp-b"));
  FederationRegistry rev;
  rev = register_entity(rev, make_sp("sp-b"));
  rev = register_entity(rev, make_sp("sp-a"));
  CHECK(fwd.canonical_serialization() == rev.canonical_serialization());
}
