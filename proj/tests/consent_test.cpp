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

#include "pefim/consent.hpp"
#include "pefim/crypto.hpp"
#include "pefim/errors.hpp"
#include "pefim/random.hpp"

using namespace pefim;

namespace {

FederationRegistry proxy_registry() {
  FederationRegistry r;
  for (const std::string& id : {"sp-a", "sp-b"}) {
    EntityDescriptor e;
    e.entity_id = id;
    e.role = EntityRole::SP;
    e.static_signing_key = "aa";
    e.required_attributes = {"display_name", "tier"};
    e.nameid_policy = NameIdPolicy::TARGETED;
    r = register_entity(r, e);
  }
  DeterministicRng rng(1);
  return group_sps(r, rng);
}

std::string only_proxy(const FederationRegistry& r) {
  REQUIRE(r.groups.size() == 1);
  return r.groups.begin()->first;
}

}  // namespace

TEST_CASE("link targets are symmetric and recognizable") {
  CHECK(link_target("sp-b", "sp-a") == link_target("sp-a", "sp-b"));
  CHECK(is_link_target(link_target("sp-a", "sp-b")));
  CHECK_FALSE(is_link_target("pxy-123"));
}

TEST_CASE("up-front consent covers repeated use") {
  FederationRegistry r = proxy_registry();
  std::string proxy = only_proxy(r);
  DeterministicRng rng(2);
  ConsentStore store;
  store.grant(r, "tid1-x", proxy, {"display_name", "tier"},
              ConsentMode::UP_FRONT, 5, rng);

  std::string first = store.check_and_consume("tid1-x", proxy, {"tier"}, 10);
  std::string second = store.check_and_consume("tid1-x", proxy, {"tier"}, 11);
  CHECK(first == second);
  CHECK_FALSE(first.empty());
}

TEST_CASE("transactional consent is single use") {
  FederationRegistry r = proxy_registry();
  std::string proxy = only_proxy(r);
  DeterministicRng rng(2);
  ConsentStore store;
  store.grant(r, "tid1-x", proxy, {"tier"}, ConsentMode::TRANSACTIONAL, 5, rng);

  store.check_and_consume("tid1-x", proxy, {"tier"}, 10);
  try {
    store.check_and_consume("tid1-x", proxy, {"tier"}, 11);
    FAIL("consumed record reused");
  } catch (const Error& err) {
    CHECK(err.code() == ErrorCode::ConsentMissing);
  }
}

TEST_CASE("requests beyond the granted set are refused") {
  FederationRegistry r = proxy_registry();
  std::string proxy = only_proxy(r);
  DeterministicRng rng(2);
  ConsentStore store;
  store.grant(r, "tid1-x", proxy, {"tier"}, ConsentMode::UP_FRONT, 5, rng);

  try {
    store.check_and_consume("tid1-x", proxy, {"tier", "display_name"}, 10);
    FAIL("overbroad request satisfied");
  } catch (const Error& err) {
    CHECK(err.code() == ErrorCode::AttributeSetExceedsConsent);
  }
  // Wrong principal or absent target reads as missing, not exceeded.
  CHECK_THROWS_AS(store.check_and_consume("tid1-y", proxy, {"tier"}, 10), Error);
}

TEST_CASE("grants are refused for unknown targets") {
  FederationRegistry r = proxy_registry();
  DeterministicRng rng(2);
  ConsentStore store;
  try {
    store.grant(r, "tid1-x", "pxy-nonexistent", {}, ConsentMode::UP_FRONT, 5,
                rng);
    FAIL("unknown proxy accepted");
  } catch (const Error& err) {
    CHECK(err.code() == ErrorCode::UnknownTarget);
  }
  // A link over an unregistered SP is equally unknown.
  CHECK_THROWS_AS(store.grant(r, "tid1-x", link_target("sp-a", "sp-ghost"), {},
                              ConsentMode::UP_FRONT, 5, rng),
                  Error);
  // Same SP twice never forms a target.
  CHECK_THROWS_AS(store.grant(r, "tid1-x", "LINK(sp-a,sp-a)", {},
                              ConsentMode::UP_FRONT, 5, rng),
                  Error);
}

TEST_CASE("revocation stops future use and is idempotent in effect") {
  FederationRegistry r = proxy_registry();
  std::string proxy = only_proxy(r);
  DeterministicRng rng(2);
  ConsentStore store;
  ConsentRecord& rec = store.grant(r, "tid1-x", proxy, {"tier"},
                                   ConsentMode::UP_FRONT, 5, rng);
  std::string id = rec.record_id;
  store.revoke(id, 20);
  CHECK_THROWS_AS(store.check_and_consume("tid1-x", proxy, {"tier"}, 30), Error);
  CHECK_THROWS_AS(store.revoke("cns-nonexistent", 30), Error);
}

TEST_CASE("link consent cannot be revoked") {
  FederationRegistry r = proxy_registry();
  DeterministicRng rng(2);
  ConsentStore store;
  ConsentRecord& rec = store.grant(r, "tid1-x", link_target("sp-a", "sp-b"),
                                   {}, ConsentMode::UP_FRONT, 5, rng);
  try {
    store.revoke(rec.record_id, 20);
    FAIL("link consent revoked");
  } catch (const Error& err) {
    CHECK(err.code() == ErrorCode::LinkIrrevocable);
  }
  // Still usable afterwards.
  CHECK_FALSE(store.check_and_consume("tid1-x", link_target("sp-a", "sp-b"),
                                      {}, 30)
                  .empty());
}

TEST_CASE("store round trips through its record form") {
  FederationRegistry r = proxy_registry();
  std::string proxy = only_proxy(r);
  DeterministicRng rng(2);
  ConsentStore store;
  store.grant(r, "tid1-x", proxy, {"tier"}, ConsentMode::TRANSACTIONAL, 5, rng);
  ConsentRecord& up = store.grant(r, "tid1-y", proxy, {"display_name"},
                                  ConsentMode::UP_FRONT, 6, rng);
  store.revoke(up.record_id, 9);
  store.check_and_consume("tid1-x", proxy, {"tier"}, 10);

  ConsentStore copy = ConsentStore::from_record(store.to_record());
  REQUIRE(copy.all().size() == 2);
  CHECK(copy.to_record() == store.to_record());
  // Consumption state survives: the transactional record stays spent.
  CHECK_THROWS_AS(copy.check_and_consume("tid1-x", proxy, {"tier"}, 11), Error);
}

TEST_CASE("listing filters by principal key") {
  FederationRegistry r = proxy_registry();
  std::string proxy = only_proxy(r);
  DeterministicRng rng(2);
  ConsentStore store;
  store.grant(r, "tid1-x", proxy, {"tier"}, ConsentMode::UP_FRONT, 5, rng);
  store.grant(r, "tid1-y", proxy, {"tier"}, ConsentMode::UP_FRONT, 6, rng);
  CHECK(store.list("tid1-x").size() == 1);
  CHECK(store.list("tid1-z").empty());
}

TEST_CASE("consent vouchers bind record and request") {
  DeterministicRng rng(4);
  SigningKeypair sb = generate_signing_keypair(rng);
  std::string voucher = make_consent_voucher("cns-1", "req-1", sb.secret_key);
  CHECK(verify_consent_voucher(voucher, "cns-1", "req-1", sb.public_key));
  CHECK_FALSE(verify_consent_voucher(voucher, "cns-2", "req-1", sb.public_key));
  CHECK_FALSE(verify_consent_voucher(voucher, "cns-1", "req-2", sb.public_key));
  SigningKeypair other = generate_signing_keypair(rng);
  CHECK_FALSE(verify_consent_voucher(voucher, "cns-1", "req-1", other.public_key));
}
