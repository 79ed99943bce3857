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
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "pefim/random.hpp"

namespace pefim {

enum class EntityRole { IDP, SP, SB, CA, DISCOVERY, CONSENT };

const char* entity_role_name(EntityRole role);
std::optional<EntityRole> parse_entity_role(const std::string& name);

enum class NameIdPolicy { TARGETED, TEMPORARY };

const char* nameid_policy_name(NameIdPolicy policy);
std::optional<NameIdPolicy> parse_nameid_policy(const std::string& name);

// Consent capture modes: standing consent recorded outside any flow,
// consent granted once at first use and reused, or consent asked per
// transaction and consumed by it.
enum class ConsentMode { OUT_OF_BAND, UP_FRONT, TRANSACTIONAL };

const char* consent_mode_name(ConsentMode mode);
std::optional<ConsentMode> parse_consent_mode(const std::string& name);

// Static metadata for one federation participant.
struct EntityDescriptor {
  std::string entity_id;
  EntityRole role = EntityRole::SP;
  std::string static_signing_key;               // public key reference (hex)
  std::optional<std::string> static_encryption_key;  // IdP/SB only
  std::map<std::string, std::string> endpoints;  // binding name -> address
  std::set<std::string> required_attributes;     // SP only
  std::optional<NameIdPolicy> nameid_policy;     // SP only
  std::vector<std::string> bindings;             // ordered

  // Throws InvalidDescriptor naming the violated rule.
  void validate() const;

  // The grouping key: SPs sharing this triple share a proxy.
  std::string characteristics_key() const;
};

// A proxy identity shared by all SPs with identical characteristics.
struct SpProxyGroup {
  std::string proxy_id;
  std::set<std::string> required_attributes;
  NameIdPolicy nameid_policy = NameIdPolicy::TARGETED;
  std::vector<std::string> bindings;
  std::set<std::string> member_sp_ids;
  // Groups below the size floor are kept visible but barred from flows.
  bool ungrouped = false;
};

struct FederationPolicy {
  int min_group_size = 2;
  uint64_t onetime_cert_validity = 300;  // simulated seconds
  ConsentMode consent_mode_default = ConsentMode::UP_FRONT;
  std::map<std::string, std::set<std::string>> attribute_release_policy;
};

// Immutable after the build phase; mutators return a new value.
struct FederationRegistry {
  std::map<std::string, EntityDescriptor> entities;
  std::map<std::string, SpProxyGroup> groups;
  std::string ca_trust_root;  // public key reference (hex)
  FederationPolicy policy;

  bool has_entity(const std::string& entity_id) const {
    return entities.count(entity_id) > 0;
  }
  const EntityDescriptor& entity(const std::string& entity_id) const;
  std::vector<std::string> entities_with_role(EntityRole role) const;

  // Byte-stable rendering of the whole registry, for golden tests.
  std::string canonical_serialization() const;
};

// Adds desc to a copy of registry. Errors: DuplicateEntity, InvalidDescriptor.
FederationRegistry register_entity(const FederationRegistry& registry,
                                   const EntityDescriptor& desc);

// Partitions every SP into a proxy group keyed by its characteristics
// triple. Groups smaller than policy.min_group_size are flagged ungrouped
// rather than rejected. Fresh opaque proxy ids come from rng.
FederationRegistry group_sps(const FederationRegistry& registry,
                             RandomSource& rng);

// Returns the proxy_id of the group containing sp_id.
// Errors: UnknownEntity, Ungrouped.
std::string lookup_proxy(const FederationRegistry& registry,
                         const std::string& sp_id);

}  // namespace pefim
