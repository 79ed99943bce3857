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

#include "pefim/registry.hpp"

#include <json.hpp>

#include "pefim/errors.hpp"

namespace pefim {

namespace {
using ordered_json = nlohmann::ordered_json;
}  // namespace

const char* entity_role_name(EntityRole role) {
  switch (role) {
    case EntityRole::IDP: return "IDP";
    case EntityRole::SP: return "SP";
    case EntityRole::SB: return "SB";
    case EntityRole::CA: return "CA";
    case EntityRole::DISCOVERY: return "DISCOVERY";
    case EntityRole::CONSENT: return "CONSENT";
  }
  return "?";
}

std::optional<EntityRole> parse_entity_role(const std::string& name) {
  if (name == "IDP") return EntityRole::IDP;
  if (name == "SP") return EntityRole::SP;
  if (name == "SB") return EntityRole::SB;
  if (name == "CA") return EntityRole::CA;
  if (name == "DISCOVERY") return EntityRole::DISCOVERY;
  if (name == "CONSENT") return EntityRole::CONSENT;
  return std::nullopt;
}

const char* nameid_policy_name(NameIdPolicy policy) {
  switch (policy) {
    case NameIdPolicy::TARGETED: return "TARGETED";
    case NameIdPolicy::TEMPORARY: return "TEMPORARY";
  }
  return "?";
}

std::optional<NameIdPolicy> parse_nameid_policy(const std::string& name) {
  if (name == "TARGETED") return NameIdPolicy::TARGETED;
  if (name == "TEMPORARY") return NameIdPolicy::TEMPORARY;
  return std::nullopt;
}

const char* consent_mode_name(ConsentMode mode) {
  switch (mode) {
    case ConsentMode::OUT_OF_BAND: return "OUT_OF_BAND";
    case ConsentMode::UP_FRONT: return "UP_FRONT";
    case ConsentMode::TRANSACTIONAL: return "TRANSACTIONAL";
  }
  return "?";
}

std::optional<ConsentMode> parse_consent_mode(const std::string& name) {
  if (name == "OUT_OF_BAND") return ConsentMode::OUT_OF_BAND;
  if (name == "UP_FRONT") return ConsentMode::UP_FRONT;
  if (name == "TRANSACTIONAL") return ConsentMode::TRANSACTIONAL;
  return std::nullopt;
}

void EntityDescriptor::validate() const {
  if (entity_id.empty()) {
    throw Error(ErrorCode::InvalidDescriptor, "entity_id is empty");
  }
  if (role == EntityRole::SP) {
    if (required_attributes.empty()) {
      throw Error(ErrorCode::InvalidDescriptor,
                  "SP '" + entity_id + "' lacks required_attributes");
    }
    if (!nameid_policy.has_value()) {
      throw Error(ErrorCode::InvalidDescriptor,
                  "SP '" + entity_id + "' lacks nameid_policy");
    }
  }
  if (role == EntityRole::CA && !endpoints.empty()) {
    // The certificate authority stays out of transaction routing entirely.
    throw Error(ErrorCode::InvalidDescriptor,
                "CA '" + entity_id + "' must not expose flow endpoints");
  }
  if (static_encryption_key.has_value() && role != EntityRole::IDP &&
      role != EntityRole::SB) {
    throw Error(ErrorCode::InvalidDescriptor,
                "'" + entity_id + "': static_encryption_key is IdP/SB only");
  }
}

std::string EntityDescriptor::characteristics_key() const {
  ordered_json j;
  j["required_attributes"] = std::vector<std::string>(
      required_attributes.begin(), required_attributes.end());
  j["nameid_policy"] =
      nameid_policy ? nameid_policy_name(*nameid_policy) : "";
  j["bindings"] = bindings;
  return j.dump();
}

const EntityDescriptor& FederationRegistry::entity(
    const std::string& entity_id) const {
  auto it = entities.find(entity_id);
  if (it == entities.end()) {
    throw Error(ErrorCode::UnknownEntity, entity_id);
  }
  return it->second;
}

std::vector<std::string> FederationRegistry::entities_with_role(
    EntityRole role) const {
  std::vector<std::string> out;
  for (const auto& [id, desc] : entities) {
    if (desc.role == role) out.push_back(id);
  }
  return out;
}

std::string FederationRegistry::canonical_serialization() const {
  ordered_json j;
  ordered_json ents = ordered_json::object();
  for (const auto& [id, desc] : entities) {
    ordered_json e;
    e["entity_id"] = desc.entity_id;
    e["role"] = entity_role_name(desc.role);
    e["static_signing_key"] = desc.static_signing_key;
    e["static_encryption_key"] =
        desc.static_encryption_key ? ordered_json(*desc.static_encryption_key)
                                   : ordered_json(nullptr);
    e["endpoints"] = desc.endpoints;
    e["required_attributes"] = std::vector<std::string>(
        desc.required_attributes.begin(), desc.required_attributes.end());
    e["nameid_policy"] = desc.nameid_policy
                             ? ordered_json(nameid_policy_name(*desc.nameid_policy))
                             : ordered_json(nullptr);
    e["bindings"] = desc.bindings;
    ents[id] = std::move(e);
  }
  j["entities"] = std::move(ents);
  ordered_json grps = ordered_json::object();
  for (const auto& [pid, g] : groups) {
    ordered_json e;
    e["proxy_id"] = g.proxy_id;
    e["required_attributes"] = std::vector<std::string>(
        g.required_attributes.begin(), g.required_attributes.end());
    e["nameid_policy"] = nameid_policy_name(g.nameid_policy);
    e["bindings"] = g.bindings;
    e["member_sp_ids"] = std::vector<std::string>(g.member_sp_ids.begin(),
                                                  g.member_sp_ids.end());
    e["ungrouped"] = g.ungrouped;
    grps[pid] = std::move(e);
  }
  j["groups"] = std::move(grps);
  j["ca_trust_root"] = ca_trust_root;
  ordered_json pol;
  pol["min_group_size"] = policy.min_group_size;
  pol["onetime_cert_validity"] = policy.onetime_cert_validity;
  pol["consent_mode_default"] = consent_mode_name(policy.consent_mode_default);
  ordered_json arp = ordered_json::object();
  for (const auto& [pid, attrs] : policy.attribute_release_policy) {
    arp[pid] = std::vector<std::string>(attrs.begin(), attrs.end());
  }
  pol["attribute_release_policy"] = std::move(arp);
  j["policy"] = std::move(pol);
  return j.dump();
}

FederationRegistry register_entity(const FederationRegistry& registry,
                                   const EntityDescriptor& desc) {
  desc.validate();
  if (registry.has_entity(desc.entity_id)) {
    throw Error(ErrorCode::DuplicateEntity, desc.entity_id);
  }
  FederationRegistry out = registry;
  out.entities[desc.entity_id] = desc;
  return out;
}

FederationRegistry group_sps(const FederationRegistry& registry,
                             RandomSource& rng) {
  FederationRegistry out = registry;
  out.groups.clear();
  out.policy.attribute_release_policy.clear();

  // std::map keys give a deterministic iteration order, so group
  // composition and proxy id assignment depend only on (registry, seed).
  std::map<std::string, std::vector<std::string>> by_characteristics;
  for (const auto& [id, desc] : registry.entities) {
    if (desc.role != EntityRole::SP) continue;
    by_characteristics[desc.characteristics_key()].push_back(id);
  }

  for (const auto& [key, members] : by_characteristics) {
    const EntityDescriptor& sample = registry.entities.at(members.front());
    SpProxyGroup group;
    group.proxy_id = "pxy-" + rng.token_hex(16);
    group.required_attributes = sample.required_attributes;
    group.nameid_policy = *sample.nameid_policy;
    group.bindings = sample.bindings;
    group.member_sp_ids.insert(members.begin(), members.end());
    group.ungrouped =
        static_cast<int>(group.member_sp_ids.size()) < out.policy.min_group_size;
    // R10: a proxy's release policy is exactly its members' required set.
    out.policy.attribute_release_policy[group.proxy_id] =
        group.required_attributes;
    out.groups[group.proxy_id] = std::move(group);
  }
  return out;
}

std::string lookup_proxy(const FederationRegistry& registry,
                         const std::string& sp_id) {
  if (!registry.has_entity(sp_id)) {
    throw Error(ErrorCode::UnknownEntity, sp_id);
  }
  for (const auto& [pid, group] : registry.groups) {
    if (group.member_sp_ids.count(sp_id)) {
      if (group.ungrouped) {
        throw Error(ErrorCode::Ungrouped, sp_id);
      }
      return pid;
    }
  }
  throw Error(ErrorCode::Ungrouped, sp_id);
}

}  // namespace pefim
