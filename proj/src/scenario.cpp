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

#include "pefim/scenario.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "pefim/errors.hpp"

namespace pefim {

namespace fs = std::filesystem;

namespace {

[[noreturn]] void config_fail(const std::string& path, const std::string& why) {
  throw Error(ErrorCode::ConfigError, path + ": " + why);
}

std::string req_string(const Record& r, const std::string& path,
                       const std::string& key) {
  if (!r.contains(key)) config_fail(path + "." + key, "missing");
  if (!r.at(key).is_string()) config_fail(path + "." + key, "not a string");
  std::string value = r.at(key).get<std::string>();
  if (value.empty()) config_fail(path + "." + key, "empty");
  return value;
}

std::string opt_string(const Record& r, const std::string& key,
                       const std::string& fallback) {
  return r.contains(key) ? r.at(key).get<std::string>() : fallback;
}

std::set<std::string> string_set(const Record& r, const std::string& path,
                                 const std::string& key) {
  std::set<std::string> out;
  if (!r.contains(key)) return out;
  if (!r.at(key).is_array()) config_fail(path + "." + key, "not an array");
  for (const auto& item : r.at(key)) out.insert(item.get<std::string>());
  return out;
}

void check_ref(const std::set<std::string>& known, const std::string& value,
               const std::string& path, const std::string& what) {
  if (!known.count(value)) {
    config_fail(path, "unknown " + what + " '" + value + "'");
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::ConfigError, path + ": unreadable");
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
}

}  // namespace

Scenario scenario_from_record(const Record& r) {
  Scenario s;
  s.name = req_string(r, "scenario", "name");
  if (r.contains("seed")) s.seed = r.at("seed").get<uint64_t>();
  if (r.contains("canonical_matrix")) {
    s.canonical_matrix = r.at("canonical_matrix").get<bool>();
  }
  if (r.contains("min_group_size")) {
    s.min_group_size = r.at("min_group_size").get<int>();
  }
  if (r.contains("consent_mode_default")) {
    auto parsed =
        parse_consent_mode(r.at("consent_mode_default").get<std::string>());
    if (!parsed) config_fail("scenario.consent_mode_default", "unknown mode");
    s.consent_mode_default = *parsed;
  }
  if (r.contains("faults") && r.at("faults").contains("disable_encryption")) {
    s.faults.disable_encryption =
        r.at("faults").at("disable_encryption").get<bool>();
  }

  std::set<std::string> idp_ids, sp_ids, principal_ids, ws_ids;
  if (r.contains("idps")) {
    size_t i = 0;
    for (const auto& item : r.at("idps")) {
      std::string path = "idps[" + std::to_string(i++) + "]";
      ScenarioIdp idp;
      idp.id = req_string(item, path, "id");
      idp.home_domain = req_string(item, path, "home_domain");
      if (!idp_ids.insert(idp.id).second) config_fail(path + ".id", "duplicate");
      s.idps.push_back(std::move(idp));
    }
  }
  if (r.contains("sps")) {
    size_t i = 0;
    for (const auto& item : r.at("sps")) {
      std::string path = "sps[" + std::to_string(i++) + "]";
      ScenarioSp sp;
      sp.id = req_string(item, path, "id");
      sp.required_attributes = string_set(item, path, "required_attributes");
      if (sp.required_attributes.empty()) {
        config_fail(path + ".required_attributes", "missing or empty");
      }
      if (item.contains("nameid_policy")) {
        auto parsed =
            parse_nameid_policy(item.at("nameid_policy").get<std::string>());
        if (!parsed) config_fail(path + ".nameid_policy", "unknown policy");
        sp.nameid_policy = *parsed;
      }
      if (!sp_ids.insert(sp.id).second) config_fail(path + ".id", "duplicate");
      s.sps.push_back(std::move(sp));
    }
  }
  if (r.contains("principals")) {
    size_t i = 0;
    for (const auto& item : r.at("principals")) {
      std::string path = "principals[" + std::to_string(i++) + "]";
      ScenarioPrincipal p;
      p.id = req_string(item, path, "id");
      p.idp = req_string(item, path, "idp");
      check_ref(idp_ids, p.idp, path + ".idp", "IdP");
      if (item.contains("consent_willing")) {
        p.consent_willing = item.at("consent_willing").get<bool>();
      }
      if (item.contains("attributes")) {
        for (auto it = item.at("attributes").begin();
             it != item.at("attributes").end(); ++it) {
          p.attributes[it.key()] = it.value().get<std::string>();
        }
      }
      if (!principal_ids.insert(p.id).second) {
        config_fail(path + ".id", "duplicate");
      }
      s.principals.push_back(std::move(p));
    }
  }
  if (r.contains("ws_clients")) {
    size_t i = 0;
    for (const auto& item : r.at("ws_clients")) {
      std::string path = "ws_clients[" + std::to_string(i++) + "]";
      ScenarioWsClient c;
      c.id = req_string(item, path, "id");
      c.principal = req_string(item, path, "principal");
      check_ref(principal_ids, c.principal, path + ".principal", "principal");
      if (!ws_ids.insert(c.id).second) config_fail(path + ".id", "duplicate");
      s.ws_clients.push_back(std::move(c));
    }
  }

  if (r.contains("steps")) {
    size_t i = 0;
    for (const auto& step : r.at("steps")) {
      std::string path = "steps[" + std::to_string(i++) + "]";
      std::string op = req_string(step, path, "op");
      auto check_grant_target = [&](const Record& holder,
                                    const std::string& hpath) {
        if (holder.contains("sp")) {
          check_ref(sp_ids, holder.at("sp").get<std::string>(), hpath + ".sp",
                    "SP");
        } else if (holder.contains("link")) {
          if (!holder.at("link").is_array() || holder.at("link").size() != 2) {
            config_fail(hpath + ".link", "needs exactly two SP ids");
          }
          for (const auto& sp : holder.at("link")) {
            check_ref(sp_ids, sp.get<std::string>(), hpath + ".link", "SP");
          }
        } else {
          config_fail(hpath, "names neither sp nor link");
        }
      };
      if (op == "websso") {
        check_ref(principal_ids, req_string(step, path, "principal"),
                  path + ".principal", "principal");
        check_ref(sp_ids, req_string(step, path, "sp"), path + ".sp", "SP");
      } else if (op == "portal") {
        check_ref(principal_ids, req_string(step, path, "principal"),
                  path + ".principal", "principal");
        if (step.contains("grant")) check_grant_target(step.at("grant"),
                                                       path + ".grant");
      } else if (op == "wstrust") {
        check_ref(ws_ids, req_string(step, path, "client"), path + ".client",
                  "WS client");
        check_ref(sp_ids, req_string(step, path, "sp"), path + ".sp", "SP");
      } else if (op == "send_message") {
        check_ref(sp_ids, req_string(step, path, "sp"), path + ".sp", "SP");
      } else if (op == "reply_message") {
        check_ref(principal_ids, req_string(step, path, "principal"),
                  path + ".principal", "principal");
      } else if (op == "link") {
        check_ref(sp_ids, req_string(step, path, "sp"), path + ".sp", "SP");
        check_ref(sp_ids, req_string(step, path, "target_sp"),
                  path + ".target_sp", "SP");
      } else if (op == "replay") {
        std::string what = req_string(step, path, "what");
        if (what != "assertion" && what != "ws_token") {
          config_fail(path + ".what", "must be 'assertion' or 'ws_token'");
        }
      } else if (op == "probe") {
        check_ref(idp_ids, req_string(step, path, "idp"), path + ".idp", "IdP");
      } else if (op == "consent_grant" || op == "revoke_consent") {
        check_ref(principal_ids, req_string(step, path, "principal"),
                  path + ".principal", "principal");
        check_grant_target(step, path);
      } else {
        config_fail(path + ".op", "unknown operation '" + op + "'");
      }
      s.steps.push_back(step);
    }
  }
  return s;
}

Scenario load_scenario(const std::string& path) {
  Record r;
  try {
    r = Record::parse(read_file(path));
  } catch (const Record::parse_error& err) {
    throw Error(ErrorCode::ConfigError,
                path + ": " + std::string(err.what()));
  }
  return scenario_from_record(r);
}

// ---------------------------------------------------------------------------
// Runner

ScenarioRunner::ScenarioRunner(Scenario scenario, RunOptions options)
    : scenario_(std::move(scenario)), options_(std::move(options)) {
  seed_ = options_.seed.value_or(scenario_.seed);
  effective_floor_ = options_.min_group_size.value_or(scenario_.min_group_size);
}

ScenarioRunner::~ScenarioRunner() { release_state_lock(); }

void ScenarioRunner::bootstrap() {
  if (bootstrapped_) return;
  bootstrapped_ = true;
  acquire_state_lock();

  rng_ = std::make_unique<DeterministicRng>(seed_);
  sim_ = std::make_unique<Simulation>(*rng_);

  // Key material is drawn in declaration order so (scenario, seed) pins
  // every identity in the world.
  SigningKeypair ca_keys = generate_signing_keypair(*rng_);
  SigningKeypair sb_keys = generate_signing_keypair(*rng_);
  SigningKeypair ds_keys = generate_signing_keypair(*rng_);
  Bytes sb_tid_key = rng_->bytes(32);
  std::map<std::string, SigningKeypair> idp_sign;
  std::map<std::string, BoxKeypair> idp_box;
  for (const auto& idp : scenario_.idps) {
    idp_sign.emplace(idp.id, generate_signing_keypair(*rng_));
    idp_box.emplace(idp.id, generate_box_keypair(*rng_));
    idp_tid_keys_.emplace(idp.id, rng_->bytes(32));
  }
  std::map<std::string, SigningKeypair> sp_sign;
  for (const auto& sp : scenario_.sps) {
    sp_sign.emplace(sp.id, generate_signing_keypair(*rng_));
  }

  FederationRegistry registry;
  registry.policy.min_group_size = effective_floor_;
  registry.policy.consent_mode_default = scenario_.consent_mode_default;
  registry.ca_trust_root = hex_encode(ca_keys.public_key);
  {
    EntityDescriptor ca;
    ca.entity_id = kCaId;
    ca.role = EntityRole::CA;
    ca.static_signing_key = hex_encode(ca_keys.public_key);
    registry = register_entity(registry, ca);
  }
  {
    EntityDescriptor sb;
    sb.entity_id = kSbId;
    sb.role = EntityRole::SB;
    sb.static_signing_key = hex_encode(sb_keys.public_key);
    sb.endpoints["relay"] = "mail." + std::string(kSbId) + ".tld";
    registry = register_entity(registry, sb);
  }
  {
    EntityDescriptor ds;
    ds.entity_id = kDsId;
    ds.role = EntityRole::DISCOVERY;
    ds.static_signing_key = hex_encode(ds_keys.public_key);
    registry = register_entity(registry, ds);
  }
  for (const auto& idp : scenario_.idps) {
    EntityDescriptor e;
    e.entity_id = idp.id;
    e.role = EntityRole::IDP;
    e.static_signing_key = hex_encode(idp_sign.at(idp.id).public_key);
    e.static_encryption_key = hex_encode(idp_box.at(idp.id).public_key);
    e.endpoints["home_domain"] = idp.home_domain;
    registry = register_entity(registry, e);
  }
  for (const auto& sp : scenario_.sps) {
    EntityDescriptor e;
    e.entity_id = sp.id;
    e.role = EntityRole::SP;
    e.static_signing_key = hex_encode(sp_sign.at(sp.id).public_key);
    e.required_attributes = sp.required_attributes;
    e.nameid_policy = sp.nameid_policy;
    e.bindings = {"redirect"};
    registry = register_entity(registry, e);
  }
  registry = group_sps(registry, *rng_);

  auto shared = std::make_shared<SharedConfig>();
  shared->registry = registry;
  shared->trust_root = ca_keys.public_key;
  shared->ca_id = kCaId;
  shared->sb_id = kSbId;
  shared->ds_id = kDsId;
  for (const auto& idp : scenario_.idps) {
    shared->domain_to_idp[idp.home_domain] = idp.id;
    shared->mail_domain_owner["mail." + idp.home_domain] = idp.id;
  }
  shared->mail_domain_owner["mail." + std::string(kSbId) + ".tld"] = kSbId;
  shared->faults = scenario_.faults;
  config_ = shared;

  std::set<std::string> ws_allowlist;
  for (const auto& c : scenario_.ws_clients) ws_allowlist.insert(c.id);

  sim_->add_actor(std::make_unique<CaActor>(kCaId, config_, ca_keys,
                                            ws_allowlist));
  sim_->add_actor(std::make_unique<DiscoveryActor>(kDsId, config_));
  sim_->add_actor(
      std::make_unique<SbActor>(kSbId, config_, sb_keys, sb_tid_key));
  for (const auto& idp : scenario_.idps) {
    sim_->add_actor(std::make_unique<IdpActor>(
        idp.id, config_, idp_sign.at(idp.id), idp_box.at(idp.id),
        idp_tid_keys_.at(idp.id), idp.home_domain));
  }
  for (const auto& sp : scenario_.sps) {
    sim_->add_actor(
        std::make_unique<SpActor>(sp.id, config_, sp_sign.at(sp.id)));
  }
  std::map<std::string, std::string> domain_of;
  for (const auto& idp : scenario_.idps) domain_of[idp.id] = idp.home_domain;
  for (const auto& p : scenario_.principals) {
    PrincipalMeta meta;
    meta.reference_id = "ref-" + rng_->token_hex(8);
    meta.secret = "pw-" + rng_->token_hex(8);
    meta.client_addr = "addr-" + p.id + "-" + rng_->token_hex(4);
    meta.idp = p.idp;
    meta.home_domain = domain_of.at(p.idp);
    meta.user_identity = p.id + "@" + meta.home_domain;
    meta.ua_id = "ua-" + p.id;
    principal_meta_[p.id] = meta;

    sim_->add_actor(std::make_unique<UserAgentActor>(
        meta.ua_id, config_, p.id, meta.secret, meta.client_addr, p.idp,
        meta.home_domain, meta.user_identity, p.consent_willing));
    IdpActor::Principal record;
    record.principal_id = p.id;
    record.reference_id = meta.reference_id;
    record.credential_secret = meta.secret;
    record.user_identity = meta.user_identity;
    record.ua_actor = meta.ua_id;
    record.attributes = p.attributes;
    idp(p.idp).add_principal(std::move(record));
  }
  for (const auto& c : scenario_.ws_clients) {
    const PrincipalMeta& meta = principal_meta_.at(c.principal);
    sim_->add_actor(std::make_unique<WsClientActor>(
        c.id, config_, c.id, c.principal, meta.secret, meta.idp));
  }

  load_persisted_state();
}

CaActor& ScenarioRunner::ca() { return static_cast<CaActor&>(sim_->actor(kCaId)); }
SbActor& ScenarioRunner::sb() { return static_cast<SbActor&>(sim_->actor(kSbId)); }
DiscoveryActor& ScenarioRunner::discovery() {
  return static_cast<DiscoveryActor&>(sim_->actor(kDsId));
}
IdpActor& ScenarioRunner::idp(const std::string& id) {
  return static_cast<IdpActor&>(sim_->actor(id));
}
SpActor& ScenarioRunner::sp(const std::string& id) {
  return static_cast<SpActor&>(sim_->actor(id));
}
UserAgentActor& ScenarioRunner::user_agent(const std::string& principal) {
  return static_cast<UserAgentActor&>(
      sim_->actor(principal_meta_.at(principal).ua_id));
}
WsClientActor& ScenarioRunner::ws_client(const std::string& id) {
  return static_cast<WsClientActor&>(sim_->actor(id));
}

std::string ScenarioRunner::tid1_of(const std::string& principal) const {
  const PrincipalMeta& meta = principal_meta_.at(principal);
  return derive_tid_value(idp_tid_keys_.at(meta.idp), meta.reference_id,
                          {kSbId}, TidTier::TID1);
}

std::string ScenarioRunner::next_flow_id() {
  char buf[24];
  std::snprintf(buf, sizeof buf, "flow-%04d", ++flow_counter_);
  return buf;
}

uint64_t ScenarioRunner::quiesce() {
  uint64_t n = options_.stress ? sim_->run_stress() : sim_->run_until_quiescent();
  delivered_ += n;
  return n;
}

const SpSession& ScenarioRunner::session_of(const std::string& sp_id,
                                            const Record& step) {
  const auto& sessions = sp(sp_id).sessions();
  if (sessions.empty()) {
    throw Error(ErrorCode::ConfigError,
                "step needs an established session at " + sp_id);
  }
  size_t index = sessions.size() - 1;
  if (step.contains("session")) index = step.at("session").get<size_t>();
  if (index >= sessions.size()) {
    throw Error(ErrorCode::ConfigError,
                "session index out of range at " + sp_id);
  }
  return sessions[index];
}

std::pair<std::string, std::set<std::string>>
ScenarioRunner::resolve_consent_target(const Record& step) const {
  if (step.contains("sp")) {
    std::string proxy =
        lookup_proxy(config_->registry, step.at("sp").get<std::string>());
    std::set<std::string> attrs;
    if (step.contains("attributes")) {
      for (const auto& a : step.at("attributes")) {
        attrs.insert(a.get<std::string>());
      }
    } else {
      attrs = config_->registry.groups.at(proxy).required_attributes;
    }
    return {proxy, attrs};
  }
  std::string a = step.at("link").at(0).get<std::string>();
  std::string b = step.at("link").at(1).get<std::string>();
  return {link_target(a, b), {}};
}

void ScenarioRunner::execute_step(const Record& step) {
  bootstrap();
  std::string op = step.at("op").get<std::string>();
  if (op == "websso") {
    step_websso(step);
  } else if (op == "portal") {
    step_portal(step);
  } else if (op == "wstrust") {
    step_wstrust(step);
  } else if (op == "send_message") {
    step_send_message(step);
  } else if (op == "reply_message") {
    step_reply_message(step);
  } else if (op == "link") {
    step_link(step);
  } else if (op == "replay") {
    step_replay(step);
  } else if (op == "probe") {
    step_probe(step);
  } else if (op == "consent_grant") {
    step_consent_grant(step);
  } else if (op == "revoke_consent") {
    step_revoke_consent(step);
  } else {
    throw Error(ErrorCode::ConfigError, "unknown step op '" + op + "'");
  }
  quiesce();
}

void ScenarioRunner::step_websso(const Record& step) {
  std::string principal = step.at("principal").get<std::string>();
  Record kick;
  kick["type"] = "ua_visit";
  kick["flow"] = next_flow_id();
  kick["sp"] = step.at("sp").get<std::string>();
  sim_->send("scenario", principal_meta_.at(principal).ua_id, kick);
}

void ScenarioRunner::step_portal(const Record& step) {
  std::string principal = step.at("principal").get<std::string>();
  Record kick;
  kick["type"] = "portal_grant";
  kick["flow"] = next_flow_id();
  if (step.contains("grant")) {
    Record grant = step.at("grant");
    if (grant.contains("sp")) {
      // The store keys service consent by proxy, not by member SP.
      grant["sp"] = grant.at("sp");
    }
    kick["grant"] = grant;
  }
  sim_->send("scenario", principal_meta_.at(principal).ua_id, kick);
}

void ScenarioRunner::step_wstrust(const Record& step) {
  Record kick;
  kick["type"] = "ws_start";
  kick["flow"] = next_flow_id();
  kick["target_sp"] = step.at("sp");
  kick["token_type"] = opt_string(step, "token_type", "HOLDER_OF_KEY");
  sim_->send("scenario", step.at("client").get<std::string>(), kick);
}

void ScenarioRunner::step_send_message(const Record& step) {
  std::string sp_id = step.at("sp").get<std::string>();
  const SpSession& session = session_of(sp_id, step);
  size_t count = step.contains("count") ? step.at("count").get<size_t>() : 1;
  for (size_t i = 0; i < count; ++i) {
    Record kick;
    kick["type"] = "msg_send";
    kick["flow"] = next_flow_id();
    kick["tid2"] = session.tid2;
    kick["subject"] = opt_string(step, "subject", "notice") + " #" +
                      std::to_string(i + 1);
    kick["body"] = opt_string(step, "body", "service update");
    sim_->send("scenario", sp_id, kick);
  }
}

void ScenarioRunner::step_reply_message(const Record& step) {
  std::string principal = step.at("principal").get<std::string>();
  Record kick;
  kick["type"] = "msg_reply";
  kick["flow"] = next_flow_id();
  kick["index"] = step.contains("mailbox_index")
                      ? step.at("mailbox_index").get<size_t>()
                      : 0;
  kick["subject"] = opt_string(step, "subject", "re: notice");
  kick["body"] = opt_string(step, "body", "acknowledged");
  sim_->send("scenario", principal_meta_.at(principal).ua_id, kick);
}

void ScenarioRunner::step_link(const Record& step) {
  std::string sp_id = step.at("sp").get<std::string>();
  const SpSession& session = session_of(sp_id, step);
  Record kick;
  kick["type"] = "link_start";
  kick["flow"] = next_flow_id();
  kick["tid2"] = session.tid2;
  kick["target_sp"] = step.at("target_sp");
  kick["payload"] = step.contains("payload") ? step.at("payload")
                                             : Record{{"note", "shared"}};
  sim_->send("scenario", sp_id, kick);
}

void ScenarioRunner::step_replay(const Record& step) {
  std::string what = step.at("what").get<std::string>();
  std::string wanted_type = what == "assertion" ? "assertion_delivery"
                                                : "ws_invoke";
  // Scan the frozen transcript for the newest matching delivery and
  // re-inject it verbatim, address token and all.
  const TranscriptEntry* found = nullptr;
  for (const auto& entry : sim_->transcript()) {
    if (entry.kind != TranscriptEntry::Kind::DELIVER) continue;
    Record body = Record::parse(entry.body);
    if (body.at("type").get<std::string>() == wanted_type) found = &entry;
  }
  if (found == nullptr) {
    throw Error(ErrorCode::ConfigError,
                "replay step found no recorded " + what);
  }
  size_t count = step.contains("count") ? step.at("count").get<size_t>() : 1;
  Record body = Record::parse(found->body);
  for (size_t i = 0; i < count; ++i) {
    sim_->send(found->from, found->to, body, found->client_addr);
  }
  expected_replays_ += count;
}

void ScenarioRunner::step_probe(const Record& step) {
  size_t count = step.contains("count") ? step.at("count").get<size_t>() : 1;
  for (size_t i = 0; i < count; ++i) {
    Record kick;
    kick["type"] = "attr_probe";
    kick["flow"] = next_flow_id();
    kick["probe_id"] = "prb-" + rng_->token_hex(4);
    sim_->send("scenario", step.at("idp").get<std::string>(), kick);
  }
  expected_probes_ += count;
}

void ScenarioRunner::step_consent_grant(const Record& step) {
  std::string principal = step.at("principal").get<std::string>();
  auto [target, attrs] = resolve_consent_target(step);
  ConsentMode mode = config_->registry.policy.consent_mode_default;
  if (step.contains("mode")) {
    auto parsed = parse_consent_mode(step.at("mode").get<std::string>());
    if (!parsed) throw Error(ErrorCode::ConfigError, "bad consent mode");
    mode = *parsed;
  }
  const ConsentRecord& rec =
      sb().consent_store().grant(config_->registry, tid1_of(principal), target,
                                 attrs, mode, sim_->now(), sim_->rng());
  Record detail;
  detail["flow"] = "";
  detail["record_id"] = rec.record_id;
  detail["target"] = target;
  sim_->note(kSbId, "consent_granted", detail);
}

void ScenarioRunner::step_revoke_consent(const Record& step) {
  std::string principal = step.at("principal").get<std::string>();
  auto [target, attrs] = resolve_consent_target(step);
  std::string record_id;
  for (const auto& rec : sb().consent_store().list(tid1_of(principal))) {
    if (rec.target == target) record_id = rec.record_id;
  }
  Record detail;
  detail["flow"] = "";
  detail["target"] = target;
  try {
    if (record_id.empty()) {
      throw Error(ErrorCode::UnknownRecord, "no consent for " + target);
    }
    sb().consent_store().revoke(record_id, sim_->now());
    detail["result"] = "revoked";
    detail["record_id"] = record_id;
    sim_->note(kSbId, "consent_revoked", detail);
  } catch (const Error& err) {
    detail["code"] = error_code_name(err.code());
    sim_->note(kSbId, "error", detail);
  }
}

AuditInput ScenarioRunner::collect_audit_input() {
  bootstrap();
  AuditInput input;
  input.registry = config_->registry;
  input.canonical_matrix = scenario_.canonical_matrix;
  input.min_group_size = effective_floor_;
  input.expected_replays = expected_replays_;
  input.expected_probe_rejections = expected_probes_;

  input.ledgers.push_back({kCaId, MatrixRole::CA, ca().ledger()});
  input.ledgers.push_back({kSbId, MatrixRole::SB, sb().ledger()});
  input.ledgers.push_back({kDsId, MatrixRole::DISCOVERY, discovery().ledger()});
  for (const auto& i : scenario_.idps) {
    input.ledgers.push_back({i.id, MatrixRole::IDP, idp(i.id).ledger()});
  }
  for (const auto& s : scenario_.sps) {
    input.ledgers.push_back({s.id, MatrixRole::SP, sp(s.id).ledger()});
    for (const auto& session : sp(s.id).sessions()) {
      input.sessions.push_back(
          {s.id, session.flow, session.tid2, session.attributes});
    }
  }
  for (const auto& entry : sim_->transcript()) {
    if (entry.kind != TranscriptEntry::Kind::NOTE) continue;
    input.notes.push_back(
        {entry.time, entry.from, entry.label, Record::parse(entry.body)});
  }
  for (const auto& p : scenario_.principals) {
    input.user_identities.insert(principal_meta_.at(p.id).user_identity);
    for (const auto& [name, value] : p.attributes) {
      input.attribute_values.insert(value);
    }
  }
  for (const auto& [tid, entry] : sb().mapper().table().entries()) {
    if (entry.tier != TidTier::TID3) continue;
    std::string target = link_target(entry.scope.at(0), entry.scope.at(1));
    for (const auto& rec : sb().consent_store().all()) {
      if (rec.target == target) {
        input.consented_link_tids.insert(tid);
        break;
      }
    }
  }
  return input;
}

RunResult ScenarioRunner::run() {
  bootstrap();
  for (const auto& step : scenario_.steps) execute_step(step);
  quiesce();

  AuditInput input = collect_audit_input();
  RunResult result;
  result.report = run_audit(input);
  result.report_text = render_report(result.report);
  result.delivered = delivered_;
  result.seed = seed_;
  result.registry_digest = registry_digest();
  result.audit_passed = result.report.passed();

  if (!options_.out_dir.empty()) write_outputs(result);
  if (!options_.state_dir.empty()) save_persisted_state();
  release_state_lock();
  return result;
}

std::string ScenarioRunner::registry_digest() const {
  return key_fingerprint(to_bytes(config_->registry.canonical_serialization()));
}

void ScenarioRunner::write_outputs(const RunResult& result) const {
  fs::create_directories(options_.out_dir);
  fs::path dir(options_.out_dir);

  std::ostringstream transcript;
  for (const auto& entry : sim_->transcript()) {
    transcript << entry.to_record().dump() << "\n";
  }
  write_file(dir / "transcript.jsonl", transcript.str());

  // collect_audit_input is const-incompatible here only because of the
  // bootstrap guard; the world is already frozen.
  AuditInput input = const_cast<ScenarioRunner*>(this)->collect_audit_input();
  Record ledgers = Record::object();
  for (const auto& view : input.ledgers) {
    Record events = Record::array();
    for (const auto& event : view.ledger.events()) {
      events.push_back(Record{{"time", event.time},
                              {"kind", element_kind_name(event.kind)},
                              {"value", event.value}});
    }
    ledgers[view.owner] =
        Record{{"role", matrix_role_name(view.role)}, {"events", events}};
  }
  write_file(dir / "ledgers.json", ledgers.dump(2) + "\n");

  Record bundle = audit_input_to_record(input);
  bundle["meta"] = Record{{"scenario", scenario_.name},
                          {"seed", seed_},
                          {"stress", options_.stress},
                          {"delivered", result.delivered},
                          {"registry_digest", result.registry_digest}};
  write_file(dir / "bundle.json", bundle.dump(2) + "\n");
  write_file(dir / "report.txt", result.report_text);
}

void ScenarioRunner::load_persisted_state() {
  if (options_.state_dir.empty()) return;
  fs::path dir(options_.state_dir);
  ConsentStore store;
  std::map<std::string, std::string> sessions;
  if (fs::exists(dir / "consents.json")) {
    store = ConsentStore::from_record(
        Record::parse(read_file((dir / "consents.json").string())));
  }
  if (fs::exists(dir / "sessions.json")) {
    Record r = Record::parse(read_file((dir / "sessions.json").string()));
    for (auto it = r.begin(); it != r.end(); ++it) {
      sessions[it.key()] = it.value().get<std::string>();
    }
  }
  sb().restore_state(std::move(store), std::move(sessions));
}

void ScenarioRunner::save_persisted_state() const {
  fs::path dir(options_.state_dir);
  fs::create_directories(dir);
  SbActor& broker = const_cast<ScenarioRunner*>(this)->sb();
  write_file(dir / "consents.json",
             broker.consent_store().to_record().dump(2) + "\n");
  Record sessions = Record::object();
  for (const auto& [addr, tid1] : broker.ua_sessions()) sessions[addr] = tid1;
  write_file(dir / "sessions.json", sessions.dump(2) + "\n");
  write_file(dir / "registry.json",
             registry_to_record(config_->registry).dump(2) + "\n");
}

void ScenarioRunner::acquire_state_lock() {
  if (options_.state_dir.empty()) return;
  fs::path lock = fs::path(options_.state_dir) / ".lock";
  fs::create_directories(options_.state_dir);
  if (fs::exists(lock)) {
    throw Error(ErrorCode::ConfigError,
                "state directory locked: " + lock.string());
  }
  write_file(lock, "held\n");
  lock_held_ = true;
}

void ScenarioRunner::release_state_lock() {
  if (!lock_held_) return;
  lock_held_ = false;
  std::error_code ec;
  fs::remove(fs::path(options_.state_dir) / ".lock", ec);
}

// ---------------------------------------------------------------------------
// Bundle round trip

Record registry_to_record(const FederationRegistry& registry) {
  Record entities = Record::array();
  for (const auto& [id, e] : registry.entities) {
    Record item;
    item["entity_id"] = e.entity_id;
    item["role"] = entity_role_name(e.role);
    item["static_signing_key"] = e.static_signing_key;
    if (e.static_encryption_key) {
      item["static_encryption_key"] = *e.static_encryption_key;
    }
    item["endpoints"] = e.endpoints;
    item["required_attributes"] = e.required_attributes;
    if (e.nameid_policy) {
      item["nameid_policy"] = nameid_policy_name(*e.nameid_policy);
    }
    item["bindings"] = e.bindings;
    entities.push_back(item);
  }
  Record groups = Record::array();
  for (const auto& [id, g] : registry.groups) {
    groups.push_back(Record{{"proxy_id", g.proxy_id},
                            {"required_attributes", g.required_attributes},
                            {"nameid_policy", nameid_policy_name(g.nameid_policy)},
                            {"bindings", g.bindings},
                            {"member_sp_ids", g.member_sp_ids},
                            {"ungrouped", g.ungrouped}});
  }
  Record policy;
  policy["min_group_size"] = registry.policy.min_group_size;
  policy["onetime_cert_validity"] = registry.policy.onetime_cert_validity;
  policy["consent_mode_default"] =
      consent_mode_name(registry.policy.consent_mode_default);
  Record release = Record::object();
  for (const auto& [proxy, attrs] : registry.policy.attribute_release_policy) {
    release[proxy] = attrs;
  }
  policy["attribute_release_policy"] = release;

  Record out;
  out["entities"] = entities;
  out["groups"] = groups;
  out["ca_trust_root"] = registry.ca_trust_root;
  out["policy"] = policy;
  return out;
}

FederationRegistry registry_from_record(const Record& r) {
  FederationRegistry registry;
  registry.ca_trust_root = r.at("ca_trust_root").get<std::string>();
  const Record& policy = r.at("policy");
  registry.policy.min_group_size = policy.at("min_group_size").get<int>();
  registry.policy.onetime_cert_validity =
      policy.at("onetime_cert_validity").get<uint64_t>();
  auto mode = parse_consent_mode(
      policy.at("consent_mode_default").get<std::string>());
  if (!mode) throw Error(ErrorCode::ConfigError, "policy.consent_mode_default");
  registry.policy.consent_mode_default = *mode;
  for (auto it = policy.at("attribute_release_policy").begin();
       it != policy.at("attribute_release_policy").end(); ++it) {
    std::set<std::string> attrs;
    for (const auto& a : it.value()) attrs.insert(a.get<std::string>());
    registry.policy.attribute_release_policy[it.key()] = attrs;
  }
  for (const auto& item : r.at("entities")) {
    EntityDescriptor e;
    e.entity_id = item.at("entity_id").get<std::string>();
    auto role = parse_entity_role(item.at("role").get<std::string>());
    if (!role) throw Error(ErrorCode::ConfigError, "entities[].role");
    e.role = *role;
    e.static_signing_key = item.at("static_signing_key").get<std::string>();
    if (item.contains("static_encryption_key")) {
      e.static_encryption_key =
          item.at("static_encryption_key").get<std::string>();
    }
    for (auto it = item.at("endpoints").begin(); it != item.at("endpoints").end();
         ++it) {
      e.endpoints[it.key()] = it.value().get<std::string>();
    }
    for (const auto& a : item.at("required_attributes")) {
      e.required_attributes.insert(a.get<std::string>());
    }
    if (item.contains("nameid_policy")) {
      e.nameid_policy =
          parse_nameid_policy(item.at("nameid_policy").get<std::string>());
    }
    for (const auto& b : item.at("bindings")) {
      e.bindings.push_back(b.get<std::string>());
    }
    registry.entities[e.entity_id] = e;
  }
  for (const auto& item : r.at("groups")) {
    SpProxyGroup g;
    g.proxy_id = item.at("proxy_id").get<std::string>();
    for (const auto& a : item.at("required_attributes")) {
      g.required_attributes.insert(a.get<std::string>());
    }
    auto policy2 = parse_nameid_policy(item.at("nameid_policy").get<std::string>());
    if (!policy2) throw Error(ErrorCode::ConfigError, "groups[].nameid_policy");
    g.nameid_policy = *policy2;
    for (const auto& b : item.at("bindings")) {
      g.bindings.push_back(b.get<std::string>());
    }
    for (const auto& m : item.at("member_sp_ids")) {
      g.member_sp_ids.insert(m.get<std::string>());
    }
    g.ungrouped = item.at("ungrouped").get<bool>();
    registry.groups[g.proxy_id] = g;
  }
  return registry;
}

Record audit_input_to_record(const AuditInput& input) {
  Record out;
  out["registry"] = registry_to_record(input.registry);
  Record notes = Record::array();
  for (const auto& note : input.notes) {
    notes.push_back(Record{{"time", note.time},
                           {"actor", note.actor},
                           {"label", note.label},
                           {"detail", note.detail}});
  }
  out["notes"] = notes;
  Record sessions = Record::array();
  for (const auto& s : input.sessions) {
    Record attrs = Record::object();
    for (const auto& [name, value] : s.attributes) attrs[name] = value;
    sessions.push_back(Record{{"sp", s.sp},
                              {"flow", s.flow},
                              {"tid2", s.tid2},
                              {"attributes", attrs}});
  }
  out["sessions"] = sessions;
  out["attribute_values"] = input.attribute_values;
  out["user_identities"] = input.user_identities;
  out["consented_link_tids"] = input.consented_link_tids;
  out["expected_replays"] = input.expected_replays;
  out["expected_probe_rejections"] = input.expected_probe_rejections;
  out["canonical_matrix"] = input.canonical_matrix;
  out["min_group_size"] = input.min_group_size;
  return out;
}

AuditInput audit_input_from_records(const Record& bundle,
                                    const Record& ledgers) {
  AuditInput input;
  input.registry = registry_from_record(bundle.at("registry"));
  for (const auto& note : bundle.at("notes")) {
    input.notes.push_back({note.at("time").get<uint64_t>(),
                           note.at("actor").get<std::string>(),
                           note.at("label").get<std::string>(),
                           note.at("detail")});
  }
  for (const auto& s : bundle.at("sessions")) {
    SessionView view;
    view.sp = s.at("sp").get<std::string>();
    view.flow = s.at("flow").get<std::string>();
    view.tid2 = s.at("tid2").get<std::string>();
    for (auto it = s.at("attributes").begin(); it != s.at("attributes").end();
         ++it) {
      view.attributes[it.key()] = it.value().get<std::string>();
    }
    input.sessions.push_back(std::move(view));
  }
  for (const auto& v : bundle.at("attribute_values")) {
    input.attribute_values.insert(v.get<std::string>());
  }
  for (const auto& v : bundle.at("user_identities")) {
    input.user_identities.insert(v.get<std::string>());
  }
  for (const auto& v : bundle.at("consented_link_tids")) {
    input.consented_link_tids.insert(v.get<std::string>());
  }
  input.expected_replays = bundle.at("expected_replays").get<size_t>();
  input.expected_probe_rejections =
      bundle.at("expected_probe_rejections").get<size_t>();
  input.canonical_matrix = bundle.at("canonical_matrix").get<bool>();
  input.min_group_size = bundle.at("min_group_size").get<int>();

  for (auto it = ledgers.begin(); it != ledgers.end(); ++it) {
    ActorLedgerView view;
    view.owner = it.key();
    std::string role = it.value().at("role").get<std::string>();
    if (role == "CA") view.role = MatrixRole::CA;
    else if (role == "IDP") view.role = MatrixRole::IDP;
    else if (role == "SB") view.role = MatrixRole::SB;
    else if (role == "DISCOVERY") view.role = MatrixRole::DISCOVERY;
    else if (role == "SP") view.role = MatrixRole::SP;
    else throw Error(ErrorCode::ConfigError, "ledgers: unknown role " + role);
    view.ledger = ObservationLedger(view.owner);
    for (const auto& event : it.value().at("events")) {
      auto kind = parse_element_kind(event.at("kind").get<std::string>());
      if (!kind) throw Error(ErrorCode::ConfigError, "ledgers: unknown kind");
      view.ledger.record(event.at("time").get<uint64_t>(), *kind,
                         event.at("value").get<std::string>());
    }
    input.ledgers.push_back(std::move(view));
  }
  return input;
}

AuditInput load_audit_input(const std::string& dir) {
  fs::path bundle_path = fs::path(dir) / "bundle.json";
  fs::path ledgers_path = fs::path(dir) / "ledgers.json";
  if (!fs::exists(bundle_path) || !fs::exists(ledgers_path)) {
    throw Error(ErrorCode::MissingTranscript, dir);
  }
  return audit_input_from_records(
      Record::parse(read_file(bundle_path.string())),
      Record::parse(read_file(ledgers_path.string())));
}

}  // namespace pefim
