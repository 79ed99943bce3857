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

#include "pefim/actors.hpp"

#include <algorithm>

#include "pefim/errors.hpp"

namespace pefim {

namespace {

std::string get_str(const Record& r, const char* key) {
  if (!r.contains(key) || !r.at(key).is_string()) {
    throw Error(ErrorCode::ConfigError, std::string("record missing ") + key);
  }
  return r.at(key).get<std::string>();
}

std::string flow_of(const Record& r) {
  return r.contains("flow") && r.at("flow").is_string()
             ? r.at("flow").get<std::string>()
             : "";
}

// <local>@<domain>, both parts non-empty.
std::pair<std::string, std::string> split_address(const std::string& addr) {
  size_t at = addr.find('@');
  if (at == std::string::npos || at == 0 || at + 1 == addr.size()) {
    throw Error(ErrorCode::UnresolvableLocalPart, addr);
  }
  return {addr.substr(0, at), addr.substr(at + 1)};
}

void note_error(Simulation& sim, const std::string& actor,
                const std::string& flow, const Error& err) {
  Record detail;
  detail["flow"] = flow;
  detail["code"] = error_code_name(err.code());
  detail["detail"] = err.detail();
  sim.note(actor, "error", detail);
}

std::string join_sorted(const std::set<std::string>& items) {
  std::string out;
  for (const auto& item : items) {
    if (!out.empty()) out += ",";
    out += item;
  }
  return out;
}

std::map<std::string, std::string> attrs_from_record(const Record& r) {
  std::map<std::string, std::string> out;
  for (auto it = r.begin(); it != r.end(); ++it) {
    out[it.key()] = it.value().get<std::string>();
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// CA

CaActor::CaActor(std::string id, SharedConfigPtr config,
                 SigningKeypair root_keys,
                 std::set<std::string> client_allowlist)
    : Actor(std::move(id)),
      config_(std::move(config)),
      root_keys_(std::move(root_keys)),
      client_allowlist_(std::move(client_allowlist)) {}

void CaActor::on_message(Simulation& sim, const SimEnvelope& env) {
  Record r = record_from_bytes(env.payload);
  std::string flow = flow_of(r);
  try {
    if (get_str(r, "type") != "cert_request") {
      throw Error(ErrorCode::ConfigError, "CA: unexpected " + get_str(r, "type"));
    }
    bool is_sp = config_->registry.has_entity(env.from) &&
                 config_->registry.entity(env.from).role == EntityRole::SP;
    if (!is_sp && !client_allowlist_.count(env.from)) {
      throw Error(ErrorCode::UnauthorizedRequester, env.from);
    }
    OneTimeCertificate cert = issue_onetime_cert(
        root_keys_.secret_key, get_str(r, "public_key"), sim.now(),
        config_->registry.policy.onetime_cert_validity, sim.rng());
    // The CA's whole knowledge of the transaction: a serial and a time.
    ledger().record(sim.now(), ElementKind::CERT_SERIAL, cert.serial);
    ledger().record(sim.now(), ElementKind::SIGNING_ROOT,
                    key_fingerprint(root_keys_.public_key));
    Record resp;
    resp["type"] = "cert_response";
    resp["flow"] = flow;
    resp["cert"] = cert_to_record(cert);
    sim.send(id(), env.from, resp);
  } catch (const Error& err) {
    note_error(sim, id(), flow, err);
    Record resp;
    resp["type"] = "cert_error";
    resp["flow"] = flow;
    resp["code"] = error_code_name(err.code());
    sim.send(id(), env.from, resp);
  }
}

// ---------------------------------------------------------------------------
// Discovery

DiscoveryActor::DiscoveryActor(std::string id, SharedConfigPtr config)
    : Actor(std::move(id)), config_(std::move(config)) {}

void DiscoveryActor::on_message(Simulation& sim, const SimEnvelope& env) {
  Record r = record_from_bytes(env.payload);
  std::string flow = flow_of(r);
  try {
    if (get_str(r, "type") != "discovery_query") {
      throw Error(ErrorCode::ConfigError, "DS: unexpected " + get_str(r, "type"));
    }
    if (!env.client_addr.empty()) {
      ledger().record(sim.now(), ElementKind::CLIENT_ADDR, env.client_addr);
    }
    std::string sp_context = get_str(r, "sp_context");
    ledger().record(sim.now(), ElementKind::SP_IDENTITY, sp_context);
    // The discovery service learns the SP's requirement profile only at
    // group granularity: the shared characteristics of the proxy.
    std::string proxy = lookup_proxy(config_->registry, sp_context);
    const SpProxyGroup& group = config_->registry.groups.at(proxy);
    ledger().record(sim.now(), ElementKind::ATTRIBUTE_NAME,
                    "group:" + join_sorted(group.required_attributes));
    std::string hint = get_str(r, "hint");
    auto it = config_->domain_to_idp.find(hint);
    if (it == config_->domain_to_idp.end()) {
      throw Error(ErrorCode::UnknownPrincipalHint, hint);
    }
    Record resp;
    resp["type"] = "discovery_response";
    resp["flow"] = flow;
    resp["idp"] = it->second;
    sim.send(id(), env.from, resp);
  } catch (const Error& err) {
    note_error(sim, id(), flow, err);
    Record resp;
    resp["type"] = "discovery_response";
    resp["flow"] = flow;
    resp["error"] = error_code_name(err.code());
    sim.send(id(), env.from, resp);
  }
}

// ---------------------------------------------------------------------------
// User agent

UserAgentActor::UserAgentActor(std::string id, SharedConfigPtr config,
                               std::string principal_id,
                               std::string credential_secret,
                               std::string client_addr, std::string home_idp,
                               std::string home_domain,
                               std::string user_identity, bool consent_willing)
    : Actor(std::move(id)),
      config_(std::move(config)),
      principal_id_(std::move(principal_id)),
      credential_secret_(std::move(credential_secret)),
      client_addr_(std::move(client_addr)),
      home_idp_(std::move(home_idp)),
      home_domain_(std::move(home_domain)),
      user_identity_(std::move(user_identity)),
      consent_willing_(consent_willing) {}

void UserAgentActor::on_message(Simulation& sim, const SimEnvelope& env) {
  Record r = record_from_bytes(env.payload);
  std::string flow = flow_of(r);
  try {
    std::string type = get_str(r, "type");
    if (type == "ua_visit") {
      flows_[flow].sp = get_str(r, "sp");
      Record visit;
      visit["type"] = "sp_visit";
      visit["flow"] = flow;
      sim.send(id(), get_str(r, "sp"), visit, client_addr_);
    } else if (type == "redirect") {
      handle_redirect(sim, r);
    } else if (type == "discovery_response") {
      if (r.contains("error")) {
        throw Error(ErrorCode::UnknownPrincipalHint, r["error"].get<std::string>());
      }
      FlowState& state = flows_[flow];
      state.idp_hint = get_str(r, "idp");
      state.discovery_done = true;
      Record deliver;
      deliver["type"] = "authn_request_delivery";
      deliver["flow"] = flow;
      deliver["request"] = state.stashed_request;
      deliver["idp_hint"] = state.idp_hint;
      sim.send(id(), config_->sb_id, deliver, client_addr_);
    } else if (type == "portal_grant") {
      Record visit;
      visit["type"] = "portal_visit";
      visit["flow"] = flow;
      visit["idp_hint"] = home_idp_;
      visit["grant"] = r.contains("grant") ? r["grant"] : Record(nullptr);
      sim.send(id(), config_->sb_id, visit, client_addr_);
    } else if (type == "consent_prompt") {
      Record resp;
      resp["type"] = "consent_prompt_response";
      resp["flow"] = flow;
      resp["prompt_id"] = get_str(r, "prompt_id");
      resp["accept"] = consent_willing_;
      sim.send(id(), env.from, resp, client_addr_);
    } else if (type == "relay_deliver") {
      Record message = r.at("message");
      message["hop_trace"].push_back("mailbox:" + principal_id_);
      mailbox_.push_back({message, sim.now()});
      Record detail;
      detail["flow"] = flow;
      detail["hop_trace"] = message["hop_trace"];
      sim.note(id(), "message_delivered", detail);
    } else if (type == "msg_reply") {
      size_t index = r.at("index").get<size_t>();
      if (index >= mailbox_.size()) {
        throw Error(ErrorCode::UnknownRecord, "mailbox index");
      }
      const Record& original = mailbox_[index].content;
      Record msg;
      msg["type"] = "relay_msg";
      msg["flow"] = flow;
      msg["to"] = original.at("from");
      msg["from"] = user_identity_;
      msg["subject"] = get_str(r, "subject");
      msg["body"] = get_str(r, "body");
      msg["hop_trace"] = Record::array({"mailbox:" + principal_id_});
      sim.send(id(), home_idp_, msg);
    } else {
      throw Error(ErrorCode::ConfigError, "UA: unexpected " + type);
    }
  } catch (const Error& err) {
    note_error(sim, id(), flow, err);
  }
}

void UserAgentActor::handle_redirect(Simulation& sim, const Record& r) {
  std::string flow = flow_of(r);
  std::string to = get_str(r, "to");
  const Record& inner = r.at("record");
  std::string inner_type = inner.at("type").get<std::string>();
  if (inner_type == "authn_request" && to == config_->sb_id) {
    // Discovery happens between the SP redirect and the broker delivery.
    FlowState& state = flows_[flow];
    state.stashed_request = inner;
    Record query;
    query["type"] = "discovery_query";
    query["flow"] = flow;
    query["hint"] = home_domain_;
    query["sp_context"] = state.sp;
    sim.send(id(), config_->ds_id, query, client_addr_);
  } else if (inner_type == "authn_request") {
    Record deliver;
    deliver["type"] = "authn_delivery";
    deliver["flow"] = flow;
    deliver["request"] = inner;
    deliver["credential"] =
        Record{{"principal_id", principal_id_}, {"secret", credential_secret_}};
    sim.send(id(), to, deliver, client_addr_);
  } else if (inner_type == "portal_authn_request") {
    Record deliver;
    deliver["type"] = "portal_delivery";
    deliver["flow"] = flow;
    deliver["request"] = inner;
    deliver["credential"] =
        Record{{"principal_id", principal_id_}, {"secret", credential_secret_}};
    sim.send(id(), to, deliver, client_addr_);
  } else if (inner_type == "portal_assertion") {
    Record deliver;
    deliver["type"] = "portal_assertion_delivery";
    deliver["flow"] = flow;
    deliver["assertion"] = inner;
    sim.send(id(), to, deliver, client_addr_);
  } else if (inner_type == "assertion") {
    Record deliver;
    deliver["type"] = "assertion_delivery";
    deliver["flow"] = flow;
    deliver["assertion"] = inner;
    sim.send(id(), to, deliver, client_addr_);
  } else {
    throw Error(ErrorCode::ConfigError, "UA: unexpected redirect " + inner_type);
  }
}

// ---------------------------------------------------------------------------
// SP

SpActor::SpActor(std::string id, SharedConfigPtr config,
                 SigningKeypair static_keys)
    : Actor(std::move(id)),
      config_(std::move(config)),
      static_keys_(std::move(static_keys)) {}

void SpActor::on_message(Simulation& sim, const SimEnvelope& env) {
  Record r = record_from_bytes(env.payload);
  std::string flow = flow_of(r);
  try {
    if (!env.client_addr.empty()) {
      ledger().record(sim.now(), ElementKind::CLIENT_ADDR, env.client_addr);
    }
    std::string type = get_str(r, "type");
    if (type == "sp_visit") {
      awaiting_cert_[flow].flow = flow;
      awaiting_cert_[flow].cert_ready = false;
      flow_ua_[flow] = env.from;
      start_flow(sim, flow);
    } else if (type == "cert_response") {
      handle_cert(sim, r);
    } else if (type == "cert_error") {
      throw Error(ErrorCode::CertIssuanceFailed, get_str(r, "code"));
    } else if (type == "assertion_delivery") {
      handle_assertion(sim, env, r.at("assertion"));
    } else if (type == "msg_send") {
      Record msg;
      msg["type"] = "relay_msg";
      msg["flow"] = flow;
      msg["to"] = get_str(r, "tid2") + "@mail." + config_->sb_id + ".tld";
      msg["from"] = "service@" + id() + ".tld";
      msg["subject"] = get_str(r, "subject");
      msg["body"] = get_str(r, "body");
      msg["hop_trace"] = Record::array({id()});
      sim.send(id(), config_->sb_id, msg);
    } else if (type == "relay_msg") {
      // Reverse relay terminus: a principal's reply, pseudonymous sender.
      auto [local, domain] = split_address(get_str(r, "from"));
      ledger().record(sim.now(), ElementKind::PSEUDONYM, local);
      Record entry = r;
      entry["hop_trace"].push_back(id());
      inbox_.push_back(entry);
      Record detail;
      detail["flow"] = flow;
      detail["hop_trace"] = entry["hop_trace"];
      sim.note(id(), "message_delivered", detail);
    } else if (type == "link_start") {
      pending_links_[flow] =
          Record{{"target_sp", get_str(r, "target_sp")}, {"payload", r.at("payload")}};
      Record req;
      req["type"] = "link_request";
      req["flow"] = flow;
      req["tid2"] = get_str(r, "tid2");
      req["target_sp"] = get_str(r, "target_sp");
      sim.send(id(), config_->sb_id, req);
    } else if (type == "link_response") {
      auto it = pending_links_.find(flow);
      if (it == pending_links_.end()) {
        throw Error(ErrorCode::UnknownCorrelation, flow);
      }
      std::string tid3 = get_str(r, "tid3");
      ledger().record(sim.now(), ElementKind::PSEUDONYM, tid3);
      Record payload;
      payload["type"] = "linked_payload";
      payload["flow"] = flow;
      payload["tid3"] = tid3;
      payload["payload"] = it->second.at("payload");
      sim.send(id(), it->second.at("target_sp").get<std::string>(), payload);
      pending_links_.erase(it);
    } else if (type == "link_error") {
      throw Error(ErrorCode::ConsentMissing, get_str(r, "code"));
    } else if (type == "linked_payload") {
      std::string tid3 = get_str(r, "tid3");
      ledger().record(sim.now(), ElementKind::PSEUDONYM, tid3);
      pending_link_payloads_[tid3] = flow;
      incoming_link_payloads_[tid3] = r.at("payload");
      Record req;
      req["type"] = "convert_request";
      req["flow"] = flow;
      req["tid3"] = tid3;
      sim.send(id(), config_->sb_id, req);
    } else if (type == "convert_response") {
      std::string tid3 = get_str(r, "tid3");
      std::string tid2 = get_str(r, "tid2");
      ledger().record(sim.now(), ElementKind::PSEUDONYM, tid2);
      linked_data_[tid2].push_back(incoming_link_payloads_.at(tid3));
      incoming_link_payloads_.erase(tid3);
      pending_link_payloads_.erase(tid3);
      Record detail;
      detail["flow"] = flow;
      detail["tid2"] = tid2;
      sim.note(id(), "link_delivered", detail);
    } else if (type == "convert_error") {
      throw Error(ErrorCode::UnknownTid, get_str(r, "code"));
    } else if (type == "ws_invoke") {
      handle_ws_invoke(sim, r);
      Record resp;
      resp["type"] = "ws_response";
      resp["flow"] = flow;
      resp["result"] = "ok";
      sim.send(id(), env.from, resp);
    } else {
      throw Error(ErrorCode::ConfigError, "SP: unexpected " + type);
    }
  } catch (const Error& err) {
    note_error(sim, id(), flow, err);
  }
}

void SpActor::start_flow(Simulation& sim, const std::string& flow) {
  // Fail closed: an SP outside a viable group may not start flows.
  lookup_proxy(config_->registry, id());
  ledger().record(sim.now(), ElementKind::SP_IDENTITY, id());
  if (force_reuse_ && last_auth_.has_value()) {
    force_reuse_ = false;
    awaiting_cert_.erase(flow);
    // One-time means one-time: the state machine refuses its own stale key.
    if (used_serials_.count(last_auth_->cert.serial)) {
      throw Error(ErrorCode::CertReuse, last_auth_->cert.serial);
    }
  }
  PendingAuth& auth = awaiting_cert_[flow];
  auth.onetime_keys = generate_signing_keypair(sim.rng());
  auth.flow = flow;
  ledger().record(sim.now(), ElementKind::ENC_KEY_PRIVATE,
                  key_fingerprint(auth.onetime_keys.public_key));
  Record req;
  req["type"] = "cert_request";
  req["flow"] = flow;
  req["public_key"] = hex_encode(auth.onetime_keys.public_key);
  sim.send(id(), config_->ca_id, req);
}

void SpActor::handle_cert(Simulation& sim, const Record& r) {
  std::string flow = flow_of(r);
  auto it = awaiting_cert_.find(flow);
  if (it == awaiting_cert_.end()) {
    throw Error(ErrorCode::UnknownCorrelation, flow);
  }
  PendingAuth auth = std::move(it->second);
  awaiting_cert_.erase(it);
  auth.cert = cert_from_record(r.at("cert"));
  auth.cert_ready = true;
  used_serials_.insert(auth.cert.serial);

  std::string proxy = lookup_proxy(config_->registry, id());
  const SpProxyGroup& group = config_->registry.groups.at(proxy);
  std::string request_id = "req-" + sim.rng().token_hex(8);
  Record req;
  req["type"] = "authn_request";
  req["flow"] = flow;
  req["request_id"] = request_id;
  req["issuer"] = proxy;
  req["onetime_cert"] = cert_to_record(auth.cert);
  req["nameid_policy"] = nameid_policy_name(group.nameid_policy);
  req["relay_token"] = "rt-" + sim.rng().token_hex(8);
  // Claimed signer is the proxy; the broker identifies the member by
  // trying the group's keys. Nothing downstream learns which member.
  sign_record(req, proxy, static_keys_.secret_key);

  last_auth_ = auth;
  std::string ua = flow_ua_.at(flow);
  pending_[request_id] = std::move(auth);
  Record redirect;
  redirect["type"] = "redirect";
  redirect["flow"] = flow;
  redirect["to"] = config_->sb_id;
  redirect["record"] = req;
  sim.send(id(), ua, redirect);
}

void SpActor::handle_assertion(Simulation& sim, const SimEnvelope& env,
                               const Record& a) {
  std::string flow = flow_of(a);
  std::string assertion_id = a.at("assertion_id").get<std::string>();
  // Replay is checked before correlation so a re-injected assertion is
  // reported as a replay even after its pairing state is gone.
  if (consumed_assertions_.count(assertion_id)) {
    throw Error(ErrorCode::ReplayDetected, assertion_id);
  }
  if (a.at("audience").get<std::string>() != id()) {
    throw Error(ErrorCode::AudienceMismatch, a.at("audience").get<std::string>());
  }
  std::string in_response_to = a.at("in_response_to").get<std::string>();
  auto pending_it = pending_.find(in_response_to);
  if (pending_it == pending_.end()) {
    throw Error(ErrorCode::UnpairedResponse, in_response_to);
  }
  uint64_t issued = a.at("issue_instant").get<uint64_t>();
  if (sim.now() > issued + config_->assertion_freshness) {
    throw Error(ErrorCode::StaleAssertion, assertion_id);
  }
  Bytes sb_pk = hex_decode(
      config_->registry.entity(config_->sb_id).static_signing_key);
  if (!verify_record(a, sb_pk)) {
    throw Error(ErrorCode::BadSignature, "assertion " + assertion_id);
  }
  std::map<std::string, std::string> attributes;
  if (a.contains("plain_attributes")) {
    attributes = attrs_from_record(a.at("plain_attributes"));
  } else {
    attributes = decrypt_payload(
        encrypted_payload_from_record(a.at("encrypted_attributes")),
        pending_it->second.onetime_keys.secret_key);
  }
  consumed_assertions_.insert(assertion_id);
  std::string tid2 = a.at("subject_tid").get<std::string>();
  ledger().record(sim.now(), ElementKind::PSEUDONYM, tid2);
  for (const auto& [name, value] : attributes) {
    ledger().record(sim.now(), ElementKind::ATTRIBUTE_VALUE, value);
  }
  SpSession session;
  session.tid2 = tid2;
  session.attributes = attributes;
  session.flow = flow;
  session.assertion_id = assertion_id;
  session.established_at = sim.now();
  sessions_.push_back(session);
  // One-time keypair dies with the transaction.
  pending_.erase(pending_it);
  Record detail;
  detail["flow"] = flow;
  detail["sp"] = id();
  detail["tid2"] = tid2;
  detail["assertion_id"] = assertion_id;
  sim.note(id(), "flow_completed", detail);
}

void SpActor::handle_ws_invoke(Simulation& sim, const Record& r) {
  std::string flow = flow_of(r);
  const Record& token = r.at("token");
  std::string token_id = token.at("token_id").get<std::string>();
  if (consumed_tokens_.count(token_id)) {
    throw Error(ErrorCode::ReplayDetected, token_id);
  }
  if (token.at("audience").get<std::string>() != id()) {
    throw Error(ErrorCode::AudienceMismatch,
                token.at("audience").get<std::string>());
  }
  uint64_t issued = token.at("issue_instant").get<uint64_t>();
  if (sim.now() > issued + config_->assertion_freshness) {
    throw Error(ErrorCode::StaleAssertion, token_id);
  }
  Bytes sb_pk = hex_decode(
      config_->registry.entity(config_->sb_id).static_signing_key);
  if (!verify_record(token, sb_pk)) {
    throw Error(ErrorCode::BadSignature, "token " + token_id);
  }
  if (token.at("confirmation").get<std::string>() == "HOLDER_OF_KEY") {
    Bytes holder_pk = hex_decode(token.at("holder_key").get<std::string>());
    if (!verify_record(r, holder_pk)) {
      throw Error(ErrorCode::KeyConfirmationFailed, token_id);
    }
  }
  consumed_tokens_.insert(token_id);
  std::string tid2 = token.at("subject_tid").get<std::string>();
  ledger().record(sim.now(), ElementKind::PSEUDONYM, tid2);
  std::map<std::string, std::string> attributes =
      attrs_from_record(r.at("attributes"));
  for (const auto& [name, value] : attributes) {
    ledger().record(sim.now(), ElementKind::ATTRIBUTE_VALUE, value);
  }
  SpSession session;
  session.tid2 = tid2;
  session.attributes = attributes;
  session.flow = flow;
  session.assertion_id = token_id;
  session.established_at = sim.now();
  sessions_.push_back(session);
  Record detail;
  detail["flow"] = flow;
  detail["sp"] = id();
  detail["tid2"] = tid2;
  detail["token_id"] = token_id;
  sim.note(id(), "flow_completed", detail);
}

// ---------------------------------------------------------------------------
// SB

SbActor::SbActor(std::string id, SharedConfigPtr config,
                 SigningKeypair static_keys, Bytes tid_key)
    : Actor(id),
      config_(std::move(config)),
      static_keys_(std::move(static_keys)),
      mapper_(id, std::move(tid_key)) {}

void SbActor::restore_state(ConsentStore store,
                            std::map<std::string, std::string> ua_sessions) {
  consent_store_ = std::move(store);
  ua_sessions_ = std::move(ua_sessions);
}

std::string SbActor::identify_member(const Record& r,
                                     const SpProxyGroup& group) const {
  for (const auto& member : group.member_sp_ids) {
    Bytes pk = hex_decode(config_->registry.entity(member).static_signing_key);
    if (verify_record(r, pk)) return member;
  }
  throw Error(ErrorCode::UnknownGroupMember, group.proxy_id);
}

void SbActor::on_message(Simulation& sim, const SimEnvelope& env) {
  Record r = record_from_bytes(env.payload);
  std::string flow = flow_of(r);
  try {
    if (!env.client_addr.empty()) {
      ledger().record(sim.now(), ElementKind::CLIENT_ADDR, env.client_addr);
    }
    std::string type = get_str(r, "type");
    if (type == "authn_request_delivery") {
      handle_authn_request(sim, env, r);
    } else if (type == "assertion_delivery") {
      handle_assertion(sim, env, r.at("assertion"));
    } else if (type == "portal_visit") {
      handle_portal_visit(sim, env, r);
    } else if (type == "portal_assertion_delivery") {
      handle_portal_assertion(sim, env, r.at("assertion"));
    } else if (type == "consent_check") {
      handle_consent_check(sim, env, r);
    } else if (type == "consent_prompt_response") {
      handle_prompt_response(sim, env, r);
    } else if (type == "relay_msg") {
      handle_relay(sim, env, r);
    } else if (type == "link_request") {
      handle_link_request(sim, env, r);
    } else if (type == "convert_request") {
      handle_convert(sim, env, r);
    } else if (type == "rst_delivery") {
      handle_rst(sim, env, r);
    } else if (type == "rst_response") {
      handle_rst_response(sim, env, r);
    } else {
      throw Error(ErrorCode::ConfigError, "SB: unexpected " + type);
    }
  } catch (const Error& err) {
    note_error(sim, id(), flow, err);
  }
}

void SbActor::handle_authn_request(Simulation& sim, const SimEnvelope& env,
                                   const Record& r) {
  std::string flow = flow_of(r);
  const Record& req = r.at("request");
  std::string proxy_id = req.at("issuer").get<std::string>();
  auto group_it = config_->registry.groups.find(proxy_id);
  if (group_it == config_->registry.groups.end()) {
    throw Error(ErrorCode::UnknownGroupMember, proxy_id);
  }
  std::string inner_sp = identify_member(req, group_it->second);
  ledger().record(sim.now(), ElementKind::SP_IDENTITY, inner_sp);
  OneTimeCertificate cert = cert_from_record(req.at("onetime_cert"));
  CertCheck check = validate_cert(cert, config_->trust_root, sim.now());
  if (check != CertCheck::VALID) {
    throw Error(ErrorCode::InvalidCert, cert_check_name(check));
  }
  std::string idp = get_str(r, "idp_hint");
  if (!config_->registry.has_entity(idp) ||
      config_->registry.entity(idp).role != EntityRole::IDP) {
    throw Error(ErrorCode::UnknownEntity, "idp_hint " + idp);
  }

  // Consent is checked here when the broker can tie this browser to a
  // pseudonym. Without that tie the request goes forward bare and the
  // IdP's own check is the gate.
  std::string consent_record;
  std::string tid1;
  auto session = ua_sessions_.find(env.client_addr);
  if (session != ua_sessions_.end()) tid1 = session->second;
  const std::set<std::string>& requested =
      config_->registry.policy.attribute_release_policy.at(proxy_id);
  if (!tid1.empty()) {
    try {
      consent_record =
          consent_store_.check_and_consume(tid1, proxy_id, requested, sim.now());
    } catch (const Error& err) {
      if (err.code() == ErrorCode::ConsentMissing &&
          config_->registry.policy.consent_mode_default ==
              ConsentMode::TRANSACTIONAL) {
        // Ask the user in the context of this transaction.
        std::string prompt_id = "prm-" + sim.rng().token_hex(8);
        PendingPrompt prompt;
        prompt.request = req;
        prompt.inner_sp = inner_sp;
        prompt.proxy_id = proxy_id;
        prompt.idp = idp;
        prompt.tid1 = tid1;
        prompt.flow = flow;
        prompt.client_addr = env.client_addr;
        prompt.ua = env.from;
        prompts_[prompt_id] = std::move(prompt);
        Record ask;
        ask["type"] = "consent_prompt";
        ask["flow"] = flow;
        ask["prompt_id"] = prompt_id;
        ask["target"] = proxy_id;
        ask["attributes"] =
            std::vector<std::string>(requested.begin(), requested.end());
        sim.send(id(), env.from, ask);
        return;
      }
      note_error(sim, id(), flow, err);
    }
  }
  forward_request(sim, req, inner_sp, proxy_id, idp, flow, env.client_addr,
                  consent_record, env.from);
}

void SbActor::forward_request(Simulation& sim, const Record& inner,
                              const std::string& inner_sp,
                              const std::string& proxy_id,
                              const std::string& idp, const std::string& flow,
                              const std::string& client_addr,
                              const std::string& consent_record,
                              const std::string& ua) {
  std::string fwd_id = "fwd-" + sim.rng().token_hex(8);
  Record fwd;
  fwd["type"] = "authn_request";
  fwd["flow"] = flow;
  fwd["request_id"] = fwd_id;
  fwd["issuer"] = id();
  fwd["onetime_cert"] = inner.at("onetime_cert");  // untouched passthrough
  fwd["nameid_policy"] = inner.at("nameid_policy");
  fwd["relay_token"] = "rlt-" + sim.rng().token_hex(8);
  fwd["proxy_target"] = proxy_id;
  if (!consent_record.empty()) {
    fwd["consent_record_id"] = consent_record;
    fwd["consent_voucher"] =
        make_consent_voucher(consent_record, fwd_id, static_keys_.secret_key);
  }
  sign_record(fwd, id(), static_keys_.secret_key);

  Correlation corr;
  corr.orig_request_id = inner.at("request_id").get<std::string>();
  corr.inner_sp = inner_sp;
  corr.proxy_id = proxy_id;
  corr.idp = idp;
  corr.flow = flow;
  corr.client_addr = client_addr;
  corr.ua = ua;
  correlations_[fwd_id] = std::move(corr);

  Record redirect;
  redirect["type"] = "redirect";
  redirect["flow"] = flow;
  redirect["to"] = idp;
  redirect["record"] = fwd;
  sim.send(id(), ua, redirect);
}

void SbActor::handle_assertion(Simulation& sim, const SimEnvelope& env,
                               const Record& a) {
  std::string flow = flow_of(a);
  std::string assertion_id = a.at("assertion_id").get<std::string>();
  if (seen_assertions_.count(assertion_id)) {
    throw Error(ErrorCode::ReplayDetected, assertion_id);
  }
  std::string issuer = a.at("signer").get<std::string>();
  if (!config_->registry.has_entity(issuer) ||
      config_->registry.entity(issuer).role != EntityRole::IDP) {
    throw Error(ErrorCode::UnknownSigner, issuer);
  }
  Bytes idp_pk = hex_decode(config_->registry.entity(issuer).static_signing_key);
  if (!verify_record(a, idp_pk)) {
    throw Error(ErrorCode::BadSignature, "assertion " + assertion_id);
  }
  std::string in_response_to = a.at("in_response_to").get<std::string>();
  auto corr_it = correlations_.find(in_response_to);
  if (corr_it == correlations_.end()) {
    throw Error(ErrorCode::UnknownCorrelation, in_response_to);
  }
  seen_assertions_.insert(assertion_id);
  Correlation corr = std::move(corr_it->second);
  correlations_.erase(corr_it);

  std::string tid1 = a.at("subject_tid").get<std::string>();
  ledger().record(sim.now(), ElementKind::PSEUDONYM, tid1);
  if (!mapper_.table().contains(tid1)) {
    // Record the broker-scope pseudonym as received so links and the
    // designated-opener path can start from it.
    mapper_.table().record(tid1,
                           MappingEntry{"", TidTier::TID1, {id()}, corr.idp});
  }
  ua_sessions_[corr.client_addr] = tid1;
  TargetedId tid2 =
      mapper_.derive(tid1, {corr.inner_sp}, TidTier::TID2, corr.idp);
  ledger().record(sim.now(), ElementKind::PSEUDONYM, tid2.value);

  Record out;
  out["type"] = "assertion";
  out["flow"] = flow;
  out["assertion_id"] = "asn-" + sim.rng().token_hex(8);
  out["subject_tid"] = tid2.value;
  out["audience"] = corr.inner_sp;
  out["issue_instant"] = a.at("issue_instant");
  out["in_response_to"] = corr.orig_request_id;
  out["authn_statement"] = a.at("authn_statement");
  if (a.contains("plain_attributes")) {
    // Fault path: with encryption off the broker can read every value.
    // The ledger must say so, or the audit could not catch the breach.
    for (auto it = a.at("plain_attributes").begin();
         it != a.at("plain_attributes").end(); ++it) {
      ledger().record(sim.now(), ElementKind::ATTRIBUTE_VALUE,
                      it.value().get<std::string>());
    }
    out["plain_attributes"] = a.at("plain_attributes");
  } else {
    out["encrypted_attributes"] = a.at("encrypted_attributes");  // bit-identical
  }
  sign_record(out, id(), static_keys_.secret_key);

  Record redirect;
  redirect["type"] = "redirect";
  redirect["flow"] = flow;
  redirect["to"] = corr.inner_sp;
  redirect["record"] = out;
  sim.send(id(), corr.ua, redirect);
}

void SbActor::handle_portal_visit(Simulation& sim, const SimEnvelope& env,
                                  const Record& r) {
  std::string flow = flow_of(r);
  std::string idp = get_str(r, "idp_hint");
  if (!config_->registry.has_entity(idp) ||
      config_->registry.entity(idp).role != EntityRole::IDP) {
    throw Error(ErrorCode::UnknownEntity, "idp_hint " + idp);
  }
  std::string request_id = "prq-" + sim.rng().token_hex(8);
  Correlation corr;
  corr.orig_request_id = request_id;
  corr.idp = idp;
  corr.flow = flow;
  corr.client_addr = env.client_addr;
  corr.ua = env.from;
  portal_correlations_[request_id] = std::move(corr);
  pending_grants_[request_id] =
      r.contains("grant") ? r.at("grant") : Record(nullptr);

  Record req;
  req["type"] = "portal_authn_request";
  req["flow"] = flow;
  req["request_id"] = request_id;
  req["issuer"] = id();
  sign_record(req, id(), static_keys_.secret_key);
  Record redirect;
  redirect["type"] = "redirect";
  redirect["flow"] = flow;
  redirect["to"] = idp;
  redirect["record"] = req;
  sim.send(id(), env.from, redirect);
}

void SbActor::handle_portal_assertion(Simulation& sim, const SimEnvelope& env,
                                      const Record& a) {
  std::string flow = flow_of(a);
  std::string assertion_id = a.at("assertion_id").get<std::string>();
  if (seen_assertions_.count(assertion_id)) {
    throw Error(ErrorCode::ReplayDetected, assertion_id);
  }
  std::string issuer = a.at("signer").get<std::string>();
  if (!config_->registry.has_entity(issuer) ||
      config_->registry.entity(issuer).role != EntityRole::IDP) {
    throw Error(ErrorCode::UnknownSigner, issuer);
  }
  Bytes idp_pk = hex_decode(config_->registry.entity(issuer).static_signing_key);
  if (!verify_record(a, idp_pk)) {
    throw Error(ErrorCode::BadSignature, "portal assertion");
  }
  std::string in_response_to = a.at("in_response_to").get<std::string>();
  auto corr_it = portal_correlations_.find(in_response_to);
  if (corr_it == portal_correlations_.end()) {
    throw Error(ErrorCode::UnknownCorrelation, in_response_to);
  }
  seen_assertions_.insert(assertion_id);
  Correlation corr = std::move(corr_it->second);
  portal_correlations_.erase(corr_it);

  std::string tid1 = a.at("subject_tid").get<std::string>();
  ledger().record(sim.now(), ElementKind::PSEUDONYM, tid1);
  if (!mapper_.table().contains(tid1)) {
    mapper_.table().record(tid1,
                           MappingEntry{"", TidTier::TID1, {id()}, corr.idp});
  }
  ua_sessions_[corr.client_addr] = tid1;

  Record grant = pending_grants_.at(in_response_to);
  pending_grants_.erase(in_response_to);
  if (!grant.is_null()) {
    std::string target;
    if (grant.contains("sp")) {
      target = lookup_proxy(config_->registry, grant.at("sp").get<std::string>());
    } else if (grant.contains("link")) {
      target = link_target(grant.at("link").at(0).get<std::string>(),
                           grant.at("link").at(1).get<std::string>());
    } else {
      throw Error(ErrorCode::UnknownTarget, "grant names neither sp nor link");
    }
    std::set<std::string> attrs;
    if (grant.contains("attributes")) {
      for (const auto& a2 : grant.at("attributes")) {
        attrs.insert(a2.get<std::string>());
      }
    } else if (config_->registry.groups.count(target)) {
      attrs = config_->registry.groups.at(target).required_attributes;
    }
    ConsentMode mode = config_->registry.policy.consent_mode_default;
    if (grant.contains("mode")) {
      auto parsed = parse_consent_mode(grant.at("mode").get<std::string>());
      if (!parsed) throw Error(ErrorCode::ConfigError, "bad consent mode");
      mode = *parsed;
    }
    const ConsentRecord& rec = consent_store_.grant(
        config_->registry, tid1, target, attrs, mode, sim.now(), sim.rng());
    Record detail;
    detail["flow"] = flow;
    detail["record_id"] = rec.record_id;
    detail["target"] = target;
    sim.note(id(), "consent_granted", detail);
  }
  Record done;
  done["flow"] = flow;
  done["kind"] = "portal";
  sim.note(id(), "flow_completed", done);
}

void SbActor::handle_consent_check(Simulation& sim, const SimEnvelope& env,
                                   const Record& r) {
  std::string flow = flow_of(r);
  std::string request_id = get_str(r, "request_id");
  std::string tid1 = get_str(r, "tid1");
  ledger().record(sim.now(), ElementKind::PSEUDONYM, tid1);
  std::set<std::string> requested;
  for (const auto& a : r.at("attributes")) requested.insert(a.get<std::string>());
  Record resp;
  resp["type"] = "consent_result";
  resp["flow"] = flow;
  resp["request_id"] = request_id;
  try {
    std::string record_id = consent_store_.check_and_consume(
        tid1, get_str(r, "target"), requested, sim.now());
    resp["record_id"] = record_id;
    resp["voucher"] =
        make_consent_voucher(record_id, request_id, static_keys_.secret_key);
  } catch (const Error& err) {
    resp["error"] = error_code_name(err.code());
  }
  sim.send(id(), env.from, resp);
}

void SbActor::handle_prompt_response(Simulation& sim, const SimEnvelope& env,
                                     const Record& r) {
  std::string flow = flow_of(r);
  auto it = prompts_.find(get_str(r, "prompt_id"));
  if (it == prompts_.end()) {
    throw Error(ErrorCode::UnknownCorrelation, get_str(r, "prompt_id"));
  }
  PendingPrompt prompt = std::move(it->second);
  prompts_.erase(it);
  std::string consent_record;
  if (r.at("accept").get<bool>()) {
    const std::set<std::string>& requested =
        config_->registry.policy.attribute_release_policy.at(prompt.proxy_id);
    const ConsentRecord& rec = consent_store_.grant(
        config_->registry, prompt.tid1, prompt.proxy_id, requested,
        ConsentMode::TRANSACTIONAL, sim.now(), sim.rng());
    Record detail;
    detail["flow"] = flow;
    detail["record_id"] = rec.record_id;
    detail["target"] = prompt.proxy_id;
    sim.note(id(), "consent_granted", detail);
    consent_record = consent_store_.check_and_consume(prompt.tid1,
                                                      prompt.proxy_id,
                                                      requested, sim.now());
  }
  forward_request(sim, prompt.request, prompt.inner_sp, prompt.proxy_id,
                  prompt.idp, prompt.flow, prompt.client_addr, consent_record,
                  prompt.ua);
}

void SbActor::handle_relay(Simulation& sim, const SimEnvelope& env,
                           const Record& r) {
  std::string flow = flow_of(r);
  std::string own_domain = "mail." + id() + ".tld";
  auto [local, domain] = split_address(get_str(r, "to"));
  if (domain != own_domain) {
    throw Error(ErrorCode::WrongDomainForHop, domain);
  }
  if (local.rfind("rt-", 0) == 0) {
    // Reverse hop: a principal's reply to a rewritten sender address.
    auto token_it = reply_tokens_.find(local);
    if (token_it == reply_tokens_.end()) {
      throw Error(ErrorCode::UnresolvableLocalPart, local);
    }
    std::string dest_addr = token_it->second.at("addr").get<std::string>();
    std::string dest_actor = token_it->second.at("actor").get<std::string>();
    auto [from_local, from_domain] = split_address(get_str(r, "from"));
    const MappingEntry* tid1_entry =
        mapper_.table().contains(from_local)
            ? &mapper_.table().resolve(from_local)
            : nullptr;
    if (tid1_entry == nullptr || tid1_entry->tier != TidTier::TID1) {
      throw Error(ErrorCode::UnresolvableLocalPart, from_local);
    }
    ledger().record(sim.now(), ElementKind::PSEUDONYM, from_local);
    TargetedId tid2 = mapper_.derive(from_local, {dest_actor}, TidTier::TID2,
                                     tid1_entry->issuer_hint);
    ledger().record(sim.now(), ElementKind::PSEUDONYM, tid2.value);
    Record out = r;
    out["to"] = dest_addr;
    out["from"] = tid2.value + "@" + own_domain;
    out["hop_trace"].push_back(id());
    sim.send(id(), dest_actor, out);
    return;
  }
  // Forward hop: local part must be a pseudonym this broker issued to
  // exactly the sending SP.
  if (!mapper_.table().contains(local)) {
    throw Error(ErrorCode::UnresolvableLocalPart, local);
  }
  const MappingEntry& entry = mapper_.table().resolve(local);
  if (entry.tier != TidTier::TID2 || entry.scope.at(0) != env.from) {
    throw Error(ErrorCode::UnresolvableLocalPart, local);
  }
  ledger().record(sim.now(), ElementKind::PSEUDONYM, local);
  ledger().record(sim.now(), ElementKind::PSEUDONYM, entry.parent);
  const std::string idp_domain =
      "mail." + config_->registry.entity(entry.issuer_hint)
                    .endpoints.at("home_domain") + "";
  std::string token = "rt-" + sim.rng().token_hex(8);
  reply_tokens_[token] = Record{{"addr", get_str(r, "from")}, {"actor", env.from}};
  Record out = r;
  out["to"] = entry.parent + "@" + idp_domain;
  out["from"] = token + "@" + own_domain;
  out["hop_trace"].push_back(id());
  sim.send(id(), entry.issuer_hint, out);
}

void SbActor::handle_link_request(Simulation& sim, const SimEnvelope& env,
                                  const Record& r) {
  std::string flow = flow_of(r);
  std::string requester = env.from;
  std::string tid2 = get_str(r, "tid2");
  std::string target_sp = get_str(r, "target_sp");
  Record fail;
  fail["type"] = "link_error";
  fail["flow"] = flow;
  try {
    if (!mapper_.table().contains(tid2)) {
      throw Error(ErrorCode::UnknownTid, tid2);
    }
    const MappingEntry& entry = mapper_.table().resolve(tid2);
    if (entry.tier != TidTier::TID2 || entry.scope.at(0) != requester) {
      throw Error(ErrorCode::UnknownTid, tid2);
    }
    std::string tid1 = entry.parent;
    consent_store_.check_and_consume(tid1, link_target(requester, target_sp),
                                     {}, sim.now());
    auto [ab, ba] = mapper_.derive_link_pair(tid1, requester, target_sp);
    ledger().record(sim.now(), ElementKind::PSEUDONYM, ab.value);
    ledger().record(sim.now(), ElementKind::PSEUDONYM, ba.value);
    Record detail;
    detail["flow"] = flow;
    detail["tid3_forward"] = ab.value;
    detail["tid3_reverse"] = ba.value;
    sim.note(id(), "link_established", detail);
    Record resp;
    resp["type"] = "link_response";
    resp["flow"] = flow;
    resp["tid3"] = ab.value;
    resp["target_sp"] = target_sp;
    sim.send(id(), requester, resp);
  } catch (const Error& err) {
    note_error(sim, id(), flow, err);
    fail["code"] = error_code_name(err.code());
    sim.send(id(), requester, fail);
  }
}

void SbActor::handle_convert(Simulation& sim, const SimEnvelope& env,
                             const Record& r) {
  std::string flow = flow_of(r);
  std::string tid3 = get_str(r, "tid3");
  try {
    if (!mapper_.table().contains(tid3)) {
      throw Error(ErrorCode::UnknownTid, tid3);
    }
    const MappingEntry& entry = mapper_.table().resolve(tid3);
    // Conversion is offered only to the SP the link targets; the source
    // SP asking for it would learn a pseudonym that is not for it.
    if (entry.tier != TidTier::TID3 || entry.scope.at(1) != env.from) {
      throw Error(ErrorCode::UnknownTid, tid3);
    }
    const MappingEntry& tid1_entry = mapper_.table().resolve(entry.parent);
    TargetedId tid2 = mapper_.derive(entry.parent, {env.from}, TidTier::TID2,
                                     tid1_entry.issuer_hint);
    ledger().record(sim.now(), ElementKind::PSEUDONYM, tid3);
    ledger().record(sim.now(), ElementKind::PSEUDONYM, tid2.value);
    Record resp;
    resp["type"] = "convert_response";
    resp["flow"] = flow;
    resp["tid3"] = tid3;
    resp["tid2"] = tid2.value;
    sim.send(id(), env.from, resp);
  } catch (const Error& err) {
    note_error(sim, id(), flow, err);
    Record resp;
    resp["type"] = "convert_error";
    resp["flow"] = flow;
    resp["code"] = error_code_name(err.code());
    sim.send(id(), env.from, resp);
  }
}

void SbActor::handle_rst(Simulation& sim, const SimEnvelope& env,
                         const Record& r) {
  std::string flow = flow_of(r);
  const Record& rst = r.at("rst");
  OneTimeCertificate cert = cert_from_record(rst.at("short_term_cert"));
  CertCheck check = validate_cert(cert, config_->trust_root, sim.now());
  if (check != CertCheck::VALID) {
    throw Error(ErrorCode::InvalidCert, cert_check_name(check));
  }
  // R5 gate: no request crosses toward the attribute store without a
  // proven binding to the certificate key.
  if (!verify_record(rst, hex_decode(cert.public_key))) {
    throw Error(ErrorCode::AuthnFailed, "RST signature");
  }
  Record verified;
  verified["flow"] = flow;
  verified["gate"] = id();
  sim.note(id(), "request_verified", verified);

  std::string target_sp = get_str(r, "target_sp");
  std::string proxy = lookup_proxy(config_->registry, target_sp);
  ledger().record(sim.now(), ElementKind::SP_IDENTITY, target_sp);
  std::string idp = get_str(r, "idp_hint");
  if (!config_->registry.has_entity(idp) ||
      config_->registry.entity(idp).role != EntityRole::IDP) {
    throw Error(ErrorCode::UnknownEntity, "idp_hint " + idp);
  }
  std::string fwd_id = "fws-" + sim.rng().token_hex(8);
  WsCorrelation corr;
  corr.orig_request_id = rst.at("request_id").get<std::string>();
  corr.client_actor = env.from;
  corr.target_sp = target_sp;
  corr.flow = flow;
  ws_correlations_[fwd_id] = std::move(corr);

  Record fwd;
  fwd["type"] = "rst_forward";
  fwd["flow"] = flow;
  fwd["request_id"] = fwd_id;
  fwd["client_id"] = rst.at("client_id");
  fwd["token_type"] = rst.at("token_type");
  fwd["short_term_cert"] = rst.at("short_term_cert");
  fwd["cred_blob"] = rst.at("cred_blob");
  fwd["proxy_target"] = proxy;
  sign_record(fwd, id(), static_keys_.secret_key);
  sim.send(id(), idp, fwd);
}

void SbActor::handle_rst_response(Simulation& sim, const SimEnvelope& env,
                                  const Record& r) {
  std::string flow = flow_of(r);
  const Record& token = r.at("token");
  std::string token_id = token.at("token_id").get<std::string>();
  if (seen_assertions_.count(token_id)) {
    throw Error(ErrorCode::ReplayDetected, token_id);
  }
  std::string issuer = token.at("signer").get<std::string>();
  if (!config_->registry.has_entity(issuer) ||
      config_->registry.entity(issuer).role != EntityRole::IDP) {
    throw Error(ErrorCode::UnknownSigner, issuer);
  }
  if (!verify_record(token, hex_decode(config_->registry.entity(issuer)
                                            .static_signing_key))) {
    throw Error(ErrorCode::BadSignature, "ws token");
  }
  auto corr_it = ws_correlations_.find(get_str(r, "request_id"));
  if (corr_it == ws_correlations_.end()) {
    throw Error(ErrorCode::UnknownCorrelation, get_str(r, "request_id"));
  }
  seen_assertions_.insert(token_id);
  WsCorrelation corr = std::move(corr_it->second);
  ws_correlations_.erase(corr_it);

  std::string tid1 = token.at("subject_tid").get<std::string>();
  ledger().record(sim.now(), ElementKind::PSEUDONYM, tid1);
  if (!mapper_.table().contains(tid1)) {
    mapper_.table().record(tid1, MappingEntry{"", TidTier::TID1, {id()}, issuer});
  }
  TargetedId tid2 = mapper_.derive(tid1, {corr.target_sp}, TidTier::TID2, issuer);
  ledger().record(sim.now(), ElementKind::PSEUDONYM, tid2.value);

  Record out;
  out["type"] = "ws_token";
  out["flow"] = flow;
  out["token_id"] = "wst-" + sim.rng().token_hex(8);
  out["subject_tid"] = tid2.value;
  out["audience"] = corr.target_sp;
  out["issue_instant"] = token.at("issue_instant");
  out["in_response_to"] = corr.orig_request_id;
  out["confirmation"] = token.at("confirmation");
  out["holder_key"] = token.at("holder_key");
  if (token.contains("plain_attributes")) {
    for (auto it = token.at("plain_attributes").begin();
         it != token.at("plain_attributes").end(); ++it) {
      ledger().record(sim.now(), ElementKind::ATTRIBUTE_VALUE,
                      it.value().get<std::string>());
    }
    out["plain_attributes"] = token.at("plain_attributes");
  } else {
    out["encrypted_attributes"] = token.at("encrypted_attributes");
  }
  sign_record(out, id(), static_keys_.secret_key);
  Record resp;
  resp["type"] = "rstr";
  resp["flow"] = flow;
  resp["token"] = out;
  sim.send(id(), corr.client_actor, resp);
}

// ---------------------------------------------------------------------------
// IdP

IdpActor::IdpActor(std::string id, SharedConfigPtr config,
                   SigningKeypair static_keys, BoxKeypair box_keys,
                   Bytes tid_key, std::string home_domain)
    : Actor(id),
      config_(std::move(config)),
      static_keys_(std::move(static_keys)),
      box_keys_(std::move(box_keys)),
      mapper_(id, std::move(tid_key)),
      home_domain_(std::move(home_domain)) {}

void IdpActor::add_principal(Principal principal) {
  refid_to_principal_[principal.reference_id] = principal.principal_id;
  principals_[principal.principal_id] = std::move(principal);
}

const IdpActor::Principal* IdpActor::authenticate(const Record& credential) {
  auto it = principals_.find(credential.at("principal_id").get<std::string>());
  if (it == principals_.end()) return nullptr;
  if (it->second.credential_secret !=
      credential.at("secret").get<std::string>()) {
    return nullptr;
  }
  return &it->second;
}

void IdpActor::on_message(Simulation& sim, const SimEnvelope& env) {
  Record r = record_from_bytes(env.payload);
  std::string flow = flow_of(r);
  try {
    if (!env.client_addr.empty()) {
      ledger().record(sim.now(), ElementKind::CLIENT_ADDR, env.client_addr);
    }
    std::string type = get_str(r, "type");
    if (type == "authn_delivery") {
      handle_authn(sim, env, r);
    } else if (type == "portal_delivery") {
      handle_portal(sim, env, r);
    } else if (type == "consent_result") {
      handle_consent_result(sim, env, r);
    } else if (type == "rst_forward") {
      handle_rst_forward(sim, env, r);
    } else if (type == "relay_msg") {
      handle_relay(sim, env, r);
    } else if (type == "attr_probe") {
      handle_probe(sim, env, r);
    } else {
      throw Error(ErrorCode::ConfigError, "IdP: unexpected " + type);
    }
  } catch (const Error& err) {
    note_error(sim, id(), flow, err);
  }
}

void IdpActor::handle_authn(Simulation& sim, const SimEnvelope& env,
                            const Record& r) {
  std::string flow = flow_of(r);
  const Record& req = r.at("request");
  std::string issuer = req.at("issuer").get<std::string>();
  if (issuer != config_->sb_id) {
    throw Error(ErrorCode::UnknownSigner, issuer);
  }
  Bytes sb_pk = hex_decode(config_->registry.entity(issuer).static_signing_key);
  if (!verify_record(req, sb_pk)) {
    throw Error(ErrorCode::BadSignature, "authn request");
  }
  Record verified;
  verified["flow"] = flow;
  verified["gate"] = id();
  sim.note(id(), "request_verified", verified);

  OneTimeCertificate cert = cert_from_record(req.at("onetime_cert"));
  CertCheck check = validate_cert(cert, config_->trust_root, sim.now());
  if (check != CertCheck::VALID) {
    throw Error(ErrorCode::InvalidCert, cert_check_name(check));
  }
  const Principal* principal = authenticate(r.at("credential"));
  if (principal == nullptr) {
    throw Error(ErrorCode::AuthnFailed, "credential rejected");
  }
  ledger().record(sim.now(), ElementKind::USER_IDENTITY,
                  principal->user_identity);
  ledger().record(sim.now(), ElementKind::SP_IDENTITY, issuer);
  std::string proxy_target = req.at("proxy_target").get<std::string>();
  ledger().record(sim.now(), ElementKind::SP_IDENTITY, proxy_target);
  ledger().record(sim.now(), ElementKind::ENC_KEY_PUBLIC,
                  key_fingerprint(hex_decode(cert.public_key)));

  TargetedId tid1 = mapper_.derive(principal->reference_id, {config_->sb_id},
                                   TidTier::TID1);
  ledger().record(sim.now(), ElementKind::PSEUDONYM, tid1.value);

  PendingIssue pending;
  pending.request = req;
  pending.tid1 = tid1.value;
  pending.principal_id = principal->principal_id;
  pending.flow = flow;
  pending.client_addr = env.client_addr;
  pending.ws = false;
  pending.reply_to = env.from;

  std::string request_id = req.at("request_id").get<std::string>();
  if (req.contains("consent_voucher") &&
      verify_consent_voucher(req.at("consent_voucher").get<std::string>(),
                             req.at("consent_record_id").get<std::string>(),
                             request_id, sb_pk)) {
    Record detail;
    detail["flow"] = flow;
    detail["record_id"] = req.at("consent_record_id");
    sim.note(id(), "consent_verified", detail);
    issue_assertion(sim, pending,
                    req.at("consent_record_id").get<std::string>());
    return;
  }
  // No broker voucher rode along; ask the broker's consent store.
  pending_issues_[request_id] = std::move(pending);
  const std::set<std::string>& requested =
      config_->registry.policy.attribute_release_policy.at(proxy_target);
  Record checkq;
  checkq["type"] = "consent_check";
  checkq["flow"] = flow;
  checkq["request_id"] = request_id;
  checkq["tid1"] = tid1.value;
  checkq["target"] = proxy_target;
  checkq["attributes"] =
      std::vector<std::string>(requested.begin(), requested.end());
  sim.send(id(), config_->sb_id, checkq);
}

void IdpActor::handle_consent_result(Simulation& sim, const SimEnvelope& env,
                                     const Record& r) {
  std::string flow = flow_of(r);
  auto it = pending_issues_.find(get_str(r, "request_id"));
  if (it == pending_issues_.end()) {
    throw Error(ErrorCode::UnknownCorrelation, get_str(r, "request_id"));
  }
  PendingIssue pending = std::move(it->second);
  pending_issues_.erase(it);
  if (r.contains("error")) {
    // The flow halts here: no consent, no attribute release.
    throw Error(ErrorCode::ConsentMissing, r.at("error").get<std::string>());
  }
  Bytes sb_pk =
      hex_decode(config_->registry.entity(config_->sb_id).static_signing_key);
  std::string record_id = get_str(r, "record_id");
  if (!verify_consent_voucher(get_str(r, "voucher"), record_id,
                              get_str(r, "request_id"), sb_pk)) {
    throw Error(ErrorCode::ConsentMissing, "voucher failed verification");
  }
  Record detail;
  detail["flow"] = flow;
  detail["record_id"] = record_id;
  sim.note(id(), "consent_verified", detail);
  if (pending.ws) {
    issue_ws_token(sim, pending, record_id);
  } else {
    issue_assertion(sim, pending, record_id);
  }
}

void IdpActor::issue_assertion(Simulation& sim, const PendingIssue& pending,
                               const std::string& consent_record) {
  const Principal& principal = principals_.at(pending.principal_id);
  const std::string proxy_target =
      pending.request.at("proxy_target").get<std::string>();
  const std::set<std::string>& policy_set =
      config_->registry.policy.attribute_release_policy.at(proxy_target);
  Record access;
  access["flow"] = pending.flow;
  sim.note(id(), "attr_store_access", access);
  // R10: exactly the policy set for the proxy, never the whole store.
  std::map<std::string, std::string> released;
  for (const auto& name : policy_set) {
    auto it = principal.attributes.find(name);
    if (it != principal.attributes.end()) released[name] = it->second;
  }
  for (const auto& [name, value] : released) {
    ledger().record(sim.now(), ElementKind::ATTRIBUTE_VALUE, value);
  }
  Record released_note;
  released_note["flow"] = pending.flow;
  released_note["consent_record"] = consent_record;
  released_note["count"] = released.size();
  sim.note(id(), "attributes_released", released_note);

  Record a;
  a["type"] = "assertion";
  a["flow"] = pending.flow;
  a["assertion_id"] = "ias-" + sim.rng().token_hex(8);
  a["subject_tid"] = pending.tid1;
  a["audience"] = config_->sb_id;
  a["issue_instant"] = sim.now();
  a["in_response_to"] = pending.request.at("request_id");
  a["authn_statement"] =
      Record{{"method", "password"}, {"instant", sim.now()}};
  if (config_->faults.disable_encryption) {
    Record plain = Record::object();
    for (const auto& [name, value] : released) plain[name] = value;
    a["plain_attributes"] = plain;
  } else {
    OneTimeCertificate cert =
        cert_from_record(pending.request.at("onetime_cert"));
    EncryptedPayload payload = encrypt_payload(released, cert,
                                               config_->trust_root, sim.now(),
                                               sim.rng());
    a["encrypted_attributes"] = encrypted_payload_to_record(payload);
  }
  sign_record(a, id(), static_keys_.secret_key);
  Record redirect;
  redirect["type"] = "redirect";
  redirect["flow"] = pending.flow;
  redirect["to"] = config_->sb_id;
  redirect["record"] = a;
  sim.send(id(), pending.reply_to, redirect);
}

void IdpActor::handle_portal(Simulation& sim, const SimEnvelope& env,
                             const Record& r) {
  std::string flow = flow_of(r);
  const Record& req = r.at("request");
  if (req.at("issuer").get<std::string>() != config_->sb_id) {
    throw Error(ErrorCode::UnknownSigner, req.at("issuer").get<std::string>());
  }
  Bytes sb_pk =
      hex_decode(config_->registry.entity(config_->sb_id).static_signing_key);
  if (!verify_record(req, sb_pk)) {
    throw Error(ErrorCode::BadSignature, "portal request");
  }
  const Principal* principal = authenticate(r.at("credential"));
  if (principal == nullptr) {
    throw Error(ErrorCode::AuthnFailed, "credential rejected");
  }
  ledger().record(sim.now(), ElementKind::USER_IDENTITY,
                  principal->user_identity);
  TargetedId tid1 = mapper_.derive(principal->reference_id, {config_->sb_id},
                                   TidTier::TID1);
  ledger().record(sim.now(), ElementKind::PSEUDONYM, tid1.value);
  // Bare authentication: no attributes move, so no consent is involved.
  Record a;
  a["type"] = "portal_assertion";
  a["flow"] = flow;
  a["assertion_id"] = "pas-" + sim.rng().token_hex(8);
  a["subject_tid"] = tid1.value;
  a["audience"] = config_->sb_id;
  a["issue_instant"] = sim.now();
  a["in_response_to"] = req.at("request_id");
  sign_record(a, id(), static_keys_.secret_key);
  Record redirect;
  redirect["type"] = "redirect";
  redirect["flow"] = flow;
  redirect["to"] = config_->sb_id;
  redirect["record"] = a;
  sim.send(id(), env.from, redirect);
}

void IdpActor::handle_rst_forward(Simulation& sim, const SimEnvelope& env,
                                  const Record& r) {
  std::string flow = flow_of(r);
  if (env.from != config_->sb_id) {
    throw Error(ErrorCode::UnknownSigner, env.from);
  }
  Bytes sb_pk =
      hex_decode(config_->registry.entity(config_->sb_id).static_signing_key);
  if (!verify_record(r, sb_pk)) {
    throw Error(ErrorCode::BadSignature, "rst forward");
  }
  Record verified;
  verified["flow"] = flow;
  verified["gate"] = id();
  sim.note(id(), "request_verified", verified);

  OneTimeCertificate cert = cert_from_record(r.at("short_term_cert"));
  CertCheck check = validate_cert(cert, config_->trust_root, sim.now());
  if (check != CertCheck::VALID) {
    throw Error(ErrorCode::InvalidCert, cert_check_name(check));
  }
  ledger().record(sim.now(), ElementKind::ENC_KEY_PUBLIC,
                  key_fingerprint(hex_decode(cert.public_key)));
  Record credential;
  try {
    SealedBlob blob;
    blob.ephemeral_public =
        base64_decode(r.at("cred_blob").at("ephemeral_material").get<std::string>());
    blob.ciphertext =
        base64_decode(r.at("cred_blob").at("ciphertext").get<std::string>());
    credential = Record::parse(
        to_string(open_sealed(blob, box_keys_.secret_key)));
  } catch (const std::exception&) {
    throw Error(ErrorCode::AuthnFailed, "credential blob unreadable");
  }
  const Principal* principal = authenticate(credential);
  if (principal == nullptr) {
    throw Error(ErrorCode::AuthnFailed, "credential rejected");
  }
  ledger().record(sim.now(), ElementKind::USER_IDENTITY,
                  principal->user_identity);
  ledger().record(sim.now(), ElementKind::SP_IDENTITY, config_->sb_id);
  std::string proxy_target = r.at("proxy_target").get<std::string>();
  ledger().record(sim.now(), ElementKind::SP_IDENTITY, proxy_target);
  TargetedId tid1 = mapper_.derive(principal->reference_id, {config_->sb_id},
                                   TidTier::TID1);
  ledger().record(sim.now(), ElementKind::PSEUDONYM, tid1.value);

  PendingIssue pending;
  pending.request = r;
  pending.tid1 = tid1.value;
  pending.principal_id = principal->principal_id;
  pending.flow = flow;
  pending.ws = true;
  pending.reply_to = env.from;
  std::string request_id = r.at("request_id").get<std::string>();
  pending_issues_[request_id] = std::move(pending);

  const std::set<std::string>& requested =
      config_->registry.policy.attribute_release_policy.at(proxy_target);
  Record checkq;
  checkq["type"] = "consent_check";
  checkq["flow"] = flow;
  checkq["request_id"] = request_id;
  checkq["tid1"] = tid1.value;
  checkq["target"] = proxy_target;
  checkq["attributes"] =
      std::vector<std::string>(requested.begin(), requested.end());
  sim.send(id(), config_->sb_id, checkq);
}

void IdpActor::issue_ws_token(Simulation& sim, const PendingIssue& pending,
                              const std::string& consent_record) {
  const Principal& principal = principals_.at(pending.principal_id);
  const std::string proxy_target =
      pending.request.at("proxy_target").get<std::string>();
  const std::set<std::string>& policy_set =
      config_->registry.policy.attribute_release_policy.at(proxy_target);
  Record access;
  access["flow"] = pending.flow;
  sim.note(id(), "attr_store_access", access);
  std::map<std::string, std::string> released;
  for (const auto& name : policy_set) {
    auto it = principal.attributes.find(name);
    if (it != principal.attributes.end()) released[name] = it->second;
  }
  for (const auto& [name, value] : released) {
    ledger().record(sim.now(), ElementKind::ATTRIBUTE_VALUE, value);
  }
  Record released_note;
  released_note["flow"] = pending.flow;
  released_note["consent_record"] = consent_record;
  released_note["count"] = released.size();
  sim.note(id(), "attributes_released", released_note);

  OneTimeCertificate cert =
      cert_from_record(pending.request.at("short_term_cert"));
  Record token;
  token["type"] = "ws_token";
  token["flow"] = pending.flow;
  token["token_id"] = "iwt-" + sim.rng().token_hex(8);
  token["subject_tid"] = pending.tid1;
  token["audience"] = config_->sb_id;
  token["issue_instant"] = sim.now();
  token["in_response_to"] = pending.request.at("request_id");
  token["confirmation"] = pending.request.at("token_type");
  token["holder_key"] = cert.public_key;
  if (config_->faults.disable_encryption) {
    Record plain = Record::object();
    for (const auto& [name, value] : released) plain[name] = value;
    token["plain_attributes"] = plain;
  } else {
    EncryptedPayload payload = encrypt_payload(released, cert,
                                               config_->trust_root, sim.now(),
                                               sim.rng());
    token["encrypted_attributes"] = encrypted_payload_to_record(payload);
  }
  sign_record(token, id(), static_keys_.secret_key);
  Record resp;
  resp["type"] = "rst_response";
  resp["flow"] = pending.flow;
  resp["request_id"] = pending.request.at("request_id");
  resp["token"] = token;
  sim.send(id(), pending.reply_to, resp);
}

void IdpActor::handle_relay(Simulation& sim, const SimEnvelope& env,
                            const Record& r) {
  std::string flow = flow_of(r);
  std::string own_mail = "mail." + home_domain_;
  auto [local, domain] = split_address(get_str(r, "to"));
  if (domain == own_mail) {
    // Inbound hop: pseudonymous local part resolves to a mailbox.
    if (!mapper_.table().contains(local)) {
      throw Error(ErrorCode::UnresolvableLocalPart, local);
    }
    const MappingEntry& entry = mapper_.table().resolve(local);
    if (entry.tier != TidTier::TID1) {
      throw Error(ErrorCode::UnresolvableLocalPart, local);
    }
    auto pid = refid_to_principal_.find(entry.parent);
    if (pid == refid_to_principal_.end()) {
      throw Error(ErrorCode::UnresolvableLocalPart, local);
    }
    const Principal& principal = principals_.at(pid->second);
    ledger().record(sim.now(), ElementKind::PSEUDONYM, local);
    ledger().record(sim.now(), ElementKind::USER_IDENTITY,
                    principal.user_identity);
    Record out = r;
    out["to"] = principal.user_identity;
    out["hop_trace"].push_back(id());
    Record deliver;
    deliver["type"] = "relay_deliver";
    deliver["flow"] = flow;
    deliver["message"] = out;
    sim.send(id(), principal.ua_actor, deliver);
    return;
  }
  // Outbound hop: one of this IdP's own users submits a reply. The true
  // sender address is rewritten to the broker-scope pseudonym before the
  // message leaves the home organization.
  auto [from_local, from_domain] = split_address(get_str(r, "from"));
  if (from_domain != home_domain_) {
    throw Error(ErrorCode::WrongDomainForHop, from_domain);
  }
  const Principal* sender = nullptr;
  for (const auto& [pid2, p] : principals_) {
    if (p.ua_actor == env.from && p.user_identity == get_str(r, "from")) {
      sender = &p;
      break;
    }
  }
  if (sender == nullptr) {
    throw Error(ErrorCode::WrongDomainForHop, get_str(r, "from"));
  }
  auto owner = config_->mail_domain_owner.find(domain);
  if (owner == config_->mail_domain_owner.end()) {
    throw Error(ErrorCode::WrongDomainForHop, domain);
  }
  ledger().record(sim.now(), ElementKind::USER_IDENTITY, sender->user_identity);
  TargetedId tid1 = mapper_.derive(sender->reference_id, {config_->sb_id},
                                   TidTier::TID1);
  ledger().record(sim.now(), ElementKind::PSEUDONYM, tid1.value);
  Record out = r;
  out["from"] = tid1.value + "@" + own_mail;
  out["hop_trace"].push_back(id());
  sim.send(id(), owner->second, out);
}

void IdpActor::handle_probe(Simulation& sim, const SimEnvelope& env,
                            const Record& r) {
  std::string flow = flow_of(r);
  // An attribute request with no verified request context dies here,
  // before any attribute store code runs.
  Record detail;
  detail["flow"] = flow;
  detail["probe_id"] = r.contains("probe_id") ? get_str(r, "probe_id") : "";
  detail["from"] = env.from;
  sim.note(id(), "probe_rejected", detail);
  throw Error(ErrorCode::AuthnFailed, "unauthenticated attribute request");
}

// ---------------------------------------------------------------------------
// WS client

WsClientActor::WsClientActor(std::string id, SharedConfigPtr config,
                             std::string client_id, std::string principal_id,
                             std::string credential_secret,
                             std::string home_idp)
    : Actor(std::move(id)),
      config_(std::move(config)),
      client_id_(std::move(client_id)),
      principal_id_(std::move(principal_id)),
      credential_secret_(std::move(credential_secret)),
      home_idp_(std::move(home_idp)) {}

void WsClientActor::on_message(Simulation& sim, const SimEnvelope& env) {
  Record r = record_from_bytes(env.payload);
  std::string flow = flow_of(r);
  try {
    std::string type = get_str(r, "type");
    if (type == "ws_start") {
      PendingWs pending;
      pending.keys = generate_signing_keypair(sim.rng());
      pending.target_sp = get_str(r, "target_sp");
      pending.token_type =
          r.contains("token_type") ? get_str(r, "token_type") : "BEARER";
      flows_[flow] = std::move(pending);
      Record req;
      req["type"] = "cert_request";
      req["flow"] = flow;
      req["public_key"] = hex_encode(flows_[flow].keys.public_key);
      sim.send(id(), config_->ca_id, req);
    } else if (type == "cert_response") {
      PendingWs& pending = flows_.at(flow);
      pending.cert = cert_from_record(r.at("cert"));
      pending.cert_ready = true;
      pending.request_id = "wsr-" + sim.rng().token_hex(8);

      Record credential;
      credential["principal_id"] = principal_id_;
      credential["secret"] = credential_secret_;
      Bytes idp_box_pk = hex_decode(
          *config_->registry.entity(home_idp_).static_encryption_key);
      SealedBlob blob = seal_to_curve25519(to_bytes(credential.dump()),
                                           idp_box_pk, sim.rng());
      Record rst;
      rst["type"] = "rst";
      rst["flow"] = flow;
      rst["request_id"] = pending.request_id;
      rst["client_id"] = client_id_;
      rst["token_type"] = pending.token_type;
      rst["short_term_cert"] = cert_to_record(pending.cert);
      rst["cred_blob"] =
          Record{{"ephemeral_material", base64_encode(blob.ephemeral_public)},
                 {"ciphertext", base64_encode(blob.ciphertext)}};
      sign_record(rst, client_id_, pending.keys.secret_key);

      // The target service rides outside the RST: only the broker needs
      // it, and the token request itself stays free of SP identity.
      Record wrapper;
      wrapper["type"] = "rst_delivery";
      wrapper["flow"] = flow;
      wrapper["target_sp"] = pending.target_sp;
      wrapper["idp_hint"] = home_idp_;
      wrapper["rst"] = rst;
      sim.send(id(), config_->sb_id, wrapper);
    } else if (type == "cert_error") {
      throw Error(ErrorCode::CertIssuanceFailed, get_str(r, "code"));
    } else if (type == "rstr") {
      PendingWs& pending = flows_.at(flow);
      const Record& token = r.at("token");
      std::map<std::string, std::string> attributes;
      if (token.contains("plain_attributes")) {
        attributes = attrs_from_record(token.at("plain_attributes"));
      } else {
        attributes = decrypt_payload(
            encrypted_payload_from_record(token.at("encrypted_attributes")),
            pending.keys.secret_key);
      }
      WsResult result;
      result.flow = flow;
      result.target_sp = pending.target_sp;
      result.attributes = attributes;
      result.token = token;
      results_[flow] = result;

      Record invoke;
      invoke["type"] = "ws_invoke";
      invoke["flow"] = flow;
      invoke["token"] = token;
      Record plain = Record::object();
      for (const auto& [name, value] : attributes) plain[name] = value;
      invoke["attributes"] = plain;
      invoke["body"] = "service call";
      if (swap_invoke_key_) {
        swap_invoke_key_ = false;
        SigningKeypair wrong = generate_signing_keypair(sim.rng());
        sign_record(invoke, client_id_, wrong.secret_key);
      } else {
        sign_record(invoke, client_id_, pending.keys.secret_key);
      }
      sim.send(id(), pending.target_sp, invoke);
    } else if (type == "ws_response") {
      results_.at(flow).invoked = true;
      Record detail;
      detail["flow"] = flow;
      detail["kind"] = "wstrust";
      sim.note(id(), "flow_completed", detail);
    } else {
      throw Error(ErrorCode::ConfigError, "WS client: unexpected " + type);
    }
  } catch (const Error& err) {
    note_error(sim, id(), flow, err);
  }
}

}  // namespace pefim
