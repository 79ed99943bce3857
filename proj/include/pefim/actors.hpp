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
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "pefim/consent.hpp"
#include "pefim/crypto.hpp"
#include "pefim/id_mapping.hpp"
#include "pefim/registry.hpp"
#include "pefim/sim.hpp"

namespace pefim {

// Test hooks that deliberately break a protocol guarantee so the audit
// can demonstrate it would catch the breakage.
struct FaultFlags {
  // IdP ships attributes in the clear; the broker can then read them.
  bool disable_encryption = false;
};

// Read-only facts every actor shares: federation metadata, the CA trust
// root, and routing tables. Private keys never live here.
struct SharedConfig {
  FederationRegistry registry;
  Bytes trust_root;  // CA root public key
  std::string ca_id;
  std::string sb_id;
  std::string ds_id;
  std::map<std::string, std::string> domain_to_idp;   // home domain -> IdP id
  std::map<std::string, std::string> mail_domain_owner;  // mail domain -> actor
  uint64_t assertion_freshness = 120;  // simulated seconds
  FaultFlags faults;
};

using SharedConfigPtr = std::shared_ptr<const SharedConfig>;

// ---------------------------------------------------------------------------
// Certificate authority. Organizationally separate from the broker: it
// issues one-time certificates and records nothing but serials.

class CaActor final : public Actor {
 public:
  CaActor(std::string id, SharedConfigPtr config, SigningKeypair root_keys,
          std::set<std::string> client_allowlist);

  void on_message(Simulation& sim, const SimEnvelope& env) override;

  const Bytes& root_public_key() const { return root_keys_.public_key; }

 private:
  SharedConfigPtr config_;
  SigningKeypair root_keys_;
  // Out-of-band bootstrap credentials for non-SP requesters (WS clients).
  std::set<std::string> client_allowlist_;
};

// ---------------------------------------------------------------------------
// Discovery service. Maps a home-domain hint to the principal's IdP; sees
// the client address and the SP context, plus the SP's grouped
// characteristics, and nothing about the user.

class DiscoveryActor final : public Actor {
 public:
  DiscoveryActor(std::string id, SharedConfigPtr config);

  void on_message(Simulation& sim, const SimEnvelope& env) override;

 private:
  SharedConfigPtr config_;
};

// ---------------------------------------------------------------------------
// Principal-side user agent. Carries the client address token on every
// front-channel hop, drives redirects, answers consent prompts per its
// scripted willingness, and owns the principal's mailbox.

struct MailboxMessage {
  Record content;
  uint64_t received_at = 0;
};

class UserAgentActor final : public Actor {
 public:
  UserAgentActor(std::string id, SharedConfigPtr config,
                 std::string principal_id, std::string credential_secret,
                 std::string client_addr, std::string home_idp,
                 std::string home_domain, std::string user_identity,
                 bool consent_willing);

  void on_message(Simulation& sim, const SimEnvelope& env) override;

  const std::vector<MailboxMessage>& mailbox() const { return mailbox_; }
  const std::string& client_addr() const { return client_addr_; }
  const std::string& principal_id() const { return principal_id_; }

 private:
  struct FlowState {
    std::string sp;
    std::string idp_hint;
    Record stashed_request;  // authn request awaiting discovery
    bool discovery_done = false;
  };

  void handle_redirect(Simulation& sim, const Record& r);

  SharedConfigPtr config_;
  std::string principal_id_;
  std::string credential_secret_;
  std::string client_addr_;
  std::string home_idp_;
  std::string home_domain_;
  std::string user_identity_;
  bool consent_willing_;
  std::map<std::string, FlowState> flows_;
  std::vector<MailboxMessage> mailbox_;
};

// ---------------------------------------------------------------------------
// Service provider: WebSSO relying party, WS server, relay correspondent,
// and link endpoint. Pseudonymous toward the IdP via its proxy group.

struct SpSession {
  std::string tid2;
  std::map<std::string, std::string> attributes;
  std::string flow;
  std::string assertion_id;
  uint64_t established_at = 0;
};

class SpActor final : public Actor {
 public:
  SpActor(std::string id, SharedConfigPtr config, SigningKeypair static_keys);

  void on_message(Simulation& sim, const SimEnvelope& env) override;

  const std::vector<SpSession>& sessions() const { return sessions_; }
  const std::vector<Record>& inbox() const { return inbox_; }
  // Payloads received over a link, keyed by this SP's own pseudonym.
  const std::map<std::string, std::vector<Record>>& linked_data() const {
    return linked_data_;
  }

  // Fault hook: the next flow reuses the previous one-time keypair.
  void force_cert_reuse() { force_reuse_ = true; }

 private:
  struct PendingAuth {
    SigningKeypair onetime_keys;
    OneTimeCertificate cert;
    std::string flow;
    bool cert_ready = false;
  };

  void start_flow(Simulation& sim, const std::string& flow);
  void handle_cert(Simulation& sim, const Record& r);
  void handle_assertion(Simulation& sim, const SimEnvelope& env, const Record& r);
  void handle_ws_invoke(Simulation& sim, const Record& r);

  SharedConfigPtr config_;
  SigningKeypair static_keys_;
  std::map<std::string, PendingAuth> pending_;  // request_id -> state
  std::map<std::string, PendingAuth> awaiting_cert_;  // flow -> state
  std::vector<SpSession> sessions_;
  std::set<std::string> consumed_assertions_;
  std::set<std::string> consumed_tokens_;
  std::set<std::string> used_serials_;
  std::optional<PendingAuth> last_auth_;  // kept only to exercise the reuse guard
  bool force_reuse_ = false;
  std::vector<Record> inbox_;
  std::map<std::string, std::string> flow_ua_;  // flow -> originating agent
  std::map<std::string, std::vector<Record>> linked_data_;
  std::map<std::string, Record> pending_links_;  // flow -> outbound link intent
  std::map<std::string, std::string> pending_link_payloads_;  // tid3 -> flow
  std::map<std::string, Record> incoming_link_payloads_;  // tid3 -> payload
};

// ---------------------------------------------------------------------------
// Service broker: the pseudonymizing hub. Relays authentication traffic,
// maps pseudonym tiers, stores consent, rewrites relay addresses, gates
// WS-Trust requests, and issues link pseudonyms.

class SbActor final : public Actor {
 public:
  SbActor(std::string id, SharedConfigPtr config, SigningKeypair static_keys,
          Bytes tid_key);

  void on_message(Simulation& sim, const SimEnvelope& env) override;

  ConsentStore& consent_store() { return consent_store_; }
  const ConsentStore& consent_store() const { return consent_store_; }
  const IdMapper& mapper() const { return mapper_; }
  const std::map<std::string, std::string>& ua_sessions() const {
    return ua_sessions_;
  }
  void restore_state(ConsentStore store,
                     std::map<std::string, std::string> ua_sessions);
  const Bytes& signing_public() const { return static_keys_.public_key; }

 private:
  struct Correlation {
    std::string orig_request_id;
    std::string inner_sp;
    std::string proxy_id;
    std::string idp;
    std::string flow;
    std::string client_addr;
    std::string ua;  // agent that carries the front-channel hops
  };
  struct WsCorrelation {
    std::string orig_request_id;
    std::string client_actor;
    std::string target_sp;
    std::string flow;
  };
  struct PendingPrompt {
    Record request;  // verified inner authn request
    std::string inner_sp;
    std::string proxy_id;
    std::string idp;
    std::string tid1;
    std::string flow;
    std::string client_addr;
    std::string ua;
  };

  void handle_authn_request(Simulation& sim, const SimEnvelope& env, const Record& r);
  void forward_request(Simulation& sim, const Record& inner,
                       const std::string& inner_sp, const std::string& proxy_id,
                       const std::string& idp, const std::string& flow,
                       const std::string& client_addr,
                       const std::string& consent_record, const std::string& ua);
  void handle_assertion(Simulation& sim, const SimEnvelope& env, const Record& r);
  void handle_portal_visit(Simulation& sim, const SimEnvelope& env, const Record& r);
  void handle_portal_assertion(Simulation& sim, const SimEnvelope& env,
                               const Record& r);
  void handle_consent_check(Simulation& sim, const SimEnvelope& env, const Record& r);
  void handle_prompt_response(Simulation& sim, const SimEnvelope& env,
                              const Record& r);
  void handle_relay(Simulation& sim, const SimEnvelope& env, const Record& r);
  void handle_link_request(Simulation& sim, const SimEnvelope& env, const Record& r);
  void handle_convert(Simulation& sim, const SimEnvelope& env, const Record& r);
  void handle_rst(Simulation& sim, const SimEnvelope& env, const Record& r);
  void handle_rst_response(Simulation& sim, const SimEnvelope& env, const Record& r);

  // Identifies which group member signed the request. The broker is the
  // one actor allowed to learn this. Errors: UnknownGroupMember.
  std::string identify_member(const Record& r, const SpProxyGroup& group) const;

  SharedConfigPtr config_;
  SigningKeypair static_keys_;
  IdMapper mapper_;
  ConsentStore consent_store_;
  std::map<std::string, std::string> ua_sessions_;  // client_addr -> TID1
  std::map<std::string, Correlation> correlations_;  // fwd request_id -> state
  std::map<std::string, Correlation> portal_correlations_;
  std::map<std::string, WsCorrelation> ws_correlations_;
  std::map<std::string, PendingPrompt> prompts_;  // prompt_id -> state
  std::map<std::string, Record> pending_grants_;  // portal request_id -> grant
  std::set<std::string> seen_assertions_;
  std::map<std::string, Record> reply_tokens_;  // token -> {addr, actor}
};

// ---------------------------------------------------------------------------
// Identity provider: authenticates principals, derives broker-scope
// pseudonyms, checks consent, releases policy-bound attributes encrypted
// to the requester's one-time key, and relays mail to its users.

class IdpActor final : public Actor {
 public:
  IdpActor(std::string id, SharedConfigPtr config, SigningKeypair static_keys,
           BoxKeypair box_keys, Bytes tid_key, std::string home_domain);

  void on_message(Simulation& sim, const SimEnvelope& env) override;

  struct Principal {
    std::string principal_id;
    std::string reference_id;
    std::string credential_secret;
    std::string user_identity;  // user@homeorg.tld
    std::string ua_actor;
    std::map<std::string, std::string> attributes;
  };

  void add_principal(Principal principal);

  const IdMapper& mapper() const { return mapper_; }
  const std::map<std::string, Principal>& principals() const {
    return principals_;
  }
  const Bytes& box_public() const { return box_keys_.public_key; }
  const std::string& home_domain() const { return home_domain_; }

 private:
  struct PendingIssue {
    Record request;
    std::string tid1;
    std::string principal_id;
    std::string flow;
    std::string client_addr;
    bool ws = false;
    std::string reply_to;  // actor to answer (SB for ws flows)
  };

  void handle_authn(Simulation& sim, const SimEnvelope& env, const Record& r);
  void handle_portal(Simulation& sim, const SimEnvelope& env, const Record& r);
  void handle_consent_result(Simulation& sim, const SimEnvelope& env,
                             const Record& r);
  void handle_rst_forward(Simulation& sim, const SimEnvelope& env, const Record& r);
  void handle_relay(Simulation& sim, const SimEnvelope& env, const Record& r);
  void handle_probe(Simulation& sim, const SimEnvelope& env, const Record& r);
  void issue_assertion(Simulation& sim, const PendingIssue& pending,
                       const std::string& consent_record);
  void issue_ws_token(Simulation& sim, const PendingIssue& pending,
                      const std::string& consent_record);

  const Principal* authenticate(const Record& credential);

  SharedConfigPtr config_;
  SigningKeypair static_keys_;
  BoxKeypair box_keys_;
  IdMapper mapper_;
  std::string home_domain_;
  std::map<std::string, Principal> principals_;
  std::map<std::string, std::string> refid_to_principal_;
  std::map<std::string, PendingIssue> pending_issues_;  // request_id -> state
};

// ---------------------------------------------------------------------------
// WS client: service software acting for one principal. Authenticates
// with a short-term certificate, submits token requests through the
// broker, decrypts its attributes, and invokes the WS server.

class WsClientActor final : public Actor {
 public:
  WsClientActor(std::string id, SharedConfigPtr config, std::string client_id,
                std::string principal_id, std::string credential_secret,
                std::string home_idp);

  void on_message(Simulation& sim, const SimEnvelope& env) override;

  // Fault hook: sign the next invocation with a key that does not match
  // the token-bound key.
  void swap_invoke_key() { swap_invoke_key_ = true; }

  struct WsResult {
    std::string flow;
    std::string target_sp;
    std::map<std::string, std::string> attributes;
    Record token;
    bool invoked = false;
  };
  const std::map<std::string, WsResult>& results() const { return results_; }
  const std::string& client_id() const { return client_id_; }

 private:
  struct PendingWs {
    SigningKeypair keys;
    OneTimeCertificate cert;
    std::string target_sp;
    std::string token_type;
    std::string request_id;
    bool cert_ready = false;
  };

  SharedConfigPtr config_;
  std::string client_id_;
  std::string principal_id_;
  std::string credential_secret_;
  std::string home_idp_;
  std::map<std::string, PendingWs> flows_;  // flow -> state
  std::map<std::string, WsResult> results_;
  bool swap_invoke_key_ = false;
};

}  // namespace pefim
