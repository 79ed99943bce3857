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

#include "pefim/actors.hpp"
#include "pefim/audit.hpp"

namespace pefim {

struct ScenarioIdp {
  std::string id;
  std::string home_domain;
};

struct ScenarioSp {
  std::string id;
  std::set<std::string> required_attributes;
  NameIdPolicy nameid_policy = NameIdPolicy::TARGETED;
};

struct ScenarioPrincipal {
  std::string id;
  std::string idp;
  bool consent_willing = false;
  std::map<std::string, std::string> attributes;
};

struct ScenarioWsClient {
  std::string id;
  std::string principal;
};

// A runnable world description: federation shape, principals with their
// attribute stores, and a scripted step list.
struct Scenario {
  std::string name;
  uint64_t seed = 0;
  bool canonical_matrix = false;
  int min_group_size = 2;
  ConsentMode consent_mode_default = ConsentMode::UP_FRONT;
  FaultFlags faults;
  std::vector<ScenarioIdp> idps;
  std::vector<ScenarioSp> sps;
  std::vector<ScenarioPrincipal> principals;
  std::vector<ScenarioWsClient> ws_clients;
  std::vector<Record> steps;
};

// Parses and cross-validates a scenario; every step may reference only
// declared entities. Errors: ConfigError naming the offending field.
Scenario scenario_from_record(const Record& r);
Scenario load_scenario(const std::string& path);

struct RunOptions {
  std::optional<uint64_t> seed;       // overrides the scenario seed
  bool stress = false;                // multi-threaded dispatch
  std::string out_dir;                // empty: write no output bundle
  std::string state_dir;              // empty: no persistence across runs
  std::optional<int> min_group_size;  // overrides the scenario floor
};

struct RunResult {
  AuditReport report;
  std::string report_text;
  uint64_t delivered = 0;  // envelopes dispatched over the whole run
  uint64_t seed = 0;
  std::string registry_digest;
  bool audit_passed = false;
};

// Builds the world deterministically from (scenario, seed), executes the
// scripted steps with a quiesce between steps, audits the ledgers, and
// optionally writes the output bundle and persisted broker state.
class ScenarioRunner {
 public:
  explicit ScenarioRunner(Scenario scenario, RunOptions options = {});
  ~ScenarioRunner();

  ScenarioRunner(const ScenarioRunner&) = delete;
  ScenarioRunner& operator=(const ScenarioRunner&) = delete;

  // Registry, keys, actors, principals; loads persisted broker state.
  // run() calls this; tests call it directly to drive steps by hand.
  void bootstrap();

  void execute_step(const Record& step);

  RunResult run();

  // Assembles the audit's input from the frozen world. Requires a
  // bootstrapped (normally quiescent) runner.
  AuditInput collect_audit_input();

  Simulation& sim() { return *sim_; }
  SharedConfigPtr config() const { return config_; }
  const Scenario& scenario() const { return scenario_; }
  uint64_t seed() const { return seed_; }

  CaActor& ca();
  SbActor& sb();
  DiscoveryActor& discovery();
  IdpActor& idp(const std::string& id);
  SpActor& sp(const std::string& id);
  UserAgentActor& user_agent(const std::string& principal);
  WsClientActor& ws_client(const std::string& id);

  // The broker-scope pseudonym a principal's IdP would derive; computed
  // from bootstrap-time key material, standing in for the out-of-band
  // channel a consent portal would use.
  std::string tid1_of(const std::string& principal) const;

  std::string next_flow_id();
  // Drains the queue (stress or deterministic per options). Returns the
  // number of envelopes delivered.
  uint64_t quiesce();

  size_t expected_replays() const { return expected_replays_; }
  size_t expected_probe_rejections() const { return expected_probes_; }
  std::string registry_digest() const;

  static constexpr const char* kCaId = "ca";
  static constexpr const char* kSbId = "sb";
  static constexpr const char* kDsId = "ds";

 private:
  struct PrincipalMeta {
    std::string reference_id;
    std::string secret;
    std::string client_addr;
    std::string user_identity;
    std::string ua_id;
    std::string idp;
    std::string home_domain;
  };

  void step_websso(const Record& step);
  void step_portal(const Record& step);
  void step_wstrust(const Record& step);
  void step_send_message(const Record& step);
  void step_reply_message(const Record& step);
  void step_link(const Record& step);
  void step_replay(const Record& step);
  void step_probe(const Record& step);
  void step_consent_grant(const Record& step);
  void step_revoke_consent(const Record& step);

  // Resolves a step's grant/consent target to (target, attributes).
  std::pair<std::string, std::set<std::string>> resolve_consent_target(
      const Record& step) const;
  const SpSession& session_of(const std::string& sp_id, const Record& step);

  void write_outputs(const RunResult& result) const;
  void load_persisted_state();
  void save_persisted_state() const;
  void acquire_state_lock();
  void release_state_lock();

  Scenario scenario_;
  RunOptions options_;
  uint64_t seed_ = 0;
  int effective_floor_ = 2;
  std::unique_ptr<DeterministicRng> rng_;
  std::unique_ptr<Simulation> sim_;
  SharedConfigPtr config_;
  std::map<std::string, PrincipalMeta> principal_meta_;
  std::map<std::string, Bytes> idp_tid_keys_;
  bool bootstrapped_ = false;
  int flow_counter_ = 0;
  uint64_t delivered_ = 0;
  size_t expected_replays_ = 0;
  size_t expected_probes_ = 0;
  bool lock_held_ = false;
};

// Output-bundle round trip for offline re-auditing.
Record registry_to_record(const FederationRegistry& registry);
FederationRegistry registry_from_record(const Record& r);
Record audit_input_to_record(const AuditInput& input);
AuditInput audit_input_from_records(const Record& bundle, const Record& ledgers);
// Reads bundle.json + ledgers.json from dir. Errors: MissingTranscript.
AuditInput load_audit_input(const std::string& dir);

}  // namespace pefim
