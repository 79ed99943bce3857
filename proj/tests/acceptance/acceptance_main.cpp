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

// Release gate: ten end-to-end properties, one verdict line each. Exits
// nonzero if any property fails. Each check runs against the shipped
// scenario corpus, never against hand-built worlds, so a regression in
// scenario parsing or bootstrap fails loudly here.

#include <chrono>
#include <cstdio>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "pefim/audit.hpp"
#include "pefim/errors.hpp"
#include "pefim/scenario.hpp"

using namespace pefim;

namespace {

struct RunHandle {
  Scenario scenario;
  std::unique_ptr<ScenarioRunner> runner;
  RunResult result;
  double seconds = 0;
};

class Corpus {
 public:
  RunHandle& get(const std::string& name) {
    auto it = runs_.find(name);
    if (it != runs_.end()) return it->second;
    RunHandle h;
    h.scenario = load_scenario(std::string(SCENARIO_DIR) + "/" + name + ".json");
    h.runner = std::make_unique<ScenarioRunner>(h.scenario);
    auto start = std::chrono::steady_clock::now();
    h.result = h.runner->run();
    h.seconds = std::chrono::duration<double>(
                    std::chrono::steady_clock::now() - start)
                    .count();
    return runs_.emplace(name, std::move(h)).first->second;
  }

  static const std::vector<std::string>& names() {
    static const std::vector<std::string> all = {
        "websso_basic",    "websso_noconsent", "replay_storm",
        "messaging_storm", "link_flow",        "wstrust_basic",
        "matrix_fault"};
    return all;
  }

 private:
  std::map<std::string, RunHandle> runs_;
};

// Failure collector for one criterion.
struct Check {
  std::vector<std::string> problems;
  void expect(bool ok, const std::string& what) {
    if (!ok) problems.push_back(what);
  }
};

size_t count_error_notes(const Simulation& sim, const std::string& code) {
  size_t n = 0;
  for (const auto& entry : sim.transcript()) {
    if (entry.kind != TranscriptEntry::Kind::NOTE || entry.label != "error") {
      continue;
    }
    if (Record::parse(entry.body).at("code").get<std::string>() == code) ++n;
  }
  return n;
}

std::string transcript_dump(const Simulation& sim) {
  std::ostringstream out;
  for (const auto& entry : sim.transcript()) {
    out << entry.to_record().dump() << "\n";
  }
  return out.str();
}

// Maps a session pseudonym back to the scenario principal through the
// designated-opener path (broker table plus issuing IdP table).
std::string principal_of(RunHandle& h, const std::string& tid2) {
  for (const auto& i : h.scenario.idps) {
    try {
      OpenedIdentity opened =
          open_identity(h.runner->sb().mapper().table(),
                        h.runner->idp(i.id).mapper().table(), tid2);
      for (const auto& p : h.scenario.principals) {
        if (h.runner->tid1_of(p.id) == opened.tid1) return p.id;
      }
    } catch (const Error&) {
      // Wrong issuer table for this pseudonym; try the next IdP.
    }
  }
  return "";
}

std::set<std::string> pseudonym_universe(const AuditInput& input) {
  std::set<std::string> values;
  for (const auto& view : input.ledgers) {
    for (const auto& v : view.ledger.values_of(ElementKind::PSEUDONYM)) {
      values.insert(v);
    }
  }
  return values;
}

// 1. Every established session carries exactly the issuing store's
// attributes intersected with the group release policy, and the canonical
// scenario finishes inside the time budget.
void attribute_delivery_exact(Corpus& corpus, Check& check) {
  RunHandle& h = corpus.get("websso_basic");
  check.expect(h.seconds < 5.0, "canonical run took " +
                                    std::to_string(h.seconds) + "s (budget 5s)");
  const FederationRegistry& registry = h.runner->config()->registry;
  size_t sessions = 0;
  for (const auto& sp : h.scenario.sps) {
    for (const auto& session : h.runner->sp(sp.id).sessions()) {
      ++sessions;
      std::string principal = principal_of(h, session.tid2);
      if (principal.empty()) {
        check.expect(false, "session at " + sp.id + " maps to no principal");
        continue;
      }
      const std::set<std::string>& policy =
          registry.policy.attribute_release_policy.at(
              lookup_proxy(registry, sp.id));
      std::map<std::string, std::string> expected;
      for (const auto& p : h.scenario.principals) {
        if (p.id != principal) continue;
        for (const auto& [name, value] : p.attributes) {
          if (policy.count(name)) expected[name] = value;
        }
      }
      check.expect(session.attributes == expected,
                   "session of " + principal + " at " + sp.id +
                       " deviates from store-intersect-policy");
    }
  }
  check.expect(sessions == 4, "expected 4 sessions, saw " +
                                  std::to_string(sessions));
  check.expect(h.result.audit_passed, "canonical run failed its audit");
}

// 2. IdP ledgers know services only as broker-scope proxies.
void idp_blind_to_services(Corpus& corpus, Check& check) {
  for (const auto& name : Corpus::names()) {
    RunHandle& h = corpus.get(name);
    std::set<std::string> allowed{"sb"};
    for (const auto& [proxy, group] : h.runner->config()->registry.groups) {
      (void)group;
      allowed.insert(proxy);
    }
    for (const auto& i : h.scenario.idps) {
      for (const auto& v :
           h.runner->idp(i.id).ledger().values_of(ElementKind::SP_IDENTITY)) {
        check.expect(allowed.count(v) == 1, name + ": " + i.id +
                                                " observed service identity '" +
                                                v + "'");
      }
    }
  }
}

// 3. Service-scope pseudonyms are disjoint across services (bar consented
// pairs) and a bulk derivation sweep is collision-free.
void pseudonyms_unlinkable(Corpus& corpus, Check& check) {
  RunHandle& basic = corpus.get("websso_basic");
  std::map<std::string, std::set<std::string>> by_principal;
  for (const auto& sp : basic.scenario.sps) {
    for (const auto& session : basic.runner->sp(sp.id).sessions()) {
      std::string principal = principal_of(basic, session.tid2);
      check.expect(by_principal[principal].insert(session.tid2).second,
                   principal + " reuses one pseudonym at two services");
    }
  }

  for (const auto& name : Corpus::names()) {
    RunHandle& h = corpus.get(name);
    AuditInput input = h.runner->collect_audit_input();
    std::vector<std::pair<std::string, std::set<std::string>>> per_sp;
    for (const auto& view : input.ledgers) {
      if (view.role != MatrixRole::SP) continue;
      std::set<std::string> values;
      for (const auto& v : view.ledger.values_of(ElementKind::PSEUDONYM)) {
        if (!input.consented_link_tids.count(v)) values.insert(v);
      }
      per_sp.emplace_back(view.owner, std::move(values));
    }
    for (size_t a = 0; a < per_sp.size(); ++a) {
      for (size_t b = a + 1; b < per_sp.size(); ++b) {
        for (const auto& v : per_sp[a].second) {
          check.expect(per_sp[b].second.count(v) == 0,
                       name + ": pseudonym shared by " + per_sp[a].first +
                           " and " + per_sp[b].first);
        }
      }
    }
  }

  DeterministicRng rng(20260819);
  Bytes key = rng.bytes(32);
  std::set<std::string> derived;
  for (int p = 0; p < 2000; ++p) {
    for (int s = 0; s < 5; ++s) {
      derived.insert(derive_tid_value(key, "parent-" + std::to_string(p),
                                      {"scope-" + std::to_string(s)},
                                      TidTier::TID2));
    }
  }
  check.expect(derived.size() == 10000,
               "bulk derivation collided: " + std::to_string(derived.size()) +
                   "/10000 distinct");
}

// 4. Broker and trust-root ledgers never hold a plaintext attribute value.
void no_attribute_disclosure(Corpus& corpus, Check& check) {
  for (const auto& name : Corpus::names()) {
    if (name == "matrix_fault") continue;  // deliberate fault, gated below
    RunHandle& h = corpus.get(name);
    std::set<std::string> universe;
    for (const auto& p : h.scenario.principals) {
      for (const auto& [attr, value] : p.attributes) {
        (void)attr;
        universe.insert(value);
      }
    }
    auto scan = [&](const ObservationLedger& ledger, const std::string& who) {
      for (const auto& event : ledger.events()) {
        for (const auto& value : universe) {
          check.expect(event.value.find(value) == std::string::npos,
                       name + ": " + who + " ledger holds '" + value + "'");
        }
      }
    };
    scan(h.runner->sb().ledger(), "broker");
    scan(h.runner->ca().ledger(), "trust root");
  }
}

// 5. Every injected replay of a recorded assertion or token is rejected.
void replays_all_rejected(Corpus& corpus, Check& check) {
  RunHandle& h = corpus.get("replay_storm");
  size_t injected = h.runner->expected_replays();
  size_t rejected = count_error_notes(h.runner->sim(), "ReplayDetected");
  check.expect(injected == 100,
               "scenario injected " + std::to_string(injected) + "/100");
  check.expect(rejected == injected,
               std::to_string(rejected) + "/" + std::to_string(injected) +
                   " replays rejected");
  check.expect(h.result.audit_passed, "replay run failed its audit");
}

// 6. A transactional flow without consent halts, and the trust root ends
// every run knowing nothing beyond certificate serials and its own root.
void consent_gate_and_minimal_trust_root(Corpus& corpus, Check& check) {
  RunHandle& h = corpus.get("websso_noconsent");
  size_t sessions = 0;
  for (const auto& sp : h.scenario.sps) {
    sessions += h.runner->sp(sp.id).sessions().size();
  }
  check.expect(sessions == 0, "consentless run established a session");
  check.expect(count_error_notes(h.runner->sim(), "ConsentMissing") >= 1,
               "no consent failure was recorded");

  for (const auto& name : Corpus::names()) {
    RunHandle& run = corpus.get(name);
    AuditInput input = run.runner->collect_audit_input();
    std::set<std::string> pseudonyms = pseudonym_universe(input);
    std::set<std::string> addresses;
    std::set<std::string> attributes;
    for (const auto& view : input.ledgers) {
      for (const auto& v : view.ledger.values_of(ElementKind::CLIENT_ADDR)) {
        addresses.insert(v);
      }
    }
    for (const auto& p : run.scenario.principals) {
      for (const auto& [attr, value] : p.attributes) {
        (void)attr;
        attributes.insert(value);
      }
    }
    for (const auto& event : run.runner->ca().ledger().events()) {
      bool kind_ok = event.kind == ElementKind::CERT_SERIAL ||
                     event.kind == ElementKind::SIGNING_ROOT;
      check.expect(kind_ok, name + ": trust root recorded " +
                                std::string(element_kind_name(event.kind)));
      check.expect(pseudonyms.count(event.value) == 0,
                   name + ": trust root holds a pseudonym");
      check.expect(addresses.count(event.value) == 0,
                   name + ": trust root holds a client address");
      check.expect(attributes.count(event.value) == 0,
                   name + ": trust root holds an attribute value");
    }
  }
}

// 7. The canonical run reproduces the reference exposure matrix exactly;
// disabling payload encryption flips exactly the broker attribute cell
// and fails the audit.
void exposure_matrix_conformance(Corpus& corpus, Check& check) {
  RunHandle& basic = corpus.get("websso_basic");
  check.expect(basic.result.report.matrix_checked,
               "canonical run skipped the matrix comparison");
  check.expect(basic.result.report.matrix == expected_exposure_matrix(),
               "canonical matrix deviates from the reference");
  check.expect(basic.result.report.matrix_diffs.empty(),
               "canonical run reported matrix diffs");

  RunHandle& fault = corpus.get("matrix_fault");
  check.expect(!fault.result.audit_passed,
               "encryption fault passed the audit");
  if (fault.result.report.matrix_diffs.size() == 1) {
    const MatrixDiff& diff = fault.result.report.matrix_diffs[0];
    check.expect(diff.role == MatrixRole::SB &&
                     diff.column == MatrixColumn::ATTRIBUTE_VALUE &&
                     diff.actual == CellValue::SEEN,
                 "fault flipped the wrong cell");
  } else {
    check.expect(false,
                 "fault produced " +
                     std::to_string(fault.result.report.matrix_diffs.size()) +
                     " diffs, wanted exactly 1");
  }
}

// 8. A hundred service messages all arrive in the right mailbox through
// the rewrite chain, and the broker never learns the user's address.
void messaging_chain_complete(Corpus& corpus, Check& check) {
  RunHandle& h = corpus.get("messaging_storm");
  const auto& mailbox = h.runner->user_agent("alice").mailbox();
  check.expect(mailbox.size() == 100, "mailbox holds " +
                                          std::to_string(mailbox.size()) +
                                          "/100 messages");
  const Record want_trace =
      Record::array({"sp-news", "sb", "idp-alpha", "mailbox:alice"});
  for (const auto& msg : mailbox) {
    if (msg.content.at("hop_trace") != want_trace) {
      check.expect(false, "a message took an unexpected hop path");
      break;
    }
  }
  check.expect(h.runner->sp("sp-news").inbox().size() == 1,
               "the reply did not reach the service");
  for (const auto& event : h.runner->sb().ledger().events()) {
    check.expect(event.value.find("alice@alpha.example") == std::string::npos,
                 "broker ledger holds the user address");
  }
  check.expect(h.result.audit_passed, "messaging run failed its audit");
}

// 9. Cross-service linking requires consent, returns the same pair
// pseudonym on repeat requests, and cannot be revoked afterwards.
void linking_stable_and_irrevocable(Corpus& corpus, Check& check) {
  RunHandle& h = corpus.get("link_flow");
  std::vector<Record> established;
  for (const auto& entry : h.runner->sim().transcript()) {
    if (entry.kind == TranscriptEntry::Kind::NOTE &&
        entry.label == "link_established") {
      established.push_back(Record::parse(entry.body));
    }
  }
  check.expect(established.size() == 2,
               std::to_string(established.size()) + "/2 link completions");
  if (established.size() == 2) {
    check.expect(established[0].at("tid3_forward") ==
                         established[1].at("tid3_forward") &&
                     established[0].at("tid3_reverse") ==
                         established[1].at("tid3_reverse"),
                 "repeat link request yielded a different pair pseudonym");
  }
  size_t delivered = 0;
  for (const auto& [key, payloads] : h.runner->sp("sp-shop").linked_data()) {
    (void)key;
    delivered += payloads.size();
  }
  check.expect(delivered == 2, "linked payloads delivered: " +
                                   std::to_string(delivered) + "/2");
  check.expect(count_error_notes(h.runner->sim(), "LinkIrrevocable") == 1,
               "revoking the link did not fail as irrevocable");
  check.expect(h.result.audit_passed, "link run failed its audit");
}

// 10. Same scenario, same seed: transcripts and reports are byte-identical.
void deterministic_replay(Corpus& corpus, Check& check) {
  for (const std::string name : {"websso_basic", "link_flow"}) {
    RunHandle& first = corpus.get(name);
    ScenarioRunner again(first.scenario);
    RunResult result = again.run();
    check.expect(transcript_dump(again.sim()) ==
                     transcript_dump(first.runner->sim()),
                 name + ": transcripts diverge across identical runs");
    check.expect(result.report_text == first.result.report_text,
                 name + ": reports diverge across identical runs");
    check.expect(result.registry_digest == first.result.registry_digest,
                 name + ": registry digests diverge across identical runs");
  }
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<void(Corpus&, Check&)> body;
  };
  const std::vector<Criterion> criteria = {
      {"sessions carry exactly the consented attribute intersection in time",
       attribute_delivery_exact},
      {"identity providers observe proxies, never member services",
       idp_blind_to_services},
      {"service pseudonyms neither collide nor link across services",
       pseudonyms_unlinkable},
      {"broker and trust root ledgers hold no plaintext attribute values",
       no_attribute_disclosure},
      {"one hundred injected replays are all rejected", replays_all_rejected},
      {"consentless sign-on halts and the trust root keeps serials only",
       consent_gate_and_minimal_trust_root},
      {"observed exposure matches the reference matrix and faults surface",
       exposure_matrix_conformance},
      {"one hundred relayed messages arrive over pseudonymous hops",
       messaging_chain_complete},
      {"pair linking needs consent, is stable, and cannot be revoked",
       linking_stable_and_irrevocable},
      {"identical scenario and seed reproduce the run byte for byte",
       deterministic_replay},
  };

  Corpus corpus;
  int failures = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    Check check;
    try {
      criteria[i].body(corpus, check);
    } catch (const std::exception& e) {
      check.problems.push_back(std::string("exception: ") + e.what());
    }
    bool ok = check.problems.empty();
    std::printf("%s %2zu/10 %s\n", ok ? "PASS" : "FAIL", i + 1,
                criteria[i].name);
    for (const auto& p : check.problems) {
      std::printf("        - %s\n", p.c_str());
    }
    if (!ok) ++failures;
  }
  if (failures > 0) {
    std::printf("ACCEPTANCE: %d/10 criteria failed\n", failures);
    return 1;
  }
  std::printf("ACCEPTANCE: 10/10 criteria hold\n");
  return 0;
}
