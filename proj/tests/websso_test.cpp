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

#include <algorithm>
#include <cctype>

#include "pefim/errors.hpp"
#include "pefim/scenario.hpp"

using namespace pefim;

namespace {

// One IdP, two same-group SPs, one principal. The smallest world where a
// proxy group can form.
Scenario small_world(bool willing = true) {
  Scenario s;
  s.name = "websso-unit";
  s.seed = 71;
  s.min_group_size = 2;
  s.consent_mode_default = ConsentMode::UP_FRONT;
  s.idps.push_back({"idp-main", "main.example"});
  ScenarioSp one;
  one.id = "sp-one";
  one.required_attributes = {"display_name", "tier"};
  ScenarioSp two = one;
  two.id = "sp-two";
  s.sps = {one, two};
  ScenarioPrincipal pat;
  pat.id = "pat";
  pat.idp = "idp-main";
  pat.consent_willing = willing;
  pat.attributes = {{"display_name", "Pat Doe"}, {"tier", "gold"}};
  s.principals = {pat};
  return s;
}

Record step(std::initializer_list<std::pair<std::string, Record>> fields) {
  Record r;
  for (const auto& [k, v] : fields) r[k] = v;
  return r;
}

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

size_t count_notes(const Simulation& sim, const std::string& label) {
  size_t n = 0;
  for (const auto& entry : sim.transcript()) {
    if (entry.kind == TranscriptEntry::Kind::NOTE && entry.label == label) ++n;
  }
  return n;
}

bool is_hex64(const std::string& s) {
  return s.size() == 64 && std::all_of(s.begin(), s.end(), [](unsigned char c) {
           return std::isxdigit(c) && !std::isupper(c);
         });
}

}  // namespace

TEST_CASE("consented sign-on establishes a pseudonymous session") {
  Scenario s = small_world();
  s.steps = {
      step({{"op", "portal"},
            {"principal", "pat"},
            {"grant", Record{{"sp", "sp-one"}}}}),
      step({{"op", "websso"}, {"principal", "pat"}, {"sp", "sp-one"}}),
  };
  ScenarioRunner runner(std::move(s));
  RunResult result = runner.run();

  REQUIRE(runner.sp("sp-one").sessions().size() == 1);
  const SpSession& session = runner.sp("sp-one").sessions()[0];
  CHECK(is_hex64(session.tid2));
  CHECK(session.attributes ==
        std::map<std::string, std::string>{{"display_name", "Pat Doe"},
                                           {"tier", "gold"}});
  CHECK(count_error_notes(runner.sim(), "ConsentMissing") == 0);
  CHECK(result.audit_passed);
}

TEST_CASE("service-scope pseudonyms differ per service") {
  Scenario s = small_world();
  s.steps = {
      step({{"op", "portal"},
            {"principal", "pat"},
            {"grant", Record{{"sp", "sp-one"}}}}),
      step({{"op", "websso"}, {"principal", "pat"}, {"sp", "sp-one"}}),
      step({{"op", "websso"}, {"principal", "pat"}, {"sp", "sp-two"}}),
  };
  // sp-one and sp-two share a proxy group, so one grant covers both.
  ScenarioRunner runner(std::move(s));
  RunResult result = runner.run();

  REQUIRE(runner.sp("sp-one").sessions().size() == 1);
  REQUIRE(runner.sp("sp-two").sessions().size() == 1);
  std::string at_one = runner.sp("sp-one").sessions()[0].tid2;
  std::string at_two = runner.sp("sp-two").sessions()[0].tid2;
  CHECK(at_one != at_two);
  CHECK(at_one != runner.tid1_of("pat"));
  CHECK(at_two != runner.tid1_of("pat"));
  CHECK(result.audit_passed);
}

TEST_CASE("transactional mode prompts per transaction and consumes") {
  Scenario s = small_world();
  s.consent_mode_default = ConsentMode::TRANSACTIONAL;
  s.steps = {
      step({{"op", "portal"}, {"principal", "pat"}}),
      step({{"op", "websso"}, {"principal", "pat"}, {"sp", "sp-one"}}),
      step({{"op", "websso"}, {"principal", "pat"}, {"sp", "sp-one"}}),
  };
  ScenarioRunner runner(std::move(s));
  RunResult result = runner.run();

  // Each sign-on prompted afresh; both grants are spent.
  CHECK(runner.sp("sp-one").sessions().size() == 2);
  CHECK(count_notes(runner.sim(), "consent_granted") == 2);
  const auto& records = runner.sb().consent_store().all();
  REQUIRE(records.size() == 2);
  for (const auto& rec : records) {
    CHECK(rec.mode == ConsentMode::TRANSACTIONAL);
    CHECK(rec.consumed);
  }
  // Same principal, same service: the pseudonym is stable across visits.
  CHECK(runner.sp("sp-one").sessions()[0].tid2 ==
        runner.sp("sp-one").sessions()[1].tid2);
  CHECK(result.audit_passed);
}

TEST_CASE("an unwilling principal stops the flow") {
  Scenario s = small_world(/*willing=*/false);
  s.consent_mode_default = ConsentMode::TRANSACTIONAL;
  s.steps = {
      step({{"op", "portal"}, {"principal", "pat"}}),
      step({{"op", "websso"}, {"principal", "pat"}, {"sp", "sp-one"}}),
  };
  ScenarioRunner runner(std::move(s));
  RunResult result = runner.run();

  CHECK(runner.sp("sp-one").sessions().empty());
  CHECK(count_error_notes(runner.sim(), "ConsentMissing") >= 1);
  // No attributes moved, so the audit still holds.
  CHECK(result.audit_passed);
}

TEST_CASE("consent narrower than the service request refuses release") {
  Scenario s = small_world();
  s.steps = {
      step({{"op", "consent_grant"},
            {"principal", "pat"},
            {"sp", "sp-one"},
            {"attributes", Record::array({"tier"})}}),
      step({{"op", "portal"}, {"principal", "pat"}}),
      step({{"op", "websso"}, {"principal", "pat"}, {"sp", "sp-one"}}),
  };
  ScenarioRunner runner(std::move(s));
  RunResult result = runner.run();

  CHECK(runner.sp("sp-one").sessions().empty());
  CHECK(count_error_notes(runner.sim(), "AttributeSetExceedsConsent") >= 1);
  CHECK(result.audit_passed);
}

TEST_CASE("replayed assertions are rejected once per injection") {
  Scenario s = small_world();
  s.steps = {
      step({{"op", "portal"},
            {"principal", "pat"},
            {"grant", Record{{"sp", "sp-one"}}}}),
      step({{"op", "websso"}, {"principal", "pat"}, {"sp", "sp-one"}}),
      step({{"op", "replay"}, {"what", "assertion"}, {"count", 3}}),
  };
  ScenarioRunner runner(std::move(s));
  RunResult result = runner.run();

  CHECK(runner.sp("sp-one").sessions().size() == 1);
  CHECK(count_error_notes(runner.sim(), "ReplayDetected") == 3);
  CHECK(runner.expected_replays() == 3);
  CHECK(result.audit_passed);
}

TEST_CASE("the full roster scenario signs everyone on and passes audit") {
  Scenario s = load_scenario(std::string(SCENARIO_DIR) + "/websso_basic.json");
  ScenarioRunner runner(std::move(s));
  RunResult result = runner.run();

  CHECK(result.audit_passed);
  CHECK(result.report_text.find("AUDIT RESULT: PASS") != std::string::npos);
  CHECK(result.delivered > 0);
  REQUIRE(runner.sp("sp-news").sessions().size() == 2);
  CHECK(runner.sp("sp-shop").sessions().size() == 1);
  CHECK(runner.sp("sp-blog").sessions().size() == 1);
  // Different principals at the same service get unrelated pseudonyms.
  CHECK(runner.sp("sp-news").sessions()[0].tid2 !=
        runner.sp("sp-news").sessions()[1].tid2);
}
