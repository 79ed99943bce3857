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

#include <string>

#include "pefim/audit.hpp"
#include "pefim/errors.hpp"
#include "pefim/scenario.hpp"

using namespace pefim;

namespace {

Scenario canonical_world() {
  Scenario s;
  s.name = "audit-unit";
  s.seed = 101;
  s.min_group_size = 2;
  s.canonical_matrix = true;
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
  pat.consent_willing = true;
  pat.attributes = {{"display_name", "Pat Doe"}, {"tier", "gold"}};
  s.principals = {pat};
  s.steps = {
      Record{{"op", "portal"},
             {"principal", "pat"},
             {"grant", Record{{"sp", "sp-one"}}}},
      Record{{"op", "websso"}, {"principal", "pat"}, {"sp", "sp-one"}},
  };
  return s;
}

const RequirementResult& requirement(const AuditReport& report,
                                     const std::string& id) {
  for (const auto& r : report.requirements) {
    if (r.id == id) return r;
  }
  FAIL("requirement missing: ", id);
  static RequirementResult none;
  return none;
}

}  // namespace

TEST_CASE("a canonical run reproduces the reference exposure matrix") {
  ScenarioRunner runner(canonical_world());
  RunResult result = runner.run();

  REQUIRE(result.report.matrix_checked);
  CHECK(result.report.matrix_diffs.empty());
  CHECK(result.report.matrix == expected_exposure_matrix());

  // Spot-check the load-bearing cells.
  const MatrixRow& sb = result.report.matrix.rows.at(MatrixRole::SB);
  CHECK(sb[size_t(MatrixColumn::USER_IDENTITY)] == CellValue::PSEUDONYM_ONLY);
  CHECK(sb[size_t(MatrixColumn::ATTRIBUTE_VALUE)] == CellValue::NOT_SEEN);
  const MatrixRow& idp = result.report.matrix.rows.at(MatrixRole::IDP);
  CHECK(idp[size_t(MatrixColumn::SP_IDENTITY)] == CellValue::PROXY_ONLY);
  const MatrixRow& ca = result.report.matrix.rows.at(MatrixRole::CA);
  CHECK(ca[size_t(MatrixColumn::ENC_KEY)] == CellValue::CERTIFY_ONLY);
  const MatrixRow& sp = result.report.matrix.rows.at(MatrixRole::SP);
  CHECK(sp[size_t(MatrixColumn::USER_IDENTITY)] == CellValue::PSEUDONYM_ONLY);
  CHECK(sp[size_t(MatrixColumn::ENC_KEY)] == CellValue::PRIVATE);
}

TEST_CASE("disabling encryption flips exactly the broker attribute cell") {
  Scenario s = canonical_world();
  s.faults.disable_encryption = true;
  ScenarioRunner runner(std::move(s));
  RunResult result = runner.run();

  CHECK_FALSE(result.audit_passed);
  REQUIRE(result.report.matrix_diffs.size() == 1);
  const MatrixDiff& diff = result.report.matrix_diffs[0];
  CHECK(diff.role == MatrixRole::SB);
  CHECK(diff.column == MatrixColumn::ATTRIBUTE_VALUE);
  CHECK(diff.actual == CellValue::SEEN);
  CHECK(diff.expected == CellValue::NOT_SEEN);
  CHECK(requirement(result.report, "R3").verdict == Verdict::FAIL);
}

TEST_CASE("the report names all ten requirements in order") {
  ScenarioRunner runner(canonical_world());
  RunResult result = runner.run();

  REQUIRE(result.report.requirements.size() == 10);
  for (size_t i = 0; i < 10; ++i) {
    CHECK(result.report.requirements[i].id == "R" + std::to_string(i + 1));
    CHECK_FALSE(result.report.requirements[i].title.empty());
  }
  CHECK(result.report.passed());
  std::string text = render_report(result.report);
  CHECK(text.rfind("AUDIT RESULT: PASS") != std::string::npos);
  // The verdict line closes the report.
  std::string tail = text.substr(text.find_last_of('\n', text.size() - 2) + 1);
  CHECK(tail == "AUDIT RESULT: PASS\n");
}

TEST_CASE("re-identification needs broker and issuer tables together") {
  ScenarioRunner runner(canonical_world());
  runner.run();

  std::string tid2 = runner.sp("sp-one").sessions()[0].tid2;
  const MappingTable& sb_table = runner.sb().mapper().table();
  const MappingTable& idp_table = runner.idp("idp-main").mapper().table();

  OpenedIdentity opened = open_identity(sb_table, idp_table, tid2);
  CHECK(opened.tid1 == runner.tid1_of("pat"));
  CHECK(opened.issuer_hint == "idp-main");
  CHECK(opened.reference_id.substr(0, 4) == "ref-");

  // Either table alone dead-ends.
  MappingTable empty("nobody");
  CHECK_THROWS_AS(open_identity(empty, idp_table, tid2), Error);
  CHECK_THROWS_AS(open_identity(sb_table, empty, tid2), Error);
  CHECK_THROWS_AS(open_identity(sb_table, idp_table, "tid-unknown"), Error);
}

TEST_CASE("a forged observation in the issuer boundary fails the audit") {
  ScenarioRunner runner(canonical_world());
  runner.run();
  AuditInput input = runner.collect_audit_input();
  REQUIRE(run_audit(input).passed());

  for (auto& view : input.ledgers) {
    if (view.role != MatrixRole::CA) continue;
    view.ledger.record(999, ElementKind::USER_IDENTITY, "pat@main.example");
  }
  AuditReport tampered = run_audit(input);
  CHECK_FALSE(tampered.passed());
  CHECK(requirement(tampered, "R8").verdict == Verdict::FAIL);
}

TEST_CASE("replay rejections must match the injected count exactly") {
  Scenario s = canonical_world();
  s.steps.push_back(Record{{"op", "replay"}, {"what", "assertion"}, {"count", 2}});
  ScenarioRunner runner(std::move(s));
  runner.run();
  AuditInput input = runner.collect_audit_input();
  REQUIRE(input.expected_replays == 2);
  REQUIRE(run_audit(input).passed());

  // Claiming a different injection count exposes the mismatch both ways.
  input.expected_replays = 3;
  CHECK(requirement(run_audit(input), "R6").verdict == Verdict::FAIL);
  input.expected_replays = 1;
  CHECK(requirement(run_audit(input), "R6").verdict == Verdict::FAIL);
}

TEST_CASE("an empty ledger set is refused") {
  AuditInput input;
  try {
    run_audit(input);
    FAIL("audit ran without ledgers");
  } catch (const Error& err) {
    CHECK(err.code() == ErrorCode::IncompleteScenario);
  }
}

TEST_CASE("one pseudonym observed at two services fails the audit") {
  ScenarioRunner runner(canonical_world());
  runner.run();
  AuditInput input = runner.collect_audit_input();

  // Fabricate a second service having seen the first session's pseudonym.
  std::string tid2 = runner.sp("sp-one").sessions()[0].tid2;
  for (auto& view : input.ledgers) {
    if (view.owner != "sp-two") continue;
    view.ledger.record(999, ElementKind::PSEUDONYM, tid2);
  }
  AuditReport report = run_audit(input);
  CHECK_FALSE(report.passed());
  CHECK(requirement(report, "R2").verdict == Verdict::FAIL);
}
