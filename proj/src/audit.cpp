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

#include "pefim/audit.hpp"

#include <algorithm>
#include <sstream>

#include "pefim/errors.hpp"

namespace pefim {

const char* cell_value_name(CellValue value) {
  switch (value) {
    case CellValue::NOT_SEEN: return "NOT_SEEN";
    case CellValue::SEEN: return "SEEN";
    case CellValue::PSEUDONYM_ONLY: return "PSEUDONYM_ONLY";
    case CellValue::PROXY_ONLY: return "PROXY_ONLY";
    case CellValue::SELF_ONLY: return "SELF_ONLY";
    case CellValue::PUBLIC_ONLY: return "PUBLIC_ONLY";
    case CellValue::PRIVATE: return "PRIVATE";
    case CellValue::CERTIFY_ONLY: return "CERTIFY_ONLY";
    case CellValue::GROUPED_ONLY: return "GROUPED_ONLY";
  }
  return "?";
}

const char* matrix_role_name(MatrixRole role) {
  switch (role) {
    case MatrixRole::CA: return "CA";
    case MatrixRole::IDP: return "IDP";
    case MatrixRole::SB: return "SB";
    case MatrixRole::DISCOVERY: return "DISCOVERY";
    case MatrixRole::SP: return "SP";
  }
  return "?";
}

const char* matrix_column_name(MatrixColumn column) {
  switch (column) {
    case MatrixColumn::CLIENT_ADDR: return "CLIENT_ADDR";
    case MatrixColumn::SP_IDENTITY: return "SP_IDENTITY";
    case MatrixColumn::USER_IDENTITY: return "USER_IDENTITY";
    case MatrixColumn::SIGNING_ROOT: return "SIGNING_ROOT";
    case MatrixColumn::ENC_KEY: return "ENC_KEY";
    case MatrixColumn::ATTRIBUTE_NAME: return "ATTRIBUTE_NAME";
    case MatrixColumn::ATTRIBUTE_VALUE: return "ATTRIBUTE_VALUE";
  }
  return "?";
}

const char* verdict_name(Verdict verdict) {
  switch (verdict) {
    case Verdict::PASS: return "PASS";
    case Verdict::WEAK: return "WEAK";
    case Verdict::FAIL: return "FAIL";
    case Verdict::NA: return "N/A";
  }
  return "?";
}

namespace {

std::set<std::string> broker_scope_ids(const FederationRegistry& registry) {
  std::set<std::string> ids;
  for (const auto& e : registry.entities_with_role(EntityRole::SB)) {
    ids.insert(e);
  }
  for (const auto& [proxy_id, group] : registry.groups) ids.insert(proxy_id);
  return ids;
}

CellValue classify_sp_identity(const ActorLedgerView& view,
                               const std::set<std::string>& broker_ids) {
  std::set<std::string> values =
      view.ledger.values_of(ElementKind::SP_IDENTITY);
  if (values.empty()) return CellValue::NOT_SEEN;
  bool all_self = true;
  bool all_broker = true;
  for (const auto& v : values) {
    if (v != view.owner) all_self = false;
    if (!broker_ids.count(v)) all_broker = false;
  }
  if (all_self) return CellValue::SELF_ONLY;
  if (all_broker) return CellValue::PROXY_ONLY;
  return CellValue::SEEN;
}

CellValue classify_user_identity(const ActorLedgerView& view) {
  if (view.ledger.has(ElementKind::USER_IDENTITY)) return CellValue::SEEN;
  if (view.ledger.has(ElementKind::PSEUDONYM)) return CellValue::PSEUDONYM_ONLY;
  return CellValue::NOT_SEEN;
}

CellValue classify_enc_key(const ActorLedgerView& view) {
  if (view.ledger.has(ElementKind::ENC_KEY_PRIVATE)) return CellValue::PRIVATE;
  if (view.ledger.has(ElementKind::ENC_KEY_PUBLIC)) return CellValue::PUBLIC_ONLY;
  if (view.ledger.has(ElementKind::CERT_SERIAL)) return CellValue::CERTIFY_ONLY;
  return CellValue::NOT_SEEN;
}

CellValue classify_attribute_name(const ActorLedgerView& view) {
  std::set<std::string> values =
      view.ledger.values_of(ElementKind::ATTRIBUTE_NAME);
  if (values.empty()) return CellValue::NOT_SEEN;
  bool all_grouped = std::all_of(values.begin(), values.end(),
                                 [](const std::string& v) {
                                   return v.rfind("group:", 0) == 0;
                                 });
  return all_grouped ? CellValue::GROUPED_ONLY : CellValue::SEEN;
}

CellValue seen_if(const ActorLedgerView& view, ElementKind kind) {
  return view.ledger.has(kind) ? CellValue::SEEN : CellValue::NOT_SEEN;
}

MatrixRow classify_actor(const ActorLedgerView& view,
                         const std::set<std::string>& broker_ids) {
  MatrixRow row{};
  row[size_t(MatrixColumn::CLIENT_ADDR)] = seen_if(view, ElementKind::CLIENT_ADDR);
  row[size_t(MatrixColumn::SP_IDENTITY)] = classify_sp_identity(view, broker_ids);
  row[size_t(MatrixColumn::USER_IDENTITY)] = classify_user_identity(view);
  row[size_t(MatrixColumn::SIGNING_ROOT)] = seen_if(view, ElementKind::SIGNING_ROOT);
  row[size_t(MatrixColumn::ENC_KEY)] = classify_enc_key(view);
  row[size_t(MatrixColumn::ATTRIBUTE_NAME)] = classify_attribute_name(view);
  row[size_t(MatrixColumn::ATTRIBUTE_VALUE)] =
      seen_if(view, ElementKind::ATTRIBUTE_VALUE);
  return row;
}

// SEEN dominates, NOT_SEEN yields, equal refinements survive, and two
// different refinements widen to SEEN (the role as a whole saw more than
// either refinement promises).
CellValue merge_cells(CellValue a, CellValue b) {
  if (a == b) return a;
  if (a == CellValue::NOT_SEEN) return b;
  if (b == CellValue::NOT_SEEN) return a;
  return CellValue::SEEN;
}

std::string shorten(const std::string& value) {
  return value.size() <= 20 ? value : value.substr(0, 20) + "..";
}

}  // namespace

ExposureMatrix build_matrix(const std::vector<ActorLedgerView>& ledgers,
                            const FederationRegistry& registry) {
  if (ledgers.empty()) {
    throw Error(ErrorCode::IncompleteScenario, "no observation ledgers");
  }
  std::set<std::string> broker_ids = broker_scope_ids(registry);
  ExposureMatrix matrix;
  for (const auto& view : ledgers) {
    MatrixRow row = classify_actor(view, broker_ids);
    auto [it, inserted] = matrix.rows.emplace(view.role, row);
    if (!inserted) {
      for (size_t c = 0; c < kMatrixColumns; ++c) {
        it->second[c] = merge_cells(it->second[c], row[c]);
      }
    }
  }
  return matrix;
}

ExposureMatrix expected_exposure_matrix() {
  using C = CellValue;
  ExposureMatrix m;
  m.rows[MatrixRole::CA] = {C::NOT_SEEN, C::NOT_SEEN, C::NOT_SEEN,
                            C::SEEN,     C::CERTIFY_ONLY, C::NOT_SEEN,
                            C::NOT_SEEN};
  m.rows[MatrixRole::IDP] = {C::SEEN,     C::PROXY_ONLY, C::SEEN,
                             C::NOT_SEEN, C::PUBLIC_ONLY, C::NOT_SEEN,
                             C::SEEN};
  m.rows[MatrixRole::SB] = {C::SEEN,     C::SEEN,     C::PSEUDONYM_ONLY,
                            C::NOT_SEEN, C::NOT_SEEN, C::NOT_SEEN,
                            C::NOT_SEEN};
  m.rows[MatrixRole::DISCOVERY] = {C::SEEN,     C::SEEN,     C::NOT_SEEN,
                                   C::NOT_SEEN, C::NOT_SEEN, C::GROUPED_ONLY,
                                   C::NOT_SEEN};
  m.rows[MatrixRole::SP] = {C::SEEN,    C::SELF_ONLY, C::PSEUDONYM_ONLY,
                            C::NOT_SEEN, C::PRIVATE,  C::NOT_SEEN,
                            C::SEEN};
  return m;
}

std::vector<MatrixDiff> diff_matrices(const ExposureMatrix& actual,
                                      const ExposureMatrix& expected) {
  std::vector<MatrixDiff> diffs;
  for (const auto& [role, expected_row] : expected.rows) {
    auto it = actual.rows.find(role);
    if (it == actual.rows.end()) {
      for (size_t c = 0; c < kMatrixColumns; ++c) {
        if (expected_row[c] != CellValue::NOT_SEEN) {
          diffs.push_back({role, MatrixColumn(c), CellValue::NOT_SEEN,
                           expected_row[c]});
        }
      }
      continue;
    }
    for (size_t c = 0; c < kMatrixColumns; ++c) {
      if (it->second[c] != expected_row[c]) {
        diffs.push_back({role, MatrixColumn(c), it->second[c], expected_row[c]});
      }
    }
  }
  for (const auto& [role, row] : actual.rows) {
    if (!expected.rows.count(role)) {
      for (size_t c = 0; c < kMatrixColumns; ++c) {
        if (row[c] != CellValue::NOT_SEEN) {
          diffs.push_back({role, MatrixColumn(c), row[c], CellValue::NOT_SEEN});
        }
      }
    }
  }
  return diffs;
}

namespace {

std::vector<const ActorLedgerView*> with_role(
    const std::vector<ActorLedgerView>& ledgers, MatrixRole role) {
  std::vector<const ActorLedgerView*> out;
  for (const auto& view : ledgers) {
    if (view.role == role) out.push_back(&view);
  }
  return out;
}

// R1: no entity aggregates a principal's service usage. Checked at the
// IdP: it must never see a member SP identity, only broker-scope ids.
RequirementResult check_r1(const AuditInput& input) {
  RequirementResult r;
  r.id = "R1";
  r.title = "service usage is not observable per user";
  std::set<std::string> broker_ids = broker_scope_ids(input.registry);
  size_t checked = 0;
  for (const auto* view : with_role(input.ledgers, MatrixRole::IDP)) {
    for (const auto& v : view->ledger.values_of(ElementKind::SP_IDENTITY)) {
      ++checked;
      if (!broker_ids.count(v)) {
        r.verdict = Verdict::FAIL;
        r.evidence.push_back(view->owner + " observed SP identity '" + v +
                             "' outside the broker scope");
      }
    }
  }
  if (r.verdict == Verdict::PASS) {
    r.evidence.push_back("all " + std::to_string(checked) +
                         " SP_IDENTITY events at IdPs stayed within " +
                         std::to_string(broker_ids.size()) +
                         " broker-scope ids");
    if (input.min_group_size < 2) {
      r.verdict = Verdict::WEAK;
      r.evidence.push_back(
          "group size floor below 2: a 1:1 proxy names its member in all "
          "but label");
    }
    for (const auto& [proxy_id, group] : input.registry.groups) {
      if (!group.ungrouped && group.member_sp_ids.size() < 2) {
        r.verdict = Verdict::WEAK;
        r.evidence.push_back("group " + proxy_id +
                             " is active with a single member");
      }
    }
  }
  return r;
}

// R2: two SPs cannot link a principal without consent or the designated
// opener. Checked as pairwise disjointness of SP pseudonym sets, net of
// pair pseudonyms the principal consented to share.
RequirementResult check_r2(const AuditInput& input) {
  RequirementResult r;
  r.id = "R2";
  r.title = "pseudonyms do not link users across services";
  std::map<std::string, std::set<std::string>> per_sp;
  for (const auto* view : with_role(input.ledgers, MatrixRole::SP)) {
    for (const auto& v : view->ledger.values_of(ElementKind::PSEUDONYM)) {
      if (!input.consented_link_tids.count(v)) per_sp[view->owner].insert(v);
    }
  }
  size_t pairs = 0;
  for (auto a = per_sp.begin(); a != per_sp.end(); ++a) {
    for (auto b = std::next(a); b != per_sp.end(); ++b) {
      ++pairs;
      std::vector<std::string> overlap;
      std::set_intersection(a->second.begin(), a->second.end(),
                            b->second.begin(), b->second.end(),
                            std::back_inserter(overlap));
      for (const auto& v : overlap) {
        r.verdict = Verdict::FAIL;
        r.evidence.push_back("pseudonym " + shorten(v) + " appears at both " +
                             a->first + " and " + b->first +
                             " without consent");
      }
    }
  }
  if (r.verdict == Verdict::PASS) {
    r.evidence.push_back(
        "pseudonym sets of " + std::to_string(per_sp.size()) +
        " SPs are pairwise disjoint (" + std::to_string(pairs) +
        " pairs; " + std::to_string(input.consented_link_tids.size()) +
        " consented pair pseudonyms excluded)");
  }
  return r;
}

// R3: no unauthorized attribute collection. The broker, the CA and the
// discovery service must hold no attribute value and no true user
// identity, byte-scanned across every ledger value.
RequirementResult check_r3(const AuditInput& input) {
  RequirementResult r;
  r.id = "R3";
  r.title = "no actor collects attributes beyond its purpose";
  size_t scanned = 0;
  for (MatrixRole role :
       {MatrixRole::SB, MatrixRole::CA, MatrixRole::DISCOVERY}) {
    for (const auto* view : with_role(input.ledgers, role)) {
      for (const auto& event : view->ledger.events()) {
        ++scanned;
        for (const auto& value : input.attribute_values) {
          if (event.value.find(value) != std::string::npos) {
            r.verdict = Verdict::FAIL;
            r.evidence.push_back(view->owner + " ledger event holds attribute value '" +
                                 value + "' (kind " +
                                 element_kind_name(event.kind) + ")");
          }
        }
        for (const auto& identity : input.user_identities) {
          if (event.value.find(identity) != std::string::npos) {
            r.verdict = Verdict::FAIL;
            r.evidence.push_back(view->owner + " ledger event holds user identity '" +
                                 identity + "'");
          }
        }
      }
    }
  }
  if (r.verdict == Verdict::PASS) {
    r.evidence.push_back("scanned " + std::to_string(scanned) +
                         " broker/CA/discovery ledger events against " +
                         std::to_string(input.attribute_values.size()) +
                         " attribute values and " +
                         std::to_string(input.user_identities.size()) +
                         " user identities; zero hits");
  }
  return r;
}

// R4: authorized aggregation works. Asserted as flow success: every
// established session carries a non-empty attribute set inside the
// purpose-bound policy of its proxy group.
RequirementResult check_r4(const AuditInput& input) {
  RequirementResult r;
  r.id = "R4";
  r.title = "purpose-bound attribute aggregation succeeds";
  if (input.sessions.empty()) {
    r.verdict = Verdict::NA;
    r.evidence.push_back("scenario established no sessions");
    return r;
  }
  for (const auto& session : input.sessions) {
    std::string proxy = lookup_proxy(input.registry, session.sp);
    const std::set<std::string>& policy =
        input.registry.policy.attribute_release_policy.at(proxy);
    if (session.attributes.empty()) {
      r.verdict = Verdict::FAIL;
      r.evidence.push_back("session at " + session.sp + " (flow " +
                           session.flow + ") received no attributes");
    }
    for (const auto& [name, value] : session.attributes) {
      if (!policy.count(name)) {
        r.verdict = Verdict::FAIL;
        r.evidence.push_back("session at " + session.sp +
                             " carries off-policy attribute '" + name + "'");
      }
    }
  }
  if (r.verdict == Verdict::PASS) {
    r.evidence.push_back(std::to_string(input.sessions.size()) +
                         " sessions received non-empty, policy-bound "
                         "attribute sets");
  }
  return r;
}

// R5: no attribute polling. Every attribute store access must follow a
// verified request in the same flow, and rejected probes must never
// reach the store.
RequirementResult check_r5(const AuditInput& input) {
  RequirementResult r;
  r.id = "R5";
  r.title = "attribute store access requires a verified request";
  std::set<std::pair<std::string, std::string>> verified;  // (actor, flow)
  std::set<std::string> probe_flows;
  size_t accesses = 0;
  size_t probes = 0;
  for (const auto& note : input.notes) {
    std::string flow = note.detail.contains("flow")
                           ? note.detail.at("flow").get<std::string>()
                           : "";
    if (note.label == "request_verified") {
      verified.insert({note.actor, flow});
    } else if (note.label == "probe_rejected") {
      ++probes;
      probe_flows.insert(flow);
    } else if (note.label == "attr_store_access") {
      ++accesses;
      if (!verified.count({note.actor, flow})) {
        r.verdict = Verdict::FAIL;
        r.evidence.push_back("store access at " + note.actor + " in flow " +
                             flow + " without a prior verified request");
      }
      if (probe_flows.count(flow)) {
        r.verdict = Verdict::FAIL;
        r.evidence.push_back("rejected probe flow " + flow +
                             " still reached the attribute store");
      }
    }
  }
  if (input.expected_probe_rejections != probes) {
    r.verdict = Verdict::FAIL;
    r.evidence.push_back("expected " +
                         std::to_string(input.expected_probe_rejections) +
                         " probe rejections, observed " +
                         std::to_string(probes));
  }
  if (r.verdict == Verdict::PASS) {
    r.evidence.push_back(std::to_string(accesses) +
                         " store accesses each preceded by a verified "
                         "request; " +
                         std::to_string(probes) + " probes rejected");
  }
  return r;
}

// R6: replay and reuse resistance. Every scripted re-injection must be
// rejected, and no assertion or token completes a flow twice.
RequirementResult check_r6(const AuditInput& input) {
  RequirementResult r;
  r.id = "R6";
  r.title = "replayed assertions and tokens are rejected";
  size_t rejections = 0;
  std::map<std::string, int> completions;
  for (const auto& note : input.notes) {
    if (note.label == "error" && note.detail.contains("code") &&
        note.detail.at("code").get<std::string>() == "ReplayDetected") {
      ++rejections;
    }
    if (note.label == "flow_completed") {
      for (const char* key : {"assertion_id", "token_id"}) {
        if (note.detail.contains(key)) {
          std::string id = note.detail.at(key).get<std::string>();
          if (++completions[id] > 1) {
            r.verdict = Verdict::FAIL;
            r.evidence.push_back("credential " + shorten(id) +
                                 " completed more than one flow");
          }
        }
      }
    }
  }
  if (rejections != input.expected_replays) {
    r.verdict = Verdict::FAIL;
    r.evidence.push_back("expected " + std::to_string(input.expected_replays) +
                         " replay rejections, observed " +
                         std::to_string(rejections));
  }
  if (r.verdict == Verdict::PASS) {
    r.evidence.push_back(std::to_string(rejections) + "/" +
                         std::to_string(input.expected_replays) +
                         " injected replays rejected; no credential "
                         "completed two flows");
  }
  return r;
}

// R7: consent handling. Every release follows a verified consent record
// in the same flow; flows that halted on missing consent released
// nothing.
RequirementResult check_r7(const AuditInput& input) {
  RequirementResult r;
  r.id = "R7";
  r.title = "attribute release follows recorded consent";
  std::set<std::pair<std::string, std::string>> consent_ok;  // (actor, flow)
  std::set<std::string> blocked_flows;
  size_t releases = 0;
  for (const auto& note : input.notes) {
    std::string flow = note.detail.contains("flow")
                           ? note.detail.at("flow").get<std::string>()
                           : "";
    if (note.label == "consent_verified") {
      consent_ok.insert({note.actor, flow});
    } else if (note.label == "error" && note.detail.contains("code") &&
               note.detail.at("code").get<std::string>() == "ConsentMissing") {
      blocked_flows.insert(flow);
    } else if (note.label == "attributes_released") {
      ++releases;
      if (!consent_ok.count({note.actor, flow})) {
        r.verdict = Verdict::FAIL;
        r.evidence.push_back("release at " + note.actor + " in flow " + flow +
                             " without verified consent");
      }
      if (note.detail.contains("consent_record") &&
          note.detail.at("consent_record").get<std::string>().empty()) {
        r.verdict = Verdict::FAIL;
        r.evidence.push_back("release in flow " + flow +
                             " cites no consent record");
      }
    }
  }
  for (const auto& note : input.notes) {
    if (note.label != "attributes_released") continue;
    std::string flow = note.detail.contains("flow")
                           ? note.detail.at("flow").get<std::string>()
                           : "";
    if (blocked_flows.count(flow)) {
      r.verdict = Verdict::FAIL;
      r.evidence.push_back("flow " + flow +
                           " halted on missing consent yet released "
                           "attributes");
    }
  }
  if (r.verdict == Verdict::PASS) {
    r.evidence.push_back(std::to_string(releases) +
                         " releases each consent-verified; " +
                         std::to_string(blocked_flows.size()) +
                         " flows halted without release");
  }
  return r;
}

// R8: actors managing trust roots see neither attributes nor transaction
// data. Exact kind check over CA ledgers.
RequirementResult check_r8(const AuditInput& input) {
  RequirementResult r;
  r.id = "R8";
  r.title = "trust root operator holds no transaction data";
  const std::set<ElementKind> forbidden = {
      ElementKind::ATTRIBUTE_NAME, ElementKind::ATTRIBUTE_VALUE,
      ElementKind::PSEUDONYM, ElementKind::USER_IDENTITY,
      ElementKind::CLIENT_ADDR};
  size_t events = 0;
  for (const auto* view : with_role(input.ledgers, MatrixRole::CA)) {
    for (const auto& event : view->ledger.events()) {
      ++events;
      if (forbidden.count(event.kind)) {
        r.verdict = Verdict::FAIL;
        r.evidence.push_back(view->owner + " recorded forbidden element " +
                             element_kind_name(event.kind) + " = " +
                             shorten(event.value));
      }
    }
  }
  if (r.verdict == Verdict::PASS) {
    r.evidence.push_back("CA ledgers hold " + std::to_string(events) +
                         " events, none of kind attribute/pseudonym/user "
                         "identity/client address");
  }
  return r;
}

// R9: compatibility with existing SSO profiles is a design-time property
// of the protocol shapes, not observable in ledgers.
RequirementResult check_r9() {
  RequirementResult r;
  r.id = "R9";
  r.title = "compatibility with existing SSO profiles";
  r.verdict = Verdict::NA;
  r.evidence.push_back(
      "not machine-checkable from ledgers; see README, section 'Protocol "
      "shapes'");
  return r;
}

// R10: minimal release. Session attributes never exceed the proxy's
// policy set, and release notes never count past the policy cap.
RequirementResult check_r10(const AuditInput& input) {
  RequirementResult r;
  r.id = "R10";
  r.title = "releases never exceed the purpose-bound policy set";
  size_t checked = 0;
  for (const auto& session : input.sessions) {
    std::string proxy = lookup_proxy(input.registry, session.sp);
    const std::set<std::string>& policy =
        input.registry.policy.attribute_release_policy.at(proxy);
    ++checked;
    for (const auto& [name, value] : session.attributes) {
      if (!policy.count(name)) {
        r.verdict = Verdict::FAIL;
        r.evidence.push_back("session at " + session.sp +
                             " holds attribute '" + name +
                             "' outside the policy set of " + proxy);
      }
    }
    if (session.attributes.size() > policy.size()) {
      r.verdict = Verdict::FAIL;
      r.evidence.push_back("session at " + session.sp + " holds " +
                           std::to_string(session.attributes.size()) +
                           " attributes, policy caps " +
                           std::to_string(policy.size()));
    }
  }
  if (r.verdict == Verdict::PASS) {
    r.evidence.push_back(std::to_string(checked) +
                         " sessions within their policy caps");
  }
  return r;
}

}  // namespace

bool AuditReport::passed() const {
  if (matrix_checked && !matrix_diffs.empty()) return false;
  for (const auto& req : requirements) {
    if (req.verdict == Verdict::FAIL || req.verdict == Verdict::WEAK) {
      return false;
    }
  }
  return true;
}

AuditReport run_audit(const AuditInput& input) {
  AuditReport report;
  report.matrix = build_matrix(input.ledgers, input.registry);
  if (input.canonical_matrix) {
    report.matrix_checked = true;
    report.matrix_diffs = diff_matrices(report.matrix, expected_exposure_matrix());
  }
  report.requirements.push_back(check_r1(input));
  report.requirements.push_back(check_r2(input));
  report.requirements.push_back(check_r3(input));
  report.requirements.push_back(check_r4(input));
  report.requirements.push_back(check_r5(input));
  report.requirements.push_back(check_r6(input));
  report.requirements.push_back(check_r7(input));
  report.requirements.push_back(check_r8(input));
  report.requirements.push_back(check_r9());
  report.requirements.push_back(check_r10(input));
  return report;
}

std::string render_report(const AuditReport& report) {
  std::ostringstream out;
  out << "EXPOSURE MATRIX (per-role view of data elements)\n";
  out << "  role";
  for (size_t c = 0; c < kMatrixColumns; ++c) {
    out << " | " << matrix_column_name(MatrixColumn(c));
  }
  out << "\n";
  for (const auto& [role, row] : report.matrix.rows) {
    out << "  " << matrix_role_name(role);
    for (size_t c = 0; c < kMatrixColumns; ++c) {
      out << " | " << cell_value_name(row[c]);
    }
    out << "\n";
  }
  out << "  legend: blank cells of the reference table are NOT_SEEN; "
         "ENC_KEY folds public/private/certify sightings into one column\n";
  if (report.matrix_checked) {
    if (report.matrix_diffs.empty()) {
      out << "MATRIX CHECK: conforms to the reference table\n";
    } else {
      out << "MATRIX CHECK: " << report.matrix_diffs.size() << " deviation(s)\n";
      for (const auto& diff : report.matrix_diffs) {
        out << "  " << matrix_role_name(diff.role) << " x "
            << matrix_column_name(diff.column) << ": observed "
            << cell_value_name(diff.actual) << ", reference says "
            << cell_value_name(diff.expected) << "\n";
      }
    }
  } else {
    out << "MATRIX CHECK: skipped (scenario does not claim the canonical "
           "shape)\n";
  }
  for (const auto& req : report.requirements) {
    out << req.id << " " << verdict_name(req.verdict) << "  " << req.title
        << "\n";
    for (const auto& line : req.evidence) {
      out << "    - " << line << "\n";
    }
  }
  out << "AUDIT RESULT: " << (report.passed() ? "PASS" : "FAIL") << "\n";
  return out.str();
}

OpenedIdentity open_identity(const MappingTable& sb_table,
                             const MappingTable& idp_table,
                             const std::string& tid2) {
  const MappingEntry& service_entry = sb_table.resolve(tid2);
  OpenedIdentity opened;
  opened.tid1 = service_entry.parent;
  opened.issuer_hint = service_entry.issuer_hint;
  const MappingEntry& broker_entry = idp_table.resolve(service_entry.parent);
  opened.reference_id = broker_entry.parent;
  return opened;
}

}  // namespace pefim
