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

#include <array>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "pefim/id_mapping.hpp"
#include "pefim/ledger.hpp"
#include "pefim/message.hpp"
#include "pefim/registry.hpp"

namespace pefim {

// What a federation role may know of one data element. Extends the
// informal reference vocabulary ("X", "only SB", "pseudonym", "certify",
// "public", "private", "grouped") into checkable values; blank reference
// cells map to NOT_SEEN.
enum class CellValue {
  NOT_SEEN,
  SEEN,
  PSEUDONYM_ONLY,
  PROXY_ONLY,
  SELF_ONLY,
  PUBLIC_ONLY,
  PRIVATE,
  CERTIFY_ONLY,
  GROUPED_ONLY,
};

const char* cell_value_name(CellValue value);

enum class MatrixRole { CA, IDP, SB, DISCOVERY, SP };

const char* matrix_role_name(MatrixRole role);

// ENC_KEY aggregates public-half, private-half and certify-only sightings
// of transaction encryption keys into one column.
enum class MatrixColumn {
  CLIENT_ADDR,
  SP_IDENTITY,
  USER_IDENTITY,
  SIGNING_ROOT,
  ENC_KEY,
  ATTRIBUTE_NAME,
  ATTRIBUTE_VALUE,
};

inline constexpr size_t kMatrixColumns = 7;

const char* matrix_column_name(MatrixColumn column);

using MatrixRow = std::array<CellValue, kMatrixColumns>;

struct ExposureMatrix {
  std::map<MatrixRole, MatrixRow> rows;

  bool operator==(const ExposureMatrix& other) const = default;
};

// One actor's ledger tagged with its federation role.
struct ActorLedgerView {
  std::string owner;
  MatrixRole role;
  ObservationLedger ledger;
};

// Classifies every ledger and merges actors of the same role into one
// row (SEEN dominates; NOT_SEEN yields; conflicting refinements widen to
// SEEN). Errors: IncompleteScenario when no ledger is given.
ExposureMatrix build_matrix(const std::vector<ActorLedgerView>& ledgers,
                            const FederationRegistry& registry);

// The reference exposure table as a constant.
ExposureMatrix expected_exposure_matrix();

struct MatrixDiff {
  MatrixRole role;
  MatrixColumn column;
  CellValue actual;
  CellValue expected;
};

std::vector<MatrixDiff> diff_matrices(const ExposureMatrix& actual,
                                      const ExposureMatrix& expected);

enum class Verdict { PASS, WEAK, FAIL, NA };

const char* verdict_name(Verdict verdict);

struct RequirementResult {
  std::string id;  // "R1" .. "R10"
  std::string title;
  Verdict verdict = Verdict::PASS;
  std::vector<std::string> evidence;
};

// A NOTE transcript entry, in transcript order.
struct AuditNote {
  uint64_t time = 0;
  std::string actor;
  std::string label;
  Record detail;
};

// One established service session, from the SP's point of view.
struct SessionView {
  std::string sp;
  std::string flow;
  std::string tid2;
  std::map<std::string, std::string> attributes;
};

// Everything the audit may look at. The audit is a pure function of this
// input; private actor state stays out except through the two mapping
// tables handed to open_identity.
struct AuditInput {
  std::vector<ActorLedgerView> ledgers;
  FederationRegistry registry;
  std::vector<AuditNote> notes;
  std::vector<SessionView> sessions;
  std::set<std::string> attribute_values;  // universe held by any IdP store
  std::set<std::string> user_identities;
  // Pair pseudonyms whose sharing the principal consented to; excluded
  // from the cross-SP disjointness check.
  std::set<std::string> consented_link_tids;
  size_t expected_replays = 0;
  size_t expected_probe_rejections = 0;
  bool canonical_matrix = false;
  int min_group_size = 2;
};

struct AuditReport {
  ExposureMatrix matrix;
  bool matrix_checked = false;
  std::vector<MatrixDiff> matrix_diffs;
  std::vector<RequirementResult> requirements;

  bool passed() const;
};

AuditReport run_audit(const AuditInput& input);

// Renders the report; the last line is machine-parsable:
// "AUDIT RESULT: PASS" or "AUDIT RESULT: FAIL".
std::string render_report(const AuditReport& report);

// The designated-opener escape hatch: re-identifying a service-scope
// pseudonym requires the broker table (tid2 -> tid1) and the issuing
// IdP table (tid1 -> reference id) together; neither suffices alone.
// Errors: UnknownTid.
struct OpenedIdentity {
  std::string tid1;
  std::string reference_id;
  std::string issuer_hint;
};

OpenedIdentity open_identity(const MappingTable& sb_table,
                             const MappingTable& idp_table,
                             const std::string& tid2);

}  // namespace pefim
