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

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "pefim/crypto.hpp"
#include "pefim/message.hpp"
#include "pefim/random.hpp"
#include "pefim/registry.hpp"

namespace pefim {

// Canonical target string for an SP-to-SP link consent. Unordered: the
// pair is sorted so one grant covers the link whichever side asks.
std::string link_target(const std::string& sp_a, const std::string& sp_b);
bool is_link_target(const std::string& target);

// One consent decision, keyed by the principal's broker-scope pseudonym.
// The store never sees a reference id or user address.
struct ConsentRecord {
  std::string record_id;
  std::string principal_key;  // TID1 value
  std::string target;         // proxy_id, or link_target(spA, spB)
  std::set<std::string> attributes;  // empty for link targets
  ConsentMode mode = ConsentMode::UP_FRONT;
  uint64_t granted_at = 0;
  std::optional<uint64_t> revoked_at;
  bool consumed = false;  // TRANSACTIONAL records are single-use

  Record to_record() const;
  static ConsentRecord from_record(const Record& r);
};

// Consent storage. Owned by the broker actor; reachable from outside only
// through that actor's messages and the CLI state file.
class ConsentStore {
 public:
  // Errors: UnknownTarget (target is neither a known proxy nor a link
  // over two registered SPs).
  ConsentRecord& grant(const FederationRegistry& registry,
                       const std::string& principal_key,
                       const std::string& target,
                       const std::set<std::string>& attributes,
                       ConsentMode mode, uint64_t now, RandomSource& rng);

  // Returns the covering record's id iff an active record covers the
  // requested attributes; consumes TRANSACTIONAL records.
  // Errors: ConsentMissing, AttributeSetExceedsConsent.
  std::string check_and_consume(const std::string& principal_key,
                                const std::string& target,
                                const std::set<std::string>& requested,
                                uint64_t now);

  std::vector<ConsentRecord> list(const std::string& principal_key) const;

  // Errors: UnknownRecord; LinkIrrevocable for link targets, whose
  // derived ids outlive any consent withdrawal.
  void revoke(const std::string& record_id, uint64_t now);

  const std::vector<ConsentRecord>& all() const { return records_; }

  Record to_record() const;
  static ConsentStore from_record(const Record& r);

 private:
  std::vector<ConsentRecord> records_;
};

// Voucher the broker hands the IdP as proof of consent: a signature over
// (record id, request id). Verifiable with the broker's public key without
// revealing which service the consent names.
std::string make_consent_voucher(const std::string& record_id,
                                 const std::string& request_id,
                                 const Bytes& sb_secret_key);
bool verify_consent_voucher(const std::string& voucher,
                            const std::string& record_id,
                            const std::string& request_id,
                            const Bytes& sb_public_key);

}  // namespace pefim
