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

#include "pefim/consent.hpp"

#include <algorithm>

#include "pefim/errors.hpp"

namespace pefim {

std::string link_target(const std::string& sp_a, const std::string& sp_b) {
  const std::string& lo = std::min(sp_a, sp_b);
  const std::string& hi = std::max(sp_a, sp_b);
  return "LINK(" + lo + "," + hi + ")";
}

bool is_link_target(const std::string& target) {
  return target.rfind("LINK(", 0) == 0 && target.back() == ')';
}

Record ConsentRecord::to_record() const {
  Record r;
  r["record_id"] = record_id;
  r["principal_key"] = principal_key;
  r["target"] = target;
  r["attributes"] = std::vector<std::string>(attributes.begin(), attributes.end());
  r["mode"] = consent_mode_name(mode);
  r["granted_at"] = granted_at;
  r["revoked_at"] = revoked_at ? Record(*revoked_at) : Record(nullptr);
  r["consumed"] = consumed;
  return r;
}

ConsentRecord ConsentRecord::from_record(const Record& r) {
  ConsentRecord rec;
  rec.record_id = r.at("record_id").get<std::string>();
  rec.principal_key = r.at("principal_key").get<std::string>();
  rec.target = r.at("target").get<std::string>();
  for (const auto& a : r.at("attributes")) {
    rec.attributes.insert(a.get<std::string>());
  }
  auto mode = parse_consent_mode(r.at("mode").get<std::string>());
  if (!mode) throw Error(ErrorCode::ConfigError, "bad consent mode");
  rec.mode = *mode;
  rec.granted_at = r.at("granted_at").get<uint64_t>();
  if (!r.at("revoked_at").is_null()) {
    rec.revoked_at = r.at("revoked_at").get<uint64_t>();
  }
  rec.consumed = r.at("consumed").get<bool>();
  return rec;
}

namespace {
// A link target must name two distinct registered SPs: "LINK(a,b)".
bool link_target_valid(const FederationRegistry& registry,
                       const std::string& target) {
  size_t comma = target.find(',');
  if (comma == std::string::npos) return false;
  std::string a = target.substr(5, comma - 5);
  std::string b = target.substr(comma + 1, target.size() - comma - 2);
  if (a == b || a.empty() || b.empty()) return false;
  auto is_sp = [&](const std::string& id) {
    return registry.has_entity(id) &&
           registry.entity(id).role == EntityRole::SP;
  };
  return is_sp(a) && is_sp(b);
}
}  // namespace

ConsentRecord& ConsentStore::grant(const FederationRegistry& registry,
                                   const std::string& principal_key,
                                   const std::string& target,
                                   const std::set<std::string>& attributes,
                                   ConsentMode mode, uint64_t now,
                                   RandomSource& rng) {
  bool known = is_link_target(target) ? link_target_valid(registry, target)
                                      : registry.groups.count(target) > 0;
  if (!known) {
    throw Error(ErrorCode::UnknownTarget, target);
  }
  ConsentRecord rec;
  rec.record_id = "cns-" + rng.token_hex(8);
  rec.principal_key = principal_key;
  rec.target = target;
  rec.attributes = attributes;
  rec.mode = mode;
  rec.granted_at = now;
  records_.push_back(std::move(rec));
  return records_.back();
}

std::string ConsentStore::check_and_consume(const std::string& principal_key,
                                            const std::string& target,
                                            const std::set<std::string>& requested,
                                            uint64_t now) {
  (void)now;
  bool target_seen = false;
  for (auto& rec : records_) {
    if (rec.principal_key != principal_key || rec.target != target) continue;
    if (rec.revoked_at.has_value()) continue;
    if (rec.mode == ConsentMode::TRANSACTIONAL && rec.consumed) continue;
    target_seen = true;
    if (!std::includes(rec.attributes.begin(), rec.attributes.end(),
                       requested.begin(), requested.end())) {
      continue;
    }
    if (rec.mode == ConsentMode::TRANSACTIONAL) rec.consumed = true;
    return rec.record_id;
  }
  if (target_seen) {
    // An active record exists but covers less than was asked for.
    throw Error(ErrorCode::AttributeSetExceedsConsent, target);
  }
  throw Error(ErrorCode::ConsentMissing, target);
}

std::vector<ConsentRecord> ConsentStore::list(
    const std::string& principal_key) const {
  std::vector<ConsentRecord> out;
  for (const auto& rec : records_) {
    if (rec.principal_key == principal_key) out.push_back(rec);
  }
  return out;
}

void ConsentStore::revoke(const std::string& record_id, uint64_t now) {
  for (auto& rec : records_) {
    if (rec.record_id != record_id) continue;
    if (is_link_target(rec.target)) {
      throw Error(ErrorCode::LinkIrrevocable, rec.target);
    }
    rec.revoked_at = now;
    return;
  }
  throw Error(ErrorCode::UnknownRecord, record_id);
}

Record ConsentStore::to_record() const {
  Record r;
  Record arr = Record::array();
  for (const auto& rec : records_) arr.push_back(rec.to_record());
  r["records"] = std::move(arr);
  return r;
}

ConsentStore ConsentStore::from_record(const Record& r) {
  ConsentStore store;
  for (const auto& item : r.at("records")) {
    store.records_.push_back(ConsentRecord::from_record(item));
  }
  return store;
}

namespace {
Bytes voucher_signing_input(const std::string& record_id,
                            const std::string& request_id) {
  Bytes input;
  append_length_prefixed(input, to_bytes(record_id));
  append_length_prefixed(input, to_bytes(request_id));
  return input;
}
}  // namespace

std::string make_consent_voucher(const std::string& record_id,
                                 const std::string& request_id,
                                 const Bytes& sb_secret_key) {
  return base64_encode(
      sign_detached(voucher_signing_input(record_id, request_id), sb_secret_key));
}

bool verify_consent_voucher(const std::string& voucher,
                            const std::string& record_id,
                            const std::string& request_id,
                            const Bytes& sb_public_key) {
  Bytes sig;
  try {
    sig = base64_decode(voucher);
  } catch (const std::exception&) {
    return false;
  }
  return verify_detached(voucher_signing_input(record_id, request_id), sig,
                         sb_public_key);
}

}  // namespace pefim
