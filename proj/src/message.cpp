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

#include "pefim/message.hpp"

#include "pefim/errors.hpp"

namespace pefim {

Bytes record_signing_input(const Record& record) {
  Record stripped = record;
  stripped.erase("sig");
  return to_bytes(stripped.dump());
}

void sign_record(Record& record, const std::string& signer,
                 const Bytes& secret_key) {
  record.erase("sig");
  record["signer"] = signer;
  Bytes sig = sign_detached(to_bytes(record.dump()), secret_key);
  record["sig"] = base64_encode(sig);
}

bool verify_record(const Record& record, const Bytes& public_key) {
  if (!record.contains("sig") || !record["sig"].is_string()) return false;
  Bytes sig;
  try {
    sig = base64_decode(record["sig"].get<std::string>());
  } catch (const std::exception&) {
    return false;
  }
  return verify_detached(record_signing_input(record), sig, public_key);
}

Bytes record_to_bytes(const Record& record) {
  return to_bytes(record.dump());
}

Record record_from_bytes(const Bytes& payload) {
  Record r = Record::parse(to_string(payload), nullptr, false);
  if (r.is_discarded() || !r.is_object()) {
    throw Error(ErrorCode::ConfigError, "malformed wire record");
  }
  return r;
}

SignedMessage sign_message(const Bytes& body, const std::string& signer_id,
                           const Bytes& secret_key) {
  return SignedMessage{body, signer_id, sign_detached(body, secret_key)};
}

bool verify_message(const SignedMessage& msg,
                    const FederationRegistry& registry) {
  if (!registry.has_entity(msg.signer_id)) {
    throw Error(ErrorCode::UnknownSigner, msg.signer_id);
  }
  Bytes pk = hex_decode(registry.entity(msg.signer_id).static_signing_key);
  return verify_detached(msg.body, msg.signature, pk);
}

Record encrypted_payload_to_record(const EncryptedPayload& payload) {
  Record r;
  r["ciphertext"] = payload.ciphertext;
  r["ephemeral_material"] = payload.ephemeral_material;
  r["recipient_hint"] = payload.recipient_hint;
  return r;
}

EncryptedPayload encrypted_payload_from_record(const Record& record) {
  EncryptedPayload p;
  p.ciphertext = record.at("ciphertext").get<std::string>();
  p.ephemeral_material = record.at("ephemeral_material").get<std::string>();
  p.recipient_hint = record.at("recipient_hint").get<std::string>();
  return p;
}

Record cert_to_record(const OneTimeCertificate& cert) {
  Record r;
  r["public_key"] = cert.public_key;
  r["not_before"] = cert.not_before;
  r["not_after"] = cert.not_after;
  r["serial"] = cert.serial;
  r["ca_signature"] = cert.ca_signature;
  return r;
}

OneTimeCertificate cert_from_record(const Record& record) {
  OneTimeCertificate c;
  c.public_key = record.at("public_key").get<std::string>();
  c.not_before = record.at("not_before").get<uint64_t>();
  c.not_after = record.at("not_after").get<uint64_t>();
  c.serial = record.at("serial").get<std::string>();
  c.ca_signature = record.at("ca_signature").get<std::string>();
  return c;
}

}  // namespace pefim
