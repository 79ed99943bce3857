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

#include <json.hpp>
#include <string>

#include "pefim/bytes.hpp"
#include "pefim/crypto.hpp"
#include "pefim/registry.hpp"

namespace pefim {

// Wire records are self-describing JSON objects with insertion-ordered
// fields: "type" first, then the record's fields in a fixed order, with
// "signer" and "sig" last when signed. Compact dump() is the canonical
// byte encoding used on the bus, in transcripts, and as signing input.
using Record = nlohmann::ordered_json;

// Canonical signing input: the record without its "sig" field.
Bytes record_signing_input(const Record& record);

// Appends signer and signature fields. The signer string is whatever
// identity the message claims (an entity id, or a proxy id when the
// sender must stay anonymous to downstream parties).
void sign_record(Record& record, const std::string& signer,
                 const Bytes& secret_key);

// Verifies record["sig"] over the signing input with the given key.
bool verify_record(const Record& record, const Bytes& public_key);

// Serialization for the simulator bus.
Bytes record_to_bytes(const Record& record);
Record record_from_bytes(const Bytes& payload);

// Wire-level signed message: canonical body plus a claimed signer resolved
// through federation metadata.
struct SignedMessage {
  Bytes body;
  std::string signer_id;
  Bytes signature;
};

SignedMessage sign_message(const Bytes& body, const std::string& signer_id,
                           const Bytes& secret_key);

// Resolves the signer's static key in the registry and verifies.
// Returns false on signature mismatch. Errors: UnknownSigner.
bool verify_message(const SignedMessage& msg,
                    const FederationRegistry& registry);

// Payload/certificate record embedding, shared by all flows.
Record encrypted_payload_to_record(const EncryptedPayload& payload);
EncryptedPayload encrypted_payload_from_record(const Record& record);
Record cert_to_record(const OneTimeCertificate& cert);
OneTimeCertificate cert_from_record(const Record& record);

}  // namespace pefim
