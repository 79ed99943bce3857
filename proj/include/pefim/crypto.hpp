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

#include <cstdint>
#include <map>
#include <string>

#include "pefim/bytes.hpp"
#include "pefim/random.hpp"

namespace pefim {

void ensure_sodium_init();

// Ed25519. Secret keys stay inside the owning actor; public keys circulate
// as lowercase hex.
struct SigningKeypair {
  Bytes public_key;   // 32 bytes
  Bytes secret_key;   // 64 bytes
};

SigningKeypair generate_signing_keypair(RandomSource& rng);

Bytes sign_detached(const Bytes& body, const Bytes& secret_key);
bool verify_detached(const Bytes& body, const Bytes& signature,
                     const Bytes& public_key);

// X25519, used for the static encryption keys of IdP and SB.
struct BoxKeypair {
  Bytes public_key;   // 32 bytes
  Bytes secret_key;   // 32 bytes
};

BoxKeypair generate_box_keypair(RandomSource& rng);

// Short public-key digest for transcripts and golden tests.
std::string key_fingerprint(const Bytes& public_key);

// Certificate binding a fresh transaction key to a validity window. By
// construction it carries no holder identity: the CA learns and records
// only (serial, time).
struct OneTimeCertificate {
  std::string public_key;  // Ed25519, hex
  uint64_t not_before = 0;
  uint64_t not_after = 0;
  std::string serial;      // random opaque token, hex
  std::string ca_signature;  // base64, over canonical_bytes()

  // Byte-stable signing input: the four identity-free fields.
  Bytes canonical_bytes() const;
};

enum class CertCheck { VALID, BAD_SIGNATURE, EXPIRED, NOT_YET_VALID };

const char* cert_check_name(CertCheck check);

// Pure issuance: signs (public_key, validity, serial) with the CA key.
// The CA actor wraps this and appends (serial, now) to its ledger.
OneTimeCertificate issue_onetime_cert(const Bytes& ca_secret_key,
                                      const std::string& holder_public_key_hex,
                                      uint64_t now, uint64_t validity,
                                      RandomSource& rng);

// Single-hop path validation: CA root signature plus validity window.
CertCheck validate_cert(const OneTimeCertificate& cert,
                        const Bytes& trust_root_public_key, uint64_t now);

// Hybrid ciphertext. recipient_hint names the certificate, never the SP.
struct EncryptedPayload {
  std::string ciphertext;          // base64
  std::string ephemeral_material;  // base64 ephemeral X25519 public key
  std::string recipient_hint;      // OneTimeCertificate.serial
};

// Ephemeral-static construction: fresh X25519 keypair per message, shared
// secret hashed with both public keys into a one-use symmetric key.
struct SealedBlob {
  Bytes ephemeral_public;  // 32 bytes
  Bytes ciphertext;
};

SealedBlob seal_to_curve25519(const Bytes& plaintext,
                              const Bytes& recipient_curve_public,
                              RandomSource& rng);
// Errors: DecryptionFailure.
Bytes open_sealed(const SealedBlob& blob, const Bytes& recipient_curve_secret);

// Conversions so one certificate key both signs and receives encrypted
// payloads (Ed25519 identity, Curve25519 transport).
Bytes ed25519_public_to_curve(const Bytes& ed_public);
Bytes ed25519_secret_to_curve(const Bytes& ed_secret);

// Encrypts the canonical attribute encoding to the certificate key.
// Validates the cert first. Errors: InvalidCert.
EncryptedPayload encrypt_payload(const std::map<std::string, std::string>& attributes,
                                 const OneTimeCertificate& cert,
                                 const Bytes& trust_root_public_key,
                                 uint64_t now, RandomSource& rng);

// Recovers the exact attribute map with the Ed25519 secret key matching
// the certificate. Errors: DecryptionFailure.
std::map<std::string, std::string> decrypt_payload(const EncryptedPayload& payload,
                                                   const Bytes& ed_secret_key);

// Canonical plaintext form of an attribute map (byte-stable, sorted keys).
Bytes encode_attributes(const std::map<std::string, std::string>& attributes);
std::map<std::string, std::string> decode_attributes(const Bytes& encoded);

}  // namespace pefim
