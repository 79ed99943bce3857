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

#include "pefim/bytes.hpp"
#include "pefim/crypto.hpp"
#include "pefim/errors.hpp"
#include "pefim/message.hpp"
#include "pefim/random.hpp"

using namespace pefim;

TEST_CASE("detached signatures verify and tampering breaks them") {
  DeterministicRng rng(3);
  SigningKeypair keys = generate_signing_keypair(rng);
  Bytes body = to_bytes("attribute release body");
  Bytes sig = sign_detached(body, keys.secret_key);
  CHECK(verify_detached(body, sig, keys.public_key));

  Bytes tampered = body;
  tampered[0] ^= 1;
  CHECK_FALSE(verify_detached(tampered, sig, keys.public_key));

  SigningKeypair other = generate_signing_keypair(rng);
  CHECK_FALSE(verify_detached(body, sig, other.public_key));
}

TEST_CASE("keypair generation is seed-deterministic") {
  DeterministicRng a(5), b(5), c(6);
  CHECK(generate_signing_keypair(a).public_key ==
        generate_signing_keypair(b).public_key);
  DeterministicRng a2(5);
  CHECK(generate_signing_keypair(a2).public_key !=
        generate_signing_keypair(c).public_key);
}

TEST_CASE("one-time certificates validate inside their window only") {
  DeterministicRng rng(7);
  SigningKeypair ca = generate_signing_keypair(rng);
  SigningKeypair holder = generate_signing_keypair(rng);
  OneTimeCertificate cert = issue_onetime_cert(
      ca.secret_key, hex_encode(holder.public_key), 100, 300, rng);

  CHECK(validate_cert(cert, ca.public_key, 100) == CertCheck::VALID);
  CHECK(validate_cert(cert, ca.public_key, 400) == CertCheck::VALID);
  CHECK(validate_cert(cert, ca.public_key, 401) == CertCheck::EXPIRED);
  CHECK(validate_cert(cert, ca.public_key, 99) == CertCheck::NOT_YET_VALID);

  OneTimeCertificate forged = cert;
  forged.not_after += 1000;
  CHECK(validate_cert(forged, ca.public_key, 200) == CertCheck::BAD_SIGNATURE);

  SigningKeypair wrong_root = generate_signing_keypair(rng);
  CHECK(validate_cert(cert, wrong_root.public_key, 200) ==
        CertCheck::BAD_SIGNATURE);
}

TEST_CASE("certificates carry no holder identity") {
  DeterministicRng rng(7);
  SigningKeypair ca = generate_signing_keypair(rng);
  SigningKeypair holder = generate_signing_keypair(rng);
  OneTimeCertificate cert = issue_onetime_cert(
      ca.secret_key, hex_encode(holder.public_key), 100, 300, rng);

  // Byte scan of the whole serialized certificate: nothing names an SP,
  // an organization, or a principal.
  std::string wire = cert_to_record(cert).dump();
  for (const std::string& identity :
       {"sp-", "idp-", "alice", ".example", "@"}) {
    CAPTURE(identity);
    CHECK_FALSE(contains_bytes(wire, identity));
  }
  // Exactly the four identity-free fields plus the signature.
  Record r = cert_to_record(cert);
  CHECK(r.size() == 5);
  CHECK(r.contains("public_key"));
  CHECK(r.contains("not_before"));
  CHECK(r.contains("not_after"));
  CHECK(r.contains("serial"));
  CHECK(r.contains("ca_signature"));
}

TEST_CASE("hybrid payload encryption round trips exactly") {
  DeterministicRng rng(9);
  SigningKeypair ca = generate_signing_keypair(rng);
  SigningKeypair holder = generate_signing_keypair(rng);
  OneTimeCertificate cert = issue_onetime_cert(
      ca.secret_key, hex_encode(holder.public_key), 0, 300, rng);

  std::map<std::string, std::string> attrs = {
      {"display_name", "Alice Park"}, {"tier", "gold"}};
  EncryptedPayload sealed =
      encrypt_payload(attrs, cert, ca.public_key, 10, rng);
  CHECK(sealed.recipient_hint == cert.serial);
  CHECK(decrypt_payload(sealed, holder.secret_key) == attrs);

  // The ciphertext exposes neither names nor values.
  CHECK_FALSE(contains_bytes(sealed.ciphertext, "Alice"));
  CHECK_FALSE(contains_bytes(sealed.ciphertext, "gold"));
  CHECK_FALSE(contains_bytes(sealed.ciphertext, "display_name"));
}

TEST_CASE("decryption needs the matching certificate key") {
  DeterministicRng rng(9);
  SigningKeypair ca = generate_signing_keypair(rng);
  SigningKeypair holder = generate_signing_keypair(rng);
  SigningKeypair other = generate_signing_keypair(rng);
  OneTimeCertificate cert = issue_onetime_cert(
      ca.secret_key, hex_encode(holder.public_key), 0, 300, rng);
  EncryptedPayload sealed =
      encrypt_payload({{"a", "1"}}, cert, ca.public_key, 10, rng);

  CHECK_THROWS_AS(decrypt_payload(sealed, other.secret_key), Error);

  EncryptedPayload bent = sealed;
  bent.ciphertext[1] = bent.ciphertext[1] == 'A' ? 'B' : 'A';
  CHECK_THROWS_AS(decrypt_payload(bent, holder.secret_key), Error);
}

TEST_CASE("encryption refuses an invalid certificate") {
  DeterministicRng rng(9);
  SigningKeypair ca = generate_signing_keypair(rng);
  SigningKeypair holder = generate_signing_keypair(rng);
  OneTimeCertificate cert = issue_onetime_cert(
      ca.secret_key, hex_encode(holder.public_key), 0, 300, rng);

  try {
    encrypt_payload({{"a", "1"}}, cert, ca.public_key, 9999, rng);
    FAIL("expired certificate accepted");
  } catch (const Error& err) {
    CHECK(err.code() == ErrorCode::InvalidCert);
  }
}

TEST_CASE("sealed blobs open only with the recipient secret") {
  DeterministicRng rng(13);
  BoxKeypair box = generate_box_keypair(rng);
  BoxKeypair other = generate_box_keypair(rng);
  Bytes secret = to_bytes("credential: pw-123");

  SealedBlob blob = seal_to_curve25519(secret, box.public_key, rng);
  CHECK(open_sealed(blob, box.secret_key) == secret);
  CHECK_THROWS_AS(open_sealed(blob, other.secret_key), Error);
  CHECK_FALSE(contains_bytes(to_string(blob.ciphertext), "pw-123"));
}

TEST_CASE("attribute encoding is canonical and invertible") {
  std::map<std::string, std::string> attrs = {
      {"b", "2"}, {"a", "1"}, {"c", ""}};
  Bytes encoded = encode_attributes(attrs);
  CHECK(decode_attributes(encoded) == attrs);
  CHECK(encode_attributes(attrs) == encoded);
}

TEST_CASE("record signing binds signer and survives reserialization") {
  DeterministicRng rng(17);
  SigningKeypair keys = generate_signing_keypair(rng);
  Record r;
  r["type"] = "assertion";
  r["subject"] = "tid-value";
  sign_record(r, "idp-alpha", keys.secret_key);
  CHECK(r["signer"] == "idp-alpha");
  CHECK(verify_record(r, keys.public_key));

  // Round trip through the wire encoding.
  Record wired = record_from_bytes(record_to_bytes(r));
  CHECK(verify_record(wired, keys.public_key));

  wired["subject"] = "other-tid";
  CHECK_FALSE(verify_record(wired, keys.public_key));
}

TEST_CASE("ed25519 keys convert to working curve25519 keys") {
  DeterministicRng rng(19);
  SigningKeypair ed = generate_signing_keypair(rng);
  Bytes curve_pub = ed25519_public_to_curve(ed.public_key);
  Bytes curve_sec = ed25519_secret_to_curve(ed.secret_key);

  Bytes msg = to_bytes("cross-key payload");
  SealedBlob blob = seal_to_curve25519(msg, curve_pub, rng);
  Bytes back;
  // open_sealed takes the curve secret directly.
  CHECK(open_sealed(blob, curve_sec) == msg);
}
