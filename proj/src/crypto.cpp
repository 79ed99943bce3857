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

#include "pefim/crypto.hpp"

#include <sodium.h>

#include <json.hpp>
#include <stdexcept>

#include "pefim/errors.hpp"

namespace pefim {

namespace {
using ordered_json = nlohmann::ordered_json;

// XSalsa20-Poly1305 with an all-zero nonce: safe because every symmetric
// key here is derived from a fresh ephemeral keypair and used exactly once.
const unsigned char kZeroNonce[crypto_secretbox_NONCEBYTES] = {};

Bytes derive_shared_key(const Bytes& shared, const Bytes& ephemeral_public,
                        const Bytes& recipient_public) {
  Bytes material;
  material.insert(material.end(), shared.begin(), shared.end());
  material.insert(material.end(), ephemeral_public.begin(),
                  ephemeral_public.end());
  material.insert(material.end(), recipient_public.begin(),
                  recipient_public.end());
  Bytes key(crypto_secretbox_KEYBYTES);
  crypto_generichash(key.data(), key.size(), material.data(), material.size(),
                     nullptr, 0);
  return key;
}
}  // namespace

void ensure_sodium_init() {
  if (sodium_init() < 0) {
    throw std::runtime_error("sodium_init failed");
  }
}

SigningKeypair generate_signing_keypair(RandomSource& rng) {
  ensure_sodium_init();
  Bytes seed = rng.bytes(crypto_sign_SEEDBYTES);
  SigningKeypair kp;
  kp.public_key.resize(crypto_sign_PUBLICKEYBYTES);
  kp.secret_key.resize(crypto_sign_SECRETKEYBYTES);
  crypto_sign_seed_keypair(kp.public_key.data(), kp.secret_key.data(),
                           seed.data());
  return kp;
}

Bytes sign_detached(const Bytes& body, const Bytes& secret_key) {
  ensure_sodium_init();
  if (secret_key.size() != crypto_sign_SECRETKEYBYTES) {
    throw Error(ErrorCode::ConfigError, "bad signing key length");
  }
  Bytes sig(crypto_sign_BYTES);
  crypto_sign_detached(sig.data(), nullptr, body.data(), body.size(),
                       secret_key.data());
  return sig;
}

bool verify_detached(const Bytes& body, const Bytes& signature,
                     const Bytes& public_key) {
  ensure_sodium_init();
  if (signature.size() != crypto_sign_BYTES ||
      public_key.size() != crypto_sign_PUBLICKEYBYTES) {
    return false;
  }
  return crypto_sign_verify_detached(signature.data(), body.data(),
                                     body.size(), public_key.data()) == 0;
}

BoxKeypair generate_box_keypair(RandomSource& rng) {
  ensure_sodium_init();
  BoxKeypair kp;
  kp.secret_key = rng.bytes(crypto_scalarmult_SCALARBYTES);
  kp.public_key.resize(crypto_scalarmult_BYTES);
  crypto_scalarmult_base(kp.public_key.data(), kp.secret_key.data());
  return kp;
}

std::string key_fingerprint(const Bytes& public_key) {
  ensure_sodium_init();
  Bytes digest(8);
  crypto_generichash(digest.data(), digest.size(), public_key.data(),
                     public_key.size(), nullptr, 0);
  return hex_encode(digest);
}

Bytes OneTimeCertificate::canonical_bytes() const {
  ordered_json j;
  j["public_key"] = public_key;
  j["not_before"] = not_before;
  j["not_after"] = not_after;
  j["serial"] = serial;
  return to_bytes(j.dump());
}

const char* cert_check_name(CertCheck check) {
  switch (check) {
    case CertCheck::VALID: return "VALID";
    case CertCheck::BAD_SIGNATURE: return "BadSignature";
    case CertCheck::EXPIRED: return "Expired";
    case CertCheck::NOT_YET_VALID: return "NotYetValid";
  }
  return "?";
}

OneTimeCertificate issue_onetime_cert(const Bytes& ca_secret_key,
                                      const std::string& holder_public_key_hex,
                                      uint64_t now, uint64_t validity,
                                      RandomSource& rng) {
  OneTimeCertificate cert;
  cert.public_key = holder_public_key_hex;
  cert.not_before = now;
  cert.not_after = now + validity;
  cert.serial = rng.token_hex(16);
  cert.ca_signature =
      base64_encode(sign_detached(cert.canonical_bytes(), ca_secret_key));
  return cert;
}

CertCheck validate_cert(const OneTimeCertificate& cert,
                        const Bytes& trust_root_public_key, uint64_t now) {
  Bytes sig;
  try {
    sig = base64_decode(cert.ca_signature);
  } catch (const std::exception&) {
    return CertCheck::BAD_SIGNATURE;
  }
  if (!verify_detached(cert.canonical_bytes(), sig, trust_root_public_key)) {
    return CertCheck::BAD_SIGNATURE;
  }
  if (now < cert.not_before) return CertCheck::NOT_YET_VALID;
  if (now > cert.not_after) return CertCheck::EXPIRED;
  return CertCheck::VALID;
}

SealedBlob seal_to_curve25519(const Bytes& plaintext,
                              const Bytes& recipient_curve_public,
                              RandomSource& rng) {
  ensure_sodium_init();
  if (recipient_curve_public.size() != crypto_scalarmult_BYTES) {
    throw Error(ErrorCode::ConfigError, "bad recipient key length");
  }
  BoxKeypair eph = generate_box_keypair(rng);
  Bytes shared(crypto_scalarmult_BYTES);
  if (crypto_scalarmult(shared.data(), eph.secret_key.data(),
                        recipient_curve_public.data()) != 0) {
    throw Error(ErrorCode::ConfigError, "scalarmult failed");
  }
  Bytes key = derive_shared_key(shared, eph.public_key, recipient_curve_public);
  SealedBlob blob;
  blob.ephemeral_public = eph.public_key;
  blob.ciphertext.resize(plaintext.size() + crypto_secretbox_MACBYTES);
  crypto_secretbox_easy(blob.ciphertext.data(), plaintext.data(),
                        plaintext.size(), kZeroNonce, key.data());
  return blob;
}

Bytes open_sealed(const SealedBlob& blob, const Bytes& recipient_curve_secret) {
  ensure_sodium_init();
  if (recipient_curve_secret.size() != crypto_scalarmult_SCALARBYTES ||
      blob.ephemeral_public.size() != crypto_scalarmult_BYTES ||
      blob.ciphertext.size() < crypto_secretbox_MACBYTES) {
    throw Error(ErrorCode::DecryptionFailure, "malformed payload");
  }
  Bytes shared(crypto_scalarmult_BYTES);
  if (crypto_scalarmult(shared.data(), recipient_curve_secret.data(),
                        blob.ephemeral_public.data()) != 0) {
    throw Error(ErrorCode::DecryptionFailure, "scalarmult failed");
  }
  Bytes recipient_public(crypto_scalarmult_BYTES);
  crypto_scalarmult_base(recipient_public.data(),
                         recipient_curve_secret.data());
  Bytes key = derive_shared_key(shared, blob.ephemeral_public, recipient_public);
  Bytes plaintext(blob.ciphertext.size() - crypto_secretbox_MACBYTES);
  if (crypto_secretbox_open_easy(plaintext.data(), blob.ciphertext.data(),
                                 blob.ciphertext.size(), kZeroNonce,
                                 key.data()) != 0) {
    throw Error(ErrorCode::DecryptionFailure, "authentication failed");
  }
  return plaintext;
}

Bytes ed25519_public_to_curve(const Bytes& ed_public) {
  ensure_sodium_init();
  if (ed_public.size() != crypto_sign_PUBLICKEYBYTES) {
    throw Error(ErrorCode::ConfigError, "bad ed25519 public key length");
  }
  Bytes curve(crypto_scalarmult_BYTES);
  if (crypto_sign_ed25519_pk_to_curve25519(curve.data(), ed_public.data()) != 0) {
    throw Error(ErrorCode::ConfigError, "key conversion failed");
  }
  return curve;
}

Bytes ed25519_secret_to_curve(const Bytes& ed_secret) {
  ensure_sodium_init();
  if (ed_secret.size() != crypto_sign_SECRETKEYBYTES) {
    throw Error(ErrorCode::ConfigError, "bad ed25519 secret key length");
  }
  Bytes curve(crypto_scalarmult_SCALARBYTES);
  if (crypto_sign_ed25519_sk_to_curve25519(curve.data(), ed_secret.data()) != 0) {
    throw Error(ErrorCode::ConfigError, "key conversion failed");
  }
  return curve;
}

EncryptedPayload encrypt_payload(const std::map<std::string, std::string>& attributes,
                                 const OneTimeCertificate& cert,
                                 const Bytes& trust_root_public_key,
                                 uint64_t now, RandomSource& rng) {
  CertCheck check = validate_cert(cert, trust_root_public_key, now);
  if (check != CertCheck::VALID) {
    throw Error(ErrorCode::InvalidCert, cert_check_name(check));
  }
  Bytes recipient_curve = ed25519_public_to_curve(hex_decode(cert.public_key));
  SealedBlob blob =
      seal_to_curve25519(encode_attributes(attributes), recipient_curve, rng);
  EncryptedPayload payload;
  payload.ciphertext = base64_encode(blob.ciphertext);
  payload.ephemeral_material = base64_encode(blob.ephemeral_public);
  payload.recipient_hint = cert.serial;
  return payload;
}

std::map<std::string, std::string> decrypt_payload(const EncryptedPayload& payload,
                                                   const Bytes& ed_secret_key) {
  SealedBlob blob;
  try {
    blob.ephemeral_public = base64_decode(payload.ephemeral_material);
    blob.ciphertext = base64_decode(payload.ciphertext);
  } catch (const std::exception&) {
    throw Error(ErrorCode::DecryptionFailure, "malformed encoding");
  }
  Bytes plaintext = open_sealed(blob, ed25519_secret_to_curve(ed_secret_key));
  return decode_attributes(plaintext);
}

Bytes encode_attributes(const std::map<std::string, std::string>& attributes) {
  // std::map iterates in key order, so the rendering is byte-stable.
  ordered_json j = ordered_json::object();
  for (const auto& [name, value] : attributes) j[name] = value;
  return to_bytes(j.dump());
}

std::map<std::string, std::string> decode_attributes(const Bytes& encoded) {
  ordered_json j = ordered_json::parse(to_string(encoded), nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw Error(ErrorCode::DecryptionFailure, "attribute encoding damaged");
  }
  std::map<std::string, std::string> out;
  for (auto it = j.begin(); it != j.end(); ++it) {
    out[it.key()] = it.value().get<std::string>();
  }
  return out;
}

}  // namespace pefim
