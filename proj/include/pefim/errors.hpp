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

#include <stdexcept>
#include <string>
#include <string_view>

namespace pefim {

enum class ErrorCode {
  DuplicateEntity,
  InvalidDescriptor,
  UnknownEntity,
  Ungrouped,
  EmptyParent,
  ScopeMismatch,
  UnknownTid,
  SameSp,
  UnauthorizedRequester,
  BadSignature,
  Expired,
  NotYetValid,
  InvalidCert,
  CertIssuanceFailed,
  CertReuse,
  DecryptionFailure,
  UnknownSigner,
  UnknownGroupMember,
  AuthnFailed,
  ConsentMissing,
  AttributeSetExceedsConsent,
  UnknownTarget,
  UnknownRecord,
  LinkIrrevocable,
  UnknownCorrelation,
  ReplayDetected,
  AudienceMismatch,
  StaleAssertion,
  UnpairedResponse,
  UnknownPrincipalHint,
  UnresolvableLocalPart,
  WrongDomainForHop,
  KeyConfirmationFailed,
  LivelockDetected,
  IncompleteScenario,
  ConfigError,
  MissingTranscript,
};

std::string_view error_code_name(ErrorCode code);

// Single exception type for all protocol and configuration failures. The
// code carries the machine-checkable identity; what() adds context.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(error_code_name(code)) +
                           (detail.empty() ? "" : ": " + detail)),
        code_(code),
        detail_(detail) {}

  explicit Error(ErrorCode code) : Error(code, "") {}

  ErrorCode code() const { return code_; }
  const std::string& detail() const { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace pefim
