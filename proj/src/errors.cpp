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

#include "pefim/errors.hpp"

namespace pefim {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::DuplicateEntity: return "DuplicateEntity";
    case ErrorCode::InvalidDescriptor: return "InvalidDescriptor";
    case ErrorCode::UnknownEntity: return "UnknownEntity";
    case ErrorCode::Ungrouped: return "Ungrouped";
    case ErrorCode::EmptyParent: return "EmptyParent";
    case ErrorCode::ScopeMismatch: return "ScopeMismatch";
    case ErrorCode::UnknownTid: return "UnknownTid";
    case ErrorCode::SameSp: return "SameSp";
    case ErrorCode::UnauthorizedRequester: return "UnauthorizedRequester";
    case ErrorCode::BadSignature: return "BadSignature";
    case ErrorCode::Expired: return "Expired";
    case ErrorCode::NotYetValid: return "NotYetValid";
    case ErrorCode::InvalidCert: return "InvalidCert";
    case ErrorCode::CertIssuanceFailed: return "CertIssuanceFailed";
    case ErrorCode::CertReuse: return "CertReuse";
    case ErrorCode::DecryptionFailure: return "DecryptionFailure";
    case ErrorCode::UnknownSigner: return "UnknownSigner";
    case ErrorCode::UnknownGroupMember: return "UnknownGroupMember";
    case ErrorCode::AuthnFailed: return "AuthnFailed";
    case ErrorCode::ConsentMissing: return "ConsentMissing";
    case ErrorCode::AttributeSetExceedsConsent:
      return "AttributeSetExceedsConsent";
    case ErrorCode::UnknownTarget: return "UnknownTarget";
    case ErrorCode::UnknownRecord: return "UnknownRecord";
    case ErrorCode::LinkIrrevocable: return "LinkIrrevocable";
    case ErrorCode::UnknownCorrelation: return "UnknownCorrelation";
    case ErrorCode::ReplayDetected: return "ReplayDetected";
    case ErrorCode::AudienceMismatch: return "AudienceMismatch";
    case ErrorCode::StaleAssertion: return "StaleAssertion";
    case ErrorCode::UnpairedResponse: return "UnpairedResponse";
    case ErrorCode::UnknownPrincipalHint: return "UnknownPrincipalHint";
    case ErrorCode::UnresolvableLocalPart: return "UnresolvableLocalPart";
    case ErrorCode::WrongDomainForHop: return "WrongDomainForHop";
    case ErrorCode::KeyConfirmationFailed: return "KeyConfirmationFailed";
    case ErrorCode::LivelockDetected: return "LivelockDetected";
    case ErrorCode::IncompleteScenario: return "IncompleteScenario";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::MissingTranscript: return "MissingTranscript";
  }
  return "UnknownError";
}

}  // namespace pefim
