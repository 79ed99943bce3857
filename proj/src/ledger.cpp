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

#include "pefim/ledger.hpp"

namespace pefim {

const char* element_kind_name(ElementKind kind) {
  switch (kind) {
    case ElementKind::CLIENT_ADDR: return "CLIENT_ADDR";
    case ElementKind::SP_IDENTITY: return "SP_IDENTITY";
    case ElementKind::USER_IDENTITY: return "USER_IDENTITY";
    case ElementKind::PSEUDONYM: return "PSEUDONYM";
    case ElementKind::ENC_KEY_PUBLIC: return "ENC_KEY_PUBLIC";
    case ElementKind::ENC_KEY_PRIVATE: return "ENC_KEY_PRIVATE";
    case ElementKind::ATTRIBUTE_NAME: return "ATTRIBUTE_NAME";
    case ElementKind::ATTRIBUTE_VALUE: return "ATTRIBUTE_VALUE";
    case ElementKind::SIGNING_ROOT: return "SIGNING_ROOT";
    case ElementKind::CERT_SERIAL: return "CERT_SERIAL";
  }
  return "?";
}

std::optional<ElementKind> parse_element_kind(const std::string& name) {
  static const ElementKind kAll[] = {
      ElementKind::CLIENT_ADDR,    ElementKind::SP_IDENTITY,
      ElementKind::USER_IDENTITY,  ElementKind::PSEUDONYM,
      ElementKind::ENC_KEY_PUBLIC, ElementKind::ENC_KEY_PRIVATE,
      ElementKind::ATTRIBUTE_NAME, ElementKind::ATTRIBUTE_VALUE,
      ElementKind::SIGNING_ROOT,   ElementKind::CERT_SERIAL,
  };
  for (ElementKind k : kAll) {
    if (name == element_kind_name(k)) return k;
  }
  return std::nullopt;
}

bool ObservationLedger::has(ElementKind kind) const {
  for (const auto& e : events_) {
    if (e.kind == kind) return true;
  }
  return false;
}

std::set<std::string> ObservationLedger::values_of(ElementKind kind) const {
  std::set<std::string> out;
  for (const auto& e : events_) {
    if (e.kind == kind) out.insert(e.value);
  }
  return out;
}

bool ObservationLedger::any_value_contains(const std::string& needle) const {
  if (needle.empty()) return false;
  for (const auto& e : events_) {
    if (e.value.find(needle) != std::string::npos) return true;
  }
  return false;
}

}  // namespace pefim
