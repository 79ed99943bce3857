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
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace pefim {

// What category of sensitive element an actor observed. CERT_SERIAL is the
// one extension beyond the identity/key/attribute kinds: it lets the audit
// distinguish a CA that certifies keys from one that stores them.
enum class ElementKind {
  CLIENT_ADDR,
  SP_IDENTITY,
  USER_IDENTITY,
  PSEUDONYM,
  ENC_KEY_PUBLIC,
  ENC_KEY_PRIVATE,
  ATTRIBUTE_NAME,
  ATTRIBUTE_VALUE,
  SIGNING_ROOT,
  CERT_SERIAL,
};

const char* element_kind_name(ElementKind kind);
std::optional<ElementKind> parse_element_kind(const std::string& name);

struct ObservationEvent {
  uint64_t time = 0;
  ElementKind kind = ElementKind::CLIENT_ADDR;
  std::string value;
};

// Per-actor record of every sensitive element the actor put to semantic
// use: identified, certified, encrypted-to, decrypted, or stored. Strictly
// append-only; the audit reads these after the run.
class ObservationLedger {
 public:
  ObservationLedger() = default;
  explicit ObservationLedger(std::string owner) : owner_(std::move(owner)) {}

  const std::string& owner() const { return owner_; }
  const std::vector<ObservationEvent>& events() const { return events_; }

  void record(uint64_t time, ElementKind kind, std::string value) {
    events_.push_back({time, kind, std::move(value)});
  }

  bool has(ElementKind kind) const;
  std::set<std::string> values_of(ElementKind kind) const;

  // True iff any event value contains needle as a substring.
  bool any_value_contains(const std::string& needle) const;

 private:
  std::string owner_;
  std::vector<ObservationEvent> events_;
};

}  // namespace pefim
