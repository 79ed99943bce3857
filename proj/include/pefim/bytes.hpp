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
#include <string>
#include <string_view>
#include <vector>

namespace pefim {

using Bytes = std::vector<uint8_t>;

Bytes to_bytes(std::string_view s);
std::string to_string(const Bytes& b);

// Lowercase hex. Decoding rejects odd length and non-hex characters.
std::string hex_encode(const Bytes& b);
Bytes hex_decode(std::string_view hex);

std::string base64_encode(const Bytes& b);
Bytes base64_decode(std::string_view b64);

// True if `needle` occurs as a contiguous byte substring of `hay`.
bool contains_bytes(const Bytes& hay, const Bytes& needle);
bool contains_bytes(std::string_view hay, std::string_view needle);

// Length-prefixed concatenation used by canonical encodings: each part is
// appended as u32-le length followed by the raw bytes.
void append_length_prefixed(Bytes& out, std::string_view part);
void append_length_prefixed(Bytes& out, const Bytes& part);

}  // namespace pefim
