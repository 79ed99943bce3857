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

#include "pefim/bytes.hpp"

#include <algorithm>
#include <stdexcept>

namespace pefim {

Bytes to_bytes(std::string_view s) {
  return Bytes(s.begin(), s.end());
}

std::string to_string(const Bytes& b) {
  return std::string(b.begin(), b.end());
}

namespace {
constexpr char kHexDigits[] = "0123456789abcdef";

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

constexpr char kB64Digits[] =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

int b64_value(char c) {
  if (c >= 'A' && c <= 'Z') return c - 'A';
  if (c >= 'a' && c <= 'z') return c - 'a' + 26;
  if (c >= '0' && c <= '9') return c - '0' + 52;
  if (c == '+') return 62;
  if (c == '/') return 63;
  return -1;
}
}  // namespace

std::string hex_encode(const Bytes& b) {
  std::string out;
  out.reserve(b.size() * 2);
  for (uint8_t v : b) {
    out.push_back(kHexDigits[v >> 4]);
    out.push_back(kHexDigits[v & 0x0f]);
  }
  return out;
}

Bytes hex_decode(std::string_view hex) {
  if (hex.size() % 2 != 0) throw std::invalid_argument("hex: odd length");
  Bytes out;
  out.reserve(hex.size() / 2);
  for (size_t i = 0; i < hex.size(); i += 2) {
    int hi = hex_value(hex[i]);
    int lo = hex_value(hex[i + 1]);
    if (hi < 0 || lo < 0) throw std::invalid_argument("hex: bad digit");
    out.push_back(static_cast<uint8_t>((hi << 4) | lo));
  }
  return out;
}

std::string base64_encode(const Bytes& b) {
  std::string out;
  out.reserve((b.size() + 2) / 3 * 4);
  size_t i = 0;
  while (i + 3 <= b.size()) {
    uint32_t n = (b[i] << 16) | (b[i + 1] << 8) | b[i + 2];
    out.push_back(kB64Digits[(n >> 18) & 63]);
    out.push_back(kB64Digits[(n >> 12) & 63]);
    out.push_back(kB64Digits[(n >> 6) & 63]);
    out.push_back(kB64Digits[n & 63]);
    i += 3;
  }
  size_t rest = b.size() - i;
  if (rest == 1) {
    uint32_t n = b[i] << 16;
    out.push_back(kB64Digits[(n >> 18) & 63]);
    out.push_back(kB64Digits[(n >> 12) & 63]);
    out.push_back('=');
    out.push_back('=');
  } else if (rest == 2) {
    uint32_t n = (b[i] << 16) | (b[i + 1] << 8);
    out.push_back(kB64Digits[(n >> 18) & 63]);
    out.push_back(kB64Digits[(n >> 12) & 63]);
    out.push_back(kB64Digits[(n >> 6) & 63]);
    out.push_back('=');
  }
  return out;
}

Bytes base64_decode(std::string_view b64) {
  if (b64.size() % 4 != 0) throw std::invalid_argument("base64: bad length");
  Bytes out;
  out.reserve(b64.size() / 4 * 3);
  for (size_t i = 0; i < b64.size(); i += 4) {
    int pad = 0;
    uint32_t n = 0;
    for (size_t j = 0; j < 4; ++j) {
      char c = b64[i + j];
      if (c == '=') {
        if (i + 4 != b64.size() || j < 2) {
          throw std::invalid_argument("base64: bad padding");
        }
        ++pad;
        n <<= 6;
      } else {
        if (pad > 0) throw std::invalid_argument("base64: data after padding");
        int v = b64_value(c);
        if (v < 0) throw std::invalid_argument("base64: bad digit");
        n = (n << 6) | static_cast<uint32_t>(v);
      }
    }
    out.push_back(static_cast<uint8_t>((n >> 16) & 0xff));
    if (pad < 2) out.push_back(static_cast<uint8_t>((n >> 8) & 0xff));
    if (pad < 1) out.push_back(static_cast<uint8_t>(n & 0xff));
  }
  return out;
}

bool contains_bytes(const Bytes& hay, const Bytes& needle) {
  if (needle.empty()) return true;
  return std::search(hay.begin(), hay.end(), needle.begin(), needle.end()) !=
         hay.end();
}

bool contains_bytes(std::string_view hay, std::string_view needle) {
  return hay.find(needle) != std::string_view::npos;
}

void append_length_prefixed(Bytes& out, std::string_view part) {
  uint32_t n = static_cast<uint32_t>(part.size());
  out.push_back(static_cast<uint8_t>(n & 0xff));
  out.push_back(static_cast<uint8_t>((n >> 8) & 0xff));
  out.push_back(static_cast<uint8_t>((n >> 16) & 0xff));
  out.push_back(static_cast<uint8_t>((n >> 24) & 0xff));
  out.insert(out.end(), part.begin(), part.end());
}

void append_length_prefixed(Bytes& out, const Bytes& part) {
  append_length_prefixed(
      out, std::string_view(reinterpret_cast<const char*>(part.data()),
                            part.size()));
}

}  // namespace pefim
