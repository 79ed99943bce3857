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

#include <stdexcept>

#include "pefim/bytes.hpp"

using namespace pefim;

TEST_CASE("hex round trip is lowercase and exact") {
  Bytes b = {0x00, 0x0f, 0xa5, 0xff};
  std::string hex = hex_encode(b);
  CHECK(hex == "000fa5ff");
  CHECK(hex_decode(hex) == b);
  CHECK(hex_encode(Bytes{}) == "");
}

TEST_CASE("hex decode rejects malformed input") {
  CHECK_THROWS_AS(hex_decode("abc"), std::invalid_argument);
  CHECK_THROWS_AS(hex_decode("zz"), std::invalid_argument);
  CHECK_THROWS_AS(hex_decode("0G"), std::invalid_argument);
}

TEST_CASE("base64 round trips all lengths mod 3") {
  for (size_t n = 0; n < 9; ++n) {
    Bytes b;
    for (size_t i = 0; i < n; ++i) b.push_back(static_cast<uint8_t>(17 * i + 3));
    CHECK(base64_decode(base64_encode(b)) == b);
  }
  CHECK(base64_encode(to_bytes("any carnal pleasure")) ==
        "YW55IGNhcm5hbCBwbGVhc3VyZQ==");
}

TEST_CASE("string conversions invert each other") {
  std::string s = "pefim\x01\x02 payload";
  CHECK(to_string(to_bytes(s)) == s);
}

TEST_CASE("contains_bytes finds contiguous substrings only") {
  CHECK(contains_bytes("the quick brown fox", "quick b"));
  CHECK_FALSE(contains_bytes("the quick brown fox", "quick f"));
  CHECK(contains_bytes("aaa", ""));
  CHECK_FALSE(contains_bytes("", "a"));
}

TEST_CASE("length prefix layout is u32le then raw bytes") {
  Bytes out;
  append_length_prefixed(out, std::string_view("ab"));
  REQUIRE(out.size() == 6);
  CHECK(out[0] == 2);
  CHECK(out[1] == 0);
  CHECK(out[2] == 0);
  CHECK(out[3] == 0);
  CHECK(out[4] == 'a');
  CHECK(out[5] == 'b');

  // Prefixing removes concatenation ambiguity: ("a","bc") != ("ab","c").
  Bytes left, right;
  append_length_prefixed(left, std::string_view("a"));
  append_length_prefixed(left, std::string_view("bc"));
  append_length_prefixed(right, std::string_view("ab"));
  append_length_prefixed(right, std::string_view("c"));
  CHECK(left != right);
}
