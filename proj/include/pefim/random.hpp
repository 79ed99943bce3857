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
#include <mutex>
#include <random>

#include "pefim/bytes.hpp"

namespace pefim {

// Source of key material and opaque tokens. Deterministic runs draw all
// randomness from one seeded source so transcripts are reproducible;
// non-simulated deployments plug in the system source instead.
class RandomSource {
 public:
  virtual ~RandomSource() = default;
  virtual void fill(uint8_t* out, size_t n) = 0;

  Bytes bytes(size_t n) {
    Bytes b(n);
    if (n > 0) fill(b.data(), n);
    return b;
  }

  std::string token_hex(size_t n_bytes) { return hex_encode(bytes(n_bytes)); }

  uint64_t next_u64() {
    uint8_t buf[8];
    fill(buf, 8);
    uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | buf[i];
    return v;
  }

  // Uniform in [0, bound). bound must be > 0.
  uint64_t below(uint64_t bound);
};

// Seeded generator with a platform-independent byte stream: successive
// mt19937_64 outputs serialized little-endian.
class DeterministicRng final : public RandomSource {
 public:
  explicit DeterministicRng(uint64_t seed) : engine_(seed) {}
  void fill(uint8_t* out, size_t n) override;

 private:
  std::mt19937_64 engine_;
  uint8_t pending_[8] = {};
  size_t pending_len_ = 0;
};

// OS randomness, for non-reproducible runs.
class SystemRng final : public RandomSource {
 public:
  void fill(uint8_t* out, size_t n) override;
};

// Serializes access to a shared source; used by the multi-threaded
// scheduler where actors draw keys concurrently.
class LockedRng final : public RandomSource {
 public:
  explicit LockedRng(RandomSource& inner) : inner_(inner) {}
  void fill(uint8_t* out, size_t n) override {
    std::lock_guard<std::mutex> lock(mu_);
    inner_.fill(out, n);
  }

 private:
  std::mutex mu_;
  RandomSource& inner_;
};

}  // namespace pefim
