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

#include "pefim/random.hpp"

#include <sodium.h>

#include <stdexcept>

namespace pefim {

uint64_t RandomSource::below(uint64_t bound) {
  if (bound == 0) throw std::invalid_argument("below: bound must be > 0");
  // Rejection sampling to avoid modulo bias.
  uint64_t limit = UINT64_MAX - (UINT64_MAX % bound);
  uint64_t v;
  do {
    v = next_u64();
  } while (v >= limit);
  return v % bound;
}

void DeterministicRng::fill(uint8_t* out, size_t n) {
  size_t i = 0;
  while (i < n) {
    if (pending_len_ == 0) {
      uint64_t v = engine_();
      for (int k = 0; k < 8; ++k) pending_[k] = static_cast<uint8_t>(v >> (8 * k));
      pending_len_ = 8;
    }
    size_t take = std::min(n - i, pending_len_);
    // pending_ is consumed front-to-back; live bytes sit at [8 - pending_len_, 8).
    for (size_t k = 0; k < take; ++k) out[i + k] = pending_[8 - pending_len_ + k];
    pending_len_ -= take;
    i += take;
  }
}

void SystemRng::fill(uint8_t* out, size_t n) {
  if (sodium_init() < 0) throw std::runtime_error("sodium_init failed");
  randombytes_buf(out, n);
}

}  // namespace pefim
