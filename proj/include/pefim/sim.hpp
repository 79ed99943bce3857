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
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "pefim/ledger.hpp"
#include "pefim/message.hpp"
#include "pefim/random.hpp"

namespace pefim {

class Simulation;

// One bus message. client_addr models the address token a browser hop
// exposes; back-channel messages leave it empty.
struct SimEnvelope {
  uint64_t seq = 0;
  std::string from;
  std::string to;
  Bytes payload;
  uint64_t deliver_at = 0;
  std::string client_addr;
};

// Something the transcript remembers: either a delivered envelope or a
// note an actor emitted (flow milestones, rejections, probe outcomes).
struct TranscriptEntry {
  enum class Kind { DELIVER, NOTE };
  Kind kind = Kind::DELIVER;
  uint64_t seq = 0;
  uint64_t time = 0;
  std::string from;   // DELIVER: sender. NOTE: emitting actor.
  std::string to;     // DELIVER only.
  std::string label;  // NOTE only: event name.
  std::string body;   // canonical record text (DELIVER) or detail (NOTE).
  std::string client_addr;

  Record to_record() const;
};

// An actor owns its private state and observation ledger and reacts to
// one envelope at a time. Actors never touch each other's state directly;
// everything crosses the bus.
class Actor {
 public:
  explicit Actor(std::string id) : id_(std::move(id)), ledger_(id_) {}
  virtual ~Actor() = default;

  const std::string& id() const { return id_; }
  ObservationLedger& ledger() { return ledger_; }
  const ObservationLedger& ledger() const { return ledger_; }

  virtual void on_message(Simulation& sim, const SimEnvelope& env) = 0;

 private:
  std::string id_;
  ObservationLedger ledger_;
};

// Discrete-event scheduler. Delivery order is total: by (deliver_at, seq),
// where seq is the global send order, so a (scenario, seed) pair fixes the
// transcript byte-for-byte.
class Simulation {
 public:
  explicit Simulation(RandomSource& rng) : rng_(rng) {}

  void add_actor(std::unique_ptr<Actor> actor);
  Actor& actor(const std::string& id);
  bool has_actor(const std::string& id) const;
  std::vector<std::string> actor_ids() const;

  uint64_t now() const { return now_; }
  // Serialized so stress-mode handlers can draw keys concurrently; in
  // deterministic mode the single thread sees the raw seeded sequence.
  RandomSource& rng() { return locked_rng_; }

  // Enqueues for delivery one time unit from now.
  void send(const std::string& from, const std::string& to,
            const Record& record, const std::string& client_addr = "");

  // Appends a milestone/rejection note to the transcript.
  void note(const std::string& actor_id, const std::string& label,
            const Record& detail);

  // Drains the queue on the calling thread. Returns delivered-envelope
  // count. Errors: LivelockDetected when the budget runs out with work
  // still queued.
  uint64_t run_until_quiescent(uint64_t step_budget = 100000);

  // Drains the queue with same-time envelopes dispatched across threads.
  // Per-actor locks keep each actor single-threaded over its mailbox.
  // Interleaving (and thus transcript order) may vary; ledger contents
  // and flow outcomes must not.
  uint64_t run_stress(uint64_t step_budget = 100000, unsigned threads = 4);

  const std::vector<TranscriptEntry>& transcript() const { return transcript_; }
  bool queue_empty() const { return queue_.empty(); }

 private:
  void dispatch(const SimEnvelope& env);

  RandomSource& rng_;
  LockedRng locked_rng_{rng_};
  std::map<std::string, std::unique_ptr<Actor>> actors_;
  std::map<std::string, std::unique_ptr<std::mutex>> actor_locks_;
  // Keyed by (deliver_at, seq); std::map keeps the total order explicit.
  std::map<std::pair<uint64_t, uint64_t>, SimEnvelope> queue_;
  std::vector<TranscriptEntry> transcript_;
  uint64_t now_ = 0;
  uint64_t next_seq_ = 0;
  std::mutex bus_mu_;  // guards queue_/transcript_/next_seq_ in stress mode
  bool stress_ = false;
};

}  // namespace pefim
