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

#include "pefim/sim.hpp"

#include <thread>

#include "pefim/errors.hpp"

namespace pefim {

Record TranscriptEntry::to_record() const {
  Record r;
  r["kind"] = kind == Kind::DELIVER ? "deliver" : "note";
  r["seq"] = seq;
  r["time"] = time;
  if (kind == Kind::DELIVER) {
    r["from"] = from;
    r["to"] = to;
    r["client_addr"] = client_addr;
    r["payload"] = Record::parse(body);
  } else {
    r["actor"] = from;
    r["label"] = label;
    r["detail"] = Record::parse(body);
  }
  return r;
}

void Simulation::add_actor(std::unique_ptr<Actor> actor) {
  const std::string id = actor->id();
  if (actors_.count(id)) {
    throw Error(ErrorCode::DuplicateEntity, "actor " + id);
  }
  actor_locks_[id] = std::make_unique<std::mutex>();
  actors_[id] = std::move(actor);
}

Actor& Simulation::actor(const std::string& id) {
  auto it = actors_.find(id);
  if (it == actors_.end()) {
    throw Error(ErrorCode::UnknownEntity, "actor " + id);
  }
  return *it->second;
}

bool Simulation::has_actor(const std::string& id) const {
  return actors_.count(id) > 0;
}

std::vector<std::string> Simulation::actor_ids() const {
  std::vector<std::string> out;
  for (const auto& [id, _] : actors_) out.push_back(id);
  return out;
}

void Simulation::send(const std::string& from, const std::string& to,
                      const Record& record, const std::string& client_addr) {
  std::lock_guard<std::mutex> lock(bus_mu_);
  SimEnvelope env;
  env.seq = next_seq_++;
  env.from = from;
  env.to = to;
  env.payload = record_to_bytes(record);
  env.deliver_at = now_ + 1;
  env.client_addr = client_addr;
  queue_.emplace(std::make_pair(env.deliver_at, env.seq), std::move(env));
}

void Simulation::note(const std::string& actor_id, const std::string& label,
                      const Record& detail) {
  std::lock_guard<std::mutex> lock(bus_mu_);
  TranscriptEntry entry;
  entry.kind = TranscriptEntry::Kind::NOTE;
  entry.seq = next_seq_++;
  entry.time = now_;
  entry.from = actor_id;
  entry.label = label;
  entry.body = detail.dump();
  transcript_.push_back(std::move(entry));
}

void Simulation::dispatch(const SimEnvelope& env) {
  {
    std::lock_guard<std::mutex> lock(bus_mu_);
    TranscriptEntry entry;
    entry.kind = TranscriptEntry::Kind::DELIVER;
    entry.seq = env.seq;
    entry.time = env.deliver_at;
    entry.from = env.from;
    entry.to = env.to;
    entry.body = to_string(env.payload);
    entry.client_addr = env.client_addr;
    transcript_.push_back(std::move(entry));
  }
  auto it = actors_.find(env.to);
  if (it == actors_.end()) {
    note("scheduler", "dropped", Record{{"to", env.to}, {"reason", "unknown actor"}});
    return;
  }
  std::lock_guard<std::mutex> actor_lock(*actor_locks_.at(env.to));
  it->second->on_message(*this, env);
}

uint64_t Simulation::run_until_quiescent(uint64_t step_budget) {
  stress_ = false;
  uint64_t steps = 0;
  while (!queue_.empty()) {
    if (steps >= step_budget) {
      throw Error(ErrorCode::LivelockDetected,
                  "step budget " + std::to_string(step_budget) +
                      " exhausted with " + std::to_string(queue_.size()) +
                      " envelopes pending");
    }
    auto it = queue_.begin();
    SimEnvelope env = std::move(it->second);
    queue_.erase(it);
    now_ = env.deliver_at;
    dispatch(env);
    ++steps;
  }
  return steps;
}

uint64_t Simulation::run_stress(uint64_t step_budget, unsigned threads) {
  stress_ = true;
  uint64_t steps = 0;
  while (true) {
    // Collect the batch of envelopes sharing the earliest delivery time.
    std::vector<SimEnvelope> batch;
    {
      std::lock_guard<std::mutex> lock(bus_mu_);
      if (queue_.empty()) break;
      uint64_t t = queue_.begin()->first.first;
      now_ = t;
      while (!queue_.empty() && queue_.begin()->first.first == t) {
        batch.push_back(std::move(queue_.begin()->second));
        queue_.erase(queue_.begin());
      }
    }
    if (steps + batch.size() > step_budget) {
      throw Error(ErrorCode::LivelockDetected,
                  "step budget " + std::to_string(step_budget) +
                      " exhausted in stress mode");
    }
    if (threads <= 1 || batch.size() == 1) {
      for (const auto& env : batch) dispatch(env);
    } else {
      std::vector<std::thread> pool;
      std::mutex batch_mu;
      size_t cursor = 0;
      unsigned n = std::min<unsigned>(threads, batch.size());
      for (unsigned i = 0; i < n; ++i) {
        pool.emplace_back([&]() {
          while (true) {
            size_t mine;
            {
              std::lock_guard<std::mutex> lock(batch_mu);
              if (cursor >= batch.size()) return;
              mine = cursor++;
            }
            dispatch(batch[mine]);
          }
        });
      }
      for (auto& t : pool) t.join();
    }
    steps += batch.size();
  }
  stress_ = false;
  return steps;
}

}  // namespace pefim
