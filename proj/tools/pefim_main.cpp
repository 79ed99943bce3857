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

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "pefim/errors.hpp"
#include "pefim/scenario.hpp"

namespace fs = std::filesystem;
using namespace pefim;

namespace {

constexpr int kExitPass = 0;
constexpr int kExitFail = 1;
constexpr int kExitConfig = 2;

int exit_code_for(const Error& err) {
  switch (err.code()) {
    case ErrorCode::ConfigError:
    case ErrorCode::MissingTranscript:
      return kExitConfig;
    default:
      return kExitFail;
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::ConfigError, path.string() + ": unreadable");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
}

// Exclusive hold on a state directory for the lifetime of one command.
class StateLock {
 public:
  explicit StateLock(const std::string& dir) : lock_(fs::path(dir) / ".lock") {
    fs::create_directories(dir);
    if (fs::exists(lock_)) {
      throw Error(ErrorCode::ConfigError,
                  "state directory locked: " + lock_.string());
    }
    write_file(lock_, "held\n");
  }
  ~StateLock() {
    std::error_code ec;
    fs::remove(lock_, ec);
  }

 private:
  fs::path lock_;
};

struct ConsentArgs {
  std::string state_dir;
  std::string principal_key;
  std::string target;
  std::string target_sp;
  std::vector<std::string> attributes;
  std::string mode;
  std::string record_id;
};

ConsentStore load_store(const fs::path& dir) {
  fs::path path = dir / "consents.json";
  if (!fs::exists(path)) return ConsentStore();
  return ConsentStore::from_record(Record::parse(read_file(path)));
}

void save_store(const fs::path& dir, const ConsentStore& store) {
  write_file(dir / "consents.json", store.to_record().dump(2) + "\n");
}

FederationRegistry load_registry(const fs::path& dir) {
  fs::path path = dir / "registry.json";
  if (!fs::exists(path)) {
    throw Error(ErrorCode::ConfigError,
                path.string() + ": missing; run a scenario with --state-dir "
                "first to persist the federation");
  }
  return registry_from_record(Record::parse(read_file(path)));
}

std::string record_line(const ConsentRecord& rec) {
  std::ostringstream line;
  line << rec.record_id << " principal=" << rec.principal_key
       << " target=" << rec.target << " mode=" << consent_mode_name(rec.mode)
       << " attributes=";
  bool first = true;
  for (const auto& a : rec.attributes) {
    if (!first) line << ",";
    line << a;
    first = false;
  }
  if (rec.attributes.empty()) line << "-";
  line << " status=";
  if (rec.revoked_at) {
    line << "revoked";
  } else if (rec.consumed) {
    line << "consumed";
  } else {
    line << "active";
  }
  return line.str();
}

int cmd_run(const std::string& scenario_path, const RunOptions& options) {
  Scenario scenario = load_scenario(scenario_path);
  ScenarioRunner runner(scenario, options);
  RunResult result = runner.run();
  std::cout << result.report_text;
  std::cout << "SUMMARY scenario=" << scenario.name << " seed=" << result.seed
            << " delivered=" << result.delivered
            << " registry=" << result.registry_digest
            << " result=" << (result.audit_passed ? "PASS" : "FAIL") << "\n";
  return result.audit_passed ? kExitPass : kExitFail;
}

int cmd_consent_grant(const ConsentArgs& args) {
  StateLock lock(args.state_dir);
  fs::path dir(args.state_dir);
  FederationRegistry registry = load_registry(dir);
  ConsentStore store = load_store(dir);

  std::string target = args.target;
  std::set<std::string> attrs(args.attributes.begin(), args.attributes.end());
  if (target.empty()) {
    if (args.target_sp.empty()) {
      throw Error(ErrorCode::ConfigError, "grant needs --target or --target-sp");
    }
    target = lookup_proxy(registry, args.target_sp);
  }
  if (attrs.empty() && !is_link_target(target)) {
    if (!registry.groups.count(target)) {
      throw Error(ErrorCode::UnknownTarget, target);
    }
    attrs = registry.groups.at(target).required_attributes;
  }
  ConsentMode mode = registry.policy.consent_mode_default;
  if (!args.mode.empty()) {
    auto parsed = parse_consent_mode(args.mode);
    if (!parsed) throw Error(ErrorCode::ConfigError, "unknown mode " + args.mode);
    mode = *parsed;
  }
  // Seeded off the store size so repeated CLI grants stay deterministic
  // without colliding with ids minted inside a simulation run.
  DeterministicRng rng(0x9e3779b97f4a7c15ULL + store.all().size());
  const ConsentRecord& rec = store.grant(registry, args.principal_key, target,
                                         attrs, mode, 0, rng);
  save_store(dir, store);
  std::cout << record_line(rec) << "\n";
  std::cout << "SUMMARY consent=grant record=" << rec.record_id
            << " target=" << target << " result=OK\n";
  return kExitPass;
}

int cmd_consent_list(const ConsentArgs& args) {
  StateLock lock(args.state_dir);
  ConsentStore store = load_store(fs::path(args.state_dir));
  size_t shown = 0;
  for (const auto& rec : store.all()) {
    if (!args.principal_key.empty() && rec.principal_key != args.principal_key) {
      continue;
    }
    std::cout << record_line(rec) << "\n";
    ++shown;
  }
  std::cout << "SUMMARY consent=list records=" << shown << " result=OK\n";
  return kExitPass;
}

int cmd_consent_revoke(const ConsentArgs& args) {
  StateLock lock(args.state_dir);
  fs::path dir(args.state_dir);
  ConsentStore store = load_store(dir);
  store.revoke(args.record_id, 0);
  save_store(dir, store);
  std::cout << "SUMMARY consent=revoke record=" << args.record_id
            << " result=OK\n";
  return kExitPass;
}

int cmd_audit(const std::string& dir) {
  AuditInput input = load_audit_input(dir);
  AuditReport report = run_audit(input);
  std::cout << render_report(report);
  std::cout << "SUMMARY audit=" << dir
            << " result=" << (report.passed() ? "PASS" : "FAIL") << "\n";
  return report.passed() ? kExitPass : kExitFail;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"federated identity flow simulator and privacy auditor"};
  app.require_subcommand(1);

  std::string scenario_path;
  RunOptions options;
  uint64_t seed_flag = 0;
  int floor_flag = 0;
  auto* run = app.add_subcommand("run", "execute a scenario and audit it");
  run->add_option("scenario", scenario_path, "scenario file")->required();
  auto* seed_opt = run->add_option("--seed", seed_flag, "override the seed");
  run->add_flag("--stress", options.stress, "multi-threaded dispatch");
  run->add_option("--out", options.out_dir, "output bundle directory");
  run->add_option("--state-dir", options.state_dir,
                  "persisted broker state directory");
  auto* floor_opt = run->add_option("--min-group-size", floor_flag,
                                    "override the grouping floor");

  auto* consent = app.add_subcommand("consent", "manage persisted consent");
  consent->require_subcommand(1);
  ConsentArgs cargs;
  auto add_state = [&](CLI::App* sub) {
    sub->add_option("--state-dir", cargs.state_dir, "state directory")
        ->required();
  };
  auto* grant = consent->add_subcommand("grant", "record a consent decision");
  add_state(grant);
  grant->add_option("--principal-key", cargs.principal_key,
                    "broker-scope pseudonym the consent belongs to")
      ->required();
  grant->add_option("--target", cargs.target,
                    "proxy id or LINK(spA,spB) target");
  grant->add_option("--target-sp", cargs.target_sp,
                    "SP id, resolved to its proxy");
  grant->add_option("--attributes", cargs.attributes,
                    "attribute names (default: the target group's set)");
  grant->add_option("--mode", cargs.mode,
                    "OUT_OF_BAND, UP_FRONT, or TRANSACTIONAL");
  auto* list = consent->add_subcommand("list", "show stored records");
  add_state(list);
  list->add_option("--principal-key", cargs.principal_key, "filter by key");
  auto* revoke = consent->add_subcommand("revoke", "revoke one record");
  add_state(revoke);
  revoke->add_option("--record", cargs.record_id, "record id")->required();

  std::string audit_dir;
  auto* audit = app.add_subcommand("audit", "re-audit a written bundle");
  audit->add_option("dir", audit_dir, "output bundle directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitPass : kExitConfig;
  }

  try {
    if (run->parsed()) {
      if (seed_opt->count()) options.seed = seed_flag;
      if (floor_opt->count()) options.min_group_size = floor_flag;
      return cmd_run(scenario_path, options);
    }
    if (consent->parsed()) {
      if (grant->parsed()) return cmd_consent_grant(cargs);
      if (list->parsed()) return cmd_consent_list(cargs);
      if (revoke->parsed()) return cmd_consent_revoke(cargs);
    }
    if (audit->parsed()) return cmd_audit(audit_dir);
  } catch (const Error& err) {
    std::cerr << "error: " << err.what() << "\n";
    return exit_code_for(err);
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitConfig;
  }
  return kExitConfig;
}
