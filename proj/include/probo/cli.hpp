#pragma once

// Batch command implementations behind the `probo` executable. The chain file,
// the bank file and a pending-request sidecar are the only state between
// invocations. A command that fails leaves all three untouched.
//
// Exit codes: 0 success, 1 domain failure (invalid input, rejection),
// 2 environment failure (files, configuration, lock).

#include <fcntl.h>
#include <unistd.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "probo/canonical.hpp"
#include "probo/errors.hpp"
#include "probo/ledger.hpp"
#include "probo/reputation.hpp"
#include "probo/simnet.hpp"
#include "probo/studies.hpp"
#include "probo/tokenomics.hpp"
#include "probo/verification.hpp"

namespace probo::cli {

inline constexpr int kOk = 0;
inline constexpr int kDomainFailure = 1;
inline constexpr int kEnvFailure = 2;

struct Paths {
  std::string chain = "probo.chain.jsonl";
  std::string bank = "probo.bank.json";

  std::string pending() const { return chain + ".pending.json"; }
  std::string lock() const { return chain + ".lock"; }
};

struct Clock {
  std::optional<Timestamp> fixed;

  Timestamp now() const {
    if (fixed) return *fixed;
    return std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch())
        .count();
  }
};

// Thrown inside commands, mapped to an exit code at the command boundary.
struct CommandError {
  int code;
  std::string message;
};

namespace detail {

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CommandError{kEnvFailure, "cannot read '" + path + "'"};
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline Json read_json(const std::string& path) {
  const std::string text = read_file(path);
  try {
    return Json::parse(text);
  } catch (const Json::exception& e) {
    throw CommandError{kDomainFailure, "'" + path + "' is not valid JSON: " + e.what()};
  }
}

// Write-then-rename so a reader never sees a half-written file.
inline void write_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CommandError{kEnvFailure, "cannot write '" + tmp + "'"};
    out << content;
    if (!out) throw CommandError{kEnvFailure, "failed writing '" + tmp + "'"};
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw CommandError{kEnvFailure, "cannot replace '" + path + "': " + ec.message()};
}

// Advisory writer lock next to the chain file.
class LockFile {
 public:
  explicit LockFile(std::string path) : path_(std::move(path)) {
    fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd_ < 0) throw CommandError{kEnvFailure, "chain is locked by another writer ('" + path_ + "')"};
  }
  ~LockFile() {
    ::close(fd_);
    ::unlink(path_.c_str());
  }
  LockFile(const LockFile&) = delete;
  LockFile& operator=(const LockFile&) = delete;

 private:
  std::string path_;
  int fd_ = -1;
};

}  // namespace detail

struct PendingEntry {
  StudyDescriptor descriptor;
  HashDigest commitment;
  OutputTable revealed;
  std::vector<VerifierReport> reports;
  Timestamp submitted_at = 0;
  Probos deposit = 0;
};

// Sidecar contents: pending requests plus the latest time any command observed.
struct PendingPool {
  Timestamp now = 0;
  std::map<std::string, PendingEntry> requests;

  Json to_json() const {
    Json reqs = Json::object();
    for (const auto& [id, e] : requests) {
      reqs[id] = Json{{"descriptor", e.descriptor}, {"commitment", e.commitment.hex()},
                      {"revealed", e.revealed},     {"reports", e.reports},
                      {"submitted_at", e.submitted_at}, {"deposit", e.deposit}};
    }
    return Json{{"now", now}, {"requests", std::move(reqs)}};
  }

  static PendingPool from_json(const Json& j) {
    PendingPool p;
    p.now = j.at("now").get<Timestamp>();
    for (const auto& [id, e] : j.at("requests").items()) {
      PendingEntry entry;
      entry.descriptor = e.at("descriptor").get<StudyDescriptor>();
      entry.commitment = HashDigest::from_hex(e.at("commitment").get<std::string>());
      entry.revealed = e.at("revealed").get<OutputTable>();
      entry.reports = e.at("reports").get<std::vector<VerifierReport>>();
      entry.submitted_at = e.at("submitted_at").get<Timestamp>();
      entry.deposit = e.at("deposit").get<Probos>();
      p.requests.emplace(id, std::move(entry));
    }
    return p;
  }
};

// Everything a mutating command needs, loaded and checked up front.
struct NetworkState {
  Chain chain;
  BankState bank;
  PendingPool pool;

  const GenesisConfig& config() const { return chain.genesis_config(); }

  static NetworkState load(const Paths& paths) {
    if (!std::filesystem::exists(paths.chain)) {
      throw CommandError{kEnvFailure, "chain file '" + paths.chain + "' not found (run `probo init`)"};
    }
    NetworkState s;
    try {
      std::istringstream in(detail::read_file(paths.chain));
      s.chain = chain_from_jsonl(in);
    } catch (const Error& e) {
      throw CommandError{kDomainFailure, std::string("chain file unreadable: ") + e.what()};
    }
    if (auto v = s.chain.validate(); !v) {
      throw CommandError{kDomainFailure, "invalid at index " + std::to_string(v.index) + ": " + to_string(v.reason)};
    }
    try {
      s.bank = detail::read_json(paths.bank).get<BankState>();
      s.pool = std::filesystem::exists(paths.pending()) ? PendingPool::from_json(detail::read_json(paths.pending()))
                                                        : PendingPool{s.chain.tip().timestamp, {}};
    } catch (const CommandError&) {
      throw;
    } catch (const std::exception& e) {
      throw CommandError{kEnvFailure, std::string("state files unreadable: ") + e.what()};
    }
    return s;
  }

  void save(const Paths& paths) const {
    detail::write_atomic(paths.chain, chain_to_jsonl(chain));
    detail::write_atomic(paths.bank, Json(bank).dump(2) + "\n");
    detail::write_atomic(paths.pending(), pool.to_json().dump(2) + "\n");
  }

  // Advances the observed clock; time never runs backwards.
  void advance_to(Timestamp now) {
    if (now < pool.now) {
      throw CommandError{kDomainFailure, "time regression: " + std::to_string(now) + " < " + std::to_string(pool.now)};
    }
    pool.now = now;
  }

  // Settles a pending request and appends its block.
  const Block& close(const std::string& id, Decision decision) {
    PendingEntry entry = pool.requests.at(id);
    std::vector<std::string> verifiers;
    for (const auto& r : entry.reports) verifiers.push_back(r.verifier);
    const Settlement settlement = bank.settle(id, decision, verifiers, config().economics, pool.now);
    BlockPayload payload;
    if (decision == Decision::Expired) {
      payload = ExpiryRecord{id, entry.descriptor, entry.commitment, entry.descriptor.proponent,
                             entry.reports, settlement, entry.submitted_at};
    } else {
      StudyOutcome o{id, entry.descriptor, entry.revealed, entry.commitment, entry.descriptor.proponent,
                     entry.reports, settlement, entry.submitted_at};
      if (decision == Decision::Accepted) {
        payload = AcceptanceRecord{std::move(o)};
      } else {
        payload = RejectionRecord{std::move(o)};
      }
    }
    pool.requests.erase(id);
    return chain.append(std::move(payload), pool.now);
  }
};

template <typename Fn>
int guarded(std::ostream& err, Fn&& body) {
  try {
    return body();
  } catch (const CommandError& e) {
    err << e.message << "\n";
    return e.code;
  } catch (const Error& e) {
    err << e.what() << "\n";
    return kDomainFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kEnvFailure;
  }
}

// ---------------------------------------------------------------------------
// init

struct InitOptions {
  std::optional<std::string> config_file;  // JSON with economics/quorum/allocation keys
  std::vector<std::string> nodes;
  std::optional<Probos> equal;
  std::map<std::string, Probos> allocation;
  std::map<std::string, std::string> affiliations;
  std::optional<Probos> min_deposit;
  std::optional<Probos> verifier_reward;
  std::optional<std::int64_t> min_reports;
  std::optional<std::string> accept_threshold;
  std::optional<std::int64_t> horizon_hours;
  bool force = false;
};

inline GenesisConfig build_genesis(const InitOptions& opts, Timestamp now) {
  GenesisConfig g;
  g.ticks_per_hour = 3600;
  g.timestamp = now;
  std::vector<std::string> nodes = opts.nodes;
  std::optional<Probos> equal = opts.equal;
  std::map<std::string, Probos> allocation = opts.allocation;

  if (opts.config_file) {
    const Json j = detail::read_json(*opts.config_file);
    try {
      const Json& econ = j.contains("economics") ? j.at("economics") : j;
      g.economics = econ.get<EconomicParams>();
      const Json& quorum = j.contains("quorum") ? j.at("quorum") : j;
      g.quorum = quorum.get<QuorumConfig>();
      g.horizon_hours = j.value("horizon_hours", g.horizon_hours);
      if (nodes.empty()) nodes = j.value("nodes", std::vector<std::string>{});
      if (econ.contains("genesis_allocation") && !equal && allocation.empty()) {
        const Json& alloc = econ.at("genesis_allocation");
        if (alloc.contains("equal")) {
          equal = alloc.at("equal").get<Probos>();
        } else {
          allocation = alloc.get<std::map<std::string, Probos>>();
        }
      }
    } catch (const std::exception& e) {
      throw CommandError{kEnvFailure, std::string("invalid config: ") + e.what()};
    }
  }
  if (opts.min_deposit) g.economics.min_deposit = *opts.min_deposit;
  if (opts.verifier_reward) g.economics.verifier_reward = *opts.verifier_reward;
  if (opts.min_reports) g.quorum.min_reports = *opts.min_reports;
  if (opts.accept_threshold) {
    try {
      g.quorum.accept_threshold = Rational::parse(*opts.accept_threshold);
    } catch (const Error& e) {
      throw CommandError{kEnvFailure, e.what()};
    }
  }
  if (opts.horizon_hours) g.horizon_hours = *opts.horizon_hours;

  auto affiliation_of = [&](const std::string& id) -> std::optional<std::string> {
    auto it = opts.affiliations.find(id);
    return it == opts.affiliations.end() ? std::nullopt : std::optional(it->second);
  };
  if (equal) {
    if (*equal < 0) throw CommandError{kEnvFailure, "invalid allocation: --equal must be >= 0"};
    for (const auto& id : nodes) g.nodes.push_back({NodeId(id, affiliation_of(id)), *equal});
  } else {
    for (const auto& [id, amount] : allocation) g.nodes.push_back({NodeId(id, affiliation_of(id)), amount});
  }
  try {
    g.validate();
  } catch (const Error& e) {
    throw CommandError{kEnvFailure, std::string("invalid allocation: ") + e.what()};
  }
  return g;
}

inline int cmd_init(const Paths& paths, const Clock& clock, const InitOptions& opts, std::ostream& out,
                    std::ostream& err) {
  return guarded(err, [&] {
    if (!opts.force && (std::filesystem::exists(paths.chain) || std::filesystem::exists(paths.bank))) {
      throw CommandError{kEnvFailure, "'" + paths.chain + "' or '" + paths.bank + "' already exists (use --force)"};
    }
    const Timestamp now = clock.now();
    const GenesisConfig config = build_genesis(opts, now);
    detail::LockFile lock(paths.lock());
    NetworkState s{genesis(config), config.make_bank(), PendingPool{now, {}}};
    s.save(paths);
    out << "genesis " << s.chain.tip().block_hash.hex() << "\n";
    return kOk;
  });
}

// ---------------------------------------------------------------------------
// submit

inline int cmd_submit(const Paths& paths, const Clock& clock, const std::string& descriptor_file,
                      const std::string& outputs_file, std::optional<Probos> deposit, std::ostream& out,
                      std::ostream& err) {
  return guarded(err, [&] {
    detail::LockFile lock(paths.lock());
    NetworkState s = NetworkState::load(paths);
    const Json djson = detail::read_json(descriptor_file);
    const Json ojson = detail::read_json(outputs_file);
    StudyDescriptor d;
    OutputTable table;
    try {
      d = djson.get<StudyDescriptor>();
      table = ojson.get<OutputTable>();
    } catch (const std::exception& e) {
      throw CommandError{kDomainFailure, std::string("malformed input: ") + e.what()};
    }
    s.advance_to(clock.now());
    d.deadline = s.pool.now + s.config().horizon_ticks();

    const auto violations = validate_descriptor(d, s.config().horizon_hours);
    if (!violations.empty()) {
      for (const auto& v : violations) err << v.str() << "\n";
      return kDomainFailure;
    }
    for (const auto& tol : d.tolerances) {
      if (!table.metrics.contains(tol.metric)) {
        throw CommandError{kDomainFailure, "tolerance names metric '" + tol.metric + "' absent from the outputs"};
      }
    }
    if (!s.bank.has_account(d.proponent)) throw CommandError{kDomainFailure, "unknown proponent '" + d.proponent + "'"};
    if (s.pool.requests.contains(d.request_id)) {
      throw CommandError{kDomainFailure, "duplicate request '" + d.request_id + "'"};
    }
    const Commitment c = make_commitment(d, table);
    const Probos amount = deposit.value_or(s.config().economics.min_deposit);
    try {
      s.bank.open_escrow(d.proponent, amount, d.request_id, s.config().economics, s.pool.now);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::DepositBelowMinimum) throw CommandError{kDomainFailure, "deposit below minimum"};
      if (e.kind() == ErrorKind::InsufficientFunds) throw CommandError{kDomainFailure, "insufficient funds"};
      throw;
    }
    s.pool.requests.emplace(d.request_id, PendingEntry{d, c.output_hash, table, {}, s.pool.now, amount});
    s.save(paths);
    out << "request_id " << d.request_id << "\n";
    out << "commitment " << c.output_hash.hex() << "\n";
    out << "deadline " << *d.deadline << "\n";
    return kOk;
  });
}

// ---------------------------------------------------------------------------
// verify

inline int cmd_verify(const Paths& paths, const Clock& clock, const std::string& request_id,
                      const std::string& verifier, const std::string& outputs_file, std::ostream& out,
                      std::ostream& err) {
  return guarded(err, [&] {
    detail::LockFile lock(paths.lock());
    NetworkState s = NetworkState::load(paths);
    auto it = s.pool.requests.find(request_id);
    if (it == s.pool.requests.end()) throw CommandError{kDomainFailure, "unknown request '" + request_id + "'"};
    PendingEntry& entry = it->second;
    if (verifier == entry.descriptor.proponent) throw CommandError{kDomainFailure, "proponent cannot verify"};
    if (!eligible(verifier, entry.descriptor.proponent, entry.reports)) {
      throw CommandError{kDomainFailure, "duplicate report from '" + verifier + "'"};
    }
    if (!s.bank.has_account(verifier)) throw CommandError{kDomainFailure, "unknown verifier '" + verifier + "'"};
    const Json ojson = detail::read_json(outputs_file);
    OutputTable table;
    try {
      table = ojson.get<OutputTable>();
    } catch (const std::exception& e) {
      throw CommandError{kDomainFailure, std::string("malformed outputs: ") + e.what()};
    }
    s.advance_to(clock.now());
    if (s.pool.now > *entry.descriptor.deadline) {
      throw CommandError{kDomainFailure, "request '" + request_id + "' is past its deadline"};
    }

    VerifierReport report =
        make_report(request_id, verifier, table, entry.revealed, entry.descriptor.tolerances, s.pool.now);
    out << to_string(report.verdict.value) << "\n";
    entry.reports.push_back(std::move(report));

    Decision decision = aggregate(entry.reports, s.config().quorum, s.pool.now, *entry.descriptor.deadline);
    if (decision != Decision::Pending) {
      if (!verify_commitment(entry.revealed, entry.commitment)) decision = Decision::Rejected;
      const Block& block = s.close(request_id, decision);
      out << to_string(decision) << "\n";
      out << "block " << block.index << " " << block.block_hash.hex() << "\n";
    }
    s.save(paths);
    return kOk;
  });
}

// ---------------------------------------------------------------------------
// tick

inline int cmd_tick(const Paths& paths, Timestamp new_now, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    detail::LockFile lock(paths.lock());
    NetworkState s = NetworkState::load(paths);
    s.advance_to(new_now);
    std::vector<std::pair<Timestamp, std::string>> overdue;
    for (const auto& [id, e] : s.pool.requests) {
      if (aggregate(e.reports, s.config().quorum, s.pool.now, *e.descriptor.deadline) == Decision::Expired) {
        overdue.emplace_back(e.submitted_at, id);
      }
    }
    std::sort(overdue.begin(), overdue.end());
    for (const auto& [_, id] : overdue) s.close(id, Decision::Expired);
    s.save(paths);
    out << overdue.size() << " expired\n";
    return kOk;
  });
}

// ---------------------------------------------------------------------------
// inspect

struct InspectSelector {
  std::optional<std::uint64_t> block;
  std::optional<std::string> request_id;
};

inline int cmd_inspect(const Paths& paths, const InspectSelector& sel, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (!std::filesystem::exists(paths.chain)) {
      throw CommandError{kEnvFailure, "chain file '" + paths.chain + "' not found"};
    }
    Chain chain;
    try {
      std::istringstream in(detail::read_file(paths.chain));
      chain = chain_from_jsonl(in);
    } catch (const Error& e) {
      throw CommandError{kDomainFailure, std::string("invalid: ") + e.what()};
    }
    if (auto v = chain.validate(); !v) {
      throw CommandError{kDomainFailure, "invalid at index " + std::to_string(v.index) + ": " + to_string(v.reason)};
    }
    Json selected = Json::array();
    if (sel.block) {
      if (*sel.block >= chain.size()) throw CommandError{kDomainFailure, "no block " + std::to_string(*sel.block)};
      out << block_to_json(chain[*sel.block]).dump(2) << "\n";
      return kOk;
    }
    for (const auto& b : chain.blocks()) {
      if (!sel.request_id || payload_request_id(b.payload) == *sel.request_id) selected.push_back(block_to_json(b));
    }
    if (sel.request_id && selected.empty()) {
      throw CommandError{kDomainFailure, "no block for request '" + *sel.request_id + "'"};
    }
    out << selected.dump(2) << "\n";
    return kOk;
  });
}

// ---------------------------------------------------------------------------
// rank

inline int cmd_rank(const Paths& paths, const ReputationWeights& weights, bool institutions, std::ostream& out,
                    std::ostream& err) {
  return guarded(err, [&] {
    if (!std::filesystem::exists(paths.chain)) {
      throw CommandError{kEnvFailure, "chain file '" + paths.chain + "' not found"};
    }
    Chain chain;
    try {
      std::istringstream in(detail::read_file(paths.chain));
      chain = chain_from_jsonl(in);
    } catch (const Error& e) {
      throw CommandError{kDomainFailure, std::string("invalid: ") + e.what()};
    }
    try {
      weights.validate();
    } catch (const Error& e) {
      throw CommandError{kEnvFailure, e.what()};
    }
    const ScoreBoard board = institutions ? institution_scores(chain, weights) : compute_scores(chain, weights);
    out << ranking_csv(board);
    return kOk;
  });
}

// ---------------------------------------------------------------------------
// simulate

inline int cmd_simulate(const std::string& scenario_file, const std::string& out_dir, std::ostream& out,
                        std::ostream& err) {
  return guarded(err, [&] {
    if (!std::filesystem::exists(scenario_file)) {
      throw CommandError{kEnvFailure, "scenario file '" + scenario_file + "' not found"};
    }
    const sim::Scenario scenario = sim::load_scenario(scenario_file);
    const sim::SimResult result = sim::run_scenario(scenario);
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw CommandError{kEnvFailure, "cannot create '" + out_dir + "': " + ec.message()};
    sim::write_outputs(result, out_dir);
    out << result.summary.to_json().dump(2) << "\n";
    return kOk;
  });
}

}  // namespace probo::cli
