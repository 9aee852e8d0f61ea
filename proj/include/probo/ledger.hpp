#pragma once

// Append-only hash-chained ledger. Every settled study request (accepted,
// rejected or expired) becomes one block; block 0 records the genesis
// configuration.
//
// block_hash = SHA-256(canonical_bytes({index, timestamp, prev_hash, payload}))

#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "probo/canonical.hpp"
#include "probo/errors.hpp"
#include "probo/hash.hpp"
#include "probo/studies.hpp"
#include "probo/tokenomics.hpp"
#include "probo/types.hpp"
#include "probo/verification.hpp"

namespace probo {

struct GenesisNode {
  NodeId node;
  Probos balance = 0;

  friend bool operator==(const GenesisNode& a, const GenesisNode& b) {
    return a.node.id == b.node.id && a.node.affiliation == b.node.affiliation && a.balance == b.balance;
  }
};

struct GenesisConfig {
  std::vector<GenesisNode> nodes;
  EconomicParams economics;
  QuorumConfig quorum;
  std::int64_t horizon_hours = 72;  // network time horizon for verification
  std::int64_t ticks_per_hour = 1;  // 1 for simulations, 3600 for Unix-second clocks
  Timestamp timestamp = 0;

  Timestamp horizon_ticks() const { return horizon_hours * ticks_per_hour; }

  void validate() const {
    if (nodes.empty()) fail(ErrorKind::InvalidConfig, "genesis needs at least one node");
    std::set<std::string> seen;
    for (const auto& n : nodes) {
      if (n.node.id.empty()) fail(ErrorKind::InvalidConfig, "empty node id");
      if (n.node.affiliation && n.node.affiliation->empty()) {
        fail(ErrorKind::InvalidConfig, "empty affiliation for '" + n.node.id + "'");
      }
      if (n.balance < 0) fail(ErrorKind::InvalidConfig, "negative balance for '" + n.node.id + "'");
      if (!seen.insert(n.node.id).second) fail(ErrorKind::InvalidConfig, "duplicate node '" + n.node.id + "'");
    }
    if (economics.min_deposit < 1) fail(ErrorKind::InvalidConfig, "min_deposit must be >= 1");
    if (economics.verifier_reward < 1) fail(ErrorKind::InvalidConfig, "verifier_reward must be >= 1");
    quorum.validate();
    if (horizon_hours < 1) fail(ErrorKind::InvalidConfig, "horizon_hours must be >= 1");
    if (ticks_per_hour < 1) fail(ErrorKind::InvalidConfig, "ticks_per_hour must be >= 1");
  }

  // Funded bank with genesis sealed.
  BankState make_bank() const {
    BankState bank;
    for (const auto& n : nodes) bank.create_account(n.node, n.balance);
    bank.seal_genesis();
    return bank;
  }

  friend bool operator==(const GenesisConfig&, const GenesisConfig&) = default;
};

inline void to_json(Json& j, const GenesisConfig& g) {
  Json nodes = Json::array();
  for (const auto& n : g.nodes) {
    Json entry{{"id", n.node.id}, {"balance", n.balance}};
    if (n.node.affiliation) entry["affiliation"] = *n.node.affiliation;
    nodes.push_back(std::move(entry));
  }
  j = Json{{"nodes", std::move(nodes)},       {"economics", g.economics},
           {"quorum", g.quorum},              {"horizon_hours", g.horizon_hours},
           {"ticks_per_hour", g.ticks_per_hour}, {"timestamp", g.timestamp}};
}
inline void from_json(const Json& j, GenesisConfig& g) {
  g.nodes.clear();
  for (const auto& entry : j.at("nodes")) {
    GenesisNode n;
    n.node.id = entry.at("id").get<std::string>();
    if (entry.contains("affiliation")) n.node.affiliation = entry.at("affiliation").get<std::string>();
    n.balance = entry.at("balance").get<Probos>();
    g.nodes.push_back(std::move(n));
  }
  g.economics = j.at("economics").get<EconomicParams>();
  g.quorum = j.at("quorum").get<QuorumConfig>();
  g.horizon_hours = j.at("horizon_hours").get<std::int64_t>();
  g.ticks_per_hour = j.at("ticks_per_hour").get<std::int64_t>();
  g.timestamp = j.at("timestamp").get<Timestamp>();
}

// ---------------------------------------------------------------------------
// Payloads

struct GenesisRecord {
  GenesisConfig config;
  friend bool operator==(const GenesisRecord&, const GenesisRecord&) = default;
};

// Shared body of accepted and rejected requests.
struct StudyOutcome {
  std::string request_id;
  StudyDescriptor descriptor;
  OutputTable proponent_table;
  HashDigest commitment;
  std::string proponent;
  std::vector<VerifierReport> reports;
  Settlement settlement;
  Timestamp submitted_at = 0;

  friend bool operator==(const StudyOutcome&, const StudyOutcome&) = default;
};

struct AcceptanceRecord : StudyOutcome {};
struct RejectionRecord : StudyOutcome {};

// Outputs are never revealed for an expired request; only the commitment is kept.
struct ExpiryRecord {
  std::string request_id;
  StudyDescriptor descriptor;
  HashDigest commitment;
  std::string proponent;
  std::vector<VerifierReport> reports;
  Settlement settlement;
  Timestamp submitted_at = 0;

  friend bool operator==(const ExpiryRecord&, const ExpiryRecord&) = default;
};

using BlockPayload = std::variant<GenesisRecord, AcceptanceRecord, RejectionRecord, ExpiryRecord>;

inline const char* payload_type(const BlockPayload& p) {
  switch (p.index()) {
    case 0: return "genesis";
    case 1: return "acceptance";
    case 2: return "rejection";
    default: return "expiry";
  }
}

// request_id of a study payload, empty for genesis.
inline std::string payload_request_id(const BlockPayload& p) {
  return std::visit(
      [](const auto& rec) -> std::string {
        if constexpr (std::is_same_v<std::decay_t<decltype(rec)>, GenesisRecord>) {
          return {};
        } else {
          return rec.request_id;
        }
      },
      p);
}

namespace detail {

inline Json outcome_json(const char* type, const StudyOutcome& o) {
  return Json{{"type", type},
              {"request_id", o.request_id},
              {"descriptor", o.descriptor},
              {"proponent_table", o.proponent_table},
              {"commitment", o.commitment.hex()},
              {"proponent", o.proponent},
              {"reports", o.reports},
              {"settlement", o.settlement},
              {"submitted_at", o.submitted_at}};
}

inline void outcome_from_json(const Json& j, StudyOutcome& o) {
  o.request_id = j.at("request_id").get<std::string>();
  o.descriptor = j.at("descriptor").get<StudyDescriptor>();
  o.proponent_table = j.at("proponent_table").get<OutputTable>();
  o.commitment = HashDigest::from_hex(j.at("commitment").get<std::string>());
  o.proponent = j.at("proponent").get<std::string>();
  o.reports = j.at("reports").get<std::vector<VerifierReport>>();
  o.settlement = j.at("settlement").get<Settlement>();
  o.submitted_at = j.at("submitted_at").get<Timestamp>();
}

}  // namespace detail

inline Json payload_to_json(const BlockPayload& p) {
  struct Visitor {
    Json operator()(const GenesisRecord& g) const { return Json{{"type", "genesis"}, {"config", g.config}}; }
    Json operator()(const AcceptanceRecord& a) const { return detail::outcome_json("acceptance", a); }
    Json operator()(const RejectionRecord& r) const { return detail::outcome_json("rejection", r); }
    Json operator()(const ExpiryRecord& e) const {
      return Json{{"type", "expiry"},
                  {"request_id", e.request_id},
                  {"descriptor", e.descriptor},
                  {"commitment", e.commitment.hex()},
                  {"proponent", e.proponent},
                  {"reports", e.reports},
                  {"settlement", e.settlement},
                  {"submitted_at", e.submitted_at}};
    }
  };
  return std::visit(Visitor{}, p);
}

inline BlockPayload payload_from_json(const Json& j) {
  const auto type = j.at("type").get<std::string>();
  if (type == "genesis") return GenesisRecord{j.at("config").get<GenesisConfig>()};
  if (type == "acceptance") {
    AcceptanceRecord a;
    detail::outcome_from_json(j, a);
    return a;
  }
  if (type == "rejection") {
    RejectionRecord r;
    detail::outcome_from_json(j, r);
    return r;
  }
  if (type == "expiry") {
    ExpiryRecord e;
    e.request_id = j.at("request_id").get<std::string>();
    e.descriptor = j.at("descriptor").get<StudyDescriptor>();
    e.commitment = HashDigest::from_hex(j.at("commitment").get<std::string>());
    e.proponent = j.at("proponent").get<std::string>();
    e.reports = j.at("reports").get<std::vector<VerifierReport>>();
    e.settlement = j.at("settlement").get<Settlement>();
    e.submitted_at = j.at("submitted_at").get<Timestamp>();
    return e;
  }
  fail(ErrorKind::ParseError, "unknown payload type '" + type + "'");
}

// Returns a description of the first broken payload invariant, if any.
inline std::optional<std::string> payload_problem(const BlockPayload& p, std::int64_t min_reports) {
  auto check_reports = [&](const std::string& request_id,
                           const std::vector<VerifierReport>& reports) -> std::optional<std::string> {
    for (const auto& r : reports) {
      if (r.request_id != request_id) return "report for '" + r.request_id + "' in record '" + request_id + "'";
      if (r.output_hash != commit_outputs(r.output_table)) return "report hash does not match its table";
    }
    return std::nullopt;
  };
  auto check_outcome = [&](const StudyOutcome& o, Decision expected) -> std::optional<std::string> {
    if (o.request_id.empty() || o.request_id != o.descriptor.request_id) return "request id mismatch";
    if (static_cast<std::int64_t>(o.reports.size()) < min_reports) {
      return "only " + std::to_string(o.reports.size()) + " reports, quorum needs " + std::to_string(min_reports);
    }
    if (o.settlement.kind != expected) return "settlement kind does not match record type";
    if (expected == Decision::Accepted && !verify_commitment(o.proponent_table, o.commitment)) {
      return "revealed table does not match commitment";
    }
    return check_reports(o.request_id, o.reports);
  };

  struct Visitor {
    decltype(check_outcome)& outcome;
    decltype(check_reports)& reports;
    std::int64_t min_reports;
    std::optional<std::string> operator()(const GenesisRecord&) const { return "genesis record after block 0"; }
    std::optional<std::string> operator()(const AcceptanceRecord& a) const {
      return outcome(a, Decision::Accepted);
    }
    std::optional<std::string> operator()(const RejectionRecord& r) const {
      return outcome(r, Decision::Rejected);
    }
    std::optional<std::string> operator()(const ExpiryRecord& e) const {
      if (e.request_id.empty() || e.request_id != e.descriptor.request_id) return "request id mismatch";
      if (static_cast<std::int64_t>(e.reports.size()) >= min_reports) return "expired request reached quorum";
      if (e.settlement.kind != Decision::Expired) return "settlement kind does not match record type";
      return reports(e.request_id, e.reports);
    }
  };
  return std::visit(Visitor{check_outcome, check_reports, min_reports}, p);
}

// ---------------------------------------------------------------------------
// Blocks

struct Block {
  std::uint64_t index = 0;
  Timestamp timestamp = 0;
  HashDigest prev_hash;
  BlockPayload payload;
  HashDigest block_hash;

  friend bool operator==(const Block&, const Block&) = default;
};

inline HashDigest compute_block_hash(std::uint64_t index, Timestamp timestamp, const HashDigest& prev_hash,
                                     const BlockPayload& payload) {
  return canonical_digest(Json{{"index", index},
                               {"timestamp", timestamp},
                               {"prev_hash", prev_hash.hex()},
                               {"payload", payload_to_json(payload)}});
}

inline Json block_to_json(const Block& b) {
  return Json{{"index", b.index},
              {"timestamp", b.timestamp},
              {"prev_hash", b.prev_hash.hex()},
              {"payload", payload_to_json(b.payload)},
              {"block_hash", b.block_hash.hex()}};
}

inline Block block_from_json(const Json& j) {
  Block b;
  b.index = j.at("index").get<std::uint64_t>();
  b.timestamp = j.at("timestamp").get<Timestamp>();
  b.prev_hash = HashDigest::from_hex(j.at("prev_hash").get<std::string>());
  b.payload = payload_from_json(j.at("payload"));
  b.block_hash = HashDigest::from_hex(j.at("block_hash").get<std::string>());
  return b;
}

enum class ChainFault { BadGenesis, BrokenLink, BadHash, TimestampRegression, InvalidPayload };

inline const char* to_string(ChainFault f) {
  switch (f) {
    case ChainFault::BadGenesis: return "BadGenesis";
    case ChainFault::BrokenLink: return "BrokenLink";
    case ChainFault::BadHash: return "BadHash";
    case ChainFault::TimestampRegression: return "TimestampRegression";
    case ChainFault::InvalidPayload: return "InvalidPayload";
  }
  return "";
}

struct ChainValidation {
  bool ok = true;
  std::uint64_t index = 0;
  ChainFault reason = ChainFault::BadGenesis;
  std::string detail;

  static ChainValidation valid() { return {}; }
  static ChainValidation invalid(std::uint64_t index, ChainFault reason, std::string detail = {}) {
    return {false, index, reason, std::move(detail)};
  }
  explicit operator bool() const { return ok; }
};

class Chain {
 public:
  Chain() = default;
  explicit Chain(std::vector<Block> blocks) : blocks_(std::move(blocks)) {}

  const std::vector<Block>& blocks() const { return blocks_; }
  std::size_t size() const { return blocks_.size(); }
  bool empty() const { return blocks_.empty(); }
  const Block& tip() const { return blocks_.back(); }
  const Block& operator[](std::size_t i) const { return blocks_[i]; }

  const GenesisConfig& genesis_config() const {
    if (blocks_.empty() || !std::holds_alternative<GenesisRecord>(blocks_.front().payload)) {
      fail(ErrorKind::InvalidChain, "chain has no genesis block");
    }
    return std::get<GenesisRecord>(blocks_.front().payload).config;
  }

  // Appends a study outcome. The chain stays valid if it was valid before.
  const Block& append(BlockPayload payload, Timestamp timestamp) {
    if (blocks_.empty()) fail(ErrorKind::InvalidChain, "cannot append to an empty chain");
    const Block& last = blocks_.back();
    if (timestamp < last.timestamp) {
      fail(ErrorKind::TimestampRegression, "timestamp " + std::to_string(timestamp) + " precedes tip at " +
                                               std::to_string(last.timestamp));
    }
    if (auto problem = payload_problem(payload, genesis_config().quorum.min_reports)) {
      fail(ErrorKind::InvalidPayload, *problem);
    }
    Block b;
    b.index = blocks_.size();
    b.timestamp = timestamp;
    b.prev_hash = last.block_hash;
    b.payload = std::move(payload);
    b.block_hash = compute_block_hash(b.index, b.timestamp, b.prev_hash, b.payload);
    blocks_.push_back(std::move(b));
    return blocks_.back();
  }

  ChainValidation validate() const {
    if (blocks_.empty()) return ChainValidation::invalid(0, ChainFault::BadGenesis, "empty chain");
    const Block& g = blocks_.front();
    if (g.index != 0 || !g.prev_hash.is_zero() || !std::holds_alternative<GenesisRecord>(g.payload)) {
      return ChainValidation::invalid(0, ChainFault::BadGenesis);
    }
    if (g.block_hash != compute_block_hash(g.index, g.timestamp, g.prev_hash, g.payload)) {
      return ChainValidation::invalid(0, ChainFault::BadHash);
    }
    const auto& config = std::get<GenesisRecord>(g.payload).config;
    try {
      config.validate();
    } catch (const Error& e) {
      return ChainValidation::invalid(0, ChainFault::BadGenesis, e.what());
    }
    if (config.timestamp != g.timestamp) return ChainValidation::invalid(0, ChainFault::BadGenesis, "timestamp");

    for (std::size_t i = 1; i < blocks_.size(); ++i) {
      const Block& b = blocks_[i];
      const Block& prev = blocks_[i - 1];
      if (b.index != i) return ChainValidation::invalid(i, ChainFault::BrokenLink, "index out of place");
      if (b.prev_hash != prev.block_hash) return ChainValidation::invalid(i, ChainFault::BrokenLink);
      if (b.block_hash != compute_block_hash(b.index, b.timestamp, b.prev_hash, b.payload)) {
        return ChainValidation::invalid(i, ChainFault::BadHash);
      }
      if (b.timestamp < prev.timestamp) return ChainValidation::invalid(i, ChainFault::TimestampRegression);
      if (auto problem = payload_problem(b.payload, config.quorum.min_reports)) {
        return ChainValidation::invalid(i, ChainFault::InvalidPayload, *problem);
      }
    }
    return ChainValidation::valid();
  }

  friend bool operator==(const Chain&, const Chain&) = default;

 private:
  std::vector<Block> blocks_;
};

inline Chain genesis(const GenesisConfig& config) {
  config.validate();
  Block b;
  b.index = 0;
  b.timestamp = config.timestamp;
  b.prev_hash = HashDigest::zero();
  b.payload = GenesisRecord{config};
  b.block_hash = compute_block_hash(b.index, b.timestamp, b.prev_hash, b.payload);
  return Chain({std::move(b)});
}

inline const Block& append_block(Chain& chain, BlockPayload payload, Timestamp timestamp) {
  return chain.append(std::move(payload), timestamp);
}

inline ChainValidation validate_chain(const Chain& chain) { return chain.validate(); }

// ---------------------------------------------------------------------------
// JSON Lines persistence: one canonical block per line.

inline std::string chain_to_jsonl(const Chain& chain) {
  std::string out;
  for (const auto& b : chain.blocks()) {
    out += canonical_bytes(block_to_json(b));
    out.push_back('\n');
  }
  return out;
}

inline Chain chain_from_jsonl(std::istream& in) {
  std::vector<Block> blocks;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      blocks.push_back(block_from_json(Json::parse(line)));
    } catch (const Error& e) {
      fail(ErrorKind::ParseError, "line " + std::to_string(lineno) + ": " + e.what());
    } catch (const std::exception& e) {
      fail(ErrorKind::ParseError, "line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return Chain(std::move(blocks));
}

inline void save_chain(const Chain& chain, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << chain_to_jsonl(chain);
  if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

inline Chain load_chain(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  return chain_from_jsonl(in);
}

}  // namespace probo
