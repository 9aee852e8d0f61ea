#pragma once

// Deterministic discrete-event simulation of the verification network.
//
// Per tick, in this order:
//   1. scheduled submissions fire (escrow opened, request broadcast);
//   2. each verifier agent, in declaration order, draws one uniform number for
//      its activity roll and, if active, takes the eligible pending request
//      with the earliest deadline (ties by request_id) inside its topic set,
//      reproduces it and files a report; a request reaching quorum is settled
//      and written to the chain immediately;
//   3. requests past their deadline are expired and refunded;
//   4. the bank conservation invariant is audited.
//
// All randomness comes from one seeded mt19937_64; uniforms and normals are
// derived from its raw output here so runs are reproducible across standard
// libraries.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "probo/canonical.hpp"
#include "probo/errors.hpp"
#include "probo/ledger.hpp"
#include "probo/reputation.hpp"
#include "probo/scenario.hpp"
#include "probo/studies.hpp"
#include "probo/tokenomics.hpp"
#include "probo/verification.hpp"

namespace probo::sim {

class DeterministicRng {
 public:
  explicit DeterministicRng(std::uint64_t seed) : engine_(seed) {}

  // [0, 1)
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Box-Muller, two uniforms per normal.
  double normal() {
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::mt19937_64 engine_;
};

enum class EventKind { Submitted, Broadcast, ReportFiled, Settled, BlockAppended, ErrorObserved };

inline const char* to_string(EventKind k) {
  switch (k) {
    case EventKind::Submitted: return "submitted";
    case EventKind::Broadcast: return "broadcast";
    case EventKind::ReportFiled: return "report_filed";
    case EventKind::Settled: return "settled";
    case EventKind::BlockAppended: return "block_appended";
    case EventKind::ErrorObserved: return "error_observed";
  }
  return "";
}

struct SimEvent {
  std::int64_t tick = 0;
  std::uint64_t seq = 0;
  EventKind kind = EventKind::Submitted;
  Json payload;

  Json to_json() const {
    return Json{{"tick", tick}, {"seq", seq}, {"kind", sim::to_string(kind)}, {"payload", payload}};
  }
};

inline std::string events_to_jsonl(const std::vector<SimEvent>& events) {
  std::string out;
  for (const auto& e : events) {
    out += canonical_bytes(e.to_json());
    out.push_back('\n');
  }
  return out;
}

struct PendingRequest {
  StudyDescriptor descriptor;
  HashDigest commitment;
  OutputTable revealed;  // what the proponent published for comparison
  OutputTable truth;     // what an honest reproduction converges to
  std::vector<VerifierReport> reports;
  Timestamp submitted_at = 0;
  Probos deposit = 0;
  std::uint64_t arrival = 0;
};

struct Summary {
  std::int64_t submitted = 0;
  std::int64_t failed_submissions = 0;
  std::int64_t accepted = 0;
  std::int64_t rejected = 0;
  std::int64_t expired = 0;
  std::int64_t unresolved = 0;
  std::map<std::string, Probos> net_flow;  // final balance - genesis balance
  Probos total_supply = 0;
  Probos total_minted = 0;
  std::string tail_hash;

  Json to_json() const {
    Json flows = Json::object();
    for (const auto& [id, v] : net_flow) flows[id] = v;
    return Json{{"submitted", submitted}, {"failed_submissions", failed_submissions},
                {"accepted", accepted},   {"rejected", rejected},
                {"expired", expired},     {"unresolved", unresolved},
                {"net_flow", std::move(flows)}, {"total_supply", total_supply},
                {"total_minted", total_minted}, {"tail_hash", tail_hash}};
  }
};

struct SimResult {
  Chain chain;
  BankState final_bank;
  std::vector<SimEvent> events;
  Summary summary;
  // Reputation counts tracked while settling, for cross-checking against the chain.
  std::map<std::string, ActivityCounts> tally;
};

class Network {
 public:
  explicit Network(Scenario scenario)
      : scenario_(std::move(scenario)), rng_(scenario_.seed) {
    scenario_.validate();
    const GenesisConfig config = scenario_.genesis_config();
    chain_ = genesis(config);
    bank_ = config.make_bank();
    for (const auto& a : scenario_.agents) {
      tally_[a.node.id];
      initial_[a.node.id] = bank_.balance(a.node.id);
    }
    run_ticks_ = scenario_.horizon_ticks;
  }

  std::int64_t now() const { return tick_; }
  bool finished() const { return tick_ >= run_ticks_; }
  const Chain& chain() const { return chain_; }
  const BankState& bank() const { return bank_; }
  const std::vector<SimEvent>& events() const { return events_; }
  const std::map<std::string, PendingRequest>& pending() const { return pending_; }
  const Scenario& scenario() const { return scenario_; }

  // Requests visible to an agent: everything pending except its own.
  std::vector<std::string> visible_to(const std::string& agent) const {
    std::vector<std::string> out;
    for (const auto& [id, req] : pending_) {
      if (req.descriptor.proponent != agent) out.push_back(id);
    }
    return out;
  }

  // Puts a funded request into the pending pool.
  void broadcast(PendingRequest request) {
    const std::string id = request.descriptor.request_id;
    if (pending_.contains(id) || broadcast_ids_.contains(id)) {
      fail(ErrorKind::DuplicateRequest, "request '" + id + "' was already broadcast");
    }
    const EscrowContract* escrow = bank_.escrow(id);
    if (escrow == nullptr || escrow->state != EscrowState::Open) {
      fail(ErrorKind::NoEscrow, "request '" + id + "' has no open escrow");
    }
    request.arrival = next_arrival_++;
    request.deposit = escrow->deposit;
    broadcast_ids_.insert(id);
    const auto audience = static_cast<std::int64_t>(scenario_.agents.size()) - 1;
    pending_.emplace(id, std::move(request));
    log(EventKind::Broadcast, Json{{"request_id", id}, {"audience", audience}});
  }

  std::vector<SimEvent> step() {
    if (finished()) fail(ErrorKind::HorizonExceeded, "simulation already reached tick " + std::to_string(run_ticks_));
    const std::size_t first_event = events_.size();
    fire_submissions();
    run_verifiers();
    expire_overdue();
    if (!bank_.conservation_holds()) {
      throw std::logic_error("conservation violated at tick " + std::to_string(tick_));
    }
    ++tick_;
    return {events_.begin() + static_cast<std::ptrdiff_t>(first_event), events_.end()};
  }

  SimResult finish() const {
    SimResult r;
    r.chain = chain_;
    r.final_bank = bank_;
    r.events = events_;
    r.tally = tally_;
    r.summary = summary_;
    r.summary.unresolved = static_cast<std::int64_t>(pending_.size());
    for (const auto& a : scenario_.agents) {
      r.summary.net_flow[a.node.id] = bank_.balance(a.node.id) - initial_.at(a.node.id);
    }
    r.summary.total_supply = bank_.total_supply();
    r.summary.total_minted = bank_.total_minted();
    r.summary.tail_hash = chain_.tip().block_hash.hex();
    return r;
  }

 private:
  void log(EventKind kind, Json payload) {
    events_.push_back(SimEvent{tick_, next_seq_++, kind, std::move(payload)});
  }

  StudyDescriptor make_descriptor(const AgentSpec& agent, const StudyTemplate& t, const std::string& request_id,
                                  const std::vector<ToleranceSpec>& tolerances) const {
    StudyDescriptor d;
    d.request_id = request_id;
    d.proponent = agent.node.id;
    d.title = "Simulated study " + request_id;
    d.topic = t.topic;
    const std::string uri = "sim://" + request_id + "/data";
    d.data_metadata.artifacts = {{uri, digest(uri).hex(), "cohort"}};
    d.data_metadata.notes = {"simulated acquisition device v1"};
    d.preprocessing.software = {{"sim-preprocess", "1.0", ""}};
    d.analysis.software = {{"sim-dap", "1.0", ""}};
    d.analysis.protocol = t.protocol;
    d.analysis.hardware = "simulated workstation";
    d.tolerances = tolerances;
    d.etv_hours = t.etv_hours;
    d.deadline = tick_ + scenario_.ttl_ticks();
    return d;
  }

  void fire_submissions() {
    for (const auto& sub : scenario_.schedule) {
      if (sub.tick != tick_) continue;
      const AgentSpec& agent = *scenario_.agent(sub.proponent);
      const StudyTemplate& t = scenario_.templates.at(sub.template_name);
      const std::int64_t n = ++submission_count_[agent.node.id];
      std::string suffix = std::to_string(n);
      suffix.insert(0, suffix.size() < 4 ? 4 - suffix.size() : 0, '0');
      const std::string request_id = agent.node.id + "-" + suffix;

      std::vector<ToleranceSpec> declared = t.tolerances;
      if (agent.role == Role::FraudulentProponent || agent.role == Role::Flooder) {
        // Claimed intervals sit entirely above what the study really produces.
        for (auto& tol : declared) {
          const double width = tol.high - tol.low;
          tol.low = t.outputs.metrics.at(tol.metric) + agent.fraud_margin;
          tol.high = tol.low + width;
        }
      }
      PendingRequest req;
      req.descriptor = make_descriptor(agent, t, request_id, declared);
      req.truth = t.outputs;
      req.revealed = t.outputs;
      if (agent.forge_commitment) {
        OutputTable forged = t.outputs;
        for (auto& [_, v] : forged.metrics) v += agent.fraud_margin;
        req.commitment = commit_outputs(forged);
      } else {
        req.commitment = commit_outputs(req.revealed);
      }
      req.submitted_at = tick_;

      const Probos deposit = sub.deposit.value_or(scenario_.economics.min_deposit);
      try {
        bank_.open_escrow(agent.node.id, deposit, request_id, scenario_.economics, tick_);
      } catch (const Error& e) {
        ++summary_.failed_submissions;
        log(EventKind::ErrorObserved, Json{{"request_id", request_id},
                                           {"agent", agent.node.id},
                                           {"error", std::string(probo::to_string(e.kind()))},
                                           {"message", e.what()}});
        continue;
      }
      ++summary_.submitted;
      log(EventKind::Submitted, Json{{"request_id", request_id},
                                     {"proponent", agent.node.id},
                                     {"topic", t.topic},
                                     {"deposit", deposit},
                                     {"commitment", req.commitment.hex()},
                                     {"deadline", *req.descriptor.deadline}});
      broadcast(std::move(req));
    }
  }

  const PendingRequest* pick_request(const AgentSpec& agent) const {
    const PendingRequest* best = nullptr;
    for (const auto& [id, req] : pending_) {
      if (*req.descriptor.deadline < tick_) continue;
      if (!eligible(agent.node.id, req.descriptor.proponent, req.reports)) continue;
      if (std::find(agent.topics.begin(), agent.topics.end(), req.descriptor.topic) == agent.topics.end()) continue;
      // pending_ iterates in request_id order, so strict < keeps the lexicographic tie-break.
      if (best == nullptr || *req.descriptor.deadline < *best->descriptor.deadline) best = &req;
    }
    return best;
  }

  OutputTable reproduce(const AgentSpec& agent, const PendingRequest& req) {
    if (agent.role == Role::LazyVerifier) {
      // Rubber stamp: report whatever the proponent claimed, i.e. the centre of
      // every declared interval, without reproducing anything.
      OutputTable out = req.revealed;
      for (const auto& tol : req.descriptor.tolerances) out.metrics[tol.metric] = (tol.low + tol.high) / 2.0;
      return out;
    }
    OutputTable out = req.truth;
    if (agent.noise_sd > 0.0) {
      for (auto& [_, v] : out.metrics) v += agent.noise_sd * rng_.normal();
      const double swap_p = std::min(1.0, agent.noise_sd);
      auto& f = out.ranked_features;
      for (std::size_t i = 0; i + 1 < f.size(); ++i) {
        if (rng_.uniform() < swap_p) std::swap(f[i], f[i + 1]);
      }
    }
    return out;
  }

  void run_verifiers() {
    for (const auto& agent : scenario_.agents) {
      if (!is_verifier(agent.role)) continue;
      const bool active = rng_.uniform() < agent.activity_rate;
      if (!active) continue;
      const PendingRequest* target = pick_request(agent);
      if (target == nullptr) continue;
      const std::string id = target->descriptor.request_id;
      PendingRequest& req = pending_.at(id);

      const OutputTable reproduced = reproduce(agent, req);
      VerifierReport report =
          make_report(id, agent.node.id, reproduced, req.revealed, req.descriptor.tolerances, tick_);
      log(EventKind::ReportFiled, Json{{"request_id", id},
                                       {"verifier", agent.node.id},
                                       {"verdict", report.verdict.match() ? "match" : "mismatch"},
                                       {"output_hash", report.output_hash.hex()}});
      req.reports.push_back(std::move(report));

      Decision decision = aggregate(req.reports, scenario_.quorum, tick_, *req.descriptor.deadline);
      if (decision == Decision::Pending) continue;
      if (!verify_commitment(req.revealed, req.commitment)) {
        log(EventKind::ErrorObserved, Json{{"request_id", id},
                                           {"agent", req.descriptor.proponent},
                                           {"error", "CommitmentMismatch"},
                                           {"message", "revealed table does not match the registered commitment"}});
        decision = Decision::Rejected;
      }
      close(id, decision);
    }
  }

  void expire_overdue() {
    std::vector<std::pair<std::uint64_t, std::string>> overdue;
    for (const auto& [id, req] : pending_) {
      if (aggregate(req.reports, scenario_.quorum, tick_, *req.descriptor.deadline) == Decision::Expired) {
        overdue.emplace_back(req.arrival, id);
      }
    }
    std::sort(overdue.begin(), overdue.end());
    for (const auto& [_, id] : overdue) close(id, Decision::Expired);
  }

  void close(const std::string& id, Decision decision) {
    PendingRequest req = std::move(pending_.at(id));
    pending_.erase(id);

    std::vector<std::string> verifiers;
    for (const auto& r : req.reports) verifiers.push_back(r.verifier);
    const Settlement settlement = bank_.settle(id, decision, verifiers, scenario_.economics, tick_);
    log(EventKind::Settled, Json{{"request_id", id}, {"decision", decision_key(decision)}, {"settlement", settlement}});

    BlockPayload payload;
    if (decision == Decision::Expired) {
      payload = ExpiryRecord{id,     req.descriptor, req.commitment, req.descriptor.proponent,
                             req.reports, settlement,  req.submitted_at};
      ++summary_.expired;
    } else {
      StudyOutcome o{id,          req.descriptor, req.revealed,  req.commitment, req.descriptor.proponent,
                     req.reports, settlement,     req.submitted_at};
      auto& counts = tally_[o.proponent];
      if (decision == Decision::Accepted) {
        payload = AcceptanceRecord{std::move(o)};
        counts.accepted += 1;
        ++summary_.accepted;
      } else {
        payload = RejectionRecord{std::move(o)};
        counts.rejected += 1;
        ++summary_.rejected;
      }
      for (const auto& v : verifiers) tally_[v].verified += 1;
    }
    const Block& block = chain_.append(std::move(payload), tick_);
    log(EventKind::BlockAppended, Json{{"request_id", id},
                                       {"index", block.index},
                                       {"type", payload_type(block.payload)},
                                       {"block_hash", block.block_hash.hex()}});
  }

  Scenario scenario_;
  DeterministicRng rng_;
  Chain chain_;
  BankState bank_;
  std::map<std::string, PendingRequest> pending_;
  std::set<std::string> broadcast_ids_;
  std::vector<SimEvent> events_;
  std::map<std::string, std::int64_t> submission_count_;
  std::map<std::string, ActivityCounts> tally_;
  std::map<std::string, Probos> initial_;
  Summary summary_;
  std::int64_t tick_ = 0;
  std::int64_t run_ticks_ = 0;
  std::uint64_t next_seq_ = 0;
  std::uint64_t next_arrival_ = 0;
};

inline SimResult run_scenario(const Scenario& scenario) {
  Network net(scenario);
  while (!net.finished()) net.step();
  return net.finish();
}

// Writes chain.jsonl, events.jsonl and summary.json into dir.
inline void write_outputs(const SimResult& r, const std::string& dir) {
  auto write = [&](const std::string& name, const std::string& content) {
    const std::string path = dir + "/" + name;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << content;
  };
  write("chain.jsonl", chain_to_jsonl(r.chain));
  write("events.jsonl", events_to_jsonl(r.events));
  write("summary.json", r.summary.to_json().dump(2) + "\n");
}

}  // namespace probo::sim
