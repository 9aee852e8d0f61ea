#pragma once

// Shared fixtures and independent oracles for the test suites. Nothing here
// calls into the code path it is used to check.

#include <sodium.h>

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "probo/probo.hpp"

namespace probo::testing {

inline std::string data_path(const std::string& name) { return std::string(PROBO_DATA_DIR) + "/" + name; }

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  return Json::parse(in);
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline StudyDescriptor box1_descriptor() {
  return read_json_file(data_path("box1.descriptor.json")).get<StudyDescriptor>();
}
inline OutputTable box1_outputs() { return read_json_file(data_path("box1.outputs.json")).get<OutputTable>(); }

class TempDir {
 public:
  TempDir() {
    static std::mt19937_64 rng(std::random_device{}());
    path_ = std::filesystem::temp_directory_path() / ("probo-test-" + std::to_string(rng()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

// Kind of the probo::Error thrown by fn; std::nullopt when nothing is thrown.
template <class Fn>
std::optional<ErrorKind> kind_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  return std::nullopt;
}

// --- oracles ----------------------------------------------------------------

// libsodium's SHA-256, unrelated to the OpenSSL route used by the library.
inline std::string sodium_sha256_hex(const std::string& bytes) {
  if (sodium_init() < 0) throw std::runtime_error("libsodium init failed");
  std::array<unsigned char, crypto_hash_sha256_BYTES> out{};
  crypto_hash_sha256(out.data(), reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size());
  std::array<char, crypto_hash_sha256_BYTES * 2 + 1> hex{};
  sodium_bin2hex(hex.data(), hex.size(), out.data(), out.size());
  return std::string(hex.data());
}

// Quorum rule by enumeration: verdicts is a bitmask over min_reports reports
// (bit set = Match). Accepted iff matches/n >= num/den, computed in long
// double on an explicit bit count.
inline bool brute_force_accepts(unsigned verdicts, int n, std::int64_t num, std::int64_t den) {
  int matches = 0;
  for (int i = 0; i < n; ++i) matches += (verdicts >> i) & 1u;
  // exact: matches * den >= num * n, written as repeated addition
  std::int64_t lhs = 0, rhs = 0;
  for (int i = 0; i < matches; ++i) lhs += den;
  for (int i = 0; i < n; ++i) rhs += num;
  return lhs >= rhs;
}

// Net probos flow per node reconstructed from a simulation event log only.
inline std::map<std::string, Probos> recount_net_flow(const std::vector<sim::SimEvent>& events) {
  std::map<std::string, Probos> flow;
  for (const auto& e : events) {
    if (e.kind == sim::EventKind::Submitted) {
      flow[e.payload.at("proponent").get<std::string>()] -= e.payload.at("deposit").get<Probos>();
    } else if (e.kind == sim::EventKind::Settled) {
      const Json& s = e.payload.at("settlement");
      for (const char* key : {"refunds", "rewards_minted", "forfeits_distributed"}) {
        for (const auto& [id, v] : s.at(key).items()) flow[id] += v.get<Probos>();
      }
    }
  }
  return flow;
}

// Activity counts by walking the chain JSON, not the typed payloads.
inline std::map<std::string, ActivityCounts> recount_activity(const Chain& chain) {
  std::map<std::string, ActivityCounts> counts;
  std::istringstream lines(chain_to_jsonl(chain));
  std::string line;
  while (std::getline(lines, line)) {
    const Json block = Json::parse(line);
    const Json& p = block.at("payload");
    const auto type = p.at("type").get<std::string>();
    if (type == "genesis") {
      for (const auto& n : p.at("config").at("nodes")) counts[n.at("id").get<std::string>()];
      continue;
    }
    if (type != "acceptance" && type != "rejection") continue;
    auto& c = counts[p.at("proponent").get<std::string>()];
    (type == "acceptance" ? c.accepted : c.rejected) += 1;
    for (const auto& r : p.at("reports")) counts[r.at("verifier").get<std::string>()].verified += 1;
  }
  return counts;
}

// --- builders ---------------------------------------------------------------

inline GenesisConfig small_config(int nodes = 5, Probos each = 100, std::int64_t min_reports = 3) {
  GenesisConfig g;
  for (int i = 0; i < nodes; ++i) g.nodes.push_back({NodeId("node-" + std::to_string(i)), each});
  g.economics = {10, 5};
  g.quorum.min_reports = min_reports;
  g.horizon_hours = 72;
  g.ticks_per_hour = 1;
  g.timestamp = 0;
  return g;
}

inline OutputTable simple_table(double mcc = 0.75) {
  OutputTable t;
  t.metrics = {{"MCC", mcc}};
  t.ranked_features = {"g1", "g2", "g3"};
  return t;
}

inline StudyDescriptor simple_descriptor(const std::string& request_id, const std::string& proponent) {
  StudyDescriptor d;
  d.request_id = request_id;
  d.proponent = proponent;
  d.title = "study " + request_id;
  d.topic = "computational-biology";
  d.data_metadata.artifacts = {{"https://example.org/" + request_id, digest(request_id).hex(), "case-1"}};
  d.analysis.software = {{"dap", "1.0", ""}};
  d.tolerances = {{"MCC", 0.70, 0.80, {}, {}}};
  d.etv_hours = 12;
  d.deadline = 72;
  return d;
}

// A settled study record with n reports, valid against the chain rules.
inline StudyOutcome make_outcome(const std::string& request_id, const std::string& proponent,
                                 const std::vector<std::string>& verifiers, bool accept, Timestamp ts = 1) {
  StudyOutcome o;
  o.request_id = request_id;
  o.descriptor = simple_descriptor(request_id, proponent);
  o.proponent_table = simple_table();
  o.commitment = commit_outputs(o.proponent_table);
  o.proponent = proponent;
  for (const auto& v : verifiers) {
    o.reports.push_back(make_report(request_id, v, simple_table(accept ? 0.76 : 0.6), o.proponent_table,
                                    o.descriptor.tolerances, ts));
  }
  o.settlement.kind = accept ? Decision::Accepted : Decision::Rejected;
  o.submitted_at = 0;
  return o;
}

}  // namespace probo::testing
