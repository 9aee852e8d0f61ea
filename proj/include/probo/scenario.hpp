#pragma once

// Scenario description for the network simulator: the agents, the economics,
// the quorum rule and a submission schedule. Parsed from JSON with keys
// agents, economics, quorum, horizon_ticks, schedule, seed (plus optional
// templates and request_ttl_ticks).
//
// horizon_ticks is the length of the run. request_ttl_ticks is the network
// time horizon granted to each request: deadline = submission tick + ttl.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "probo/canonical.hpp"
#include "probo/errors.hpp"
#include "probo/ledger.hpp"
#include "probo/studies.hpp"
#include "probo/tokenomics.hpp"
#include "probo/verification.hpp"

namespace probo::sim {

enum class Role { HonestProponent, FraudulentProponent, HonestVerifier, LazyVerifier, Flooder };

inline const char* to_string(Role r) {
  switch (r) {
    case Role::HonestProponent: return "honest_proponent";
    case Role::FraudulentProponent: return "fraudulent_proponent";
    case Role::HonestVerifier: return "honest_verifier";
    case Role::LazyVerifier: return "lazy_verifier";
    case Role::Flooder: return "flooder";
  }
  return "";
}

inline Role parse_role(const std::string& s) {
  if (s == "honest_proponent" || s == "HonestProponent") return Role::HonestProponent;
  if (s == "fraudulent_proponent" || s == "FraudulentProponent") return Role::FraudulentProponent;
  if (s == "honest_verifier" || s == "HonestVerifier") return Role::HonestVerifier;
  if (s == "lazy_verifier" || s == "LazyVerifier") return Role::LazyVerifier;
  if (s == "flooder" || s == "Flooder") return Role::Flooder;
  fail(ErrorKind::InvalidScenario, "unknown role '" + s + "'");
}

inline bool is_verifier(Role r) { return r == Role::HonestVerifier || r == Role::LazyVerifier; }
inline bool is_proponent(Role r) { return !is_verifier(r); }

struct AgentSpec {
  NodeId node;
  Role role = Role::HonestVerifier;
  std::vector<std::string> topics;
  double noise_sd = 0.0;
  double activity_rate = 1.0;
  // Dishonest proponents declare intervals starting this far above their true values.
  double fraud_margin = 0.1;
  // Commit to a table other than the one later revealed.
  bool forge_commitment = false;
};

// What a proponent actually measured, plus the boundaries an honest proponent
// would declare.
struct StudyTemplate {
  std::string topic;
  OutputTable outputs;
  std::vector<ToleranceSpec> tolerances;
  std::int64_t etv_hours = 1;
  std::string protocol = "simulated data analysis protocol";
};

struct ScheduledSubmission {
  std::int64_t tick = 0;
  std::string proponent;
  std::string template_name = "default";
  std::optional<Probos> deposit;
};

struct Scenario {
  std::vector<AgentSpec> agents;
  EconomicParams economics;
  std::optional<Probos> equal_allocation;
  std::map<std::string, Probos> allocation;  // used when equal_allocation is unset
  QuorumConfig quorum;
  std::int64_t horizon_ticks = 500;
  std::optional<std::int64_t> request_ttl_ticks;
  std::map<std::string, StudyTemplate> templates;
  std::vector<ScheduledSubmission> schedule;
  std::uint64_t seed = 0;

  const AgentSpec* agent(const std::string& id) const {
    for (const auto& a : agents) {
      if (a.node.id == id) return &a;
    }
    return nullptr;
  }

  Probos initial_balance(const std::string& id) const {
    if (equal_allocation) return *equal_allocation;
    auto it = allocation.find(id);
    return it == allocation.end() ? 0 : it->second;
  }

  std::int64_t ttl_ticks() const { return request_ttl_ticks.value_or(horizon_ticks); }

  GenesisConfig genesis_config() const {
    GenesisConfig g;
    for (const auto& a : agents) g.nodes.push_back({a.node, initial_balance(a.node.id)});
    g.economics = economics;
    g.quorum = quorum;
    g.horizon_hours = ttl_ticks();
    g.ticks_per_hour = 1;
    g.timestamp = 0;
    return g;
  }

  void validate() const;
};

inline StudyTemplate default_template() {
  StudyTemplate t;
  t.topic = "computational-biology";
  t.outputs.metrics = {{"MCC", 0.75}, {"TPR", 0.82}, {"TNR", 0.91}};
  t.outputs.ranked_features = {"EGFR", "KRAS", "TP53", "ALK", "MET", "BRAF", "ROS1", "RET", "ERBB2", "NTRK1"};
  t.tolerances = {{"MCC", 0.70, 0.80, 10, 0.7}, {"TPR", 0.77, 0.87, {}, {}}, {"TNR", 0.86, 0.96, {}, {}}};
  t.etv_hours = 24;
  return t;
}

inline void Scenario::validate() const {
  auto bad = [](const std::string& msg) { fail(ErrorKind::InvalidScenario, msg); };
  if (agents.empty()) bad("scenario has no agents");
  std::set<std::string> ids;
  for (const auto& a : agents) {
    if (a.node.id.empty()) bad("agent with empty id");
    if (!ids.insert(a.node.id).second) bad("duplicate agent '" + a.node.id + "'");
    if (is_verifier(a.role) && a.topics.empty()) bad("verifier '" + a.node.id + "' has no topics");
    if (!std::isfinite(a.noise_sd) || a.noise_sd < 0.0) bad("noise_sd of '" + a.node.id + "' must be >= 0");
    if (!(a.activity_rate >= 0.0 && a.activity_rate <= 1.0)) bad("activity_rate of '" + a.node.id + "' outside [0,1]");
    if (!std::isfinite(a.fraud_margin) || a.fraud_margin <= 0.0) bad("fraud_margin of '" + a.node.id + "' must be > 0");
  }
  for (const auto& [id, amount] : allocation) {
    if (!ids.contains(id)) bad("allocation names unknown agent '" + id + "'");
    if (amount < 0) bad("negative allocation for '" + id + "'");
  }
  if (equal_allocation && *equal_allocation < 0) bad("negative equal allocation");
  if (horizon_ticks < 1) bad("horizon_ticks must be >= 1");
  if (request_ttl_ticks && *request_ttl_ticks < 1) bad("request_ttl_ticks must be >= 1");
  try {
    economics.validate();
    quorum.validate();
  } catch (const Error& e) {
    bad(e.what());
  }
  for (const auto& [name, t] : templates) {
    if (t.topic.empty()) bad("template '" + name + "' has no topic");
    if (t.tolerances.empty()) bad("template '" + name + "' has no tolerances");
    for (const auto& tol : t.tolerances) {
      if (!t.outputs.metrics.contains(tol.metric)) bad("template '" + name + "' tolerates unknown metric " + tol.metric);
    }
    if (t.etv_hours < 1) bad("template '" + name + "' etv must be positive");
  }
  for (const auto& s : schedule) {
    if (s.tick < 0 || s.tick >= horizon_ticks) bad("schedule tick " + std::to_string(s.tick) + " outside horizon");
    const AgentSpec* a = agent(s.proponent);
    if (a == nullptr) bad("scheduled proponent '" + s.proponent + "' is not an agent");
    if (!is_proponent(a->role)) bad("scheduled agent '" + s.proponent + "' is not a proponent");
    if (!templates.contains(s.template_name)) bad("unknown template '" + s.template_name + "'");
    if (templates.at(s.template_name).etv_hours > ttl_ticks()) {
      bad("template '" + s.template_name + "' etv exceeds the network time horizon");
    }
    if (s.deposit && *s.deposit < 1) bad("scheduled deposit must be >= 1");
  }
}

// ---------------------------------------------------------------------------
// JSON

inline void from_json(const Json& j, StudyTemplate& t) {
  t.topic = j.at("topic").get<std::string>();
  t.outputs = j.get<OutputTable>();
  t.tolerances = j.at("tolerances").get<std::vector<ToleranceSpec>>();
  t.etv_hours = j.value("etv_hours", std::int64_t{1});
  t.protocol = j.value("protocol", std::string{"simulated data analysis protocol"});
}

inline void to_json(Json& j, const StudyTemplate& t) {
  j = Json(t.outputs);
  j["topic"] = t.topic;
  j["tolerances"] = t.tolerances;
  j["etv_hours"] = t.etv_hours;
  j["protocol"] = t.protocol;
}

inline Scenario parse_scenario(const Json& j) {
  try {
    Scenario s;
    for (const auto& a : j.at("agents")) {
      AgentSpec spec;
      spec.node.id = a.at("id").get<std::string>();
      if (a.contains("affiliation")) spec.node.affiliation = a.at("affiliation").get<std::string>();
      spec.role = parse_role(a.at("role").get<std::string>());
      spec.topics = a.value("topics", std::vector<std::string>{});
      spec.noise_sd = a.value("noise_sd", 0.0);
      spec.activity_rate = a.value("activity_rate", 1.0);
      spec.fraud_margin = a.value("fraud_margin", 0.1);
      spec.forge_commitment = a.value("forge_commitment", false);
      s.agents.push_back(std::move(spec));
    }
    const Json& econ = j.at("economics");
    s.economics = econ.get<EconomicParams>();
    if (econ.contains("genesis_allocation")) {
      const Json& alloc = econ.at("genesis_allocation");
      if (alloc.contains("equal")) {
        s.equal_allocation = alloc.at("equal").get<Probos>();
      } else {
        s.allocation = alloc.get<std::map<std::string, Probos>>();
      }
    } else {
      s.equal_allocation = 100;
    }
    s.quorum = j.value("quorum", Json::object()).get<QuorumConfig>();
    s.horizon_ticks = j.at("horizon_ticks").get<std::int64_t>();
    if (j.contains("request_ttl_ticks")) s.request_ttl_ticks = j.at("request_ttl_ticks").get<std::int64_t>();
    s.templates["default"] = default_template();
    if (j.contains("templates")) {
      for (const auto& [name, t] : j.at("templates").items()) s.templates[name] = t.get<StudyTemplate>();
    }
    for (const auto& e : j.at("schedule")) {
      ScheduledSubmission sub;
      sub.tick = e.at("tick").get<std::int64_t>();
      sub.proponent = e.at("proponent").get<std::string>();
      sub.template_name = e.value("template", std::string{"default"});
      if (e.contains("deposit")) sub.deposit = e.at("deposit").get<Probos>();
      // "repeat": n expands to n submissions on consecutive ticks
      const auto repeat = e.value("repeat", std::int64_t{1});
      const auto every = e.value("every", std::int64_t{1});
      for (std::int64_t r = 0; r < repeat; ++r) {
        ScheduledSubmission copy = sub;
        copy.tick = sub.tick + r * every;
        s.schedule.push_back(std::move(copy));
      }
    }
    s.seed = j.at("seed").get<std::uint64_t>();
    s.validate();
    return s;
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::InvalidScenario) throw;
    fail(ErrorKind::InvalidScenario, e.what());
  } catch (const Json::exception& e) {
    fail(ErrorKind::InvalidScenario, e.what());
  }
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scenario '" + path + "'");
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::exception& e) {
    fail(ErrorKind::InvalidScenario, std::string("scenario is not valid JSON: ") + e.what());
  }
  return parse_scenario(j);
}

}  // namespace probo::sim
