#pragma once

// Commit-reveal verification. The proponent's hash pins their exact outputs;
// a verifier's verdict comes from comparing their reproduced table against the
// revealed proponent table under the declared tolerances.

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "probo/canonical.hpp"
#include "probo/errors.hpp"
#include "probo/studies.hpp"
#include "probo/types.hpp"

namespace probo {

// Exact non-negative fraction; thresholds are compared by cross-multiplication.
struct Rational {
  std::int64_t num = 2;
  std::int64_t den = 3;

  static Rational make(std::int64_t num, std::int64_t den) {
    if (den <= 0 || num < 0) fail(ErrorKind::InvalidConfig, "invalid fraction");
    const std::int64_t g = std::gcd(num, den);
    return g == 0 ? Rational{0, 1} : Rational{num / g, den / g};
  }

  // Accepts "p/q" or a plain decimal such as "0.5".
  static Rational parse(const std::string& text) {
    auto to_int = [&](const std::string& s) -> std::int64_t {
      if (s.empty() || s.size() > 15 || !std::all_of(s.begin(), s.end(), ::isdigit)) {
        fail(ErrorKind::InvalidConfig, "invalid fraction '" + text + "'");
      }
      return std::stoll(s);
    };
    if (auto slash = text.find('/'); slash != std::string::npos) {
      return make(to_int(text.substr(0, slash)), to_int(text.substr(slash + 1)));
    }
    const auto dot = text.find('.');
    if (dot == std::string::npos) return make(to_int(text), 1);
    const std::string whole = text.substr(0, dot);
    const std::string frac = text.substr(dot + 1);
    std::int64_t den = 1;
    for (std::size_t i = 0; i < frac.size(); ++i) den *= 10;
    return make((whole.empty() ? 0 : to_int(whole)) * den + to_int(frac), den);
  }

  static Rational from_json(const Json& j) {
    if (j.is_string()) return parse(j.get<std::string>());
    if (j.is_number_integer()) return make(j.get<std::int64_t>(), 1);
    if (j.is_number()) return parse(format_decimal(j.get<double>()));
    fail(ErrorKind::InvalidConfig, "fraction must be a string or number");
  }

  std::string str() const { return std::to_string(num) + "/" + std::to_string(den); }
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }

  // count/total >= this
  bool reached_by(std::int64_t count, std::int64_t total) const { return count * den >= num * total; }

  friend bool operator==(const Rational&, const Rational&) = default;
};

struct QuorumConfig {
  std::int64_t min_reports = 3;
  Rational accept_threshold{2, 3};

  void validate() const {
    if (min_reports < 1) fail(ErrorKind::InvalidConfig, "min_reports must be >= 1");
    if (accept_threshold.num <= 0 || accept_threshold.num > accept_threshold.den) {
      fail(ErrorKind::InvalidConfig, "accept_threshold must lie in (0, 1]");
    }
  }

  friend bool operator==(const QuorumConfig&, const QuorumConfig&) = default;
};

inline void to_json(Json& j, const QuorumConfig& q) {
  j = Json{{"min_reports", q.min_reports}, {"accept_threshold", q.accept_threshold.str()}};
}
inline void from_json(const Json& j, QuorumConfig& q) {
  q.min_reports = j.value("min_reports", std::int64_t{3});
  q.accept_threshold = j.contains("accept_threshold") ? Rational::from_json(j.at("accept_threshold"))
                                                      : Rational{2, 3};
}

enum class VerdictValue { Match, Mismatch };

struct ListCheck {
  std::string metric;
  std::int64_t k = 0;
  std::int64_t overlap = 0;  // |top-k(proponent) ∩ top-k(verifier)|
  double min_overlap = 0.0;
  bool pass = false;

  friend bool operator==(const ListCheck&, const ListCheck&) = default;
};

struct Verdict {
  VerdictValue value = VerdictValue::Mismatch;
  std::map<std::string, bool> metric_checks;
  std::vector<ListCheck> list_checks;

  bool match() const { return value == VerdictValue::Match; }
  friend bool operator==(const Verdict&, const Verdict&) = default;
};

inline const char* to_string(VerdictValue v) { return v == VerdictValue::Match ? "Match" : "Mismatch"; }

inline void to_json(Json& j, const ListCheck& c) {
  j = Json{{"metric", c.metric}, {"k", c.k},       {"overlap", c.overlap},
           {"min_overlap", c.min_overlap}, {"pass", c.pass}};
}
inline void from_json(const Json& j, ListCheck& c) {
  c.metric = j.at("metric").get<std::string>();
  c.k = j.at("k").get<std::int64_t>();
  c.overlap = j.at("overlap").get<std::int64_t>();
  c.min_overlap = j.at("min_overlap").get<double>();
  c.pass = j.at("pass").get<bool>();
}

inline void to_json(Json& j, const Verdict& v) {
  Json metrics = Json::object();
  for (const auto& [name, pass] : v.metric_checks) metrics[name] = pass;
  j = Json{{"value", v.match() ? "match" : "mismatch"}, {"metrics", std::move(metrics)},
           {"lists", v.list_checks}};
}
inline void from_json(const Json& j, Verdict& v) {
  const auto value = j.at("value").get<std::string>();
  if (value != "match" && value != "mismatch") fail(ErrorKind::ParseError, "bad verdict '" + value + "'");
  v.value = value == "match" ? VerdictValue::Match : VerdictValue::Mismatch;
  v.metric_checks.clear();
  for (const auto& [name, pass] : j.at("metrics").items()) v.metric_checks[name] = pass.get<bool>();
  v.list_checks = j.at("lists").get<std::vector<ListCheck>>();
}

struct VerifierReport {
  std::string request_id;
  std::string verifier;
  OutputTable output_table;
  HashDigest output_hash;
  Verdict verdict;
  Timestamp timestamp = 0;

  friend bool operator==(const VerifierReport&, const VerifierReport&) = default;
};

inline void to_json(Json& j, const VerifierReport& r) {
  j = Json{{"request_id", r.request_id}, {"verifier", r.verifier},
           {"output_table", r.output_table}, {"output_hash", r.output_hash.hex()},
           {"verdict", r.verdict},         {"timestamp", r.timestamp}};
}
inline void from_json(const Json& j, VerifierReport& r) {
  r.request_id = j.at("request_id").get<std::string>();
  r.verifier = j.at("verifier").get<std::string>();
  r.output_table = j.at("output_table").get<OutputTable>();
  r.output_hash = HashDigest::from_hex(j.at("output_hash").get<std::string>());
  r.verdict = j.at("verdict").get<Verdict>();
  r.timestamp = j.at("timestamp").get<Timestamp>();
}

enum class Decision { Pending, Accepted, Rejected, Expired };

inline const char* to_string(Decision d) {
  switch (d) {
    case Decision::Pending: return "Pending";
    case Decision::Accepted: return "Accepted";
    case Decision::Rejected: return "Rejected";
    case Decision::Expired: return "Expired";
  }
  return "";
}

// ---------------------------------------------------------------------------

inline bool verify_commitment(const OutputTable& table, const HashDigest& committed) {
  return commit_outputs(table) == committed;
}

namespace detail {

inline std::vector<std::string> top_k(const std::vector<std::string>& ranked, std::int64_t k) {
  const auto n = std::min<std::size_t>(ranked.size(), static_cast<std::size_t>(k));
  return {ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(n)};
}

}  // namespace detail

inline Verdict compare_outputs(const OutputTable& proponent, const OutputTable& verifier,
                               const std::vector<ToleranceSpec>& tolerances) {
  Verdict v;
  bool all_pass = true;
  for (const auto& tol : tolerances) {
    if (!proponent.metrics.contains(tol.metric)) {
      fail(ErrorKind::UnknownMetric, "tolerance names metric '" + tol.metric +
                                         "' absent from the proponent table");
    }
    const auto it = verifier.metrics.find(tol.metric);
    const bool pass = it != verifier.metrics.end() && it->second >= tol.low && it->second <= tol.high;
    // A metric listed twice must pass every spec naming it.
    auto [slot, inserted] = v.metric_checks.emplace(tol.metric, pass);
    if (!inserted) slot->second = slot->second && pass;
    all_pass = all_pass && pass;

    if (tol.list_k) {
      const std::int64_t k = std::max<std::int64_t>(*tol.list_k, 1);
      const auto mine = detail::top_k(proponent.ranked_features, k);
      const auto theirs = detail::top_k(verifier.ranked_features, k);
      const std::set<std::string> theirs_set(theirs.begin(), theirs.end());
      const std::set<std::string> mine_set(mine.begin(), mine.end());
      std::int64_t overlap = 0;
      for (const auto& f : mine_set) overlap += theirs_set.contains(f) ? 1 : 0;
      const double min_overlap = tol.min_overlap.value_or(1.0);
      const bool list_pass = static_cast<double>(overlap) / static_cast<double>(k) >= min_overlap;
      v.list_checks.push_back({tol.metric, k, overlap, min_overlap, list_pass});
      all_pass = all_pass && list_pass;
    }
  }
  v.value = all_pass ? VerdictValue::Match : VerdictValue::Mismatch;
  return v;
}

inline bool eligible(const std::string& verifier, const std::string& proponent,
                     const std::vector<VerifierReport>& existing_reports) {
  if (verifier == proponent) return false;
  return std::none_of(existing_reports.begin(), existing_reports.end(),
                      [&](const VerifierReport& r) { return r.verifier == verifier; });
}

// The decision is taken on the first min_reports reports; anything after that
// is ignored.
inline Decision aggregate(const std::vector<VerifierReport>& reports, const QuorumConfig& quorum,
                          Timestamp now, Timestamp deadline) {
  for (std::size_t i = 1; i < reports.size(); ++i) {
    if (reports[i].request_id != reports[0].request_id) {
      fail(ErrorKind::MixedRequestIds, "reports cover more than one request");
    }
    if (reports[i].timestamp < reports[i - 1].timestamp) {
      fail(ErrorKind::UnorderedReports, "reports are not ordered by timestamp");
    }
  }
  const auto needed = static_cast<std::size_t>(quorum.min_reports);
  if (reports.size() < needed) return now > deadline ? Decision::Expired : Decision::Pending;

  const auto matches = std::count_if(reports.begin(), reports.begin() + static_cast<std::ptrdiff_t>(needed),
                                     [](const VerifierReport& r) { return r.verdict.match(); });
  return quorum.accept_threshold.reached_by(matches, quorum.min_reports) ? Decision::Accepted
                                                                         : Decision::Rejected;
}

// Builds a report the way a verifier would: hash their table, compare it with
// the revealed proponent table.
inline VerifierReport make_report(const std::string& request_id, const std::string& verifier,
                                  const OutputTable& reproduced, const OutputTable& revealed,
                                  const std::vector<ToleranceSpec>& tolerances, Timestamp timestamp) {
  return VerifierReport{request_id, verifier, reproduced, commit_outputs(reproduced),
                        compare_outputs(revealed, reproduced, tolerances), timestamp};
}

}  // namespace probo
